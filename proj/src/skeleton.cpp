#include "textseg/skeleton.hpp"

namespace textseg {

namespace {

// Neighborhood order P2..P9: N, NE, E, SE, S, SW, W, NW.
constexpr int kDr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDc[8] = {0, 1, 1, 1, 0, -1, -1, -1};

// One subpass; returns true if any pixel was deleted. `second` selects the
// second template pair (P2*P4*P8, P2*P6*P8) instead of (P2*P4*P6, P4*P6*P8).
bool thin_subpass(BinaryMask& img, bool second) {
    std::vector<std::pair<int, int>> to_delete;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            if (!img.at(r, c)) continue;
            int p[8];
            for (int k = 0; k < 8; ++k) p[k] = img.fg(r + kDr[k], c + kDc[k]) ? 1 : 0;
            int b = 0;
            for (int k = 0; k < 8; ++k) b += p[k];
            if (b < 2 || b > 6) continue;
            int a = 0;
            for (int k = 0; k < 8; ++k)
                if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
            if (a != 1) continue;
            // P2=p[0], P4=p[2], P6=p[4], P8=p[6]
            int m1 = second ? p[0] * p[2] * p[6] : p[0] * p[2] * p[4];
            int m2 = second ? p[0] * p[4] * p[6] : p[2] * p[4] * p[6];
            if (m1 == 0 && m2 == 0) to_delete.emplace_back(r, c);
        }
    }
    for (auto [r, c] : to_delete) img.set(r, c, false);
    return !to_delete.empty();
}

}  // namespace

BinaryMask zhang_suen_thin(const BinaryMask& mask) {
    BinaryMask img = mask;
    bool changed = true;
    while (changed) {
        bool c1 = thin_subpass(img, false);
        bool c2 = thin_subpass(img, true);
        changed = c1 || c2;
    }
    return img;
}

std::vector<BinaryMask> skeleton_targets(const std::vector<BinaryMask>& masks) {
    std::vector<BinaryMask> out;
    out.reserve(masks.size());
    for (const auto& m : masks) out.push_back(zhang_suen_thin(m));
    return out;
}

}  // namespace textseg
