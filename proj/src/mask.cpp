#include "textseg/mask.hpp"

#include <deque>

#include "textseg/error.hpp"

namespace textseg {

BinaryMask::BinaryMask(int h, int w) : height(h), width(w) {
    if (h < 1 || w < 1) throw ShapeError("BinaryMask: dimensions must be >= 1");
    data.assign(static_cast<size_t>(h) * w, 0);
}

size_t BinaryMask::foreground_count() const {
    size_t n = 0;
    for (uint8_t v : data) n += v ? 1 : 0;
    return n;
}

Tensor BinaryMask::to_tensor() const {
    Tensor t({height, width});
    for (int i = 0; i < t.numel(); ++i) t.data[i] = data[i] ? 1.0 : 0.0;
    return t;
}

BinaryMask BinaryMask::from_tensor(const Tensor& t, double threshold) {
    check_shape(t.ndim() == 2, "from_tensor: expected 2-D tensor");
    BinaryMask m(t.dim(0), t.dim(1));
    for (int i = 0; i < t.numel(); ++i) m.data[i] = t.data[i] > threshold ? 1 : 0;
    return m;
}

int label_components_8(const BinaryMask& m, std::vector<int>& labels) {
    labels.assign(m.data.size(), 0);
    int next = 0;
    std::deque<std::pair<int, int>> queue;
    for (int r = 0; r < m.height; ++r) {
        for (int c = 0; c < m.width; ++c) {
            if (!m.at(r, c) || labels[static_cast<size_t>(r) * m.width + c]) continue;
            ++next;
            labels[static_cast<size_t>(r) * m.width + c] = next;
            queue.emplace_back(r, c);
            while (!queue.empty()) {
                auto [cr, cc] = queue.front();
                queue.pop_front();
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        int nr = cr + dr, nc = cc + dc;
                        if (!m.fg(nr, nc)) continue;
                        int& lab = labels[static_cast<size_t>(nr) * m.width + nc];
                        if (!lab) {
                            lab = next;
                            queue.emplace_back(nr, nc);
                        }
                    }
                }
            }
        }
    }
    return next;
}

BinaryMask flip_horizontal(const BinaryMask& m) {
    BinaryMask out(m.height, m.width);
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) out.set(r, c, m.at(r, m.width - 1 - c) != 0);
    return out;
}

BinaryMask nearest_resize(const BinaryMask& m, int out_h, int out_w) {
    BinaryMask out(out_h, out_w);
    for (int r = 0; r < out_h; ++r) {
        int sr = std::min(static_cast<int>((r + 0.5) * m.height / out_h), m.height - 1);
        for (int c = 0; c < out_w; ++c) {
            int sc = std::min(static_cast<int>((c + 0.5) * m.width / out_w), m.width - 1);
            out.set(r, c, m.at(sr, sc) != 0);
        }
    }
    return out;
}

BinaryMask crop(const BinaryMask& m, int r0, int c0, int h, int w) {
    BinaryMask out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out.set(r, c, m.fg(r0 + r, c0 + c));
    return out;
}

}  // namespace textseg
