// Binary foreground masks: labels, predictions and skeletons all use this.

#pragma once

#include <cstdint>
#include <vector>

#include "textseg/tensor.hpp"

namespace textseg {

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;  // row-major, 1 = foreground

    BinaryMask() = default;
    BinaryMask(int h, int w);  // throws ShapeError unless h,w >= 1

    uint8_t at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
    void set(int r, int c, bool v) { data[static_cast<size_t>(r) * width + c] = v ? 1 : 0; }
    // Out-of-grid coordinates read as background.
    bool fg(int r, int c) const {
        return r >= 0 && r < height && c >= 0 && c < width && at(r, c) != 0;
    }

    size_t foreground_count() const;
    bool operator==(const BinaryMask& o) const {
        return height == o.height && width == o.width && data == o.data;
    }

    Tensor to_tensor() const;                       // (H, W) of 0.0 / 1.0
    static BinaryMask from_tensor(const Tensor& t, double threshold = 0.5);  // strict >
};

// 8-connected component labels (0 = background, components numbered from 1).
// Returns the number of components.
int label_components_8(const BinaryMask& m, std::vector<int>& labels_out);

BinaryMask flip_horizontal(const BinaryMask& m);
BinaryMask nearest_resize(const BinaryMask& m, int out_h, int out_w);
BinaryMask crop(const BinaryMask& m, int r0, int c0, int h, int w);  // zero-padded out of range

}  // namespace textseg
