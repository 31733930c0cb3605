// PNG I/O for images and masks. Masks are single-channel 8-bit with
// 0 = background, 255 = foreground; images are 8-bit RGB mapped to [0,1].

#pragma once

#include <string>

#include "textseg/mask.hpp"
#include "textseg/tensor.hpp"

namespace textseg {

Tensor load_image_rgb(const std::string& path);                // (H, W, 3) in [0,1]
void save_image_rgb(const std::string& path, const Tensor& hwc);

BinaryMask load_mask_png(const std::string& path);             // >127 -> foreground
void save_mask_png(const std::string& path, const BinaryMask& mask);

// Grayscale probability map in [0,1] written as 8-bit.
void save_gray_png(const std::string& path, const Tensor& hw);

// Blends the mask as a tint over the image and draws the skeleton on top.
Tensor make_overlay(const Tensor& image_hwc, const BinaryMask& mask, const BinaryMask* skeleton);

}  // namespace textseg
