// Strided convolutional encoder plus a top-down fusion path producing the
// multi-resolution feature pyramid and the full-resolution per-pixel
// embedding consumed by the decoder and the heads.

#pragma once

#include <vector>

#include "textseg/autodiff.hpp"

namespace textseg {

struct PixelPathConfig {
    int channel_dim = 64;  // must be even (positional encodings split in half)
};

struct FeaturePyramid {
    // Exactly 3 levels at strides 32, 16, 8 of the input, lowest resolution
    // first, each (H_l, W_l, C).
    std::vector<Value> levels;
    // Stride-4 per-pixel embedding, (H/4, W/4, C).
    Value pixel_embedding = nullptr;
    int channel_dim = 0;
};

void register_pixel_path_params(ParamStore& store, const PixelPathConfig& cfg, Rng& rng);

// Input must be (H, W, 3) with H, W divisible by 32; throws ShapeError
// otherwise. Deterministic given image and parameters.
FeaturePyramid encode(Graph& g, const Tensor& image_hwc, ParamStore& store,
                      const PixelPathConfig& cfg);

}  // namespace textseg
