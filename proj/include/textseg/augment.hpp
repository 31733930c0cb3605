// Training-time augmentation: scale jitter, color jitter, random crop,
// horizontal flip. The skeleton is recomputed from the augmented mask
// (thinning does not commute with resampling).

#pragma once

#include <cstdint>

#include "textseg/dataset.hpp"
#include "textseg/rng.hpp"

namespace textseg {

struct AugmentParams {
    double scale = 1.0;       // [0.5, 2.0]
    double brightness = 1.0;  // [0.75, 1.25]
    double contrast = 1.0;
    double saturation = 1.0;
    bool hflip = false;
    double crop_rx = 0.5;  // relative crop origin in [0, 1]
    double crop_ry = 0.5;
};

AugmentParams sample_augment_params(Rng& rng);

// Deterministic application: scale -> color -> pad (when the scaled image is
// smaller than the crop) -> crop -> flip -> skeleton recompute. With identity
// parameters and an exactly crop-sized input, the sample is unchanged.
SegSample apply_augment(const SegSample& sample, const AugmentParams& p, int crop);

SegSample augment(const SegSample& sample, uint64_t seed, int crop);

}  // namespace textseg
