// Morphological thinning of binary masks to one-pixel-wide skeletons.

#pragma once

#include <vector>

#include "textseg/mask.hpp"

namespace textseg {

// Classic two-subpass thinning iterated to a fixed point. Deletions within a
// subpass are simultaneous (all decisions read the image state at subpass
// start); pixels outside the grid count as background. Deterministic, and the
// result is a subset of the input foreground.
BinaryMask zhang_suen_thin(const BinaryMask& mask);

// Element-wise thinning of a batch, order preserved.
std::vector<BinaryMask> skeleton_targets(const std::vector<BinaryMask>& masks);

}  // namespace textseg
