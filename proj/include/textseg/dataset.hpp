// Archive loading: aligned (image, mask, skeleton, metadata) records.

#pragma once

#include <string>
#include <vector>

#include "textseg/mask.hpp"
#include "textseg/tensor.hpp"

namespace textseg {

struct SegSample {
    Tensor image;         // (H, W, 3) in [0,1]
    BinaryMask mask;
    BinaryMask skeleton;  // zhang_suen_thin(mask)
    std::string meta;     // source record (one meta.jsonl line), may be empty
};

// Reads <dir>/image/*.png with matching <dir>/mask/*.png (and skeleton/*.png
// when present, recomputed otherwise). Samples are ordered by filename.
std::vector<SegSample> load_archive(const std::string& dir);

// Deterministic 90/10 split by sample index hash; independent of any seed so
// every run sees the same held-out set.
bool is_validation_index(size_t index);

}  // namespace textseg
