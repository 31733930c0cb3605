// Foreground IoU and F-score over prediction/ground-truth mask pairs.
//
// Aggregation is global-count: confusion counts accumulate over every pixel
// of a split and the metric is computed once at the end. Accumulation is
// associative and commutative, so partial counts from parallel workers merge
// by addition.

#pragma once

#include <cstdint>

#include "textseg/mask.hpp"

namespace textseg {

struct ConfusionCounts {
    uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    uint64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

// Per-pixel agreement classification; throws ShapeError on size mismatch.
void accumulate(const BinaryMask& pred, const BinaryMask& gt, ConfusionCounts& counts);

// 100 * tp / (tp + fp + fn); defined as 100 when the denominator is 0
// (both masks empty everywhere).
double fg_iou(const ConfusionCounts& counts);

// 2PR/(P+R). Defined as 1 when both masks are empty (tp=fp=fn=0) and 0 when
// tp = 0 with a zero precision or recall denominator.
double f_score(const ConfusionCounts& counts);

}  // namespace textseg
