#include "textseg/metrics.hpp"

#include "textseg/error.hpp"

namespace textseg {

void accumulate(const BinaryMask& pred, const BinaryMask& gt, ConfusionCounts& counts) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("accumulate: prediction and ground truth sizes differ");
    for (size_t i = 0; i < pred.data.size(); ++i) {
        bool p = pred.data[i] != 0, t = gt.data[i] != 0;
        if (p && t)
            ++counts.tp;
        else if (p && !t)
            ++counts.fp;
        else if (!p && t)
            ++counts.fn;
        else
            ++counts.tn;
    }
}

double fg_iou(const ConfusionCounts& c) {
    uint64_t denom = c.tp + c.fp + c.fn;
    if (denom == 0) return 100.0;
    return 100.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double f_score(const ConfusionCounts& c) {
    if (c.tp == 0) {
        // Both masks empty: perfect agreement by convention.
        if (c.fp == 0 && c.fn == 0) return 1.0;
        return 0.0;
    }
    double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace textseg
