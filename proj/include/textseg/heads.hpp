// Mask / skeleton / classification heads, bipartite matching, the loss stack
// and inference-time semantic post-processing.
//
// Class logits have two columns: 0 = text, 1 = no-object.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "textseg/autodiff.hpp"
#include "textseg/mask.hpp"

namespace textseg {

// Graph-attached predictions for one decoder layer.
struct PredictionSet {
    Value class_logits = nullptr;     // (N_q, 2)
    Value mask_logits = nullptr;      // (N_q, h, w)
    Value skeleton_logits = nullptr;  // (N_q, h, w); null when the head is disabled
};

// Plain snapshot for inference, matching and tests.
struct PredictionSetData {
    Tensor class_logits;
    Tensor mask_logits;
    Tensor skeleton_logits;  // may be empty
};

PredictionSetData snapshot(const PredictionSet& s);

struct LossWeights {
    double lambda_ce = 5.0;
    double lambda_dice = 5.0;
    double lambda_cls_matched = 2.0;
    double lambda_cls_unmatched = 0.1;
};

void register_head_params(ParamStore& store, int channel_dim, Rng& rng);

// Decodes per-pixel embeddings and query embeddings into logits. Mask logits
// are dot products of a per-query embedding (3-layer MLP of the query) with
// every pixel embedding; the skeleton head is identically structured with
// independent parameters.
PredictionSet predict_heads(Graph& g, Value query_embed, Value pixel_embedding,
                            ParamStore& store, bool skeleton_enabled);

// ---- losses ----------------------------------------------------------------
// 1 - (2*sum(p*t)+1) / (sum(p)+sum(t)+1), p = sigmoid(logits). In [0, 1].
Value dice_loss(Graph& g, Value pred_logits, const BinaryMask& target);
// Mean per-pixel binary cross-entropy on sigmoid(logits).
Value bce_loss(Graph& g, Value pred_logits, const BinaryMask& target);

double dice_loss_plain(const Tensor& pred_logits, const BinaryMask& target);
double bce_loss_plain(const Tensor& pred_logits, const BinaryMask& target);

// ---- matching ---------------------------------------------------------------
// One (query, gt) pair per ground-truth mask, ordered by gt index.
using Assignment = std::vector<std::pair<int, int>>;

// Optimal one-to-one assignment minimizing
//   2*(-p_text) + 5*bce + 5*dice
// per pair; ties broken deterministically (for each gt in index order, the
// lowest query index compatible with an optimal completion).
// Requires gt_masks.size() <= N_q and mask logits at gt resolution.
Assignment match(const PredictionSetData& predictions, const std::vector<BinaryMask>& gt_masks);

// Minimum-cost injective assignment of rows (gt) to columns (queries) with the
// same tie-breaking; exposed for the matching tests.
Assignment solve_assignment(const std::vector<std::vector<double>>& cost);

// ---- total loss -------------------------------------------------------------
struct LossTerm {
    int layer;
    std::string term;  // mask_ce | mask_dice | skeleton_ce | skeleton_dice | cls
    double value;
};

struct TotalLoss {
    Value total = nullptr;
    std::vector<LossTerm> breakdown;
};

// Deep supervision: every prediction set is matched and scored independently;
// the result is the sum over sets. Skeleton terms mirror the mask terms with
// each query inheriting the skeleton of its mask-matched ground truth.
TotalLoss total_loss(Graph& g, const std::vector<PredictionSet>& prediction_sets,
                     const std::vector<BinaryMask>& gt_masks,
                     const std::vector<BinaryMask>& gt_skeletons, const LossWeights& weights);

// ---- inference --------------------------------------------------------------
struct SemanticResult {
    Tensor prob;      // (H, W) in [0, 1]
    BinaryMask mask;  // prob > 0.5, strict
};

// sum_q softmax(class_q)[text] * sigmoid(mask_q), clamped to [0,1]. Skeleton
// logits are ignored at inference.
SemanticResult semantic_output(const PredictionSetData& final_predictions);

}  // namespace textseg
