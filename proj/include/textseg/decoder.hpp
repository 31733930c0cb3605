// Query decoder: masked cross-attention, layer-wise momentum blending of the
// attended queries, self-attention and a feed-forward block per layer, with
// prediction heads applied to every layer's output for deep supervision.

#pragma once

#include <string>
#include <vector>

#include "textseg/autodiff.hpp"
#include "textseg/heads.hpp"
#include "textseg/pixel_path.hpp"

namespace textseg {

// Finite stand-in for -inf in attention biases; avoids NaN from inf - inf in
// the softmax normalization while being decisively below any finite score.
constexpr double kBiasNegInf = -1e9;

struct DecoderConfig {
    int num_layers = 9;
    int num_queries = 20;
    double momentum_alpha = 0.8;  // in [0, 1)
    bool lmq_enabled = true;
    int channel_dim = 64;

    void validate() const;  // throws ValueError on bad alpha / counts
};

// Plain per-layer snapshot. layer_index 0 carries the learned initial
// queries; momentum_query holds the state after this layer's update (for
// layer 0 that is the initial queries themselves). attention_bias and
// masked_attention are empty at layer 0.
struct QueryState {
    int layer_index = 0;
    Tensor queries;
    Tensor momentum_query;
    Tensor attention_bias;     // (N_q, H_l * W_l), entries 0 or kBiasNegInf
    Tensor masked_attention;   // post-residual masked-attention output
};

struct LayerOutput {
    QueryState state;
    PredictionSet preds;
};

void register_decoder_params(ParamStore& store, const DecoderConfig& cfg, Rng& rng);

// softmax(bias + (q_in + q_pos) Wq ((kv_in + k_pos) Wk)^T / sqrt(C)) (kv_in Wv)
// q_pos / k_pos / bias may be null. Rows whose bias is entirely at the
// sentinel are reset to all-zero bias before the softmax.
Value attention_core(Graph& g, Value q_in, Value kv_in, const Tensor* bias, Value wq, Value wk,
                     Value wv, Value q_pos, Value k_pos);

// Full masked cross-attention sub-block: pre-normalization, attention core,
// output projection and residual connection. `prefix` names the parameter
// group (wq, wk, wv, wo, ln.g, ln.b). Throws on shape mismatch or NaN input.
Value masked_attention(Graph& g, Value queries, Value features, const Tensor* bias,
                       ParamStore& store, const std::string& prefix, Value q_pos, Value k_pos);

// Resizes per-query mask logits to the target resolution and thresholds at
// probability 0.5: text region -> 0, elsewhere -> sentinel. A query whose
// thresholded region is empty gets an all-zero row (attends everywhere).
Tensor bias_from_mask(const Tensor& mask_logits_nhw, int target_h, int target_w);

// alpha * mq_prev + (1 - alpha) * ma_current; alpha must be in [0, 1).
Value momentum_update(Graph& g, Value mq_prev, Value ma_current, double alpha);

// Fixed 2-D sinusoidal encoding for an h x w grid, flattened to (h*w, C).
Tensor sinusoidal_position_encoding(int h, int w, int channels);

// Runs the initial-query prediction plus num_layers decoder layers. Pyramid
// levels feed layers round-robin, lowest resolution first. Returns
// num_layers + 1 outputs (index 0 = initial queries).
std::vector<LayerOutput> decoder_forward(Graph& g, const FeaturePyramid& pyramid,
                                         const DecoderConfig& cfg, ParamStore& store,
                                         bool skeleton_enabled);

}  // namespace textseg
