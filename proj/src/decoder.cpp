#include "textseg/decoder.hpp"

#include <cmath>

#include "textseg/error.hpp"

namespace textseg {

void DecoderConfig::validate() const {
    if (momentum_alpha < 0.0 || momentum_alpha >= 1.0)
        throw ValueError("decoder: momentum alpha must lie in [0, 1)");
    if (num_layers < 1 || num_queries < 1)
        throw ValueError("decoder: num_layers and num_queries must be >= 1");
    if (channel_dim < 2 || channel_dim % 2 != 0)
        throw ValueError("decoder: channel_dim must be even and >= 2");
}

void register_decoder_params(ParamStore& s, const DecoderConfig& cfg, Rng& rng) {
    int c = cfg.channel_dim;
    init_normal(s.add("dec.query_embed", {cfg.num_queries, c}), 1.0, rng);
    init_normal(s.add("dec.query_pos", {cfg.num_queries, c}), 1.0, rng);
    auto ln = [&](const std::string& name) {
        init_constant(s.add(name + ".g", {c}), 1.0);
        init_constant(s.add(name + ".b", {c}), 0.0);
    };
    auto proj = [&](const std::string& name) {
        init_xavier_uniform(s.add(name, {c, c}), c, c, rng);
    };
    for (int l = 1; l <= cfg.num_layers; ++l) {
        std::string p = "dec.l" + std::to_string(l);
        for (const char* blk : {".ca", ".sa"}) {
            proj(p + blk + ".wq");
            proj(p + blk + ".wk");
            proj(p + blk + ".wv");
            proj(p + blk + ".wo");
            ln(p + blk + ".ln");
        }
        int hidden = 2 * c;
        init_xavier_uniform(s.add(p + ".ffn.w1", {c, hidden}), c, hidden, rng);
        init_constant(s.add(p + ".ffn.b1", {hidden}), 0.0);
        init_xavier_uniform(s.add(p + ".ffn.w2", {hidden, c}), hidden, c, rng);
        init_constant(s.add(p + ".ffn.b2", {c}), 0.0);
        ln(p + ".ffn.ln");
    }
    ln("dec.out_norm");
}

namespace {

// Replace rows that are entirely at the sentinel with all-zero rows so the
// softmax stays defined (the query then attends to the full feature map).
Tensor sanitize_bias(const Tensor& bias) {
    Tensor out = bias;
    int rows = out.dim(0), cols = out.dim(1);
    for (int r = 0; r < rows; ++r) {
        bool all_blocked = true;
        for (int c = 0; c < cols && all_blocked; ++c)
            if (out.at(r, c) == 0.0) all_blocked = false;
        if (all_blocked)
            for (int c = 0; c < cols; ++c) out.at(r, c) = 0.0;
    }
    return out;
}

}  // namespace

Value attention_core(Graph& g, Value q_in, Value kv_in, const Tensor* bias, Value wq, Value wk,
                     Value wv, Value q_pos, Value k_pos) {
    check_shape(q_in->value.ndim() == 2 && kv_in->value.ndim() == 2,
                "attention: 2-D query/feature matrices expected");
    int c = q_in->value.dim(1);
    check_shape(kv_in->value.dim(1) == c, "attention: channel dims differ");
    Value qx = q_pos ? add(g, q_in, q_pos) : q_in;
    Value kx = k_pos ? add(g, kv_in, k_pos) : kv_in;
    Value qp = matmul(g, qx, wq);
    Value kp = matmul(g, kx, wk);
    Value vp = matmul(g, kv_in, wv);
    Value scores = scale(g, matmul_nt(g, qp, kp), 1.0 / std::sqrt(static_cast<double>(c)));
    check_shape(!bias || (bias->ndim() == 2 && bias->dim(0) == scores->value.dim(0) &&
                          bias->dim(1) == scores->value.dim(1)),
                "attention: bias shape mismatch");
    Tensor clean;
    if (bias) clean = sanitize_bias(*bias);
    Value attn = softmax_rows(g, scores, bias ? &clean : nullptr);
    return matmul(g, attn, vp);
}

Value masked_attention(Graph& g, Value queries, Value features, const Tensor* bias,
                       ParamStore& s, const std::string& prefix, Value q_pos, Value k_pos) {
    if (!queries->value.all_finite() || !features->value.all_finite())
        throw ValueError("masked_attention: NaN in inputs");
    Value xa = layer_norm_rows(g, queries, g.param(s.get(prefix + ".ln.g")),
                               g.param(s.get(prefix + ".ln.b")));
    Value core = attention_core(g, xa, features, bias, g.param(s.get(prefix + ".wq")),
                                g.param(s.get(prefix + ".wk")), g.param(s.get(prefix + ".wv")),
                                q_pos, k_pos);
    Value out = add(g, queries, matmul(g, core, g.param(s.get(prefix + ".wo"))));
    if (!out->value.all_finite()) throw ValueError("masked_attention: non-finite output");
    return out;
}

Tensor bias_from_mask(const Tensor& mask_logits, int target_h, int target_w) {
    check_shape(mask_logits.ndim() == 3, "bias_from_mask: (N_q, H, W) logits expected");
    check_shape(target_h >= 1 && target_w >= 1, "bias_from_mask: bad target resolution");
    Tensor resized = resize_bilinear_stack_plain(mask_logits, target_h, target_w);
    int nq = resized.dim(0), hw = target_h * target_w;
    Tensor bias({nq, hw});
    for (int q = 0; q < nq; ++q) {
        const double* src = resized.ptr() + static_cast<size_t>(q) * hw;
        double* dst = bias.ptr() + static_cast<size_t>(q) * hw;
        bool any_text = false;
        for (int i = 0; i < hw; ++i) {
            // sigmoid(z) > 0.5  <=>  z > 0
            bool text = src[i] > 0.0;
            any_text = any_text || text;
            dst[i] = text ? 0.0 : kBiasNegInf;
        }
        if (!any_text)
            for (int i = 0; i < hw; ++i) dst[i] = 0.0;
    }
    return bias;
}

Value momentum_update(Graph& g, Value mq_prev, Value ma_current, double alpha) {
    if (alpha < 0.0 || alpha >= 1.0) throw ValueError("momentum_update: alpha must lie in [0, 1)");
    check_shape(mq_prev->value.same_shape(ma_current->value), "momentum_update: shape mismatch");
    return add_scaled(g, mq_prev, ma_current, alpha, 1.0 - alpha);
}

Tensor sinusoidal_position_encoding(int h, int w, int channels) {
    check_shape(channels % 2 == 0, "position encoding: channel dim must be even");
    int half = channels / 2;
    Tensor out({h * w, channels});
    const double two_pi = 6.283185307179586;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double ny = (y + 0.5) / h * two_pi;
            double nx = (x + 0.5) / w * two_pi;
            double* row = out.ptr() + static_cast<size_t>(y * w + x) * channels;
            for (int i = 0; i < half; ++i) {
                double t = std::pow(10000.0, 2.0 * (i / 2) / half);
                row[i] = (i % 2 == 0) ? std::sin(ny / t) : std::cos(ny / t);
                row[half + i] = (i % 2 == 0) ? std::sin(nx / t) : std::cos(nx / t);
            }
        }
    }
    return out;
}

std::vector<LayerOutput> decoder_forward(Graph& g, const FeaturePyramid& pyramid,
                                         const DecoderConfig& cfg, ParamStore& s,
                                         bool skeleton_enabled) {
    cfg.validate();
    check_shape(pyramid.levels.size() == 3, "decoder: pyramid must have 3 levels");
    check_shape(pyramid.channel_dim == cfg.channel_dim, "decoder: channel dims differ");

    Value qpos = g.param(s.get("dec.query_pos"));
    Value out_g = g.param(s.get("dec.out_norm.g"));
    Value out_b = g.param(s.get("dec.out_norm.b"));
    auto heads_of = [&](Value x) {
        return predict_heads(g, layer_norm_rows(g, x, out_g, out_b), pyramid.pixel_embedding, s,
                             skeleton_enabled);
    };

    std::vector<LayerOutput> outputs;
    Value x = g.param(s.get("dec.query_embed"));
    PredictionSet preds = heads_of(x);
    outputs.push_back({QueryState{0, x->value, x->value, Tensor(), Tensor()}, preds});

    Value mq_prev = x;  // momentum state starts as the learned initial queries
    for (int l = 1; l <= cfg.num_layers; ++l) {
        std::string p = "dec.l" + std::to_string(l);
        Value level = pyramid.levels[static_cast<size_t>((l - 1) % 3)];
        int lh = level->value.dim(0), lw = level->value.dim(1);
        Value feat = reshape(g, level, {lh * lw, cfg.channel_dim});
        Value kpos = g.constant(sinusoidal_position_encoding(lh, lw, cfg.channel_dim));

        Tensor bias = bias_from_mask(outputs.back().preds.mask_logits->value, lh, lw);
        Value ma = masked_attention(g, x, feat, &bias, s, p + ".ca", qpos, kpos);
        Value mq = cfg.lmq_enabled ? momentum_update(g, mq_prev, ma, cfg.momentum_alpha) : ma;

        Value ya = layer_norm_rows(g, mq, g.param(s.get(p + ".sa.ln.g")),
                                   g.param(s.get(p + ".sa.ln.b")));
        Value sa = attention_core(g, ya, ya, nullptr, g.param(s.get(p + ".sa.wq")),
                                  g.param(s.get(p + ".sa.wk")), g.param(s.get(p + ".sa.wv")),
                                  qpos, qpos);
        Value y = add(g, mq, matmul(g, sa, g.param(s.get(p + ".sa.wo"))));

        Value za = layer_norm_rows(g, y, g.param(s.get(p + ".ffn.ln.g")),
                                   g.param(s.get(p + ".ffn.ln.b")));
        Value hdn = relu(g, linear(g, za, g.param(s.get(p + ".ffn.w1")),
                                   g.param(s.get(p + ".ffn.b1"))));
        Value ffn = linear(g, hdn, g.param(s.get(p + ".ffn.w2")), g.param(s.get(p + ".ffn.b2")));
        x = add(g, y, ffn);

        preds = heads_of(x);
        outputs.push_back({QueryState{l, x->value, mq->value, bias, ma->value}, preds});
        mq_prev = mq;
    }
    return outputs;
}

}  // namespace textseg
