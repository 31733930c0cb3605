#include "textseg/heads.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "textseg/error.hpp"

namespace textseg {

PredictionSetData snapshot(const PredictionSet& s) {
    PredictionSetData d;
    d.class_logits = s.class_logits->value;
    d.mask_logits = s.mask_logits->value;
    if (s.skeleton_logits) d.skeleton_logits = s.skeleton_logits->value;
    return d;
}

void register_head_params(ParamStore& store, int c, Rng& rng) {
    auto lin = [&](const std::string& name, int in, int out) {
        init_xavier_uniform(store.add(name + ".w", {in, out}), in, out, rng);
        init_constant(store.add(name + ".b", {out}), 0.0);
    };
    lin("heads.cls", c, 2);
    for (const char* head : {"heads.maskmlp", "heads.skelmlp"}) {
        lin(std::string(head) + ".l1", c, c);
        lin(std::string(head) + ".l2", c, c);
        lin(std::string(head) + ".l3", c, c);
    }
}

namespace {

Value mlp3(Graph& g, Value x, ParamStore& store, const std::string& prefix) {
    Value h = relu(g, linear(g, x, g.param(store.get(prefix + ".l1.w")),
                             g.param(store.get(prefix + ".l1.b"))));
    h = relu(g, linear(g, h, g.param(store.get(prefix + ".l2.w")),
                       g.param(store.get(prefix + ".l2.b"))));
    return linear(g, h, g.param(store.get(prefix + ".l3.w")), g.param(store.get(prefix + ".l3.b")));
}

}  // namespace

PredictionSet predict_heads(Graph& g, Value query_embed, Value pixel_embedding, ParamStore& store,
                            bool skeleton_enabled) {
    check_shape(query_embed->value.ndim() == 2, "predict_heads: queries must be (N_q, C)");
    check_shape(pixel_embedding->value.ndim() == 3, "predict_heads: pixel embedding must be HWC");
    int c = query_embed->value.dim(1);
    check_shape(pixel_embedding->value.dim(2) == c, "predict_heads: channel dims differ");
    int nq = query_embed->value.dim(0);
    int h = pixel_embedding->value.dim(0), w = pixel_embedding->value.dim(1);

    PredictionSet out;
    out.class_logits = linear(g, query_embed, g.param(store.get("heads.cls.w")),
                              g.param(store.get("heads.cls.b")));
    Value pix_flat = reshape(g, pixel_embedding, {h * w, c});
    Value mask_embed = mlp3(g, query_embed, store, "heads.maskmlp");
    out.mask_logits = reshape(g, matmul_nt(g, mask_embed, pix_flat), {nq, h, w});
    if (skeleton_enabled) {
        Value skel_embed = mlp3(g, query_embed, store, "heads.skelmlp");
        out.skeleton_logits = reshape(g, matmul_nt(g, skel_embed, pix_flat), {nq, h, w});
    }
    return out;
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

namespace {
Tensor mask_to_target(const BinaryMask& m) { return m.to_tensor(); }
constexpr double kDiceEps = 1.0;
}  // namespace

Value dice_loss(Graph& g, Value pred_logits, const BinaryMask& target) {
    check_shape(pred_logits->value.ndim() == 2 && pred_logits->value.dim(0) == target.height &&
                    pred_logits->value.dim(1) == target.width,
                "dice_loss: shape mismatch");
    return dice_from_logits(g, pred_logits, mask_to_target(target), kDiceEps);
}

Value bce_loss(Graph& g, Value pred_logits, const BinaryMask& target) {
    check_shape(pred_logits->value.ndim() == 2 && pred_logits->value.dim(0) == target.height &&
                    pred_logits->value.dim(1) == target.width,
                "bce_loss: shape mismatch");
    return bce_with_logits_mean(g, pred_logits, mask_to_target(target));
}

double dice_loss_plain(const Tensor& z, const BinaryMask& target) {
    check_shape(z.ndim() == 2 && z.dim(0) == target.height && z.dim(1) == target.width,
                "dice_loss: shape mismatch");
    double s_pt = 0.0, s_p = 0.0, s_t = 0.0;
    for (int i = 0; i < z.numel(); ++i) {
        double zi = z.data[i];
        double p = zi >= 0.0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
        double t = target.data[i] ? 1.0 : 0.0;
        s_pt += p * t;
        s_p += p;
        s_t += t;
    }
    return 1.0 - (2.0 * s_pt + kDiceEps) / (s_p + s_t + kDiceEps);
}

double bce_loss_plain(const Tensor& z, const BinaryMask& target) {
    check_shape(z.ndim() == 2 && z.dim(0) == target.height && z.dim(1) == target.width,
                "bce_loss: shape mismatch");
    double acc = 0.0;
    for (int i = 0; i < z.numel(); ++i) {
        double zi = z.data[i];
        double t = target.data[i] ? 1.0 : 0.0;
        acc += std::max(zi, 0.0) - zi * t + std::log1p(std::exp(-std::fabs(zi)));
    }
    return acc / z.numel();
}

// ---------------------------------------------------------------------------
// matching
// ---------------------------------------------------------------------------

namespace {

// Shortest-augmenting-path Hungarian on an n x m cost matrix, n <= m.
// Returns per-row column choice.
std::vector<int> hungarian(const std::vector<std::vector<double>>& a) {
    int n = static_cast<int>(a.size());
    int m = n ? static_cast<int>(a[0].size()) : 0;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

double assignment_cost(const std::vector<std::vector<double>>& a, const std::vector<int>& cols) {
    double s = 0.0;
    for (size_t r = 0; r < cols.size(); ++r) s += a[r][static_cast<size_t>(cols[r])];
    return s;
}

// Optimal cost of assigning rows [row0, n) to unused columns.
double tail_cost(const std::vector<std::vector<double>>& a, int row0,
                 const std::vector<char>& col_used) {
    int n = static_cast<int>(a.size());
    if (row0 >= n) return 0.0;
    std::vector<int> cols;
    int m = static_cast<int>(a[0].size());
    for (int j = 0; j < m; ++j)
        if (!col_used[j]) cols.push_back(j);
    std::vector<std::vector<double>> sub(n - row0, std::vector<double>(cols.size()));
    for (int r = row0; r < n; ++r)
        for (size_t k = 0; k < cols.size(); ++k) sub[r - row0][k] = a[r][cols[k]];
    auto sol = hungarian(sub);
    double s = 0.0;
    for (int r = 0; r < n - row0; ++r) s += sub[r][static_cast<size_t>(sol[r])];
    return s;
}

}  // namespace

Assignment solve_assignment(const std::vector<std::vector<double>>& cost) {
    int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    int m = static_cast<int>(cost[0].size());
    if (n > m) throw ValueError("solve_assignment: more rows than columns");

    auto base = hungarian(cost);
    double best = assignment_cost(cost, base);
    double tol = 1e-9 * (1.0 + std::fabs(best));

    // Lexicographic refinement: for each row in order take the lowest column
    // that still admits an optimal completion.
    std::vector<char> used(m, 0);
    Assignment out;
    double fixed = 0.0;
    for (int r = 0; r < n; ++r) {
        for (int j = 0; j < m; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            double rest = tail_cost(cost, r + 1, used);
            if (fixed + cost[r][j] + rest <= best + tol) {
                fixed += cost[r][j];
                out.emplace_back(j, r);  // (query=column, gt=row)
                break;
            }
            used[j] = 0;
        }
    }
    return out;
}

Assignment match(const PredictionSetData& pred, const std::vector<BinaryMask>& gt_masks) {
    if (gt_masks.empty()) return {};
    check_shape(pred.mask_logits.ndim() == 3, "match: mask logits must be (N_q, H, W)");
    int nq = pred.mask_logits.dim(0);
    if (static_cast<int>(gt_masks.size()) > nq)
        throw ValueError("match: more ground-truth masks than queries");
    int h = pred.mask_logits.dim(1), w = pred.mask_logits.dim(2);
    for (const auto& gt : gt_masks)
        check_shape(gt.height == h && gt.width == w, "match: gt resolution mismatch");

    // p(text) per query.
    std::vector<double> p_text(nq);
    for (int q = 0; q < nq; ++q) {
        double z0 = pred.class_logits.at(q, 0), z1 = pred.class_logits.at(q, 1);
        double mx = std::max(z0, z1);
        double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
        p_text[q] = e0 / (e0 + e1);
    }

    int g = static_cast<int>(gt_masks.size());
    std::vector<std::vector<double>> cost(g, std::vector<double>(nq));
    for (int gi = 0; gi < g; ++gi) {
        for (int q = 0; q < nq; ++q) {
            Tensor logits({h, w});
            std::memcpy(logits.ptr(), pred.mask_logits.ptr() + static_cast<size_t>(q) * h * w,
                        sizeof(double) * static_cast<size_t>(h) * w);
            cost[gi][q] = 2.0 * (-p_text[q]) + 5.0 * bce_loss_plain(logits, gt_masks[gi]) +
                          5.0 * dice_loss_plain(logits, gt_masks[gi]);
        }
    }
    Assignment a = solve_assignment(cost);
    std::sort(a.begin(), a.end(),
              [](const auto& x, const auto& y) { return x.second < y.second; });
    return a;
}

// ---------------------------------------------------------------------------
// total loss
// ---------------------------------------------------------------------------

TotalLoss total_loss(Graph& g, const std::vector<PredictionSet>& sets,
                     const std::vector<BinaryMask>& gt_masks,
                     const std::vector<BinaryMask>& gt_skeletons, const LossWeights& w) {
    TotalLoss result;
    std::vector<Value> pieces;
    for (size_t layer = 0; layer < sets.size(); ++layer) {
        const PredictionSet& set = sets[layer];
        bool with_skeleton = set.skeleton_logits != nullptr;
        if (with_skeleton && gt_skeletons.size() != gt_masks.size())
            throw ShapeError("total_loss: skeleton/mask list length mismatch");

        Assignment assigned = match(snapshot(set), gt_masks);

        double mask_ce_v = 0.0, mask_dice_v = 0.0, skel_ce_v = 0.0, skel_dice_v = 0.0;
        int nq = set.class_logits->value.dim(0);
        std::vector<int> cls_target(nq, 1);  // no-object unless matched
        std::vector<double> cls_weight(nq, w.lambda_cls_unmatched);

        for (auto [q, gi] : assigned) {
            cls_target[q] = 0;
            cls_weight[q] = w.lambda_cls_matched;
            Value mlogits = slice_first(g, set.mask_logits, q);
            Value mce = scale(g, bce_loss(g, mlogits, gt_masks[gi]), w.lambda_ce);
            Value mdi = scale(g, dice_loss(g, mlogits, gt_masks[gi]), w.lambda_dice);
            mask_ce_v += mce->value.data[0];
            mask_dice_v += mdi->value.data[0];
            pieces.push_back(mce);
            pieces.push_back(mdi);
            if (with_skeleton) {
                Value slogits = slice_first(g, set.skeleton_logits, q);
                Value sce = scale(g, bce_loss(g, slogits, gt_skeletons[gi]), w.lambda_ce);
                Value sdi = scale(g, dice_loss(g, slogits, gt_skeletons[gi]), w.lambda_dice);
                skel_ce_v += sce->value.data[0];
                skel_dice_v += sdi->value.data[0];
                pieces.push_back(sce);
                pieces.push_back(sdi);
            }
        }
        Value cls = weighted_softmax_ce_sum(g, set.class_logits, cls_target, cls_weight);
        pieces.push_back(cls);

        int li = static_cast<int>(layer);
        result.breakdown.push_back({li, "mask_ce", mask_ce_v});
        result.breakdown.push_back({li, "mask_dice", mask_dice_v});
        if (with_skeleton) {
            result.breakdown.push_back({li, "skeleton_ce", skel_ce_v});
            result.breakdown.push_back({li, "skeleton_dice", skel_dice_v});
        }
        result.breakdown.push_back({li, "cls", cls->value.data[0]});
    }
    result.total = add_all(g, pieces);
    return result;
}

// ---------------------------------------------------------------------------
// semantic post-processing
// ---------------------------------------------------------------------------

SemanticResult semantic_output(const PredictionSetData& pred) {
    check_shape(pred.mask_logits.ndim() == 3, "semantic_output: mask logits must be (N_q, H, W)");
    int nq = pred.mask_logits.dim(0), h = pred.mask_logits.dim(1), w = pred.mask_logits.dim(2);
    SemanticResult out;
    out.prob = Tensor({h, w});
    for (int q = 0; q < nq; ++q) {
        double z0 = pred.class_logits.at(q, 0), z1 = pred.class_logits.at(q, 1);
        double mx = std::max(z0, z1);
        double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
        double pt = e0 / (e0 + e1);
        const double* logits = pred.mask_logits.ptr() + static_cast<size_t>(q) * h * w;
        for (int i = 0; i < h * w; ++i) {
            double z = logits[i];
            double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            out.prob.data[i] += pt * p;
        }
    }
    for (auto& v : out.prob.data) v = std::min(v, 1.0);
    out.mask = BinaryMask::from_tensor(out.prob, 0.5);
    return out;
}

}  // namespace textseg
