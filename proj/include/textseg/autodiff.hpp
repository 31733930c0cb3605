// Reverse-mode autodiff over Tensor.
//
// Define-by-run: every op appends a node to a Graph arena, so creation order
// is a topological order and backward() is a reverse replay. Graphs are cheap
// and rebuilt per forward pass; parameters live outside in a ParamStore and
// receive gradients via sync_param_grads().

#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "textseg/params.hpp"
#include "textseg/tensor.hpp"

namespace textseg {

struct Node;
using Value = Node*;

struct Node {
    Tensor value;
    Tensor grad;               // allocated only when needs_grad
    bool needs_grad = false;
    bool grad_seen = false;    // true once anything accumulated into grad
    std::function<void()> backward;  // empty for leaves/constants
};

class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Value constant(Tensor v);
    Value input(Tensor v);       // differentiable leaf (for tests)
    Value param(Param& p);       // differentiable leaf bound to a parameter

    // Seeds d(loss)/d(loss) = 1 and replays registered backward functions in
    // reverse creation order. loss must be scalar.
    void backward(Value loss);

    // Adds each param leaf's gradient into its Param::grad.
    void sync_param_grads();

    bool grad_enabled() const { return grad_enabled_; }
    size_t num_nodes() const { return nodes_.size(); }

    // Internal factory used by the op implementations.
    Value make(Tensor value, std::vector<Value> inputs);
    void set_backward(Value n, std::function<void()> fn) { n->backward = std::move(fn); }

private:
    std::deque<Node> nodes_;
    std::vector<std::pair<Param*, Node*>> param_leaves_;
    bool grad_enabled_;
};

// Marks gradient flow into a node (allocating storage on first touch is not
// needed; storage exists whenever needs_grad). Ops call this before writing.
inline Tensor& grad_buf(Value n) {
    n->grad_seen = true;
    return n->grad;
}

// ---- elementwise / linear algebra -----------------------------------------
Value add(Graph& g, Value a, Value b);                      // same shape
Value sub(Graph& g, Value a, Value b);
Value mul(Graph& g, Value a, Value b);
Value scale(Graph& g, Value a, double c);
Value add_scaled(Graph& g, Value a, Value b, double ca, double cb);  // ca*a + cb*b
Value matmul(Graph& g, Value a, Value b);                   // (m,k)x(k,n)
Value matmul_nt(Graph& g, Value a, Value b);                // (m,k)x(n,k)^T -> (m,n)
Value linear(Graph& g, Value x, Value w, Value b);          // x(m,k) w(k,n) + row-broadcast b(n); b may be null
Value relu(Graph& g, Value x);
Value sigmoid(Graph& g, Value x);
Value reshape(Graph& g, Value x, std::vector<int> shape);
Value slice_first(Graph& g, Value x, int index);            // x[i, ...] dropping dim 0
Value sum(Graph& g, Value x);                               // -> scalar
Value mean(Graph& g, Value x);                              // -> scalar
Value add_all(Graph& g, const std::vector<Value>& xs);      // same-shape sum

// Row-wise softmax of (x + bias); bias is a constant (no gradient), may be null.
Value softmax_rows(Graph& g, Value x, const Tensor* bias);

// Per-row layer normalization over the last dimension of a (rows, C) matrix.
Value layer_norm_rows(Graph& g, Value x, Value gamma, Value beta, double eps = 1e-5);

// 2-D convolution on HWC input; w is (kh, kw, cin, cout); b (cout) may be null.
Value conv2d(Graph& g, Value x, Value w, Value b, int stride, int pad);

// Bilinear resize of an HW or HWC map to (out_h, out_w); half-pixel centers,
// replicated borders. Works for both up- and down-sampling.
Value resize_bilinear(Graph& g, Value x, int out_h, int out_w);
// Same resampling applied plane-wise to a (N, h, w) stack.
Value resize_bilinear_stack(Graph& g, Value x, int out_h, int out_w);

// ---- fused losses ----------------------------------------------------------
// Mean binary cross-entropy on sigmoid(logits) against a 0/1 target.
Value bce_with_logits_mean(Graph& g, Value logits, const Tensor& target);
// 1 - (2*sum(p*t)+eps) / (sum(p)+sum(t)+eps) with p = sigmoid(logits).
Value dice_from_logits(Graph& g, Value logits, const Tensor& target, double eps);
// sum_r w[r] * cross_entropy(softmax(logits[r]), target[r])
Value weighted_softmax_ce_sum(Graph& g, Value logits, const std::vector<int>& target,
                              const std::vector<double>& weight);

// ---- plain-tensor helpers shared with non-graph code ----------------------
Tensor resize_bilinear_plain(const Tensor& hwc, int out_h, int out_w);
Tensor resize_bilinear_stack_plain(const Tensor& nhw, int out_h, int out_w);

}  // namespace textseg
