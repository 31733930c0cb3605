#include "textseg/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>

#include "textseg/error.hpp"

namespace textseg {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

namespace {

void require(bool cond, const char* what) {
    if (!cond) throw ShapeError(what);
}

bool wants_grad(const std::vector<Value>& inputs) {
    for (Value v : inputs)
        if (v && v->needs_grad) return true;
    return false;
}

}  // namespace

Value Graph::make(Tensor value, std::vector<Value> inputs) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    n.needs_grad = grad_enabled_ && wants_grad(inputs);
    if (n.needs_grad) n.grad = Tensor(n.value.shape);
    return &n;
}

Value Graph::constant(Tensor v) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(v);
    return &n;
}

Value Graph::input(Tensor v) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(v);
    n.needs_grad = grad_enabled_;
    if (n.needs_grad) n.grad = Tensor(n.value.shape);
    return &n;
}

Value Graph::param(Param& p) {
    Value n = input(p.value);
    if (grad_enabled_) param_leaves_.emplace_back(&p, n);
    return n;
}

void Graph::backward(Value loss) {
    if (!grad_enabled_) throw ValueError("backward() on a no-grad graph");
    require(loss->value.numel() == 1, "backward: loss must be scalar");
    if (!loss->needs_grad) return;  // loss independent of any differentiable leaf
    loss->grad.data[0] = 1.0;
    loss->grad_seen = true;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->backward && it->grad_seen) it->backward();
    }
}

void Graph::sync_param_grads() {
    for (auto& [p, n] : param_leaves_) {
        if (!n->grad_seen) continue;
        double* dst = p->grad.ptr();
        const double* src = n->grad.ptr();
        for (int i = 0; i < n->grad.numel(); ++i) dst[i] += src[i];
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Value add(Graph& g, Value a, Value b) { return add_scaled(g, a, b, 1.0, 1.0); }
Value sub(Graph& g, Value a, Value b) { return add_scaled(g, a, b, 1.0, -1.0); }

Value add_scaled(Graph& g, Value a, Value b, double ca, double cb) {
    require(a->value.same_shape(b->value), "add: shape mismatch");
    Tensor out(a->value.shape);
    const double* pa = a->value.ptr();
    const double* pb = b->value.ptr();
    for (int i = 0; i < out.numel(); ++i) out.data[i] = ca * pa[i] + cb * pb[i];
    Value n = g.make(std::move(out), {a, b});
    if (n->needs_grad) {
        g.set_backward(n, [n, a, b, ca, cb] {
            const double* go = n->grad.ptr();
            int m = n->grad.numel();
            if (a->needs_grad) {
                double* da = grad_buf(a).ptr();
                for (int i = 0; i < m; ++i) da[i] += ca * go[i];
            }
            if (b->needs_grad) {
                double* db = grad_buf(b).ptr();
                for (int i = 0; i < m; ++i) db[i] += cb * go[i];
            }
        });
    }
    return n;
}

Value mul(Graph& g, Value a, Value b) {
    require(a->value.same_shape(b->value), "mul: shape mismatch");
    Tensor out(a->value.shape);
    for (int i = 0; i < out.numel(); ++i) out.data[i] = a->value.data[i] * b->value.data[i];
    Value n = g.make(std::move(out), {a, b});
    if (n->needs_grad) {
        g.set_backward(n, [n, a, b] {
            const double* go = n->grad.ptr();
            int m = n->grad.numel();
            if (a->needs_grad) {
                double* da = grad_buf(a).ptr();
                for (int i = 0; i < m; ++i) da[i] += go[i] * b->value.data[i];
            }
            if (b->needs_grad) {
                double* db = grad_buf(b).ptr();
                for (int i = 0; i < m; ++i) db[i] += go[i] * a->value.data[i];
            }
        });
    }
    return n;
}

Value scale(Graph& g, Value a, double c) {
    Tensor out(a->value.shape);
    for (int i = 0; i < out.numel(); ++i) out.data[i] = c * a->value.data[i];
    Value n = g.make(std::move(out), {a});
    if (n->needs_grad) {
        g.set_backward(n, [n, a, c] {
            double* da = grad_buf(a).ptr();
            const double* go = n->grad.ptr();
            for (int i = 0; i < n->grad.numel(); ++i) da[i] += c * go[i];
        });
    }
    return n;
}

Value relu(Graph& g, Value x) {
    Tensor out(x->value.shape);
    for (int i = 0; i < out.numel(); ++i) out.data[i] = x->value.data[i] > 0.0 ? x->value.data[i] : 0.0;
    Value n = g.make(std::move(out), {x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x] {
            double* dx = grad_buf(x).ptr();
            const double* go = n->grad.ptr();
            for (int i = 0; i < n->grad.numel(); ++i)
                if (x->value.data[i] > 0.0) dx[i] += go[i];
        });
    }
    return n;
}

Value sigmoid(Graph& g, Value x) {
    Tensor out(x->value.shape);
    for (int i = 0; i < out.numel(); ++i) {
        double z = x->value.data[i];
        out.data[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                               : std::exp(z) / (1.0 + std::exp(z));
    }
    Value n = g.make(std::move(out), {x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x] {
            double* dx = grad_buf(x).ptr();
            const double* go = n->grad.ptr();
            for (int i = 0; i < n->grad.numel(); ++i) {
                double y = n->value.data[i];
                dx[i] += go[i] * y * (1.0 - y);
            }
        });
    }
    return n;
}

Value reshape(Graph& g, Value x, std::vector<int> shape) {
    Tensor out = x->value.reshaped(std::move(shape));
    Value n = g.make(std::move(out), {x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x] {
            double* dx = grad_buf(x).ptr();
            const double* go = n->grad.ptr();
            for (int i = 0; i < n->grad.numel(); ++i) dx[i] += go[i];
        });
    }
    return n;
}

Value slice_first(Graph& g, Value x, int index) {
    require(x->value.ndim() >= 2, "slice_first: needs >= 2 dims");
    require(index >= 0 && index < x->value.dim(0), "slice_first: index out of range");
    std::vector<int> shape(x->value.shape.begin() + 1, x->value.shape.end());
    int chunk = 1;
    for (int d : shape) chunk *= d;
    Tensor out(shape);
    std::memcpy(out.ptr(), x->value.ptr() + static_cast<size_t>(index) * chunk,
                sizeof(double) * static_cast<size_t>(chunk));
    Value n = g.make(std::move(out), {x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x, index, chunk] {
            double* dx = grad_buf(x).ptr() + static_cast<size_t>(index) * chunk;
            const double* go = n->grad.ptr();
            for (int i = 0; i < chunk; ++i) dx[i] += go[i];
        });
    }
    return n;
}

Value sum(Graph& g, Value x) {
    double s = 0.0;
    for (double v : x->value.data) s += v;
    Value n = g.make(Tensor::scalar(s), {x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x] {
            double go = n->grad.data[0];
            double* dx = grad_buf(x).ptr();
            for (int i = 0; i < x->value.numel(); ++i) dx[i] += go;
        });
    }
    return n;
}

Value mean(Graph& g, Value x) {
    int m = x->value.numel();
    require(m > 0, "mean of empty tensor");
    double s = 0.0;
    for (double v : x->value.data) s += v;
    Value n = g.make(Tensor::scalar(s / m), {x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x, m] {
            double go = n->grad.data[0] / m;
            double* dx = grad_buf(x).ptr();
            for (int i = 0; i < m; ++i) dx[i] += go;
        });
    }
    return n;
}

Value add_all(Graph& g, const std::vector<Value>& xs) {
    require(!xs.empty(), "add_all: empty list");
    Value acc = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) acc = add(g, acc, xs[i]);
    return acc;
}

// ---------------------------------------------------------------------------
// matrix ops
// ---------------------------------------------------------------------------

Value matmul(Graph& g, Value a, Value b) {
    require(a->value.ndim() == 2 && b->value.ndim() == 2, "matmul: 2-D only");
    int m = a->value.dim(0), k = a->value.dim(1), n2 = b->value.dim(1);
    require(b->value.dim(0) == k, "matmul: inner dims differ");
    Tensor out({m, n2});
    MapC A(a->value.ptr(), m, k), B(b->value.ptr(), k, n2);
    MapM C(out.ptr(), m, n2);
    C.noalias() = A * B;
    Value n = g.make(std::move(out), {a, b});
    if (n->needs_grad) {
        g.set_backward(n, [n, a, b, m, k, n2] {
            MapC dC(n->grad.ptr(), m, n2);
            if (a->needs_grad) {
                MapM dA(grad_buf(a).ptr(), m, k);
                MapC B(b->value.ptr(), k, n2);
                dA.noalias() += dC * B.transpose();
            }
            if (b->needs_grad) {
                MapM dB(grad_buf(b).ptr(), k, n2);
                MapC A(a->value.ptr(), m, k);
                dB.noalias() += A.transpose() * dC;
            }
        });
    }
    return n;
}

Value matmul_nt(Graph& g, Value a, Value b) {
    require(a->value.ndim() == 2 && b->value.ndim() == 2, "matmul_nt: 2-D only");
    int m = a->value.dim(0), k = a->value.dim(1), n2 = b->value.dim(0);
    require(b->value.dim(1) == k, "matmul_nt: inner dims differ");
    Tensor out({m, n2});
    MapC A(a->value.ptr(), m, k), B(b->value.ptr(), n2, k);
    MapM C(out.ptr(), m, n2);
    C.noalias() = A * B.transpose();
    Value n = g.make(std::move(out), {a, b});
    if (n->needs_grad) {
        g.set_backward(n, [n, a, b, m, k, n2] {
            MapC dC(n->grad.ptr(), m, n2);
            if (a->needs_grad) {
                MapM dA(grad_buf(a).ptr(), m, k);
                MapC B(b->value.ptr(), n2, k);
                dA.noalias() += dC * B;
            }
            if (b->needs_grad) {
                MapM dB(grad_buf(b).ptr(), n2, k);
                MapC A(a->value.ptr(), m, k);
                dB.noalias() += dC.transpose() * A;
            }
        });
    }
    return n;
}

Value linear(Graph& g, Value x, Value w, Value b) {
    Value y = matmul(g, x, w);
    if (!b) return y;
    require(b->value.ndim() == 1 && b->value.dim(0) == y->value.dim(1), "linear: bias shape");
    int m = y->value.dim(0), n2 = y->value.dim(1);
    Tensor out = y->value;
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n2; ++c) out.at(r, c) += b->value.at(c);
    Value n = g.make(std::move(out), {y, b});
    if (n->needs_grad) {
        g.set_backward(n, [n, y, b, m, n2] {
            const double* go = n->grad.ptr();
            if (y->needs_grad) {
                double* dy = grad_buf(y).ptr();
                for (int i = 0; i < m * n2; ++i) dy[i] += go[i];
            }
            if (b->needs_grad) {
                double* db = grad_buf(b).ptr();
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < n2; ++c) db[c] += go[r * n2 + c];
            }
        });
    }
    return n;
}

Value softmax_rows(Graph& g, Value x, const Tensor* bias) {
    require(x->value.ndim() == 2, "softmax_rows: 2-D only");
    if (bias) require(bias->same_shape(x->value), "softmax_rows: bias shape mismatch");
    int rows = x->value.dim(0), cols = x->value.dim(1);
    Tensor out({rows, cols});
    for (int r = 0; r < rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < cols; ++c) {
            double z = x->value.at(r, c) + (bias ? bias->at(r, c) : 0.0);
            out.at(r, c) = z;
            mx = std::max(mx, z);
        }
        double denom = 0.0;
        for (int c = 0; c < cols; ++c) {
            double e = std::exp(out.at(r, c) - mx);
            out.at(r, c) = e;
            denom += e;
        }
        for (int c = 0; c < cols; ++c) out.at(r, c) /= denom;
    }
    Value n = g.make(std::move(out), {x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x, rows, cols] {
            double* dx = grad_buf(x).ptr();
            for (int r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (int c = 0; c < cols; ++c)
                    dot += n->grad.at(r, c) * n->value.at(r, c);
                for (int c = 0; c < cols; ++c)
                    dx[r * cols + c] += (n->grad.at(r, c) - dot) * n->value.at(r, c);
            }
        });
    }
    return n;
}

Value layer_norm_rows(Graph& g, Value x, Value gamma, Value beta, double eps) {
    require(x->value.ndim() == 2, "layer_norm: 2-D only");
    int rows = x->value.dim(0), cols = x->value.dim(1);
    require(gamma->value.numel() == cols && beta->value.numel() == cols, "layer_norm: affine shape");
    Tensor out({rows, cols});
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    auto normed = std::make_shared<Tensor>(Tensor({rows, cols}));
    for (int r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (int c = 0; c < cols; ++c) mu += x->value.at(r, c);
        mu /= cols;
        double var = 0.0;
        for (int c = 0; c < cols; ++c) {
            double d = x->value.at(r, c) - mu;
            var += d * d;
        }
        var /= cols;
        double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = inv;
        for (int c = 0; c < cols; ++c) {
            double h = (x->value.at(r, c) - mu) * inv;
            normed->at(r, c) = h;
            out.at(r, c) = h * gamma->value.at(c) + beta->value.at(c);
        }
    }
    Value n = g.make(std::move(out), {x, gamma, beta});
    if (n->needs_grad) {
        g.set_backward(n, [n, x, gamma, beta, rows, cols, inv_std, normed] {
            for (int r = 0; r < rows; ++r) {
                double sum_dyg = 0.0, sum_dygh = 0.0;
                for (int c = 0; c < cols; ++c) {
                    double dyg = n->grad.at(r, c) * gamma->value.at(c);
                    sum_dyg += dyg;
                    sum_dygh += dyg * normed->at(r, c);
                }
                if (x->needs_grad) {
                    double* dx = grad_buf(x).ptr();
                    double inv = (*inv_std)[r];
                    for (int c = 0; c < cols; ++c) {
                        double dyg = n->grad.at(r, c) * gamma->value.at(c);
                        dx[r * cols + c] +=
                            inv * (dyg - sum_dyg / cols - normed->at(r, c) * sum_dygh / cols);
                    }
                }
            }
            if (gamma->needs_grad) {
                double* dg = grad_buf(gamma).ptr();
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < cols; ++c) dg[c] += n->grad.at(r, c) * normed->at(r, c);
            }
            if (beta->needs_grad) {
                double* db = grad_buf(beta).ptr();
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < cols; ++c) db[c] += n->grad.at(r, c);
            }
        });
    }
    return n;
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
    int h, w, cin, kh, kw, cout, stride, pad, oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
    require(x.ndim() == 3, "conv2d: input must be HWC");
    require(w.ndim() == 4, "conv2d: weight must be (kh,kw,cin,cout)");
    ConvDims d;
    d.h = x.dim(0);
    d.w = x.dim(1);
    d.cin = x.dim(2);
    d.kh = w.dim(0);
    d.kw = w.dim(1);
    require(w.dim(2) == d.cin, "conv2d: cin mismatch");
    d.cout = w.dim(3);
    d.stride = stride;
    d.pad = pad;
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    require(d.oh >= 1 && d.ow >= 1, "conv2d: empty output");
    return d;
}

// Gather input patches into a (oh*ow, kh*kw*cin) matrix.
Tensor im2col(const Tensor& x, const ConvDims& d) {
    Tensor col({d.oh * d.ow, d.kh * d.kw * d.cin});
    for (int oy = 0; oy < d.oh; ++oy) {
        for (int ox = 0; ox < d.ow; ++ox) {
            double* row = col.ptr() + static_cast<size_t>(oy * d.ow + ox) * col.dim(1);
            for (int ky = 0; ky < d.kh; ++ky) {
                int iy = oy * d.stride + ky - d.pad;
                for (int kx = 0; kx < d.kw; ++kx) {
                    int ix = ox * d.stride + kx - d.pad;
                    double* dst = row + (ky * d.kw + kx) * d.cin;
                    if (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w) {
                        const double* src = x.ptr() + (static_cast<size_t>(iy) * d.w + ix) * d.cin;
                        std::memcpy(dst, src, sizeof(double) * static_cast<size_t>(d.cin));
                    }  // else stays zero (border is zero-padded)
                }
            }
        }
    }
    return col;
}

void col2im_accum(const Tensor& dcol, const ConvDims& d, Tensor& dx) {
    for (int oy = 0; oy < d.oh; ++oy) {
        for (int ox = 0; ox < d.ow; ++ox) {
            const double* row = dcol.ptr() + static_cast<size_t>(oy * d.ow + ox) * dcol.dim(1);
            for (int ky = 0; ky < d.kh; ++ky) {
                int iy = oy * d.stride + ky - d.pad;
                if (iy < 0 || iy >= d.h) continue;
                for (int kx = 0; kx < d.kw; ++kx) {
                    int ix = ox * d.stride + kx - d.pad;
                    if (ix < 0 || ix >= d.w) continue;
                    const double* src = row + (ky * d.kw + kx) * d.cin;
                    double* dst = dx.ptr() + (static_cast<size_t>(iy) * d.w + ix) * d.cin;
                    for (int c = 0; c < d.cin; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

}  // namespace

Value conv2d(Graph& g, Value x, Value w, Value b, int stride, int pad) {
    ConvDims d = conv_dims(x->value, w->value, stride, pad);
    if (b) require(b->value.numel() == d.cout, "conv2d: bias shape");

    bool pointwise = (d.kh == 1 && d.kw == 1 && stride == 1 && pad == 0);
    auto col = std::make_shared<Tensor>();
    const Tensor& cmat = pointwise ? x->value : (*col = im2col(x->value, d), *col);

    int rows = d.oh * d.ow, kdim = d.kh * d.kw * d.cin;
    Tensor out({d.oh, d.ow, d.cout});
    {
        MapC A(cmat.ptr(), rows, kdim), W(w->value.ptr(), kdim, d.cout);
        MapM Y(out.ptr(), rows, d.cout);
        Y.noalias() = A * W;
        if (b)
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < d.cout; ++c) out.data[static_cast<size_t>(r) * d.cout + c] += b->value.at(c);
    }
    Value n = g.make(std::move(out), {x, w, b ? b : x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x, w, b, d, col, pointwise, rows, kdim] {
            MapC dY(n->grad.ptr(), rows, d.cout);
            if (b && b->needs_grad) {
                double* db = grad_buf(b).ptr();
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < d.cout; ++c) db[c] += n->grad.data[static_cast<size_t>(r) * d.cout + c];
            }
            if (w->needs_grad) {
                const Tensor& cmat = pointwise ? x->value : *col;
                MapC A(cmat.ptr(), rows, kdim);
                MapM dW(grad_buf(w).ptr(), kdim, d.cout);
                dW.noalias() += A.transpose() * dY;
            }
            if (x->needs_grad) {
                if (pointwise) {
                    MapC W(w->value.ptr(), kdim, d.cout);
                    MapM dX(grad_buf(x).ptr(), rows, kdim);
                    dX.noalias() += dY * W.transpose();
                } else {
                    Tensor dcol({rows, kdim});
                    MapC W(w->value.ptr(), kdim, d.cout);
                    MapM dCol(dcol.ptr(), rows, kdim);
                    dCol.noalias() = dY * W.transpose();
                    col2im_accum(dcol, d, grad_buf(x));
                }
            }
        });
    }
    return n;
}

// ---------------------------------------------------------------------------
// bilinear resize
// ---------------------------------------------------------------------------

namespace {

struct LerpTap {
    int i0, i1;
    double f;  // weight of i1
};

std::vector<LerpTap> resize_taps(int in, int out) {
    std::vector<LerpTap> taps(out);
    double ratio = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) * ratio - 0.5;
        if (s < 0.0) s = 0.0;
        if (s > in - 1) s = in - 1;
        int i0 = static_cast<int>(std::floor(s));
        if (i0 > in - 1) i0 = in - 1;
        int i1 = std::min(i0 + 1, in - 1);
        taps[o] = {i0, i1, s - i0};
    }
    return taps;
}

// Shared kernel: input laid out as (h, w) planes x `planes` channels where
// channel stride is `cstride` and plane element stride is `estride`.
// Used with HWC (cstride=1, estride=channels) and NHW (plane-major) layouts.
void resize_forward(const double* src, double* dst, int h, int w, int oh, int ow, int channels,
                    bool channels_last) {
    auto ty = resize_taps(h, oh);
    auto tx = resize_taps(w, ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const LerpTap& a = ty[y];
            const LerpTap& bx = tx[x];
            double w00 = (1 - a.f) * (1 - bx.f), w01 = (1 - a.f) * bx.f;
            double w10 = a.f * (1 - bx.f), w11 = a.f * bx.f;
            for (int c = 0; c < channels; ++c) {
                size_t s00, s01, s10, s11, dd;
                if (channels_last) {
                    s00 = (static_cast<size_t>(a.i0) * w + bx.i0) * channels + c;
                    s01 = (static_cast<size_t>(a.i0) * w + bx.i1) * channels + c;
                    s10 = (static_cast<size_t>(a.i1) * w + bx.i0) * channels + c;
                    s11 = (static_cast<size_t>(a.i1) * w + bx.i1) * channels + c;
                    dd = (static_cast<size_t>(y) * ow + x) * channels + c;
                } else {
                    size_t plane = static_cast<size_t>(c) * h * w;
                    size_t oplane = static_cast<size_t>(c) * oh * ow;
                    s00 = plane + static_cast<size_t>(a.i0) * w + bx.i0;
                    s01 = plane + static_cast<size_t>(a.i0) * w + bx.i1;
                    s10 = plane + static_cast<size_t>(a.i1) * w + bx.i0;
                    s11 = plane + static_cast<size_t>(a.i1) * w + bx.i1;
                    dd = oplane + static_cast<size_t>(y) * ow + x;
                }
                dst[dd] = w00 * src[s00] + w01 * src[s01] + w10 * src[s10] + w11 * src[s11];
            }
        }
    }
}

void resize_backward(double* dsrc, const double* ddst, int h, int w, int oh, int ow, int channels,
                     bool channels_last) {
    auto ty = resize_taps(h, oh);
    auto tx = resize_taps(w, ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const LerpTap& a = ty[y];
            const LerpTap& bx = tx[x];
            double w00 = (1 - a.f) * (1 - bx.f), w01 = (1 - a.f) * bx.f;
            double w10 = a.f * (1 - bx.f), w11 = a.f * bx.f;
            for (int c = 0; c < channels; ++c) {
                size_t s00, s01, s10, s11, dd;
                if (channels_last) {
                    s00 = (static_cast<size_t>(a.i0) * w + bx.i0) * channels + c;
                    s01 = (static_cast<size_t>(a.i0) * w + bx.i1) * channels + c;
                    s10 = (static_cast<size_t>(a.i1) * w + bx.i0) * channels + c;
                    s11 = (static_cast<size_t>(a.i1) * w + bx.i1) * channels + c;
                    dd = (static_cast<size_t>(y) * ow + x) * channels + c;
                } else {
                    size_t plane = static_cast<size_t>(c) * h * w;
                    size_t oplane = static_cast<size_t>(c) * oh * ow;
                    s00 = plane + static_cast<size_t>(a.i0) * w + bx.i0;
                    s01 = plane + static_cast<size_t>(a.i0) * w + bx.i1;
                    s10 = plane + static_cast<size_t>(a.i1) * w + bx.i0;
                    s11 = plane + static_cast<size_t>(a.i1) * w + bx.i1;
                    dd = oplane + static_cast<size_t>(y) * ow + x;
                }
                double go = ddst[dd];
                dsrc[s00] += w00 * go;
                dsrc[s01] += w01 * go;
                dsrc[s10] += w10 * go;
                dsrc[s11] += w11 * go;
            }
        }
    }
}

}  // namespace

Value resize_bilinear(Graph& g, Value x, int out_h, int out_w) {
    bool channels_last = x->value.ndim() == 3;
    require(channels_last || x->value.ndim() == 2, "resize_bilinear: HW or HWC input");
    int h = x->value.dim(0), w = x->value.dim(1);
    int channels = channels_last ? x->value.dim(2) : 1;
    Tensor out(channels_last ? std::vector<int>{out_h, out_w, channels}
                             : std::vector<int>{out_h, out_w});
    resize_forward(x->value.ptr(), out.ptr(), h, w, out_h, out_w, channels, true);
    Value n = g.make(std::move(out), {x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x, h, w, out_h, out_w, channels] {
            resize_backward(grad_buf(x).ptr(), n->grad.ptr(), h, w, out_h, out_w, channels, true);
        });
    }
    return n;
}

Value resize_bilinear_stack(Graph& g, Value x, int out_h, int out_w) {
    require(x->value.ndim() == 3, "resize_bilinear_stack: (N,h,w) input");
    int nq = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    Tensor out({nq, out_h, out_w});
    resize_forward(x->value.ptr(), out.ptr(), h, w, out_h, out_w, nq, false);
    Value n = g.make(std::move(out), {x});
    if (n->needs_grad) {
        g.set_backward(n, [n, x, h, w, out_h, out_w, nq] {
            resize_backward(grad_buf(x).ptr(), n->grad.ptr(), h, w, out_h, out_w, nq, false);
        });
    }
    return n;
}

Tensor resize_bilinear_plain(const Tensor& hwc, int out_h, int out_w) {
    bool channels_last = hwc.ndim() == 3;
    check_shape(channels_last || hwc.ndim() == 2, "resize_bilinear_plain: HW or HWC input");
    int channels = channels_last ? hwc.dim(2) : 1;
    Tensor out(channels_last ? std::vector<int>{out_h, out_w, channels}
                             : std::vector<int>{out_h, out_w});
    resize_forward(hwc.ptr(), out.ptr(), hwc.dim(0), hwc.dim(1), out_h, out_w, channels, true);
    return out;
}

Tensor resize_bilinear_stack_plain(const Tensor& nhw, int out_h, int out_w) {
    check_shape(nhw.ndim() == 3, "resize_bilinear_stack_plain: (N,h,w) input");
    Tensor out({nhw.dim(0), out_h, out_w});
    resize_forward(nhw.ptr(), out.ptr(), nhw.dim(1), nhw.dim(2), out_h, out_w, nhw.dim(0), false);
    return out;
}

// ---------------------------------------------------------------------------
// fused losses
// ---------------------------------------------------------------------------

Value bce_with_logits_mean(Graph& g, Value logits, const Tensor& target) {
    require(logits->value.same_shape(target), "bce: shape mismatch");
    int m = logits->value.numel();
    require(m > 0, "bce: empty input");
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        double z = logits->value.data[i], t = target.data[i];
        acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
    }
    Value n = g.make(Tensor::scalar(acc / m), {logits});
    if (n->needs_grad) {
        auto tgt = std::make_shared<Tensor>(target);
        g.set_backward(n, [n, logits, tgt, m] {
            double go = n->grad.data[0] / m;
            double* dz = grad_buf(logits).ptr();
            for (int i = 0; i < m; ++i) {
                double z = logits->value.data[i];
                double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                dz[i] += go * (s - tgt->data[i]);
            }
        });
    }
    return n;
}

Value dice_from_logits(Graph& g, Value logits, const Tensor& target, double eps) {
    require(logits->value.same_shape(target), "dice: shape mismatch");
    int m = logits->value.numel();
    auto probs = std::make_shared<Tensor>(logits->value.shape);
    double s_pt = 0.0, s_p = 0.0, s_t = 0.0;
    for (int i = 0; i < m; ++i) {
        double z = logits->value.data[i];
        double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        probs->data[i] = p;
        s_pt += p * target.data[i];
        s_p += p;
        s_t += target.data[i];
    }
    double denom = s_p + s_t + eps;
    Value n = g.make(Tensor::scalar(1.0 - (2.0 * s_pt + eps) / denom), {logits});
    if (n->needs_grad) {
        auto tgt = std::make_shared<Tensor>(target);
        g.set_backward(n, [n, logits, tgt, probs, m, s_pt, denom, eps] {
            double go = n->grad.data[0];
            double* dz = grad_buf(logits).ptr();
            double num = 2.0 * s_pt + eps;
            for (int i = 0; i < m; ++i) {
                double p = probs->data[i];
                double dLdp = -(2.0 * tgt->data[i] * denom - num) / (denom * denom);
                dz[i] += go * dLdp * p * (1.0 - p);
            }
        });
    }
    return n;
}

Value weighted_softmax_ce_sum(Graph& g, Value logits, const std::vector<int>& target,
                              const std::vector<double>& weight) {
    require(logits->value.ndim() == 2, "softmax_ce: 2-D logits");
    int rows = logits->value.dim(0), cols = logits->value.dim(1);
    require(static_cast<int>(target.size()) == rows && target.size() == weight.size(),
            "softmax_ce: target/weight size mismatch");
    auto probs = std::make_shared<Tensor>(Tensor({rows, cols}));
    double acc = 0.0;
    for (int r = 0; r < rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < cols; ++c) mx = std::max(mx, logits->value.at(r, c));
        double denom = 0.0;
        for (int c = 0; c < cols; ++c) {
            double e = std::exp(logits->value.at(r, c) - mx);
            probs->at(r, c) = e;
            denom += e;
        }
        for (int c = 0; c < cols; ++c) probs->at(r, c) /= denom;
        acc += weight[r] * (std::log(denom) + mx - logits->value.at(r, target[r]));
    }
    Value n = g.make(Tensor::scalar(acc), {logits});
    if (n->needs_grad) {
        auto tgt = std::make_shared<std::vector<int>>(target);
        auto wts = std::make_shared<std::vector<double>>(weight);
        g.set_backward(n, [n, logits, probs, tgt, wts, rows, cols] {
            double go = n->grad.data[0];
            double* dz = grad_buf(logits).ptr();
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    double delta = (c == (*tgt)[r]) ? 1.0 : 0.0;
                    dz[r * cols + c] += go * (*wts)[r] * (probs->at(r, c) - delta);
                }
            }
        });
    }
    return n;
}

}  // namespace textseg
