#include "textseg/tensor.hpp"

#include <cmath>
#include <sstream>

#include "textseg/error.hpp"

namespace textseg {

namespace {
size_t count_elems(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) {
        if (d < 0) throw ShapeError("negative tensor dimension");
        n *= static_cast<size_t>(d);
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    data.assign(count_elems(shape), fill);
}

Tensor Tensor::scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
}

Tensor Tensor::from(std::vector<int> s, std::vector<double> d) {
    if (count_elems(s) != d.size()) throw ShapeError("Tensor::from: data size does not match shape");
    Tensor t;
    t.shape = std::move(s);
    t.data = std::move(d);
    return t;
}

int Tensor::numel() const { return static_cast<int>(data.size()); }

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::fabs(v));
    return m;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ")";
    return os.str();
}

Tensor Tensor::reshaped(std::vector<int> s) const {
    if (count_elems(s) != data.size())
        throw ShapeError("reshape: element count mismatch " + shape_str());
    Tensor t;
    t.shape = std::move(s);
    t.data = data;
    return t;
}

void check_shape(bool cond, const std::string& what) {
    if (!cond) throw ShapeError(what);
}

}  // namespace textseg
