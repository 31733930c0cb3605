// Dense row-major double tensor, 1-4 dimensions.
//
// Feature maps are stored HWC; matrices are (rows, cols). Double precision
// throughout: the verification suite checks analytic gradients against
// central finite differences, which needs the headroom.

#pragma once

#include <string>
#include <vector>

namespace textseg {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);
    static Tensor scalar(double v);
    static Tensor from(std::vector<int> s, std::vector<double> d);

    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int numel() const;
    bool empty() const { return data.empty(); }

    double& at(int i) { return data[static_cast<size_t>(i)]; }
    double at(int i) const { return data[static_cast<size_t>(i)]; }
    double& at(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }
    double& at(int a, int b, int c) {
        return data[(static_cast<size_t>(a) * shape[1] + b) * shape[2] + c];
    }
    double at(int a, int b, int c) const {
        return data[(static_cast<size_t>(a) * shape[1] + b) * shape[2] + c];
    }
    double& at(int a, int b, int c, int d) {
        return data[((static_cast<size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    double at(int a, int b, int c, int d) const {
        return data[((static_cast<size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    double max_abs() const;
    std::string shape_str() const;

    // Same data reinterpreted under a new shape with equal element count.
    Tensor reshaped(std::vector<int> s) const;
};

// Throws ShapeError with a readable message unless cond holds.
void check_shape(bool cond, const std::string& what);

}  // namespace textseg
