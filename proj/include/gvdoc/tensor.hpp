#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gvdoc {

// Dense row-major 2-D real matrix (scalars are 1x1, row vectors 1xn).
struct Tensor {
    int64_t n_rows = 0;
    int64_t n_cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int64_t r, int64_t c) : n_rows(r), n_cols(c), data(static_cast<size_t>(r * c), 0.0) {}

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data[0] = v;
        return t;
    }

    int64_t numel() const { return n_rows * n_cols; }
    double item() const { return data.at(0); }  // first element; for 1x1 results
    double* row(int64_t r) { return data.data() + r * n_cols; }
    const double* row(int64_t r) const { return data.data() + r * n_cols; }
    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * n_cols + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * n_cols + c)]; }
    bool same_shape(const Tensor& o) const { return n_rows == o.n_rows && n_cols == o.n_cols; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool operator==(const Tensor&) const = default;
};

// Throws InvariantError naming `context` when any element is NaN or infinite.
void ensure_finite(const Tensor& t, const std::string& context);

}  // namespace gvdoc
