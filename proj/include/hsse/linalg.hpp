#pragma once

// Small dense row-major matrices and vectors. Everything is templated on the
// scalar so the same kernels run on plain doubles and on tape variables.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hsse/errors.hpp"

namespace hsse {

template <class S>
using VecT = std::vector<S>;

using Vec = VecT<double>;

template <class S>
struct MatT {
    int rows = 0;
    int cols = 0;
    std::vector<S> data;  // row-major

    MatT() = default;
    MatT(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c) {}

    S& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    const S& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::span<const S> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<S> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    bool empty() const { return data.empty(); }
};

using Mat = MatT<double>;

inline double value_of(double x) { return x; }

// y = M x
template <class S>
VecT<S> matvec(const MatT<S>& m, std::span<const S> x) {
    if (static_cast<int>(x.size()) != m.cols)
        throw DimensionError("matvec: " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                             " with vector of length " + std::to_string(x.size()));
    VecT<S> y;
    y.reserve(m.rows);
    for (int r = 0; r < m.rows; ++r) {
        S acc = m.at(r, 0) * x[0];
        for (int c = 1; c < m.cols; ++c) acc = acc + m.at(r, c) * x[c];
        y.push_back(acc);
    }
    return y;
}

template <class S>
VecT<S> matvec(const MatT<S>& m, const VecT<S>& x) {
    return matvec(m, std::span<const S>(x));
}

template <class S>
S dot(std::span<const S> a, std::span<const S> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    S acc = a[0] * b[0];
    for (std::size_t i = 1; i < a.size(); ++i) acc = acc + a[i] * b[i];
    return acc;
}

template <class S>
S dot(const VecT<S>& a, const VecT<S>& b) {
    return dot(std::span<const S>(a), std::span<const S>(b));
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Mat& m) { return all_finite(std::span<const double>(m.data)); }

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Induced infinity norm: max absolute row sum.
inline double norm_inf(const Mat& m) {
    double best = 0.0;
    for (int r = 0; r < m.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < m.cols; ++c) s += std::abs(m.at(r, c));
        best = std::max(best, s);
    }
    return best;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("max_abs_diff: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
inline double max_rel_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("max_rel_diff: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        m = std::max(m, std::abs(a[i] - b[i]) / scale);
    }
    return m;
}

}  // namespace hsse
