#pragma once

// Selective state-space recurrence
//
//   h_t = A_t h_{t-1} + B_t x_t
//   y_t = C_t h_t     + D   x_t
//
// with three execution paths kept deliberately separate:
//   * ssm_scan_sequential  - the reference, one step at a time, dense or
//     diagonal A, time-invariant or per-step parameters;
//   * ssm_scan_chunked     - same recurrence split into chunks whose local
//     scans run in parallel (OpenMP), composed through carried boundary
//     states; diagonal A only;
//   * detail::selective_step<S> - the scalar-generic step the training tape
//     records; cross-checked against the materialized reference path.

#include <span>
#include <vector>

#include "hsse/linalg.hpp"
#include "hsse/tape.hpp"

namespace hsse {

class Rng;

struct SsmParams {
    enum class AKind { dense, diagonal };

    AKind a_kind = AKind::dense;
    Mat a_dense;  // S x S
    Vec a_diag;   // length S, entries in (0, 1]
    Mat b;        // S x D_in
    Mat c;        // D_out x S
    Mat d;        // D_out x D_in

    int state_dim() const { return a_kind == AKind::dense ? a_dense.rows : static_cast<int>(a_diag.size()); }
    int in_dim() const { return b.cols; }
    int out_dim() const { return c.rows; }

    void validate() const;

    static SsmParams identity(int state, int dim_in, int dim_out);
};

struct Sequence {
    int len = 0;
    int dim = 0;
    std::vector<double> data;  // row-major, len x dim

    Sequence() = default;
    Sequence(int length, int width)
        : len(length), dim(width), data(static_cast<std::size_t>(length) * width, 0.0) {}

    double* row(int t) { return data.data() + static_cast<std::size_t>(t) * dim; }
    const double* row(int t) const { return data.data() + static_cast<std::size_t>(t) * dim; }
    std::span<const double> row_span(int t) const { return {row(t), static_cast<std::size_t>(dim)}; }

    void validate() const;
};

struct ScanResult {
    Sequence y;
    std::vector<Vec> h;  // one state per step, length L
};

ScanResult ssm_scan_sequential(const SsmParams& params, const Sequence& x, const Vec& h0);
ScanResult ssm_scan_sequential(std::span<const SsmParams> steps, const Sequence& x, const Vec& h0);

// Chunk-parallel path; requires the diagonal parameterization. Matches the
// sequential path within 1e-10 relative for every chunk_len >= 1.
ScanResult ssm_scan_chunked(const SsmParams& params, const Sequence& x, const Vec& h0,
                            int chunk_len, bool parallel = true);
ScanResult ssm_scan_chunked(std::span<const SsmParams> steps, const Sequence& x, const Vec& h0,
                            int chunk_len, bool parallel = true);

// Independent sequences scanned in parallel (the sanctioned batch-level
// parallelism); `parallel = false` is the serial reference.
std::vector<ScanResult> ssm_scan_batch(const SsmParams& params, std::span<const Sequence> xs,
                                       const Vec& h0, bool parallel = true);

// Input-dependent parameter generation. A_t is diagonal with entries
// exp(-softplus(w_dt . x_t + b_dt) * rate_i) in (0, 1]; B_t and C_t are the
// base matrices scaled by 1 + tanh(u . x_t); D is input-independent.
struct SelectorParams {
    Vec w_dt;
    double b_dt = 0.0;
    Vec rates;  // per-state decay rates, all > 0
    Mat b_base;
    Vec u_b;
    Mat c_base;
    Vec u_c;
    Mat d_ft;

    int state_dim() const { return static_cast<int>(rates.size()); }
    int in_dim() const { return b_base.cols; }
    int out_dim() const { return c_base.rows; }

    void validate() const;

    static SelectorParams random(int state, int dim_in, int dim_out, Rng& rng);
};

SsmParams selective_params(const SelectorParams& sel, std::span<const double> x_t);

// Materializes per-step params and runs the sequential reference scan.
ScanResult selective_scan(const SelectorParams& sel, const Sequence& x, const Vec& h0);

namespace detail {

// View over selector parameters with generic scalar type; the Var instance
// is what training records on the tape.
template <class S>
struct SelectorView {
    std::span<const S> w_dt;
    S b_dt;
    std::span<const S> rates;
    const MatT<S>* b_base = nullptr;
    std::span<const S> u_b;
    const MatT<S>* c_base = nullptr;
    std::span<const S> u_c;
    const MatT<S>* d_ft = nullptr;
};

template <class S>
void selective_step(const SelectorView<S>& sel, std::span<const S> x_t, std::vector<S>& h,
                    std::span<S> y_t) {
    using std::exp;
    using std::tanh;
    const S delta = softplus(dot(sel.w_dt, x_t) + sel.b_dt);
    const S gate_b = tanh(dot(sel.u_b, x_t)) + 1.0;
    const S gate_c = tanh(dot(sel.u_c, x_t)) + 1.0;
    const VecT<S> bx = matvec(*sel.b_base, x_t);
    for (std::size_t i = 0; i < h.size(); ++i)
        h[i] = exp(-(delta * sel.rates[i])) * h[i] + gate_b * bx[i];
    const VecT<S> ch = matvec(*sel.c_base, std::span<const S>(h));
    const VecT<S> dx = matvec(*sel.d_ft, x_t);
    for (std::size_t o = 0; o < y_t.size(); ++o) y_t[o] = gate_c * ch[o] + dx[o];
}

template <class S>
void selective_scan_steps(const SelectorView<S>& sel, const MatT<S>& x, std::vector<S>& h,
                          MatT<S>& y) {
    for (int t = 0; t < x.rows; ++t) selective_step(sel, x.row(t), h, y.row(t));
}

}  // namespace detail

}  // namespace hsse
