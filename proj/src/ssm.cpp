#include "hsse/ssm.hpp"

#include <algorithm>
#include <cmath>

#include "hsse/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hsse {

void SsmParams::validate() const {
    const int s = state_dim();
    if (s <= 0) throw DimensionError("SsmParams: empty state");
    if (a_kind == AKind::dense) {
        if (a_dense.rows != s || a_dense.cols != s) throw DimensionError("SsmParams: A must be SxS");
        if (!all_finite(a_dense)) throw NonFiniteError("SsmParams: non-finite A");
    } else {
        for (double v : a_diag) {
            if (!std::isfinite(v)) throw NonFiniteError("SsmParams: non-finite A diagonal");
            if (v <= 0.0 || v > 1.0)
                throw ValidationError("a_diag", "SsmParams: diagonal A entries must lie in (0, 1]");
        }
    }
    if (b.rows != s) throw DimensionError("SsmParams: B rows must equal state size");
    if (c.cols != s) throw DimensionError("SsmParams: C cols must equal state size");
    if (d.rows != c.rows || d.cols != b.cols) throw DimensionError("SsmParams: D must be D_out x D_in");
    if (!all_finite(b) || !all_finite(c) || !all_finite(d)) throw NonFiniteError("SsmParams: non-finite entries");
}

SsmParams SsmParams::identity(int state, int dim_in, int dim_out) {
    SsmParams p;
    p.a_kind = AKind::dense;
    p.a_dense = Mat(state, state);
    for (int i = 0; i < state; ++i) p.a_dense.at(i, i) = 1.0;
    p.b = Mat(state, dim_in);
    for (int i = 0; i < std::min(state, dim_in); ++i) p.b.at(i, i) = 1.0;
    p.c = Mat(dim_out, state);
    for (int i = 0; i < std::min(dim_out, state); ++i) p.c.at(i, i) = 1.0;
    p.d = Mat(dim_out, dim_in);
    return p;
}

void Sequence::validate() const {
    if (len < 1 || dim < 1) throw DimensionError("Sequence: length and width must be >= 1");
    if (data.size() != static_cast<std::size_t>(len) * dim) throw DimensionError("Sequence: storage size mismatch");
    if (!all_finite(std::span<const double>(data))) throw NonFiniteError("Sequence: non-finite entries");
}

namespace {

void check_scan_inputs(const SsmParams& p, const Sequence& x, const Vec& h0) {
    p.validate();
    x.validate();
    if (p.in_dim() != x.dim) throw DimensionError("scan: input width does not match B columns");
    if (static_cast<int>(h0.size()) != p.state_dim()) throw DimensionError("scan: h0 length does not match state size");
    if (!all_finite(std::span<const double>(h0))) throw NonFiniteError("scan: non-finite h0");
}

// h <- A h + B x_t for one step.
void apply_state(const SsmParams& p, Vec& h, const double* x_t) {
    const int s = p.state_dim();
    Vec next(s, 0.0);
    if (p.a_kind == SsmParams::AKind::dense) {
        for (int i = 0; i < s; ++i) {
            double acc = 0.0;
            for (int j = 0; j < s; ++j) acc += p.a_dense.at(i, j) * h[j];
            next[i] = acc;
        }
    } else {
        for (int i = 0; i < s; ++i) next[i] = p.a_diag[i] * h[i];
    }
    for (int i = 0; i < s; ++i) {
        double acc = 0.0;
        for (int j = 0; j < p.b.cols; ++j) acc += p.b.at(i, j) * x_t[j];
        next[i] += acc;
    }
    h = std::move(next);
}

void emit_output(const SsmParams& p, const Vec& h, const double* x_t, double* y_t) {
    for (int o = 0; o < p.c.rows; ++o) {
        double acc = 0.0;
        for (int j = 0; j < p.c.cols; ++j) acc += p.c.at(o, j) * h[j];
        for (int j = 0; j < p.d.cols; ++j) acc += p.d.at(o, j) * x_t[j];
        y_t[o] = acc;
    }
}

const SsmParams& step_params(const SsmParams& fixed, std::span<const SsmParams> steps, int t) {
    return steps.empty() ? fixed : steps[static_cast<std::size_t>(t)];
}

ScanResult scan_sequential_impl(const SsmParams& fixed, std::span<const SsmParams> steps,
                                const Sequence& x, const Vec& h0) {
    if (!steps.empty() && static_cast<int>(steps.size()) != x.len)
        throw DimensionError("scan: per-step parameter list length does not match sequence length");
    const SsmParams& first = step_params(fixed, steps, 0);
    check_scan_inputs(first, x, h0);

    ScanResult out;
    out.y = Sequence(x.len, first.out_dim());
    out.h.reserve(static_cast<std::size_t>(x.len));
    Vec h = h0;
    for (int t = 0; t < x.len; ++t) {
        const SsmParams& p = step_params(fixed, steps, t);
        if (!steps.empty() && (p.state_dim() != first.state_dim() || p.in_dim() != first.in_dim() ||
                               p.out_dim() != first.out_dim()))
            throw DimensionError("scan: inconsistent per-step parameter shapes");
        apply_state(p, h, x.row(t));
        emit_output(p, h, x.row(t), out.y.row(t));
        out.h.push_back(h);
    }
    return out;
}

// Chunk-local pass: scans [t0, t1) from a zero boundary state, recording the
// running diagonal cumulative product needed for the boundary correction.
struct ChunkScratch {
    // per step within the whole sequence: local state and cumprod
    std::vector<Vec>* h_local;
    std::vector<Vec>* cumprod;
};

void scan_chunk_local(const SsmParams& fixed, std::span<const SsmParams> steps, const Sequence& x,
                      int t0, int t1, std::vector<Vec>& h_all, std::vector<Vec>& cum_all,
                      Sequence& y) {
    const int s = step_params(fixed, steps, t0).state_dim();
    Vec h(s, 0.0);
    Vec cum(s, 1.0);
    for (int t = t0; t < t1; ++t) {
        const SsmParams& p = step_params(fixed, steps, t);
        for (int i = 0; i < s; ++i) {
            double acc = 0.0;
            for (int j = 0; j < p.b.cols; ++j) acc += p.b.at(i, j) * x.row(t)[j];
            h[i] = p.a_diag[i] * h[i] + acc;
            cum[i] *= p.a_diag[i];
        }
        emit_output(p, h, x.row(t), y.row(t));
        h_all[static_cast<std::size_t>(t)] = h;
        cum_all[static_cast<std::size_t>(t)] = cum;
    }
}

ScanResult scan_chunked_impl(const SsmParams& fixed, std::span<const SsmParams> steps,
                             const Sequence& x, const Vec& h0, int chunk_len, bool parallel) {
    if (chunk_len < 1) throw DimensionError("scan: chunk_len must be >= 1");
    if (!steps.empty() && static_cast<int>(steps.size()) != x.len)
        throw DimensionError("scan: per-step parameter list length does not match sequence length");
    const SsmParams& first = step_params(fixed, steps, 0);
    check_scan_inputs(first, x, h0);
    for (int t = 0; t < (steps.empty() ? 1 : x.len); ++t)
        if (step_params(fixed, steps, t).a_kind != SsmParams::AKind::diagonal)
            throw ValidationError("a_kind", "chunked scan requires the diagonal A parameterization");

    const int len = x.len;
    const int s = first.state_dim();
    const int n_chunks = (len + chunk_len - 1) / chunk_len;

    ScanResult out;
    out.y = Sequence(len, first.out_dim());
    out.h.assign(static_cast<std::size_t>(len), Vec());
    std::vector<Vec> cum(static_cast<std::size_t>(len));

    // Phase 1: independent chunk-local scans.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (int c = 0; c < n_chunks; ++c) {
        const int t0 = c * chunk_len;
        const int t1 = std::min(len, t0 + chunk_len);
        scan_chunk_local(fixed, steps, x, t0, t1, out.h, cum, out.y);
    }

    // Phase 2: serial composition of chunk boundary states.
    // h_in[c] is the true state entering chunk c.
    std::vector<Vec> h_in(static_cast<std::size_t>(n_chunks));
    Vec carry = h0;
    for (int c = 0; c < n_chunks; ++c) {
        h_in[static_cast<std::size_t>(c)] = carry;
        const int t_end = std::min(len, (c + 1) * chunk_len) - 1;
        Vec next(s);
        for (int i = 0; i < s; ++i)
            next[i] = out.h[static_cast<std::size_t>(t_end)][i] + cum[static_cast<std::size_t>(t_end)][i] * carry[i];
        carry = std::move(next);
    }

    // Phase 3: add the boundary contribution to every state and output.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (int c = 0; c < n_chunks; ++c) {
        const int t0 = c * chunk_len;
        const int t1 = std::min(len, t0 + chunk_len);
        const Vec& boundary = h_in[static_cast<std::size_t>(c)];
        Vec scaled(s);
        for (int t = t0; t < t1; ++t) {
            const SsmParams& p = step_params(fixed, steps, t);
            Vec& h_t = out.h[static_cast<std::size_t>(t)];
            for (int i = 0; i < s; ++i) {
                scaled[i] = cum[static_cast<std::size_t>(t)][i] * boundary[i];
                h_t[i] += scaled[i];
            }
            double* y_t = out.y.row(t);
            for (int o = 0; o < p.c.rows; ++o) {
                double acc = 0.0;
                for (int j = 0; j < s; ++j) acc += p.c.at(o, j) * scaled[j];
                y_t[o] += acc;
            }
        }
    }
    return out;
}

}  // namespace

ScanResult ssm_scan_sequential(const SsmParams& params, const Sequence& x, const Vec& h0) {
    return scan_sequential_impl(params, {}, x, h0);
}

ScanResult ssm_scan_sequential(std::span<const SsmParams> steps, const Sequence& x, const Vec& h0) {
    if (steps.empty()) throw DimensionError("scan: empty per-step parameter list");
    return scan_sequential_impl(steps[0], steps, x, h0);
}

ScanResult ssm_scan_chunked(const SsmParams& params, const Sequence& x, const Vec& h0, int chunk_len,
                            bool parallel) {
    return scan_chunked_impl(params, {}, x, h0, chunk_len, parallel);
}

ScanResult ssm_scan_chunked(std::span<const SsmParams> steps, const Sequence& x, const Vec& h0,
                            int chunk_len, bool parallel) {
    if (steps.empty()) throw DimensionError("scan: empty per-step parameter list");
    return scan_chunked_impl(steps[0], steps, x, h0, chunk_len, parallel);
}

std::vector<ScanResult> ssm_scan_batch(const SsmParams& params, std::span<const Sequence> xs,
                                       const Vec& h0, bool parallel) {
    std::vector<ScanResult> out(xs.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = ssm_scan_sequential(params, xs[i], h0);
    return out;
}

void SelectorParams::validate() const {
    const int s = state_dim();
    if (s <= 0) throw DimensionError("SelectorParams: empty state");
    for (double r : rates)
        if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("rates", "SelectorParams: rates must be positive");
    if (static_cast<int>(w_dt.size()) != in_dim() || static_cast<int>(u_b.size()) != in_dim() ||
        static_cast<int>(u_c.size()) != in_dim())
        throw DimensionError("SelectorParams: projection widths must match the input width");
    if (b_base.rows != s || c_base.cols != s) throw DimensionError("SelectorParams: base matrix shapes");
    if (d_ft.rows != out_dim() || d_ft.cols != in_dim()) throw DimensionError("SelectorParams: D shape");
    if (!std::isfinite(b_dt) || !all_finite(std::span<const double>(w_dt)) || !all_finite(b_base) ||
        !all_finite(c_base) || !all_finite(d_ft))
        throw NonFiniteError("SelectorParams: non-finite entries");
}

SelectorParams SelectorParams::random(int state, int dim_in, int dim_out, Rng& rng) {
    SelectorParams sel;
    sel.w_dt.resize(dim_in);
    for (auto& v : sel.w_dt) v = rng.normal(0.0, 0.5);
    sel.b_dt = rng.normal(0.0, 0.5);
    sel.rates.resize(state);
    for (auto& v : sel.rates) v = rng.uniform(0.2, 2.0);
    sel.b_base = Mat(state, dim_in);
    for (auto& v : sel.b_base.data) v = rng.normal(0.0, 0.5);
    sel.u_b.resize(dim_in);
    for (auto& v : sel.u_b) v = rng.normal(0.0, 0.3);
    sel.c_base = Mat(dim_out, state);
    for (auto& v : sel.c_base.data) v = rng.normal(0.0, 0.5);
    sel.u_c.resize(dim_in);
    for (auto& v : sel.u_c) v = rng.normal(0.0, 0.3);
    sel.d_ft = Mat(dim_out, dim_in);
    for (auto& v : sel.d_ft.data) v = rng.normal(0.0, 0.3);
    return sel;
}

SsmParams selective_params(const SelectorParams& sel, std::span<const double> x_t) {
    sel.validate();
    if (static_cast<int>(x_t.size()) != sel.in_dim())
        throw DimensionError("selective_params: input width mismatch");
    const double delta_full = softplus(dot(std::span<const double>(sel.w_dt), x_t) + sel.b_dt);
    const double gate_b = 1.0 + std::tanh(dot(std::span<const double>(sel.u_b), x_t));
    const double gate_c = 1.0 + std::tanh(dot(std::span<const double>(sel.u_c), x_t));
    if (!std::isfinite(delta_full) || !std::isfinite(gate_b) || !std::isfinite(gate_c))
        throw NonFiniteError("selective_params: non-finite projection output");

    SsmParams p;
    p.a_kind = SsmParams::AKind::diagonal;
    p.a_diag.resize(sel.rates.size());
    for (std::size_t i = 0; i < sel.rates.size(); ++i) p.a_diag[i] = std::exp(-delta_full * sel.rates[i]);
    p.b = sel.b_base;
    for (auto& v : p.b.data) v *= gate_b;
    p.c = sel.c_base;
    for (auto& v : p.c.data) v *= gate_c;
    p.d = sel.d_ft;
    return p;
}

ScanResult selective_scan(const SelectorParams& sel, const Sequence& x, const Vec& h0) {
    x.validate();
    std::vector<SsmParams> steps;
    steps.reserve(static_cast<std::size_t>(x.len));
    for (int t = 0; t < x.len; ++t) steps.push_back(selective_params(sel, x.row_span(t)));
    return ssm_scan_sequential(std::span<const SsmParams>(steps), x, h0);
}

}  // namespace hsse
