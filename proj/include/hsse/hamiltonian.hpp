#pragma once

// Gated expert potentials and the phase-space energy
//
//   H(h, p) = 1/2 ||p||^2 + V(h),   V(h) = sum_i g_i(h) V_i(h)
//
// where the g_i are softmax weights over the top-K router logits,
// renormalized so that sum g_i = 1 with exactly K nonzeros. The discrete
// selection is treated as locally constant for gradients; when the K-th and
// (K+1)-th logits are closer than kSelectionBoundaryTol the gradient is
// refused (SelectionBoundaryError) instead of silently crossing the switch.
//
// Expert forms: analytic quadratic V = 1/2 h'Qh + b'h + c, and a two-layer
// tanh network V = w2 . tanh(W1 h + b1) + c. Both are smooth, so leapfrog
// force fields stay continuous within a fixed active set.

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include "hsse/linalg.hpp"
#include "hsse/tape.hpp"

namespace hsse {

class Rng;

inline constexpr double kSelectionBoundaryTol = 1e-9;

struct PhaseState {
    Vec h;  // position
    Vec p;  // momentum

    void validate() const;
    int dim() const { return static_cast<int>(h.size()); }
};

struct ExpertPotential {
    enum class Kind { quadratic, feedforward };

    Kind kind = Kind::quadratic;
    // quadratic
    Mat q;
    Vec b;
    double c = 0.0;
    // feedforward
    Mat w1;
    Vec b1;
    Vec w2;

    int dim() const { return kind == Kind::quadratic ? q.rows : w1.cols; }
    void validate() const;

    static ExpertPotential quadratic_expert(Mat q, Vec b, double c);
    static ExpertPotential feedforward_expert(Mat w1, Vec b1, Vec w2, double c);
    static ExpertPotential zero(int dim);  // V == c == 0
    // PSD quadratic with eigenvalues drawn from [eig_lo, eig_hi].
    static ExpertPotential random_quadratic(int dim, Rng& rng, double eig_lo = 0.3,
                                            double eig_hi = 2.0);
    static ExpertPotential random_feedforward(int dim, int width, Rng& rng, double scale = 0.8);
};

struct ExpertBank {
    std::vector<ExpertPotential> experts;
    Mat router_w;  // N x D_h
    Vec router_b;  // N
    int top_k = 1;

    int n_experts() const { return static_cast<int>(experts.size()); }
    int dim() const { return experts.empty() ? 0 : experts.front().dim(); }
    void validate() const;

    static ExpertBank single(ExpertPotential expert);
    static ExpertBank random(int n_experts, int top_k, int dim, ExpertPotential::Kind kind,
                             Rng& rng, double router_scale = 0.5);
};

struct GateResult {
    Vec weights;              // length N, exactly top_k nonzeros, sums to 1
    std::vector<int> active;  // selected expert indices, descending logit order
    double boundary_gap;      // K-th minus (K+1)-th logit; +inf when K == N
};

GateResult gate(const ExpertBank& bank, std::span<const double> h);
double expert_value(const ExpertPotential& e, std::span<const double> h);
Vec expert_grad(const ExpertPotential& e, std::span<const double> h);
double total_potential(const ExpertBank& bank, std::span<const double> h);
double hamiltonian_energy(const ExpertBank& bank, const PhaseState& state);

// Full product-rule gradient through both the gates and the active experts;
// throws SelectionBoundaryError when the selection is not locally constant.
Vec grad_potential(const ExpertBank& bank, std::span<const double> h);

// Largest eigenvalue over the bank's quadratic experts (power iteration);
// used to bound gradient-flow step sizes.
double max_quadratic_eigenvalue(const ExpertBank& bank);

namespace detail {

template <class S>
struct ExpertView {
    int kind = 0;  // 0 quadratic, 1 feedforward
    const MatT<S>* q = nullptr;
    std::span<const S> b;
    S c{};
    const MatT<S>* w1 = nullptr;
    std::span<const S> b1;
    std::span<const S> w2;
};

template <class S>
struct BankView {
    std::vector<ExpertView<S>> experts;
    const MatT<S>* router_w = nullptr;
    std::span<const S> router_b;
    int top_k = 1;
};

BankView<double> bank_view(const ExpertBank& bank);

// Symmetrized quadratic product: (sym(Q) h)_i. Exact pass-through when Q is
// stored exactly symmetric; keeps tape gradients w.r.t. Q symmetric so that
// gradient updates cannot drift the matrix off the invariant.
template <class S>
VecT<S> sym_matvec(const MatT<S>& q, std::span<const S> h) {
    VecT<S> out;
    out.reserve(q.rows);
    for (int i = 0; i < q.rows; ++i) {
        S acc = (q.at(i, 0) + q.at(0, i)) * 0.5 * h[0];
        for (int j = 1; j < q.cols; ++j) acc = acc + (q.at(i, j) + q.at(j, i)) * 0.5 * h[j];
        out.push_back(acc);
    }
    return out;
}

template <class S>
S expert_value_impl(const ExpertView<S>& e, std::span<const S> h) {
    using std::tanh;
    if (e.kind == 0) {
        const VecT<S> qh = sym_matvec(*e.q, h);
        S acc = (qh[0] * 0.5 + e.b[0]) * h[0];
        for (std::size_t i = 1; i < h.size(); ++i) acc = acc + (qh[i] * 0.5 + e.b[i]) * h[i];
        return acc + e.c;
    }
    VecT<S> hidden = matvec(*e.w1, h);
    S acc = e.c;
    for (std::size_t k = 0; k < hidden.size(); ++k) acc = acc + e.w2[k] * tanh(hidden[k] + e.b1[k]);
    return acc;
}

template <class S>
VecT<S> expert_grad_impl(const ExpertView<S>& e, std::span<const S> h) {
    using std::tanh;
    if (e.kind == 0) {
        VecT<S> g = sym_matvec(*e.q, h);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] + e.b[i];
        return g;
    }
    VecT<S> hidden = matvec(*e.w1, h);
    VecT<S> gain;
    gain.reserve(hidden.size());
    for (std::size_t k = 0; k < hidden.size(); ++k) {
        const S t = tanh(hidden[k] + e.b1[k]);
        gain.push_back(e.w2[k] * (1.0 - t * t));
    }
    VecT<S> g;
    g.reserve(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
        S acc = gain[0] * e.w1->at(0, static_cast<int>(j));
        for (std::size_t k = 1; k < gain.size(); ++k)
            acc = acc + gain[k] * e.w1->at(static_cast<int>(k), static_cast<int>(j));
        g.push_back(acc);
    }
    return g;
}

template <class S>
VecT<S> router_logits(const BankView<S>& bank, std::span<const S> h) {
    VecT<S> logits = matvec(*bank.router_w, h);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = logits[i] + bank.router_b[i];
    return logits;
}

struct Selection {
    std::vector<int> active;  // descending logit order, index-ascending ties
    double boundary_gap = std::numeric_limits<double>::infinity();
};

template <class S>
Selection select_top_k(const VecT<S>& logits, int top_k) {
    std::vector<int> order(logits.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double va = value_of(logits[static_cast<std::size_t>(a)]);
        const double vb = value_of(logits[static_cast<std::size_t>(b)]);
        if (va != vb) return va > vb;
        return a < b;
    });
    Selection sel;
    sel.active.assign(order.begin(), order.begin() + top_k);
    if (top_k < static_cast<int>(logits.size()))
        sel.boundary_gap = value_of(logits[static_cast<std::size_t>(order[static_cast<std::size_t>(top_k) - 1])]) -
                           value_of(logits[static_cast<std::size_t>(order[static_cast<std::size_t>(top_k)])]);
    return sel;
}

// Softmax over the selected logits, max-subtracted. Returned weights align
// with `active`.
template <class S>
VecT<S> active_gate_weights(const VecT<S>& logits, const std::vector<int>& active) {
    using std::exp;
    double max_logit = value_of(logits[static_cast<std::size_t>(active[0])]);
    for (int i : active) max_logit = std::max(max_logit, value_of(logits[static_cast<std::size_t>(i)]));
    VecT<S> w;
    w.reserve(active.size());
    for (int i : active) w.push_back(exp(logits[static_cast<std::size_t>(i)] - max_logit));
    S z = w[0];
    for (std::size_t i = 1; i < w.size(); ++i) z = z + w[i];
    for (auto& wi : w) wi = wi / z;
    return w;
}

template <class S>
S total_potential_impl(const BankView<S>& bank, std::span<const S> h) {
    const VecT<S> logits = router_logits(bank, h);
    const Selection sel = select_top_k(logits, bank.top_k);
    const VecT<S> g = active_gate_weights(logits, sel.active);
    S acc = g[0] * expert_value_impl(bank.experts[static_cast<std::size_t>(sel.active[0])], h);
    for (std::size_t i = 1; i < sel.active.size(); ++i)
        acc = acc + g[i] * expert_value_impl(bank.experts[static_cast<std::size_t>(sel.active[i])], h);
    return acc;
}

// grad V = sum_i [ g_i grad V_i + V_i grad g_i ],
// grad g_i = g_i (R_i - sum_j g_j R_j) over the frozen active set.
template <class S>
VecT<S> grad_potential_impl(const BankView<S>& bank, std::span<const S> h, double* gap_out) {
    const VecT<S> logits = router_logits(bank, h);
    const Selection sel = select_top_k(logits, bank.top_k);
    if (gap_out) *gap_out = sel.boundary_gap;
    const VecT<S> g = active_gate_weights(logits, sel.active);
    const std::size_t n_active = sel.active.size();
    const std::size_t dim = h.size();

    std::vector<VecT<S>> grads(n_active);
    VecT<S> values;
    values.reserve(n_active);
    for (std::size_t i = 0; i < n_active; ++i) {
        const auto& e = bank.experts[static_cast<std::size_t>(sel.active[i])];
        grads[i] = expert_grad_impl(e, h);
        values.push_back(expert_value_impl(e, h));
    }

    VecT<S> out;
    out.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        S rbar = g[0] * bank.router_w->at(sel.active[0], static_cast<int>(j));
        for (std::size_t i = 1; i < n_active; ++i)
            rbar = rbar + g[i] * bank.router_w->at(sel.active[i], static_cast<int>(j));
        S acc = g[0] * grads[0][j] +
                values[0] * g[0] * (bank.router_w->at(sel.active[0], static_cast<int>(j)) - rbar);
        for (std::size_t i = 1; i < n_active; ++i)
            acc = acc + g[i] * grads[i][j] +
                  values[i] * g[i] * (bank.router_w->at(sel.active[i], static_cast<int>(j)) - rbar);
        out.push_back(acc);
    }
    return out;
}

}  // namespace detail

}  // namespace hsse
