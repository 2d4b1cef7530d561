#include "hsse/hamiltonian.hpp"

#include <cmath>
#include <string>

#include "hsse/rng.hpp"

namespace hsse {

void PhaseState::validate() const {
    if (h.size() != p.size()) throw DimensionError("PhaseState: |h| must equal |p|");
    if (h.empty()) throw DimensionError("PhaseState: empty state");
    if (!all_finite(std::span<const double>(h)) || !all_finite(std::span<const double>(p)))
        throw NonFiniteError("PhaseState: non-finite entries");
}

void ExpertPotential::validate() const {
    if (kind == Kind::quadratic) {
        if (q.rows != q.cols || q.rows < 1) throw DimensionError("ExpertPotential: Q must be square");
        if (static_cast<int>(b.size()) != q.rows) throw DimensionError("ExpertPotential: |b| must match Q");
        if (!all_finite(q) || !all_finite(std::span<const double>(b)) || !std::isfinite(c))
            throw NonFiniteError("ExpertPotential: non-finite parameters");
        for (int i = 0; i < q.rows; ++i)
            for (int j = i + 1; j < q.cols; ++j)
                if (std::abs(q.at(i, j) - q.at(j, i)) > 1e-12)
                    throw ValidationError("q", "ExpertPotential: Q must be symmetric within 1e-12");
    } else {
        if (w1.rows < 1 || w1.cols < 1) throw DimensionError("ExpertPotential: empty W1");
        if (static_cast<int>(b1.size()) != w1.rows || static_cast<int>(w2.size()) != w1.rows)
            throw DimensionError("ExpertPotential: hidden widths inconsistent");
        if (!all_finite(w1) || !all_finite(std::span<const double>(b1)) ||
            !all_finite(std::span<const double>(w2)) || !std::isfinite(c))
            throw NonFiniteError("ExpertPotential: non-finite parameters");
    }
}

ExpertPotential ExpertPotential::quadratic_expert(Mat q, Vec b, double c) {
    ExpertPotential e;
    e.kind = Kind::quadratic;
    e.q = std::move(q);
    e.b = std::move(b);
    e.c = c;
    e.validate();
    return e;
}

ExpertPotential ExpertPotential::feedforward_expert(Mat w1, Vec b1, Vec w2, double c) {
    ExpertPotential e;
    e.kind = Kind::feedforward;
    e.w1 = std::move(w1);
    e.b1 = std::move(b1);
    e.w2 = std::move(w2);
    e.c = c;
    e.validate();
    return e;
}

ExpertPotential ExpertPotential::zero(int dim) {
    return quadratic_expert(Mat(dim, dim), Vec(static_cast<std::size_t>(dim), 0.0), 0.0);
}

namespace {

// Random orthogonal matrix by Gram-Schmidt on a gaussian matrix.
Mat random_orthogonal(int dim, Rng& rng) {
    Mat g(dim, dim);
    for (auto& v : g.data) v = rng.normal();
    for (int col = 0; col < dim; ++col) {
        for (int prev = 0; prev < col; ++prev) {
            double proj = 0.0;
            for (int r = 0; r < dim; ++r) proj += g.at(r, col) * g.at(r, prev);
            for (int r = 0; r < dim; ++r) g.at(r, col) -= proj * g.at(r, prev);
        }
        double norm = 0.0;
        for (int r = 0; r < dim; ++r) norm += g.at(r, col) * g.at(r, col);
        norm = std::sqrt(norm);
        if (norm < 1e-12) {  // degenerate draw, restart the column with a fixed basis vector
            for (int r = 0; r < dim; ++r) g.at(r, col) = (r == col) ? 1.0 : 0.0;
            --col;
            continue;
        }
        for (int r = 0; r < dim; ++r) g.at(r, col) /= norm;
    }
    return g;
}

}  // namespace

ExpertPotential ExpertPotential::random_quadratic(int dim, Rng& rng, double eig_lo, double eig_hi) {
    const Mat u = random_orthogonal(dim, rng);
    Vec eigs(static_cast<std::size_t>(dim));
    for (auto& e : eigs) e = rng.uniform(eig_lo, eig_hi);
    Mat q(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) {
            double acc = 0.0;
            for (int k = 0; k < dim; ++k) acc += u.at(i, k) * eigs[static_cast<std::size_t>(k)] * u.at(j, k);
            q.at(i, j) = acc;
            q.at(j, i) = acc;  // exactly symmetric storage
        }
    Vec b(static_cast<std::size_t>(dim));
    for (auto& v : b) v = rng.normal(0.0, 0.2);
    return quadratic_expert(std::move(q), std::move(b), rng.uniform(0.0, 0.5));
}

ExpertPotential ExpertPotential::random_feedforward(int dim, int width, Rng& rng, double scale) {
    Mat w1(width, dim);
    for (auto& v : w1.data) v = rng.normal(0.0, scale);
    Vec b1(static_cast<std::size_t>(width));
    for (auto& v : b1) v = rng.normal(0.0, 0.3);
    Vec w2(static_cast<std::size_t>(width));
    for (auto& v : w2) v = rng.normal(0.0, scale);
    return feedforward_expert(std::move(w1), std::move(b1), std::move(w2), rng.uniform(0.0, 0.5));
}

void ExpertBank::validate() const {
    if (experts.empty()) throw DimensionError("ExpertBank: no experts");
    const int d = experts.front().dim();
    for (const auto& e : experts) {
        e.validate();
        if (e.dim() != d) throw DimensionError("ExpertBank: experts disagree on dimension");
    }
    const int n = n_experts();
    if (top_k < 1 || top_k > n) throw ValidationError("top_k", "ExpertBank: require 1 <= K <= N");
    if (router_w.rows != n || router_w.cols != d) throw DimensionError("ExpertBank: router must be N x D_h");
    if (static_cast<int>(router_b.size()) != n) throw DimensionError("ExpertBank: router bias length");
    if (!all_finite(router_w) || !all_finite(std::span<const double>(router_b)))
        throw NonFiniteError("ExpertBank: non-finite router parameters");
}

ExpertBank ExpertBank::single(ExpertPotential expert) {
    ExpertBank bank;
    const int d = expert.dim();
    bank.experts.push_back(std::move(expert));
    bank.router_w = Mat(1, d);
    bank.router_b = Vec(1, 0.0);
    bank.top_k = 1;
    bank.validate();
    return bank;
}

ExpertBank ExpertBank::random(int n_experts, int top_k, int dim, ExpertPotential::Kind kind,
                              Rng& rng, double router_scale) {
    ExpertBank bank;
    bank.experts.reserve(static_cast<std::size_t>(n_experts));
    for (int i = 0; i < n_experts; ++i)
        bank.experts.push_back(kind == ExpertPotential::Kind::quadratic
                                   ? ExpertPotential::random_quadratic(dim, rng)
                                   : ExpertPotential::random_feedforward(dim, std::max(4, 2 * dim), rng));
    bank.router_w = Mat(n_experts, dim);
    for (auto& v : bank.router_w.data) v = rng.normal(0.0, router_scale);
    bank.router_b = Vec(static_cast<std::size_t>(n_experts));
    for (auto& v : bank.router_b) v = rng.normal(0.0, router_scale);
    bank.top_k = top_k;
    bank.validate();
    return bank;
}

namespace detail {

BankView<double> bank_view(const ExpertBank& bank) {
    BankView<double> view;
    view.router_w = &bank.router_w;
    view.router_b = std::span<const double>(bank.router_b);
    view.top_k = bank.top_k;
    view.experts.reserve(bank.experts.size());
    for (const auto& e : bank.experts) {
        ExpertView<double> ev;
        if (e.kind == ExpertPotential::Kind::quadratic) {
            ev.kind = 0;
            ev.q = &e.q;
            ev.b = std::span<const double>(e.b);
            ev.c = e.c;
        } else {
            ev.kind = 1;
            ev.w1 = &e.w1;
            ev.b1 = std::span<const double>(e.b1);
            ev.w2 = std::span<const double>(e.w2);
            ev.c = e.c;
        }
        view.experts.push_back(ev);
    }
    return view;
}

}  // namespace detail

GateResult gate(const ExpertBank& bank, std::span<const double> h) {
    if (static_cast<int>(h.size()) != bank.dim()) throw DimensionError("gate: input dimension mismatch");
    if (!all_finite(h)) throw NonFiniteError("gate: non-finite input");
    const auto view = detail::bank_view(bank);
    const Vec logits = detail::router_logits(view, h);
    if (!all_finite(std::span<const double>(logits))) throw NonFiniteError("gate: non-finite router output");
    const detail::Selection sel = detail::select_top_k(logits, bank.top_k);
    const Vec active_w = detail::active_gate_weights(logits, sel.active);

    GateResult out;
    out.weights.assign(static_cast<std::size_t>(bank.n_experts()), 0.0);
    for (std::size_t i = 0; i < sel.active.size(); ++i)
        out.weights[static_cast<std::size_t>(sel.active[i])] = active_w[i];
    out.active = sel.active;
    out.boundary_gap = sel.boundary_gap;
    return out;
}

double expert_value(const ExpertPotential& e, std::span<const double> h) {
    const ExpertBank tmp = ExpertBank::single(e);
    return detail::expert_value_impl(detail::bank_view(tmp).experts[0], h);
}

Vec expert_grad(const ExpertPotential& e, std::span<const double> h) {
    const ExpertBank tmp = ExpertBank::single(e);
    return detail::expert_grad_impl(detail::bank_view(tmp).experts[0], h);
}

double total_potential(const ExpertBank& bank, std::span<const double> h) {
    if (static_cast<int>(h.size()) != bank.dim())
        throw DimensionError("total_potential: input dimension mismatch");
    if (!all_finite(h)) throw NonFiniteError("total_potential: non-finite input");
    return detail::total_potential_impl(detail::bank_view(bank), h);
}

double hamiltonian_energy(const ExpertBank& bank, const PhaseState& state) {
    state.validate();
    double kinetic = 0.0;
    for (double v : state.p) kinetic += v * v;
    return 0.5 * kinetic + total_potential(bank, state.h);
}

Vec grad_potential(const ExpertBank& bank, std::span<const double> h) {
    if (static_cast<int>(h.size()) != bank.dim())
        throw DimensionError("grad_potential: input dimension mismatch");
    if (!all_finite(h)) throw NonFiniteError("grad_potential: non-finite input");
    double gap = 0.0;
    Vec g = detail::grad_potential_impl(detail::bank_view(bank), h, &gap);
    if (gap < kSelectionBoundaryTol)
        throw SelectionBoundaryError(gap, "grad_potential: top-K selection boundary (logit gap " +
                                              std::to_string(gap) + ")");
    if (!all_finite(std::span<const double>(g))) throw NonFiniteError("grad_potential: non-finite gradient");
    return g;
}

double max_quadratic_eigenvalue(const ExpertBank& bank) {
    double best = 0.0;
    Rng rng(12345);
    for (const auto& e : bank.experts) {
        if (e.kind != ExpertPotential::Kind::quadratic) continue;
        const int d = e.q.rows;
        Vec v(static_cast<std::size_t>(d));
        for (auto& x : v) x = rng.normal();
        double lambda = 0.0;
        for (int it = 0; it < 200; ++it) {
            Vec w(static_cast<std::size_t>(d), 0.0);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) w[static_cast<std::size_t>(i)] += e.q.at(i, j) * v[static_cast<std::size_t>(j)];
            const double n = norm2(std::span<const double>(w));
            if (n == 0.0) break;
            for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] / n;
            lambda = n;
        }
        best = std::max(best, lambda);
    }
    return best;
}

}  // namespace hsse
