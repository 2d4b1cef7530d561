#include "hsse/integrate.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hsse {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kNullStepFraction = 1e-6;
}  // namespace

Scheme scheme_from_string(const std::string& name) {
    if (name == "leapfrog") return Scheme::leapfrog;
    if (name == "euler") return Scheme::euler;
    if (name == "rk4") return Scheme::rk4;
    throw ConfigError("unknown integration scheme '" + name + "' (expected leapfrog|euler|rk4)");
}

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::leapfrog: return "leapfrog";
        case Scheme::euler: return "euler";
        case Scheme::rk4: return "rk4";
    }
    return "?";
}

void IntegratorConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt", "IntegratorConfig: dt must be positive");
    if (n_steps < 0) throw ValidationError("n_steps", "IntegratorConfig: n_steps must be >= 0");
    for (double f : vsync)
        if (!std::isfinite(f) || f < 0.0)
            throw ValidationError("vsync", "IntegratorConfig: frequencies must be finite and nonnegative");
}

double Trajectory::max_abs_drift() const {
    double m = 0.0;
    for (double e : energies) m = std::max(m, std::abs(e - energies.front()));
    return m;
}

double Trajectory::mean_abs_drift() const {
    if (energies.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t t = 1; t < energies.size(); ++t) s += std::abs(energies[t] - energies.front());
    return s / static_cast<double>(energies.size() - 1);
}

double Trajectory::max_rel_drift() const {
    const double h0 = std::abs(energies.front());
    return max_abs_drift() / (h0 > 0.0 ? h0 : 1.0);
}

PhaseState leapfrog_step(const PhaseState& state, const ForceFn& force, double dt) {
    if (!std::isfinite(dt)) throw ValidationError("dt", "leapfrog_step: dt must be finite");
    state.validate();
    PhaseState next = state;
    detail::leapfrog_step_inplace(next.h, next.p, force, dt);
    return next;
}

PhaseState leapfrog_step(const PhaseState& state, const ExpertBank& bank, double dt) {
    return leapfrog_step(
        state,
        ForceFn([&bank](std::span<const double> h) {
            Vec f = grad_potential(bank, h);
            for (auto& v : f) v = -v;
            return f;
        }),
        dt);
}

PhaseState euler_step(const PhaseState& state, const ExpertBank& bank, double dt) {
    state.validate();
    const Vec g = grad_potential(bank, state.h);
    PhaseState next = state;
    for (std::size_t i = 0; i < next.h.size(); ++i) {
        next.h[i] = state.h[i] + dt * state.p[i];
        next.p[i] = state.p[i] - dt * g[i];
    }
    return next;
}

PhaseState rk4_step(const PhaseState& state, const ExpertBank& bank, double dt) {
    state.validate();
    const std::size_t d = state.h.size();
    // y' = (p, -grad V(h))
    auto deriv = [&](const Vec& h, const Vec& p, Vec& dh, Vec& dp) {
        dh = p;
        dp = grad_potential(bank, h);
        for (auto& v : dp) v = -v;
    };
    Vec k1h(d), k1p(d), k2h(d), k2p(d), k3h(d), k3p(d), k4h(d), k4p(d), th(d), tp(d);
    deriv(state.h, state.p, k1h, k1p);
    for (std::size_t i = 0; i < d; ++i) { th[i] = state.h[i] + 0.5 * dt * k1h[i]; tp[i] = state.p[i] + 0.5 * dt * k1p[i]; }
    deriv(th, tp, k2h, k2p);
    for (std::size_t i = 0; i < d; ++i) { th[i] = state.h[i] + 0.5 * dt * k2h[i]; tp[i] = state.p[i] + 0.5 * dt * k2p[i]; }
    deriv(th, tp, k3h, k3p);
    for (std::size_t i = 0; i < d; ++i) { th[i] = state.h[i] + dt * k3h[i]; tp[i] = state.p[i] + dt * k3p[i]; }
    deriv(th, tp, k4h, k4p);
    PhaseState next = state;
    for (std::size_t i = 0; i < d; ++i) {
        next.h[i] = state.h[i] + dt / 6.0 * (k1h[i] + 2.0 * k2h[i] + 2.0 * k3h[i] + k4h[i]);
        next.p[i] = state.p[i] + dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
    }
    return next;
}

double vsync_timestep(double dt, long n, std::span<const double> freqs) {
    if (freqs.empty())
        throw ValidationError("freqs", "vsync_timestep: empty frequency list; bypass V-Sync instead");
    if (n < 0) throw ValidationError("n", "vsync_timestep: step index must be >= 0");
    const double t = static_cast<double>(n) * dt;
    double phase_sum = 0.0;
    for (double f : freqs) phase_sum += std::cos(kTwoPi * f * t);
    double eff = dt * (1.0 + phase_sum / static_cast<double>(freqs.size()));
    if (eff < 0.0) eff = 0.0;              // cos rounding can undershoot by one ulp
    if (eff > 2.0 * dt) eff = 2.0 * dt;
    return eff;
}

Trajectory rollout(const PhaseState& state0, const ExpertBank& bank, const IntegratorConfig& config) {
    config.validate();
    state0.validate();
    bank.validate();

    Trajectory traj;
    traj.states.reserve(static_cast<std::size_t>(config.n_steps) + 1);
    traj.energies.reserve(static_cast<std::size_t>(config.n_steps) + 1);
    traj.states.push_back(state0);
    traj.energies.push_back(hamiltonian_energy(bank, state0));

    for (int n = 0; n < config.n_steps; ++n) {
        const double dt_eff =
            config.vsync.empty() ? config.dt : vsync_timestep(config.dt, n, config.vsync);
        const bool null_step = dt_eff < config.dt * kNullStepFraction;
        traj.effective_dts.push_back(dt_eff);
        traj.null_steps.push_back(null_step);

        if (null_step) {
            // executed as an explicit no-op so trajectory length stays deterministic
            traj.states.push_back(traj.states.back());
            traj.energies.push_back(traj.energies.back());
            continue;
        }
        try {
            const PhaseState& cur = traj.states.back();
            PhaseState next;
            switch (config.scheme) {
                case Scheme::leapfrog: next = leapfrog_step(cur, bank, dt_eff); break;
                case Scheme::euler: next = euler_step(cur, bank, dt_eff); break;
                case Scheme::rk4: next = rk4_step(cur, bank, dt_eff); break;
            }
            if (!all_finite(std::span<const double>(next.h)) ||
                !all_finite(std::span<const double>(next.p))) {
                traj.truncated = true;
                traj.error = "non-finite state at step " + std::to_string(n + 1);
                traj.effective_dts.pop_back();
                traj.null_steps.pop_back();
                break;
            }
            traj.states.push_back(std::move(next));
            traj.energies.push_back(hamiltonian_energy(bank, traj.states.back()));
        } catch (const SelectionBoundaryError& e) {
            traj.truncated = true;
            traj.error = std::string("selection boundary at step ") + std::to_string(n + 1) + ": " + e.what();
            traj.effective_dts.pop_back();
            traj.null_steps.pop_back();
            break;
        }
    }
    return traj;
}

std::vector<Trajectory> rollout_batch(std::span<const PhaseState> states0, const ExpertBank& bank,
                                      const IntegratorConfig& config, bool parallel) {
    std::vector<Trajectory> out(states0.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::size_t i = 0; i < states0.size(); ++i) out[i] = rollout(states0[i], bank, config);
    return out;
}

HfmResult hfm_integrate(const Vec& z0, const ExpertBank& bank, int n_steps, double step_size) {
    if (!(step_size > 0.0) || !std::isfinite(step_size))
        throw ValidationError("step_size", "hfm_integrate: step_size must be positive");
    if (n_steps < 0) throw ValidationError("n_steps", "hfm_integrate: n_steps must be >= 0");
    if (!all_finite(std::span<const double>(z0))) throw NonFiniteError("hfm_integrate: non-finite z0");

    auto neg_grad = [&](const Vec& z) {
        Vec g = grad_potential(bank, z);
        for (auto& v : g) v = -v;
        return g;
    };

    HfmResult out;
    out.z = z0;
    out.v_trace.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.v_trace.push_back(total_potential(bank, out.z));
    const std::size_t d = z0.size();
    Vec tmp(d);
    for (int s = 0; s < n_steps; ++s) {
        const Vec k1 = neg_grad(out.z);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = out.z[i] + 0.5 * step_size * k1[i];
        const Vec k2 = neg_grad(tmp);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = out.z[i] + 0.5 * step_size * k2[i];
        const Vec k3 = neg_grad(tmp);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = out.z[i] + step_size * k3[i];
        const Vec k4 = neg_grad(tmp);
        for (std::size_t i = 0; i < d; ++i)
            out.z[i] += step_size / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!all_finite(std::span<const double>(out.z)))
            throw NonFiniteError("hfm_integrate: non-finite state at step " + std::to_string(s + 1));
        out.v_trace.push_back(total_potential(bank, out.z));
    }
    return out;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    const int d = traj.states.empty() ? 0 : traj.states.front().dim();
    os << "step,dt_eff";
    for (int i = 0; i < d; ++i) os << ",h" << i;
    for (int i = 0; i < d; ++i) os << ",p" << i;
    os << ",H\n";
    char buf[32];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf;
    };
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        os << t << ",";
        emit(t == 0 ? 0.0 : traj.effective_dts[t - 1]);
        for (int i = 0; i < d; ++i) {
            os << ",";
            emit(traj.states[t].h[static_cast<std::size_t>(i)]);
        }
        for (int i = 0; i < d; ++i) {
            os << ",";
            emit(traj.states[t].p[static_cast<std::size_t>(i)]);
        }
        os << ",";
        emit(traj.energies[t]);
        os << "\n";
    }
}

}  // namespace hsse
