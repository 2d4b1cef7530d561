#pragma once

// Phase-space integrators and rollouts.
//
// leapfrog_step is the symplectic workhorse:
//   p_{t+1/2} = p_t - (dt/2) grad V(h_t)
//   h_{t+1}   = h_t + dt p_{t+1/2}
//   p_{t+1}   = p_{t+1/2} - (dt/2) grad V(h_{t+1})
// exactly two gradient evaluations per step, no caching across calls.
// Explicit Euler and RK4 are kept as non-symplectic controls and reference
// integrators. V-Sync modulates the timestep with a cosine oscillator bank:
//   dt_eff(n) = dt (1 + (1/K) sum_k cos(2 pi f_k n dt)) in [0, 2 dt].
//
// hfm_integrate follows the gradient flow dz/dt = -grad V(z) with fixed-step
// RK4 and records the potential trace.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hsse/hamiltonian.hpp"
#include "hsse/linalg.hpp"

namespace hsse {

enum class Scheme { leapfrog, euler, rk4 };

Scheme scheme_from_string(const std::string& name);
std::string to_string(Scheme s);

struct IntegratorConfig {
    double dt = 0.1;
    int n_steps = 0;
    std::vector<double> vsync;  // oscillator frequencies; empty disables V-Sync
    Scheme scheme = Scheme::leapfrog;

    void validate() const;
};

struct Trajectory {
    std::vector<PhaseState> states;    // n_steps + 1
    std::vector<double> energies;      // H recorded with every state
    std::vector<double> effective_dts; // per transition
    std::vector<bool> null_steps;      // per transition; dt_eff below dt * 1e-6
    bool truncated = false;            // stopped early (non-finite state or boundary hit)
    std::string error;

    int n_steps() const { return static_cast<int>(effective_dts.size()); }
    double max_abs_drift() const;
    double mean_abs_drift() const;
    double max_rel_drift() const;  // relative to |H_0|
};

// Force field = -grad V. The callable overloads let tests count gradient
// evaluations; the bank overloads are the production path.
using ForceFn = std::function<Vec(std::span<const double>)>;

PhaseState leapfrog_step(const PhaseState& state, const ExpertBank& bank, double dt);
PhaseState leapfrog_step(const PhaseState& state, const ForceFn& force, double dt);
PhaseState euler_step(const PhaseState& state, const ExpertBank& bank, double dt);
PhaseState rk4_step(const PhaseState& state, const ExpertBank& bank, double dt);

double vsync_timestep(double dt, long n, std::span<const double> freqs);

Trajectory rollout(const PhaseState& state0, const ExpertBank& bank, const IntegratorConfig& config);

// Independent rollouts in parallel; `parallel = false` is the serial reference.
std::vector<Trajectory> rollout_batch(std::span<const PhaseState> states0, const ExpertBank& bank,
                                      const IntegratorConfig& config, bool parallel = true);

struct HfmResult {
    Vec z;
    std::vector<double> v_trace;  // V(z_k), k = 0..n_steps
};

HfmResult hfm_integrate(const Vec& z0, const ExpertBank& bank, int n_steps, double step_size);

void write_trajectory_csv(const Trajectory& traj, std::ostream& os);

namespace detail {

// One leapfrog step over generic scalars; force(h) must return -grad V(h).
template <class S, class Force>
void leapfrog_step_inplace(std::vector<S>& h, std::vector<S>& p, Force&& force, double dt) {
    const double half = 0.5 * dt;
    VecT<S> f = force(std::span<const S>(h));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = p[i] + f[i] * half;
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] + p[i] * dt;
    f = force(std::span<const S>(h));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = p[i] + f[i] * half;
}

}  // namespace detail

}  // namespace hsse
