#pragma once

// Reverse-accumulation gradient tape over scalars. Forward arithmetic on
// Var records one node per operation (at most two parents, local partials
// fixed at forward time); Tape::backward replays the arena once, so a
// single reverse pass costs one multiply-add per recorded edge.
//
// Primitives: + - * / neg, tanh, exp, log, sqrt, softplus, relu, absval,
// stop_grad. Everything the training graphs need (matrix products, gate
// softmax with frozen selection, leapfrog steps, reductions, the three
// losses) lowers onto these. Discrete choices (top-K selection, boundary
// checks) read Var::value() and are not differentiated through.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace hsse {

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::int32_t idx = -1;
    double v = 0.0;

    double value() const { return v; }
};

class Tape {
public:
    explicit Tape(std::size_t reserve_nodes = 1 << 14) {
        wa_.reserve(reserve_nodes);
        wb_.reserve(reserve_nodes);
        pa_.reserve(reserve_nodes);
        pb_.reserve(reserve_nodes);
    }

    void reset() {
        wa_.clear();
        wb_.clear();
        pa_.clear();
        pb_.clear();
        grads_.clear();
    }

    std::size_t size() const { return pa_.size(); }

    Var leaf(double value) { return {this, push(-1, 0.0, -1, 0.0), value}; }

    std::vector<Var> leaves(const std::vector<double>& values) {
        std::vector<Var> out;
        out.reserve(values.size());
        for (double v : values) out.push_back(leaf(v));
        return out;
    }

    std::int32_t push(std::int32_t a, double wa, std::int32_t b, double wb) {
        pa_.push_back(a);
        pb_.push_back(b);
        wa_.push_back(wa);
        wb_.push_back(wb);
        return static_cast<std::int32_t>(pa_.size() - 1);
    }

    // Reverse pass seeded with d(output)/d(output) = 1.
    void backward(const Var& output) {
        assert(output.tape == this && output.idx >= 0);
        grads_.assign(pa_.size(), 0.0);
        grads_[static_cast<std::size_t>(output.idx)] = 1.0;
        for (std::int32_t i = output.idx; i >= 0; --i) {
            const double g = grads_[static_cast<std::size_t>(i)];
            if (g == 0.0) continue;
            const std::int32_t a = pa_[static_cast<std::size_t>(i)];
            if (a >= 0) grads_[static_cast<std::size_t>(a)] += wa_[static_cast<std::size_t>(i)] * g;
            const std::int32_t b = pb_[static_cast<std::size_t>(i)];
            if (b >= 0) grads_[static_cast<std::size_t>(b)] += wb_[static_cast<std::size_t>(i)] * g;
        }
    }

    double grad(const Var& x) const {
        assert(x.tape == this && x.idx >= 0);
        return grads_.empty() ? 0.0 : grads_[static_cast<std::size_t>(x.idx)];
    }

private:
    std::vector<double> wa_, wb_;
    std::vector<std::int32_t> pa_, pb_;
    std::vector<double> grads_;
};

inline Var operator+(Var a, Var b) { return {a.tape, a.tape->push(a.idx, 1.0, b.idx, 1.0), a.v + b.v}; }
inline Var operator-(Var a, Var b) { return {a.tape, a.tape->push(a.idx, 1.0, b.idx, -1.0), a.v - b.v}; }
inline Var operator*(Var a, Var b) { return {a.tape, a.tape->push(a.idx, b.v, b.idx, a.v), a.v * b.v}; }
inline Var operator/(Var a, Var b) {
    const double inv = 1.0 / b.v;
    return {a.tape, a.tape->push(a.idx, inv, b.idx, -a.v * inv * inv), a.v * inv};
}
inline Var operator-(Var a) { return {a.tape, a.tape->push(a.idx, -1.0, -1, 0.0), -a.v}; }

inline Var operator+(Var a, double k) { return {a.tape, a.tape->push(a.idx, 1.0, -1, 0.0), a.v + k}; }
inline Var operator+(double k, Var a) { return a + k; }
inline Var operator-(Var a, double k) { return a + (-k); }
inline Var operator-(double k, Var a) { return {a.tape, a.tape->push(a.idx, -1.0, -1, 0.0), k - a.v}; }
inline Var operator*(Var a, double k) { return {a.tape, a.tape->push(a.idx, k, -1, 0.0), a.v * k}; }
inline Var operator*(double k, Var a) { return a * k; }
inline Var operator/(Var a, double k) { return a * (1.0 / k); }
inline Var operator/(double k, Var a) {
    const double inv = 1.0 / a.v;
    return {a.tape, a.tape->push(a.idx, -k * inv * inv, -1, 0.0), k * inv};
}

inline Var tanh(Var x) {
    const double y = std::tanh(x.v);
    return {x.tape, x.tape->push(x.idx, 1.0 - y * y, -1, 0.0), y};
}
inline Var exp(Var x) {
    const double y = std::exp(x.v);
    return {x.tape, x.tape->push(x.idx, y, -1, 0.0), y};
}
inline Var log(Var x) { return {x.tape, x.tape->push(x.idx, 1.0 / x.v, -1, 0.0), std::log(x.v)}; }
inline Var sqrt(Var x) {
    const double y = std::sqrt(x.v);
    return {x.tape, x.tape->push(x.idx, 0.5 / y, -1, 0.0), y};
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline Var softplus(Var x) {
    const double sig = 1.0 / (1.0 + std::exp(-x.v));
    return {x.tape, x.tape->push(x.idx, sig, -1, 0.0), softplus(x.v)};
}

// max(0, x); subgradient 0 at the kink.
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline Var relu(Var x) { return {x.tape, x.tape->push(x.idx, x.v > 0.0 ? 1.0 : 0.0, -1, 0.0), relu(x.v)}; }

// |x|; subgradient 0 at the kink.
inline double absval(double x) { return std::abs(x); }
inline Var absval(Var x) {
    const double s = x.v > 0.0 ? 1.0 : (x.v < 0.0 ? -1.0 : 0.0);
    return {x.tape, x.tape->push(x.idx, s, -1, 0.0), std::abs(x.v)};
}

// Same value, blocks all reverse flow.
inline double stop_grad(double x) { return x; }
inline Var stop_grad(Var x) { return {x.tape, x.tape->push(-1, 0.0, -1, 0.0), x.v}; }

inline double value_of(Var x) { return x.v; }

// Constant with the scalar type of `proto`; for Var it is a fresh leaf on
// the same tape (receives a gradient slot nobody reads).
inline double make_const(double /*proto*/, double v) { return v; }
inline Var make_const(Var proto, double v) { return proto.tape->leaf(v); }

}  // namespace hsse
