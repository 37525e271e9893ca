#ifndef HIDEC_OPTIMIZER_HPP
#define HIDEC_OPTIMIZER_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <hidec/errors.hpp>
#include <hidec/rng.hpp>
#include <hidec/tensor.hpp>

namespace hidec {

/**
 * Named model parameters with their accumulated gradients and Adam moments.
 * Iteration is over an ordered map, so every walk (stepping, clipping,
 * serialization) visits parameters in the same order on every run.
 */
template <typename S>
class ParameterStore {
public:
    struct Param {
        Array<S> value;
        Array<S> grad;
        Array<S> m;
        Array<S> v;
    };

    Param& create(const std::string& name, std::size_t rows, std::size_t cols) {
        if (params_.count(name)) raise(Errc::invalid_spec, "duplicate parameter " + name);
        Param p;
        p.value = Array<S>(rows, cols);
        p.grad = Array<S>(rows, cols);
        p.m = Array<S>(rows, cols);
        p.v = Array<S>(rows, cols);
        return params_.emplace(name, std::move(p)).first->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Param& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) raise(Errc::invalid_spec, "unknown parameter " + name);
        return it->second;
    }
    const Param& at(const std::string& name) const {
        return const_cast<ParameterStore*>(this)->at(name);
    }

    std::map<std::string, Param>& entries() { return params_; }
    const std::map<std::string, Param>& entries() const { return params_; }

    void zero_grad() {
        for (auto& [name, p] : params_) p.grad.fill(S(0));
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [name, p] : params_) n += p.value.numel();
        return n;
    }

    std::int64_t step = 0;

private:
    std::map<std::string, Param> params_;
};

/**
 * Bridges a ParameterStore and one Tape for a single forward/backward pass:
 * use() copies a parameter onto the tape as a grad-tracked leaf (once per
 * name), and harvest_grads() adds the tape gradients back into the store
 * after backward.
 */
template <typename S>
class BoundParams {
public:
    using Var = typename Tape<S>::Var;

    BoundParams(Tape<S>& tape, ParameterStore<S>& store) : tape_(&tape), store_(&store) {}

    Var use(const std::string& name) {
        auto it = bound_.find(name);
        if (it != bound_.end()) return it->second;
        Var v = tape_->leaf(store_->at(name).value, true);
        bound_.emplace(name, v);
        return v;
    }

    void harvest_grads() {
        for (const auto& [name, var] : bound_) {
            const Array<S>& g = tape_->grad(var);
            Array<S>& dst = store_->at(name).grad;
            for (std::size_t i = 0; i < g.data.size(); ++i) dst.data[i] += g.data[i];
        }
    }

private:
    Tape<S>* tape_;
    ParameterStore<S>* store_;
    std::map<std::string, Var> bound_;
};

/// Global gradient norm across every parameter; if it exceeds max_norm the
/// gradients are scaled down to that norm. Returns the pre-clip norm.
template <typename S>
double clip_global_norm(ParameterStore<S>& store, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, p] : store.entries())
        for (S g : p.grad.data) sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const S factor = static_cast<S>(max_norm / norm);
        for (auto& [name, p] : store.entries())
            for (S& g : p.grad.data) g *= factor;
    }
    return norm;
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update with bias correction. Advances store.step.
template <typename S>
void adam_step(ParameterStore<S>& store, double lr, const AdamConfig& cfg = {}) {
    store.step += 1;
    const double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.step));
    const double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.step));
    for (auto& [name, p] : store.entries()) {
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            const double g = static_cast<double>(p.grad.data[i]);
            const double m = cfg.beta1 * static_cast<double>(p.m.data[i]) + (1.0 - cfg.beta1) * g;
            const double v = cfg.beta2 * static_cast<double>(p.v.data[i]) + (1.0 - cfg.beta2) * g * g;
            p.m.data[i] = static_cast<S>(m);
            p.v.data[i] = static_cast<S>(v);
            const double mhat = m / b1t;
            const double vhat = v / b2t;
            p.value.data[i] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

/// Linear warmup from 0 over warmup_steps, then linear decay to 0 at
/// total_steps. Steps are counted from 0 for the first update.
inline double lr_at_step(double base_lr, std::int64_t step, std::int64_t warmup_steps,
                         std::int64_t total_steps) {
    if (warmup_steps > 0 && step < warmup_steps)
        return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    if (total_steps <= warmup_steps) return base_lr;
    const double remain = static_cast<double>(total_steps - step);
    const double span = static_cast<double>(total_steps - warmup_steps);
    return base_lr * std::max(0.0, remain / span);
}

/// Fill with draws from normal(0, stddev).
template <typename S>
void init_normal(Array<S>& a, Rng& rng, double stddev) {
    for (S& x : a.data) x = static_cast<S>(rng.normal(0.0, stddev));
}

/// Fill with draws from uniform(-bound, bound).
template <typename S>
void init_uniform(Array<S>& a, Rng& rng, double bound) {
    for (S& x : a.data) x = static_cast<S>(rng.uniform(-bound, bound));
}

}  // namespace hidec

#endif  // HIDEC_OPTIMIZER_HPP
