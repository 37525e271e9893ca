#ifndef HIDEC_GRADCHECK_HPP
#define HIDEC_GRADCHECK_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <hidec/errors.hpp>
#include <hidec/optimizer.hpp>

namespace hidec {

struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_err = 0.0;
        double worst_analytic = 0.0;
        double worst_numeric = 0.0;
    };
    std::vector<Entry> entries;
    double max_rel_err = 0.0;
    bool pass = false;
};

/**
 * Central-difference check of analytic gradients for every element of every
 * parameter in the store.
 *
 * loss_fn(with_grads) must evaluate the loss from the store's current
 * values and, when with_grads is true, leave d(loss)/d(param) in each
 * param's grad field (overwriting, not accumulating, via zero_grad first).
 * It must be deterministic: two calls at the same parameter values return
 * the same loss.
 *
 * Error metric per element: |analytic - numeric| / max(|analytic| + |numeric|, 1),
 * i.e. relative error for large gradients and absolute error for small ones,
 * which keeps central-difference roundoff (~1e-10 at eps 1e-4) from drowning
 * near-zero gradients.
 */
template <typename S, typename LossFn>
GradCheckReport finite_diff_check(ParameterStore<S>& store, LossFn&& loss_fn, double eps,
                                  double tolerance) {
    static_assert(std::is_same_v<S, double>,
                  "finite differences need double precision to be meaningful");
    GradCheckReport report;

    store.zero_grad();
    const double base = static_cast<double>(loss_fn(true));
    if (!std::isfinite(base)) raise(Errc::numerical_error, "loss is not finite");

    std::map<std::string, Array<S>> analytic;
    for (const auto& [name, p] : store.entries()) analytic.emplace(name, p.grad);

    for (auto& [name, p] : store.entries()) {
        typename GradCheckReport::Entry entry;
        entry.name = name;
        const Array<S>& ga = analytic.at(name);
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            const S saved = p.value.data[i];
            p.value.data[i] = saved + static_cast<S>(eps);
            const double up = static_cast<double>(loss_fn(false));
            p.value.data[i] = saved - static_cast<S>(eps);
            const double down = static_cast<double>(loss_fn(false));
            p.value.data[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                raise(Errc::numerical_error, "perturbed loss is not finite at " + name);
            const double numeric = (up - down) / (2.0 * eps);
            const double a = static_cast<double>(ga.data[i]);
            const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1.0);
            if (rel > entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.worst_analytic = a;
                entry.worst_numeric = numeric;
            }
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    report.pass = report.max_rel_err <= tolerance;
    return report;
}

}  // namespace hidec

#endif  // HIDEC_GRADCHECK_HPP
