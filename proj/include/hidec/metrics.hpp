#ifndef HIDEC_METRICS_HPP
#define HIDEC_METRICS_HPP

#include <array>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include <hidec/errors.hpp>
#include <hidec/taxonomy.hpp>

namespace hidec {

/// Multi-label evaluation over aligned gold/predicted label-id sets.
/// Conventions: the root never scores; macro-F1 averages only over labels
/// that actually occur in gold or prediction (TP+FP+FN > 0); level-wise
/// rows pool counts over the labels at one taxonomy depth.
struct EvalReport {
    struct LabelCounts {
        std::size_t tp = 0, fp = 0, fn = 0;
        double precision = 0.0, recall = 0.0, f1 = 0.0;
    };
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    std::map<LabelId, LabelCounts> per_label;      // only labels with any counts
    std::map<std::size_t, double> level_micro_f1;  // depth -> micro-F1 at that depth
    std::size_t documents = 0;

    nlohmann::json to_json(const Taxonomy& t) const {
        nlohmann::json per;
        for (const auto& [v, c] : per_label) {
            per[t.name(v)] = {{"tp", c.tp},
                              {"fp", c.fp},
                              {"fn", c.fn},
                              {"precision", c.precision},
                              {"recall", c.recall},
                              {"f1", c.f1}};
        }
        nlohmann::json levels;
        for (const auto& [depth, f1] : level_micro_f1) levels[std::to_string(depth)] = f1;
        return {{"documents", documents},
                {"micro_f1", micro_f1},
                {"macro_f1", macro_f1},
                {"macro_convention", "labels with tp+fp+fn>0; root excluded"},
                {"per_label", per},
                {"level_micro_f1", levels}};
    }
};

/// Adds every proper ancestor of each member (root excluded).
inline std::set<LabelId> close_under_ancestors(const Taxonomy& t, const std::set<LabelId>& s) {
    std::set<LabelId> out = s;
    for (LabelId v : s)
        for (LabelId a : t.ancestors(v))
            if (a != t.root()) out.insert(a);
    return out;
}

inline EvalReport evaluate(const std::vector<std::set<LabelId>>& gold,
                           const std::vector<std::set<LabelId>>& pred, const Taxonomy& t,
                           bool ancestor_closure = true) {
    if (gold.size() != pred.size())
        raise(Errc::alignment_error, "gold and predicted corpora have different sizes");
    EvalReport report;
    report.documents = gold.size();

    std::map<LabelId, EvalReport::LabelCounts> counts;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        std::set<LabelId> g = ancestor_closure ? close_under_ancestors(t, gold[i]) : gold[i];
        std::set<LabelId> p = ancestor_closure ? close_under_ancestors(t, pred[i]) : pred[i];
        g.erase(t.root());
        p.erase(t.root());
        for (LabelId v : g) {
            if (p.count(v)) ++counts[v].tp;
            else ++counts[v].fn;
        }
        for (LabelId v : p)
            if (!g.count(v)) ++counts[v].fp;
    }

    auto f1_of = [](double tp, double fp, double fn) {
        const double denom = 2.0 * tp + fp + fn;
        return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
    };

    std::size_t tp = 0, fp = 0, fn = 0;
    double macro_sum = 0.0;
    std::map<std::size_t, std::array<std::size_t, 3>> by_level;
    for (auto& [v, c] : counts) {
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
        c.precision = (c.tp + c.fp) == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
        c.recall = (c.tp + c.fn) == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
        c.f1 = f1_of(static_cast<double>(c.tp), static_cast<double>(c.fp),
                     static_cast<double>(c.fn));
        macro_sum += c.f1;
        auto& lv = by_level[t.depth(v)];
        lv[0] += c.tp;
        lv[1] += c.fp;
        lv[2] += c.fn;
    }
    report.micro_f1 = f1_of(static_cast<double>(tp), static_cast<double>(fp),
                            static_cast<double>(fn));
    report.macro_f1 = counts.empty() ? 0.0 : macro_sum / static_cast<double>(counts.size());
    for (const auto& [depth, lv] : by_level)
        report.level_micro_f1[depth] = f1_of(static_cast<double>(lv[0]),
                                             static_cast<double>(lv[1]),
                                             static_cast<double>(lv[2]));
    report.per_label = std::move(counts);
    return report;
}

/// The per-level curve as CSV: depth, tp, fp, fn, micro_f1.
inline std::string level_csv(const EvalReport& report, const Taxonomy& t) {
    std::map<std::size_t, std::array<std::size_t, 3>> by_level;
    for (const auto& [v, c] : report.per_label) {
        auto& lv = by_level[t.depth(v)];
        lv[0] += c.tp;
        lv[1] += c.fp;
        lv[2] += c.fn;
    }
    std::string out = "depth,tp,fp,fn,micro_f1\n";
    for (const auto& [depth, lv] : by_level) {
        char line[128];
        std::snprintf(line, sizeof(line), "%zu,%zu,%zu,%zu,%.6f\n", depth, lv[0], lv[1], lv[2],
                      report.level_micro_f1.at(depth));
        out += line;
    }
    return out;
}

}  // namespace hidec

#endif  // HIDEC_METRICS_HPP
