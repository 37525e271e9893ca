#ifndef HIDEC_INFERENCE_HPP
#define HIDEC_INFERENCE_HPP

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include <hidec/errors.hpp>
#include <hidec/subhier.hpp>
#include <hidec/taxonomy.hpp>

namespace hidec {

/**
 * Scoring interface behind recursive decoding. Given the serialized state
 * of the partial sub-hierarchy and the positions to expand, returns one
 * probability per candidate, aligned with the candidate lists. The real
 * model runs its decoder stack here; tests drive the loop with stubs.
 */
class ChildScorer {
public:
    virtual ~ChildScorer() = default;
    virtual std::vector<std::vector<double>> score(
        const SubHierSequence& seq, const std::vector<std::size_t>& positions,
        const std::vector<std::vector<Taxonomy::Candidate>>& candidates) = 0;
};

/// Partial decode state after some number of frontier expansions.
struct DecodeState {
    std::set<LabelId> nodes;
    std::set<std::pair<LabelId, LabelId>> edges;
    std::set<LabelId> terminated;   // labels whose terminator was selected
    std::vector<LabelId> frontier;  // labels added last iteration, not yet expanded
    std::size_t iterations = 0;
    std::size_t fallback_steps = 0;  // expansions where nothing cleared the threshold
};

inline DecodeState initial_decode_state(const Taxonomy& t) {
    DecodeState s;
    s.nodes.insert(t.root());
    s.frontier.push_back(t.root());
    return s;
}

/// The state's sub-hierarchy, with terminated labels as the assigned set
/// so previous terminator decisions stay visible in the sequence.
inline SubHierarchy decode_state_graph(const DecodeState& s) {
    SubHierarchy sh;
    sh.nodes = s.nodes;
    sh.edges = s.edges;
    sh.assigned = s.terminated;
    return sh;
}

/**
 * One decoding iteration: serialize the current graph, score every
 * frontier label's augmented candidates, and take everything at or above
 * the threshold. When nothing clears it the argmax candidate is taken
 * instead so every expansion makes progress. Selected children become the
 * next frontier; a selected terminator retires its label.
 */
inline void expand_frontier(const Taxonomy& t, ChildScorer& scorer, DecodeState& state,
                            double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0)
        raise(Errc::invalid_spec, "decode threshold must be in (0, 1)");
    if (state.frontier.empty()) return;

    const SubHierSequence seq = serialize(t, decode_state_graph(state));
    std::vector<std::size_t> positions;
    std::vector<LabelId> owners;
    std::vector<std::vector<Taxonomy::Candidate>> candidates;
    std::set<LabelId> frontier_set(state.frontier.begin(), state.frontier.end());
    for (std::size_t i = 0; i < seq.length(); ++i) {
        const Token& tok = seq.tokens[i];
        if (tok.kind == TokenKind::label && frontier_set.count(tok.label)) {
            positions.push_back(i);
            owners.push_back(tok.label);
            candidates.push_back(t.augmented_children(tok.label));
        }
    }

    const auto probs = scorer.score(seq, positions, candidates);
    if (probs.size() != positions.size())
        raise(Errc::shape_error, "scorer returned wrong number of positions");

    std::vector<LabelId> next_frontier;
    for (std::size_t k = 0; k < positions.size(); ++k) {
        const LabelId parent = owners[k];
        const auto& cand = candidates[k];
        const auto& p = probs[k];
        if (p.size() != cand.size())
            raise(Errc::shape_error, "scorer returned wrong number of candidates");
        std::vector<std::size_t> selected;
        for (std::size_t j = 0; j < cand.size(); ++j)
            if (p[j] >= threshold) selected.push_back(j);
        if (selected.empty()) {
            selected.push_back(static_cast<std::size_t>(
                std::max_element(p.begin(), p.end()) - p.begin()));
            ++state.fallback_steps;
        }
        for (std::size_t j : selected) {
            if (cand[j].is_end()) {
                state.terminated.insert(parent);
            } else {
                state.nodes.insert(cand[j].label);
                state.edges.emplace(parent, cand[j].label);
                next_frontier.push_back(cand[j].label);
            }
        }
    }
    state.frontier = std::move(next_frontier);
    ++state.iterations;
}

/**
 * Final label assignment: terminated labels plus every leaf of the
 * predicted graph (covers frontier labels stranded by the depth cap).
 */
inline std::set<LabelId> assign_labels(const DecodeState& state) {
    std::set<LabelId> out = state.terminated;
    std::set<LabelId> has_child;
    for (const auto& [parent, child] : state.edges) has_child.insert(parent);
    for (LabelId v : state.nodes)
        if (!has_child.count(v)) out.insert(v);
    return out;
}

struct DecodeResult {
    std::set<LabelId> labels;
    DecodeState state;
};

/**
 * Recursive hierarchy decoding: expand all frontier labels one taxonomy
 * level per iteration, for at most max-depth iterations or until the
 * frontier terminates itself, then assign labels. The result is always
 * non-empty and every assigned label's ancestors are nodes of the final
 * graph.
 */
inline DecodeResult recursive_decode(const Taxonomy& t, ChildScorer& scorer, double threshold) {
    DecodeState state = initial_decode_state(t);
    for (std::size_t p = 0; p < t.max_depth() && !state.frontier.empty(); ++p)
        expand_frontier(t, scorer, state, threshold);
    DecodeResult result;
    result.labels = assign_labels(state);
    result.state = std::move(state);
    return result;
}

}  // namespace hidec

#endif  // HIDEC_INFERENCE_HPP
