// Shared fixtures for the test suite: the worked-example taxonomy, random
// tree builders for property tests, and an exception matcher keyed on the
// library's stable error codes.
#ifndef HIDEC_TESTS_HELPERS_HPP
#define HIDEC_TESTS_HELPERS_HPP

#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>
#include <vector>

#include <hidec/errors.hpp>
#include <hidec/rng.hpp>
#include <hidec/taxonomy.hpp>

namespace testutil {

/// The eight-node worked example used throughout: R with children A, B, C;
/// A -> D -> I; B -> F. Ids follow first appearance: R=0 A=1 B=2 C=3 D=4 I=5 F=6.
inline hidec::Taxonomy example_tree() {
    return hidec::load_taxonomy_text("R\tA\tB\tC\nA\tD\nD\tI\nB\tF\n");
}

/// Uniform random tree over `n` nodes with the root at id 0; each later node
/// picks a parent among earlier ids, keeping depth under control.
inline hidec::Taxonomy random_tree(hidec::Rng& rng, std::size_t n) {
    std::vector<std::string> names;
    std::vector<hidec::LabelId> parents;
    names.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        names.push_back("n" + std::to_string(i));
        parents.push_back(i == 0 ? hidec::kNoLabel
                                 : static_cast<hidec::LabelId>(rng.below(i)));
    }
    return hidec::Taxonomy::build(names, parents);
}

/// Non-empty random label subset (root allowed) of the given taxonomy.
inline std::set<hidec::LabelId> random_label_set(hidec::Rng& rng, const hidec::Taxonomy& t) {
    std::set<hidec::LabelId> labels;
    const std::size_t want = 1 + rng.below(std::min<std::size_t>(t.size(), 5));
    for (std::size_t i = 0; i < want; ++i)
        labels.insert(static_cast<hidec::LabelId>(rng.below(t.size())));
    return labels;
}

class ErrorCodeMatcher : public Catch::Matchers::MatcherGenericBase {
public:
    explicit ErrorCodeMatcher(hidec::Errc code) : code_(code) {}

    bool match(const hidec::Error& err) const { return err.code() == code_; }

    std::string describe() const override {
        return std::string("has error code ") + hidec::errc_name(code_);
    }

private:
    hidec::Errc code_;
};

inline ErrorCodeMatcher HasCode(hidec::Errc code) { return ErrorCodeMatcher(code); }

}  // namespace testutil

#endif  // HIDEC_TESTS_HELPERS_HPP
