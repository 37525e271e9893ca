#ifndef HIDEC_DATAGEN_HPP
#define HIDEC_DATAGEN_HPP

#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <hidec/corpus.hpp>
#include <hidec/errors.hpp>
#include <hidec/rng.hpp>
#include <hidec/taxonomy.hpp>

namespace hidec {

/// Shape of a synthetic benchmark: a random taxonomy plus keyword-driven
/// documents whose labels are fully recoverable from their text.
struct SynthSpec {
    std::size_t depth = 4;
    std::size_t branch_min = 2;
    std::size_t branch_max = 3;
    std::size_t keywords_per_label = 3;
    std::size_t noise_vocab = 50;
    double noise_fraction = 0.0;  // fraction of each document that is noise tokens
    std::size_t doc_len = 12;     // target tokens per document
    double avg_labels = 2.0;      // mean labels per document (1 + Poisson(avg-1))
    std::size_t docs_train = 200;
    std::size_t docs_dev = 0;
    std::size_t docs_test = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (depth < 1) raise(Errc::invalid_spec, "depth must be at least 1");
        if (branch_max < 1 || branch_min < 1 || branch_min > branch_max)
            raise(Errc::invalid_spec, "branching range is infeasible");
        if (keywords_per_label < 1) raise(Errc::invalid_spec, "labels need at least one keyword");
        if (noise_fraction < 0.0 || noise_fraction >= 1.0)
            raise(Errc::invalid_spec, "noise fraction must be in [0, 1)");
        if (noise_fraction > 0.0 && noise_vocab == 0)
            raise(Errc::invalid_spec, "noise requested but noise vocabulary is empty");
        if (avg_labels < 1.0) raise(Errc::invalid_spec, "avg_labels must be at least 1");
        if (docs_train == 0) raise(Errc::invalid_spec, "need at least one training document");
        if (doc_len < 1) raise(Errc::invalid_spec, "doc_len must be at least 1");
    }
};

struct SynthData {
    Taxonomy taxonomy;
    std::map<LabelId, std::vector<std::string>> keywords;  // per non-root label
    std::vector<Document> train, dev, test;
};

/// Random tree of the requested depth: every node above the bottom level
/// draws its child count from [branch_min, branch_max]. Names encode the
/// level and a per-level counter ("L3_07"); the root is "Root".
inline Taxonomy generate_taxonomy(const SynthSpec& spec, Rng& rng) {
    spec.validate();
    std::vector<std::string> names = {"Root"};
    std::vector<LabelId> parents = {kNoLabel};
    std::vector<LabelId> level_nodes = {0};
    for (std::size_t depth = 1; depth <= spec.depth; ++depth) {
        std::vector<LabelId> next;
        std::size_t counter = 0;
        for (LabelId parent : level_nodes) {
            const std::size_t kids = spec.branch_min == spec.branch_max
                                         ? spec.branch_min
                                         : static_cast<std::size_t>(rng.range(
                                               static_cast<std::int64_t>(spec.branch_min),
                                               static_cast<std::int64_t>(spec.branch_max)));
            for (std::size_t k = 0; k < kids; ++k) {
                char name[32];
                std::snprintf(name, sizeof(name), "L%zu_%02zu", depth, counter++);
                next.push_back(static_cast<LabelId>(names.size()));
                names.emplace_back(name);
                parents.push_back(parent);
            }
        }
        level_nodes = std::move(next);
    }
    return Taxonomy::build(names, parents);
}

/**
 * Builds the benchmark: disjoint keyword pools per label, then documents.
 * Each document samples a label set (uniform over non-root nodes, count
 * 1 + Poisson(avg-1)); its text carries at least one keyword from every
 * sampled label and every ancestor, filler keywords from the same pool up
 * to the target length, and the requested fraction of noise tokens, all
 * shuffled.
 *
 * Sampled label sets are antichains: no label is an ancestor of another.
 * Keywords mark closure membership only, so a set containing both a label
 * and its ancestor would be indistinguishable in text from the set without
 * the ancestor. With antichains the closure-to-label-set map is invertible
 * and a noise-free document's token bag determines its labels exactly; a
 * bag-of-keywords classifier recovers the ancestor-closed set.
 */
inline SynthData generate_synth(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SynthData data;
    data.taxonomy = generate_taxonomy(spec, rng);
    const Taxonomy& t = data.taxonomy;
    const std::size_t c = t.size();
    if (c < 2) raise(Errc::invalid_spec, "taxonomy has no assignable labels");

    for (LabelId v = 0; v < static_cast<LabelId>(c); ++v) {
        if (v == t.root()) continue;
        std::vector<std::string> pool;
        pool.reserve(spec.keywords_per_label);
        for (std::size_t k = 0; k < spec.keywords_per_label; ++k)
            pool.push_back("kw" + std::to_string(v) + "x" + std::to_string(k));
        data.keywords.emplace(v, std::move(pool));
    }

    auto comparable = [&](LabelId a, LabelId b) {
        for (LabelId x : t.ancestors(a))
            if (x == b) return true;
        for (LabelId x : t.ancestors(b))
            if (x == a) return true;
        return false;
    };

    auto make_doc = [&]() {
        Document doc;
        std::size_t want = 1 + rng.poisson(spec.avg_labels - 1.0);
        want = std::min(want, c - 1);
        std::set<LabelId> assigned;
        std::size_t misses = 0;
        while (assigned.size() < want && misses < 64 * want) {
            // Skip over the root id when mapping dense draws to labels.
            const std::size_t p = rng.below(c - 1);
            LabelId v = static_cast<LabelId>(p);
            if (v >= t.root()) v = static_cast<LabelId>(p + 1);
            bool ok = assigned.count(v) == 0;
            for (LabelId u : assigned)
                if (ok && comparable(u, v)) ok = false;
            if (ok)
                assigned.insert(v);
            else
                ++misses;
        }
        std::set<LabelId> closure = assigned;
        for (LabelId v : assigned)
            for (LabelId a : t.ancestors(v))
                if (a != t.root()) closure.insert(a);

        std::vector<std::string> tokens;
        std::vector<const std::vector<std::string>*> pools;
        for (LabelId v : closure) {
            const auto& pool = data.keywords.at(v);
            tokens.push_back(pool[rng.below(pool.size())]);
            pools.push_back(&pool);
        }
        const std::size_t noise_count = static_cast<std::size_t>(
            spec.noise_fraction * static_cast<double>(spec.doc_len) + 0.5);
        while (tokens.size() < spec.doc_len - std::min(noise_count, spec.doc_len)) {
            const auto& pool = *pools[rng.below(pools.size())];
            tokens.push_back(pool[rng.below(pool.size())]);
        }
        for (std::size_t i = 0; i < noise_count; ++i)
            tokens.push_back("nz" + std::to_string(rng.below(spec.noise_vocab)));
        rng.shuffle(tokens);

        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) doc.text += ' ';
            doc.text += tokens[i];
        }
        for (LabelId v : assigned) doc.labels.push_back(t.name(v));
        return doc;
    };

    for (std::size_t i = 0; i < spec.docs_train; ++i) data.train.push_back(make_doc());
    for (std::size_t i = 0; i < spec.docs_dev; ++i) data.dev.push_back(make_doc());
    for (std::size_t i = 0; i < spec.docs_test; ++i) data.test.push_back(make_doc());
    return data;
}

}  // namespace hidec

#endif  // HIDEC_DATAGEN_HPP
