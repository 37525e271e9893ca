#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>
#include <vector>

#include <hidec/datagen.hpp>
#include <hidec/metrics.hpp>
#include <hidec/vocab.hpp>

#include "helpers.hpp"

using hidec::Document;
using hidec::Errc;
using hidec::LabelId;
using hidec::SynthData;
using hidec::SynthSpec;
using hidec::Taxonomy;
using testutil::HasCode;

namespace {

SynthSpec small_spec() {
    SynthSpec spec;
    spec.depth = 3;
    spec.branch_min = 2;
    spec.branch_max = 3;
    spec.keywords_per_label = 2;
    spec.doc_len = 10;
    spec.avg_labels = 2.0;
    spec.docs_train = 60;
    spec.docs_dev = 20;
    spec.docs_test = 20;
    spec.seed = 17;
    return spec;
}

std::set<LabelId> closure_of(const Taxonomy& t, const Document& d) {
    return hidec::document_label_ids(t, d, true);
}

}  // namespace

TEST_CASE("the same spec always generates the same benchmark") {
    const SynthSpec spec = small_spec();
    const SynthData a = hidec::generate_synth(spec);
    const SynthData b = hidec::generate_synth(spec);
    REQUIRE(a.taxonomy.content_hash() == b.taxonomy.content_hash());
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        REQUIRE(a.train[i].text == b.train[i].text);
        REQUIRE(a.train[i].labels == b.train[i].labels);
    }
    for (std::size_t i = 0; i < a.dev.size(); ++i) REQUIRE(a.dev[i].text == b.dev[i].text);
    for (std::size_t i = 0; i < a.test.size(); ++i) REQUIRE(a.test[i].text == b.test[i].text);

    SynthSpec other = spec;
    other.seed = 18;
    const SynthData c = hidec::generate_synth(other);
    bool all_same = a.taxonomy.content_hash() == c.taxonomy.content_hash();
    for (std::size_t i = 0; all_same && i < a.train.size(); ++i)
        all_same = a.train[i].text == c.train[i].text;
    REQUIRE_FALSE(all_same);
}

TEST_CASE("generated taxonomies respect depth and branching bounds") {
    hidec::Rng seeds(4);
    for (int trial = 0; trial < 10; ++trial) {
        SynthSpec spec = small_spec();
        spec.depth = 1 + seeds.below(4);
        spec.branch_min = 1 + seeds.below(3);
        spec.branch_max = spec.branch_min + seeds.below(3);
        spec.seed = seeds.next_u64();
        hidec::Rng rng(spec.seed);
        const Taxonomy t = hidec::generate_taxonomy(spec, rng);

        REQUIRE(t.max_depth() == spec.depth);
        for (LabelId v = 0; v < static_cast<LabelId>(t.size()); ++v) {
            if (t.depth(v) < spec.depth) {
                REQUIRE(t.children(v).size() >= spec.branch_min);
                REQUIRE(t.children(v).size() <= spec.branch_max);
            } else {
                REQUIRE(t.is_leaf(v));
            }
        }
        REQUIRE(t.name(t.root()) == "Root");
    }
}

TEST_CASE("label counts per document track the requested average") {
    SynthSpec spec = small_spec();
    spec.docs_train = 500;
    spec.docs_dev = 0;
    spec.docs_test = 0;
    const SynthData data = hidec::generate_synth(spec);
    double total = 0.0;
    for (const Document& d : data.train) {
        REQUIRE_FALSE(d.labels.empty());
        total += static_cast<double>(d.labels.size());
    }
    const double mean = total / static_cast<double>(data.train.size());
    REQUIRE(mean > 0.9 * spec.avg_labels);
    REQUIRE(mean < 1.1 * spec.avg_labels);
}

TEST_CASE("documents never carry the root and all labels resolve") {
    const SynthData data = hidec::generate_synth(small_spec());
    for (const auto* split : {&data.train, &data.dev, &data.test}) {
        for (const Document& d : *split) {
            std::set<std::string> unique(d.labels.begin(), d.labels.end());
            REQUIRE(unique.size() == d.labels.size());
            for (const std::string& name : d.labels) {
                REQUIRE(name != "Root");
                REQUIRE_NOTHROW(data.taxonomy.require(name));
            }
        }
    }
}

TEST_CASE("no document's label set pairs a label with one of its ancestors") {
    // Keywords encode closure membership only, so the assigned set is
    // recoverable from text exactly when it is an antichain.
    for (std::uint64_t seed : {0ULL, 5ULL, 23ULL}) {
        SynthSpec spec = small_spec();
        spec.seed = seed;
        spec.avg_labels = 3.0;  // push toward larger sets where clashes would show
        const SynthData data = hidec::generate_synth(spec);
        const Taxonomy& t = data.taxonomy;
        for (const auto* split : {&data.train, &data.dev, &data.test}) {
            for (const Document& d : *split) {
                const auto raw = hidec::document_label_ids(t, d, false);
                for (LabelId v : raw)
                    for (LabelId a : t.ancestors(v))
                        if (a != t.root()) REQUIRE(raw.count(a) == 0);
            }
        }
    }
}

TEST_CASE("keyword pools are disjoint across labels and from noise tokens") {
    const SynthData data = hidec::generate_synth(small_spec());
    std::set<std::string> seen;
    for (const auto& [label, pool] : data.keywords) {
        REQUIRE(label != data.taxonomy.root());
        REQUIRE(pool.size() == 2);
        for (const std::string& kw : pool) {
            REQUIRE(seen.insert(kw).second);  // never shared between labels
            REQUIRE(kw.compare(0, 2, "nz") != 0);
        }
    }
    // Every non-root label has a pool.
    REQUIRE(data.keywords.size() == data.taxonomy.size() - 1);
}

TEST_CASE("every document carries a keyword for each label and its ancestors") {
    const SynthData data = hidec::generate_synth(small_spec());
    const Taxonomy& t = data.taxonomy;
    for (const Document& d : data.train) {
        const std::set<std::string> words = [&] {
            const auto toks = hidec::tokenize(d.text, {});
            return std::set<std::string>(toks.begin(), toks.end());
        }();
        for (LabelId v : closure_of(t, d)) {
            bool found = false;
            for (const std::string& kw : data.keywords.at(v)) found = found || words.count(kw);
            REQUIRE(found);
        }
    }
}

TEST_CASE("a bag-of-keywords reader recovers noise-free labels perfectly") {
    SynthSpec spec = small_spec();
    spec.noise_fraction = 0.0;
    const SynthData data = hidec::generate_synth(spec);
    const Taxonomy& t = data.taxonomy;

    std::vector<std::set<LabelId>> gold, pred;
    for (const Document& d : data.train) {
        gold.push_back(hidec::document_label_ids(t, d));
        const auto toks = hidec::tokenize(d.text, {});
        const std::set<std::string> words(toks.begin(), toks.end());
        std::set<LabelId> p;
        for (const auto& [label, pool] : data.keywords)
            for (const std::string& kw : pool)
                if (words.count(kw)) p.insert(label);
        pred.push_back(std::move(p));
        // The keyword reader sees exactly the ancestor closure.
        REQUIRE(pred.back() == closure_of(t, data.train[pred.size() - 1]));
    }
    const auto report = hidec::evaluate(gold, pred, t, true);
    REQUIRE(report.micro_f1 == 1.0);
    REQUIRE(report.macro_f1 == 1.0);
}

TEST_CASE("noisy documents carry the requested number of noise tokens") {
    SynthSpec spec = small_spec();
    spec.noise_fraction = 0.3;
    spec.noise_vocab = 20;
    spec.doc_len = 10;
    const SynthData data = hidec::generate_synth(spec);
    for (const Document& d : data.train) {
        const auto toks = hidec::tokenize(d.text, {});
        std::size_t noise = 0;
        for (const std::string& tok : toks)
            if (tok.compare(0, 2, "nz") == 0) ++noise;
        REQUIRE(noise == 3);  // round(0.3 * 10)
        REQUIRE(toks.size() >= spec.doc_len);
    }
}

TEST_CASE("train dev and test splits do not share documents") {
    SynthSpec spec = small_spec();
    spec.docs_train = 40;
    spec.docs_dev = 40;
    spec.docs_test = 40;
    spec.doc_len = 12;
    const SynthData data = hidec::generate_synth(spec);
    std::set<std::string> texts;
    for (const auto* split : {&data.train, &data.dev, &data.test})
        for (const Document& d : *split) texts.insert(d.text);
    REQUIRE(texts.size() == 120);
}

TEST_CASE("impossible spec settings are rejected") {
    auto expect_invalid = [](auto&& mutate) {
        SynthSpec spec = small_spec();
        mutate(spec);
        REQUIRE_THROWS_MATCHES(hidec::generate_synth(spec), hidec::Error,
                               HasCode(Errc::invalid_spec));
    };
    expect_invalid([](SynthSpec& s) { s.depth = 0; });
    expect_invalid([](SynthSpec& s) { s.branch_min = 3; s.branch_max = 2; });
    expect_invalid([](SynthSpec& s) { s.branch_min = 0; s.branch_max = 0; });
    expect_invalid([](SynthSpec& s) { s.keywords_per_label = 0; });
    expect_invalid([](SynthSpec& s) { s.noise_fraction = 1.0; });
    expect_invalid([](SynthSpec& s) { s.noise_fraction = -0.1; });
    expect_invalid([](SynthSpec& s) { s.noise_fraction = 0.5; s.noise_vocab = 0; });
    expect_invalid([](SynthSpec& s) { s.avg_labels = 0.5; });
    expect_invalid([](SynthSpec& s) { s.docs_train = 0; });
    expect_invalid([](SynthSpec& s) { s.doc_len = 0; });
}
