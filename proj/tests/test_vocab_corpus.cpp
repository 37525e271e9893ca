#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <hidec/corpus.hpp>
#include <hidec/vocab.hpp>

#include "helpers.hpp"

using hidec::Document;
using hidec::Errc;
using hidec::Vocabulary;
using testutil::HasCode;

TEST_CASE("tokenization lowercases, splits on non-alphanumerics, drops stopwords") {
    const std::set<std::string> stop{"the", "and"};

    REQUIRE(hidec::tokenize("The quick brown-fox, AND lazy DOG42!", stop) ==
            std::vector<std::string>{"quick", "brown", "fox", "lazy", "dog42"});
    REQUIRE(hidec::tokenize("don't", {}) == std::vector<std::string>{"don", "t"});
    REQUIRE(hidec::tokenize("  \t\n ", stop).empty());
    REQUIRE(hidec::tokenize("THE the The", stop).empty());
    REQUIRE(hidec::tokenize("2001a 3b", {}) == std::vector<std::string>{"2001a", "3b"});
    REQUIRE(hidec::tokenize("", stop).empty());

    const auto& defaults = hidec::default_stopwords();
    const std::set<std::string> builtin(defaults.begin(), defaults.end());
    REQUIRE(builtin.count("the") == 1);
    REQUIRE(builtin.count("with") == 1);
    REQUIRE(hidec::tokenize("the cat sat on a mat", builtin) ==
            std::vector<std::string>{"cat", "sat", "mat"});
}

TEST_CASE("vocabulary ids run by descending count with alphabetical ties") {
    const std::vector<std::vector<std::string>> docs = {
        {"pear", "apple", "apple"},
        {"apple", "plum", "pear", "quince"},
        {"plum"},
    };
    const Vocabulary v = Vocabulary::build(docs, 1);
    // Counts: apple 3, pear 2, plum 2, quince 1. Ties pear/plum break
    // alphabetically.
    REQUIRE(v.size() == 6);
    REQUIRE(v.word(0) == "[PAD]");
    REQUIRE(v.word(1) == "[UNK]");
    REQUIRE(v.word(2) == "apple");
    REQUIRE(v.word(3) == "pear");
    REQUIRE(v.word(4) == "plum");
    REQUIRE(v.word(5) == "quince");
    REQUIRE(v.id_of("apple") == 2);
    REQUIRE(v.id_of("nonesuch") == Vocabulary::kUnk);
    REQUIRE_THROWS_MATCHES(v.word(6), hidec::Error, HasCode(Errc::unknown_token));

    SECTION("min_count filters rare words") {
        const Vocabulary v2 = Vocabulary::build(docs, 2);
        REQUIRE(v2.size() == 5);  // quince dropped
        REQUIRE(v2.id_of("quince") == Vocabulary::kUnk);
    }
}

TEST_CASE("encoding truncates, maps unknowns, and never returns empty") {
    const Vocabulary v = Vocabulary::from_words({"alpha", "beta"});
    REQUIRE(v.encode({"alpha", "beta", "alpha"}, 8) == std::vector<std::size_t>{2, 3, 2});
    REQUIRE(v.encode({"alpha", "beta", "alpha"}, 2) == std::vector<std::size_t>{2, 3});
    REQUIRE(v.encode({"gamma"}, 8) == std::vector<std::size_t>{Vocabulary::kUnk});
    REQUIRE(v.encode({}, 8) == std::vector<std::size_t>{Vocabulary::kUnk});
    REQUIRE(v.encode({"alpha"}, 0) == std::vector<std::size_t>{Vocabulary::kUnk});
}

TEST_CASE("vocabulary word lists round-trip and reject bad entries") {
    const std::vector<std::vector<std::string>> docs = {{"cherry", "cherry", "fig", "date"}};
    const Vocabulary v = Vocabulary::build(docs, 1);
    const Vocabulary back = Vocabulary::from_words(v.word_list());
    REQUIRE(back.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) REQUIRE(back.word(i) == v.word(i));

    REQUIRE_THROWS_MATCHES(Vocabulary::from_words({"dup", "dup"}), hidec::Error,
                           HasCode(Errc::invalid_format));
    REQUIRE_THROWS_MATCHES(Vocabulary::from_words({""}), hidec::Error,
                           HasCode(Errc::invalid_format));
    REQUIRE_THROWS_MATCHES(Vocabulary::from_words({"[PAD]"}), hidec::Error,
                           HasCode(Errc::invalid_format));
}

TEST_CASE("jsonl corpora parse per line and report the offending line") {
    SECTION("well-formed input") {
        std::istringstream in(
            "{\"text\": \"first doc\", \"labels\": [\"A\", \"B\"]}\n"
            "\n"
            "   \n"
            "{\"text\": \"second doc\"}\n");
        const auto docs = hidec::load_jsonl(in, "corpus.jsonl");
        REQUIRE(docs.size() == 2);
        REQUIRE(docs[0].text == "first doc");
        REQUIRE(docs[0].labels == std::vector<std::string>{"A", "B"});
        REQUIRE(docs[1].text == "second doc");
        REQUIRE(docs[1].labels.empty());
    }

    auto expect_bad = [](const std::string& body, const std::string& where) {
        std::istringstream in(body);
        try {
            hidec::load_jsonl(in, "bad.jsonl");
            FAIL("expected a parse failure");
        } catch (const hidec::Error& e) {
            REQUIRE(e.code() == Errc::invalid_format);
            REQUIRE(std::string(e.what()).find("bad.jsonl:" + where) != std::string::npos);
        }
    };
    SECTION("broken json") { expect_bad("{\"text\": \"ok\"}\nnot json\n", "2"); }
    SECTION("not an object") { expect_bad("[1, 2]\n", "1"); }
    SECTION("missing text") { expect_bad("{\"labels\": []}\n", "1"); }
    SECTION("text is not a string") { expect_bad("{\"text\": 5}\n", "1"); }
    SECTION("labels is not an array") {
        expect_bad("{\"text\": \"ok\"}\n{\"text\": \"x\", \"labels\": \"A\"}\n", "2");
    }
    SECTION("label items must be strings") {
        expect_bad("{\"text\": \"x\", \"labels\": [1]}\n", "1");
    }
}

TEST_CASE("jsonl saving round-trips documents exactly") {
    const std::vector<Document> docs = {
        {"some text with \"quotes\" and \\ slashes", {"X"}},
        {"", {}},
        {"unicode snowman \xE2\x98\x83", {"A", "B", "A"}},
    };
    std::ostringstream out;
    hidec::save_jsonl(out, docs);
    std::istringstream in(out.str());
    const auto back = hidec::load_jsonl(in);
    REQUIRE(back.size() == docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        REQUIRE(back[i].text == docs[i].text);
        REQUIRE(back[i].labels == docs[i].labels);
    }
}

TEST_CASE("missing corpus files are reported") {
    REQUIRE_THROWS_MATCHES(hidec::load_jsonl_file("/no/such/dir/corpus.jsonl"), hidec::Error,
                           HasCode(Errc::invalid_format));
}

TEST_CASE("document labels map to taxonomy ids with optional ancestor closure") {
    const hidec::Taxonomy t = testutil::example_tree();
    const Document d{"whatever", {"I", "C"}};

    const auto raw = hidec::document_label_ids(t, d);
    REQUIRE(raw == std::set<hidec::LabelId>{t.require("I"), t.require("C")});

    const auto closed = hidec::document_label_ids(t, d, true);
    REQUIRE(closed == std::set<hidec::LabelId>{t.require("I"), t.require("C"), t.require("A"),
                                               t.require("D")});
    REQUIRE(closed.count(t.root()) == 0);

    const Document bad{"whatever", {"NoSuchLabel"}};
    REQUIRE_THROWS_MATCHES(hidec::document_label_ids(t, bad), hidec::Error,
                           HasCode(Errc::unknown_label));
}
