#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <hidec/checkpoint.hpp>
#include <hidec/model.hpp>
#include <hidec/training.hpp>

#include "helpers.hpp"

using hidec::Batch;
using hidec::Document;
using hidec::Errc;
using hidec::Model;
using hidec::ModelBundle;
using hidec::ModelConfig;
using hidec::ParameterStore;
using hidec::Rng;
using hidec::Tape;
using hidec::Taxonomy;
using hidec::TrainConfig;
using hidec::Vocabulary;
using testutil::HasCode;

namespace {

ModelConfig tiny_config(hidec::EncoderKind kind) {
    ModelConfig cfg;
    cfg.encoder = kind;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 4;
    cfg.model_dim = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.ffn_dim = 16;
    cfg.max_text_len = 16;
    cfg.dropout_embed = 0.0;
    cfg.dropout_attn = 0.0;
    cfg.dropout_ffn = 0.0;
    return cfg;
}

/// Eight documents over the worked-example tree, two per label set, each
/// label set cued by its own keyword.
std::vector<Document> keyword_docs() {
    return {
        {"iris iris bloom", {"I"}},          {"iris bloom bloom", {"I"}},
        {"fern fern shade", {"F"}},          {"fern shade shade", {"F"}},
        {"cactus cactus sand", {"C"}},       {"cactus sand sand", {"C"}},
        {"iris fern cactus mix", {"I", "F", "C"}},
        {"mix iris fern cactus", {"I", "F", "C"}},
    };
}

Vocabulary vocab_for(const std::vector<Document>& docs) {
    std::vector<std::vector<std::string>> tokenized;
    for (const Document& d : docs) tokenized.push_back(hidec::tokenize(d.text, {}));
    return Vocabulary::build(tokenized, 1);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::filesystem::path tmp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

template <typename S>
bool same_params(const ParameterStore<S>& a, const ParameterStore<S>& b) {
    if (a.entries().size() != b.entries().size()) return false;
    auto ita = a.entries().begin();
    auto itb = b.entries().begin();
    for (; ita != a.entries().end(); ++ita, ++itb) {
        if (ita->first != itb->first) return false;
        if (ita->second.value.data != itb->second.value.data) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("mean binary cross-entropy matches hand-computed values") {
    Tape<double> tape;

    SECTION("uninformative logits cost ln 2") {
        auto logits = tape.leaf(hidec::Array<double>(3, 1), true);
        const auto loss = Model<double>::bce_from_logits(tape, logits, {1.0, 0.0, 1.0});
        REQUIRE(tape.value(loss).data[0] == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    }

    SECTION("probabilities 0.9 and 0.2 against targets 1 and 0") {
        hidec::Array<double> z(2, 1);
        z.data = {std::log(9.0), std::log(0.25)};  // sigmoid gives 0.9, 0.2
        auto logits = tape.leaf(std::move(z), true);
        const auto loss = Model<double>::bce_from_logits(tape, logits, {1.0, 0.0});
        const double want = -(std::log(0.9) + std::log(0.8)) / 2.0;
        REQUIRE(tape.value(loss).data[0] == Catch::Approx(want).epsilon(1e-12));

        tape.backward(loss);
        // d loss / d logit = (sigmoid(z) - y) / n
        REQUIRE(tape.grad(logits).data[0] == Catch::Approx((0.9 - 1.0) / 2.0).epsilon(1e-9));
        REQUIRE(tape.grad(logits).data[1] == Catch::Approx((0.2 - 0.0) / 2.0).epsilon(1e-9));
    }

    SECTION("saturated correct predictions bottom out at the clamp") {
        hidec::Array<double> z(2, 1);
        z.data = {30.0, -30.0};
        auto logits = tape.leaf(std::move(z), true);
        const auto loss = Model<double>::bce_from_logits(tape, logits, {1.0, 0.0});
        const double v = tape.value(loss).data[0];
        REQUIRE(v == Catch::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-6));
        REQUIRE(v < 1.1e-7);
    }

    SECTION("target count must match the logit count") {
        auto logits = tape.leaf(hidec::Array<double>(3, 1), true);
        REQUIRE_THROWS_MATCHES(Model<double>::bce_from_logits(tape, logits, {1.0, 0.0}),
                               hidec::Error, HasCode(Errc::shape_error));
    }
}

TEST_CASE("teacher-forcing targets mark children in the graph and assigned terminators") {
    const Taxonomy t = testutil::example_tree();

    SECTION("worked example, assigned I F C") {
        const auto sh = hidec::build_subhierarchy(
            t, {t.require("I"), t.require("F"), t.require("C")});
        const auto seq = hidec::serialize(t, sh);
        const auto targets = hidec::build_targets(t, sh, seq);

        REQUIRE(targets.items.size() == 7);  // one item per label position
        REQUIRE(targets.pair_count() == 13);

        // Items follow sequence order: R, A, D, I, B, F, C.
        const auto& root = targets.items[0];
        REQUIRE(root.parent == t.root());
        REQUIRE(root.candidates.size() == 4);    // A, B, C, terminator
        REQUIRE(root.targets == std::vector<int>{1, 1, 1, 0});

        const auto& a = targets.items[1];
        REQUIRE(a.parent == t.require("A"));
        REQUIRE(a.targets == std::vector<int>{1, 0});  // D in graph, A not assigned

        const auto& i = targets.items[3];
        REQUIRE(i.parent == t.require("I"));
        REQUIRE(i.targets == std::vector<int>{1});  // leaf: terminator only, assigned

        for (const auto& item : targets.items)
            REQUIRE(item.position < seq.length());
    }

    SECTION("root-only assignment flips the terminator and zeroes the children") {
        const auto sh = hidec::build_subhierarchy(t, {t.root()});
        const auto seq = hidec::serialize(t, sh);
        const auto targets = hidec::build_targets(t, sh, seq);
        REQUIRE(targets.items.size() == 1);
        REQUIRE(targets.items[0].targets == std::vector<int>{0, 0, 0, 1});
    }
}

TEST_CASE("batched loss is the pair-weighted mean of solo losses") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = {{"iris bloom", {"I"}},
                                        {"fern cactus shade", {"F", "C"}}};
    const Vocabulary vocab = vocab_for(docs);
    const ModelConfig cfg = tiny_config(hidec::EncoderKind::meanpool);
    Model<double> model(t, vocab, cfg);
    ParameterStore<double> store;
    Rng init_rng(11);
    model.init_params(store, init_rng);
    Rng rng(0);

    auto loss_of = [&](const std::vector<Document>& ds, std::size_t* pairs) {
        const Batch batch = hidec::build_batch(ds, t, vocab, {}, cfg.max_text_len);
        Tape<double> tape;
        hidec::BoundParams<double> params(tape, store);
        auto out = model.teacher_forced_loss(tape, params, batch, false, rng);
        if (pairs) *pairs = out.pairs;
        return tape.value(out.loss).data[0];
    };

    std::size_t n1 = 0, n2 = 0, nb = 0;
    const double l1 = loss_of({docs[0]}, &n1);
    const double l2 = loss_of({docs[1]}, &n2);
    const double lb = loss_of(docs, &nb);
    REQUIRE(nb == n1 + n2);
    const double want = (static_cast<double>(n1) * l1 + static_cast<double>(n2) * l2) /
                        static_cast<double>(nb);
    REQUIRE(lb == Catch::Approx(want).margin(1e-12));
}

TEST_CASE("batched decoder states equal the solo runs document by document") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = {{"iris bloom violet", {"I"}}, {"fern", {"F", "C"}}};
    const Vocabulary vocab = vocab_for(docs);
    const ModelConfig cfg = tiny_config(hidec::EncoderKind::bigru);
    Model<double> model(t, vocab, cfg);
    ParameterStore<double> store;
    Rng init_rng(5);
    model.init_params(store, init_rng);
    Rng rng(0);

    const Batch batch = hidec::build_batch(docs, t, vocab, {}, cfg.max_text_len);
    Tape<double> tape;
    hidec::BoundParams<double> params(tape, store);
    auto fwd = model.forward(tape, params, batch, false, rng);
    const auto& stacked = tape.value(fwd.states);

    for (std::size_t b = 0; b < docs.size(); ++b) {
        const Batch solo = hidec::build_batch({docs[b]}, t, vocab, {}, cfg.max_text_len);
        Tape<double> tape1;
        hidec::BoundParams<double> params1(tape1, store);
        auto one = model.forward(tape1, params1, solo, false, rng);
        const auto& rows = tape1.value(one.states);
        for (std::size_t r = 0; r < rows.rows; ++r)
            for (std::size_t c = 0; c < rows.cols; ++c)
                REQUIRE(stacked.at(fwd.offsets[b] + r, c) ==
                        Catch::Approx(rows.at(r, c)).margin(1e-12));
    }
}

TEST_CASE("padding rows collect no gradient through the full model") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = {{"iris bloom violet stem", {"I"}}, {"fern", {"F"}}};
    const Vocabulary vocab = vocab_for(docs);
    const ModelConfig cfg = tiny_config(hidec::EncoderKind::bigru);
    Model<double> model(t, vocab, cfg);
    ParameterStore<double> store;
    Rng init_rng(9);
    model.init_params(store, init_rng);
    Rng rng(0);

    const Batch batch = hidec::build_batch(docs, t, vocab, {}, cfg.max_text_len);
    REQUIRE(batch.padded_ids[1].size() == 4);  // "fern" padded from 1 to 4
    REQUIRE(batch.lengths[1] == 1);

    Tape<double> tape;
    hidec::BoundParams<double> params(tape, store);
    auto out = model.teacher_forced_loss(tape, params, batch, false, rng);
    store.zero_grad();
    tape.backward(out.loss);
    params.harvest_grads();

    const auto& g = store.at("encoder.embed").grad;
    double pad_row = 0.0, used_rows = 0.0;
    for (std::size_t c = 0; c < g.cols; ++c) pad_row += std::abs(g.at(Vocabulary::kPad, c));
    for (std::size_t r = 2; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c) used_rows += std::abs(g.at(r, c));
    REQUIRE(pad_row == 0.0);
    REQUIRE(used_rows > 0.0);
}

TEST_CASE("documents without labels cannot enter a training batch") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = {{"some text", {}}};
    const Vocabulary vocab = vocab_for(docs);
    REQUIRE_THROWS_MATCHES(hidec::build_batch(docs, t, vocab, {}, 16), hidec::Error,
                           HasCode(Errc::missing_labels));
    REQUIRE_THROWS_MATCHES(hidec::prepare_docs(docs, t, vocab, {}, 16), hidec::Error,
                           HasCode(Errc::missing_labels));
}

TEST_CASE("assemble_batch pads to the longest document and keeps true lengths") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = keyword_docs();
    const Vocabulary vocab = vocab_for(docs);
    const auto packs = hidec::prepare_docs(docs, t, vocab, {}, 16);
    const Batch batch = hidec::assemble_batch(packs, {0, 6});
    REQUIRE(batch.size() == 2);
    REQUIRE(batch.lengths == std::vector<std::size_t>{3, 4});
    REQUIRE(batch.padded_ids[0].size() == 4);
    REQUIRE(batch.padded_ids[0][3] == Vocabulary::kPad);
    REQUIRE(batch.padded_ids[1].size() == 4);
}

TEST_CASE("fit drives the loss down and logs one row per epoch") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = keyword_docs();
    const Vocabulary vocab = vocab_for(docs);
    const ModelConfig cfg = tiny_config(hidec::EncoderKind::meanpool);
    Model<double> model(t, vocab, cfg);
    ParameterStore<double> store;
    Rng init_rng(3);
    model.init_params(store, init_rng);

    TrainConfig tcfg;
    tcfg.epochs = 30;
    tcfg.batch_size = 4;
    tcfg.lr = 0.01;
    tcfg.seed = 3;
    tcfg.eval_every = 10;
    Rng rng(tcfg.seed);
    ParameterStore<double> best;
    const auto result = hidec::fit(model, store, vocab, {}, docs, docs, tcfg, rng, &best);

    REQUIRE(result.epoch_losses.size() == 30);
    REQUIRE(result.steps == 60);  // 8 docs, batch 4 -> 2 steps per epoch
    REQUIRE(result.epoch_losses.front() > result.epoch_losses.back());

    std::vector<std::string> lines;
    std::stringstream ss(result.log_csv);
    for (std::string line; std::getline(ss, line);) lines.push_back(line);
    REQUIRE(lines.size() == 31);
    REQUIRE(lines[0] == "epoch,loss,dev_micro_f1,dev_macro_f1,lr");
    REQUIRE(lines[1].find(",,,") != std::string::npos);   // epoch 1: no dev eval
    REQUIRE(lines[10].find(",,,") == std::string::npos);  // epoch 10: evaluated

    REQUIRE(result.best_epoch % 10 == 0);  // only eval epochs can win
    REQUIRE(result.best_micro_f1 >= 0.0);
    REQUIRE(result.best_micro_f1 <= 1.0);
    REQUIRE(best.entries().size() == store.entries().size());
}

TEST_CASE("without dev evaluation the final parameters are the best parameters") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = keyword_docs();
    const Vocabulary vocab = vocab_for(docs);
    const ModelConfig cfg = tiny_config(hidec::EncoderKind::meanpool);
    Model<double> model(t, vocab, cfg);
    ParameterStore<double> store;
    Rng init_rng(3);
    model.init_params(store, init_rng);

    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.batch_size = 4;
    tcfg.seed = 3;
    tcfg.eval_every = 0;
    Rng rng(tcfg.seed);
    ParameterStore<double> best;
    const auto result = hidec::fit(model, store, vocab, {}, docs, docs, tcfg, rng, &best);
    REQUIRE(result.best_epoch == 0);
    REQUIRE(same_params(best, store));
}

TEST_CASE("training runs with the same seed are byte-identical") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = keyword_docs();
    const Vocabulary vocab = vocab_for(docs);
    ModelConfig cfg = tiny_config(hidec::EncoderKind::bigru);
    cfg.dropout_embed = 0.2;  // exercise the dropout RNG path too
    Model<double> model(t, vocab, cfg);

    TrainConfig tcfg;
    tcfg.epochs = 4;
    tcfg.batch_size = 4;
    tcfg.seed = 42;
    tcfg.eval_every = 2;

    auto run = [&](ParameterStore<double>& best) {
        ParameterStore<double> store;
        Rng init_rng(tcfg.seed);
        model.init_params(store, init_rng);
        Rng rng(tcfg.seed);
        return hidec::fit(model, store, vocab, {}, docs, docs, tcfg, rng, &best);
    };
    ParameterStore<double> best_a, best_b;
    const auto ra = run(best_a);
    const auto rb = run(best_b);
    REQUIRE(ra.log_csv == rb.log_csv);
    REQUIRE(same_params(best_a, best_b));

    ModelBundle<double> bundle_a, bundle_b;
    for (auto* pair : {&bundle_a, &bundle_b}) pair->taxonomy_hash = t.content_hash();
    bundle_a.params = best_a;
    bundle_b.params = best_b;
    const auto pa = tmp_file("hidec_fit_a.ckpt");
    const auto pb = tmp_file("hidec_fit_b.ckpt");
    hidec::save_checkpoint(pa.string(), bundle_a);
    hidec::save_checkpoint(pb.string(), bundle_b);
    REQUIRE(slurp(pa) == slurp(pb));
    std::filesystem::remove(pa);
    std::filesystem::remove(pb);
}

TEST_CASE("a non-finite loss aborts training with a diagnostic") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = keyword_docs();
    const Vocabulary vocab = vocab_for(docs);
    const ModelConfig cfg = tiny_config(hidec::EncoderKind::meanpool);
    Model<double> model(t, vocab, cfg);
    ParameterStore<double> store;
    Rng init_rng(3);
    model.init_params(store, init_rng);
    // Row 2 is the most frequent real word, so every epoch reads it.
    store.at("encoder.embed").value.at(2, 0) = std::numeric_limits<double>::quiet_NaN();

    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch_size = 8;
    Rng rng(0);
    REQUIRE_THROWS_MATCHES(hidec::fit(model, store, vocab, {}, docs, {}, tcfg, rng), hidec::Error,
                           HasCode(Errc::numerical_divergence));
}

TEST_CASE("checkpoints round-trip the full bundle exactly") {
    const Taxonomy t = testutil::example_tree();
    const std::vector<Document> docs = keyword_docs();
    const Vocabulary vocab = vocab_for(docs);
    const ModelConfig cfg = tiny_config(hidec::EncoderKind::bigru);
    Model<double> model(t, vocab, cfg);

    ModelBundle<double> bundle;
    bundle.model_cfg = cfg;
    bundle.train_cfg.seed = 7;
    bundle.train_cfg.precision = "f64";
    bundle.taxonomy_hash = t.content_hash();
    bundle.vocab_words = vocab.word_list();
    bundle.stopwords = {"and", "the"};
    Rng rng(7);
    model.init_params(bundle.params, rng);

    const auto path = tmp_file("hidec_roundtrip.ckpt");
    hidec::save_checkpoint(path.string(), bundle);
    REQUIRE(hidec::checkpoint_precision(path.string()) == "f64");

    const auto loaded = hidec::load_checkpoint<double>(path.string(), &t);
    REQUIRE(loaded.model_cfg.to_json() == bundle.model_cfg.to_json());
    REQUIRE(loaded.train_cfg.to_json() == bundle.train_cfg.to_json());
    REQUIRE(loaded.taxonomy_hash == bundle.taxonomy_hash);
    REQUIRE(loaded.vocab_words == bundle.vocab_words);
    REQUIRE(loaded.stopwords == bundle.stopwords);
    REQUIRE(same_params(loaded.params, bundle.params));

    SECTION("writing the same bundle twice produces identical bytes") {
        const auto again = tmp_file("hidec_roundtrip2.ckpt");
        hidec::save_checkpoint(again.string(), bundle);
        REQUIRE(slurp(path) == slurp(again));
        std::filesystem::remove(again);
    }
    std::filesystem::remove(path);
}

TEST_CASE("damaged or mismatched checkpoints are refused") {
    const Taxonomy t = testutil::example_tree();
    ModelBundle<double> bundle;
    bundle.model_cfg = tiny_config(hidec::EncoderKind::meanpool);
    bundle.train_cfg.precision = "f64";
    bundle.taxonomy_hash = t.content_hash();
    Rng rng(1);
    Model<double> model(t, Vocabulary::from_words({"word"}), bundle.model_cfg);
    bundle.vocab_words = {"word"};
    model.init_params(bundle.params, rng);

    const auto path = tmp_file("hidec_damage.ckpt");
    hidec::save_checkpoint(path.string(), bundle);
    const std::string good = slurp(path);

    SECTION("a flipped byte in the body fails the checksum") {
        std::string bad = good;
        bad[bad.size() / 2] = static_cast<char>(bad[bad.size() / 2] ^ 0x5A);
        spit(path, bad);
        REQUIRE_THROWS_MATCHES(hidec::load_checkpoint<double>(path.string()), hidec::Error,
                               HasCode(Errc::checksum_error));
    }
    SECTION("truncation fails the checksum") {
        spit(path, good.substr(0, good.size() - 9));
        REQUIRE_THROWS_MATCHES(hidec::load_checkpoint<double>(path.string()), hidec::Error,
                               HasCode(Errc::checksum_error));
    }
    SECTION("a file too short to hold a header is rejected") {
        spit(path, "HID");
        REQUIRE_THROWS_MATCHES(hidec::load_checkpoint<double>(path.string()), hidec::Error,
                               HasCode(Errc::checksum_error));
    }
    SECTION("trailing garbage fails the checksum") {
        spit(path, good + "x");
        REQUIRE_THROWS_MATCHES(hidec::load_checkpoint<double>(path.string()), hidec::Error,
                               HasCode(Errc::checksum_error));
    }
    SECTION("wrong magic is not a checkpoint") {
        std::string bad = good;
        bad[0] = 'X';
        spit(path, bad);
        REQUIRE_THROWS_MATCHES(hidec::load_checkpoint<double>(path.string()), hidec::Error,
                               HasCode(Errc::incompatible_checkpoint));
    }
    SECTION("unknown format versions are refused before anything else") {
        std::string bad = good;
        bad[8] = static_cast<char>(9);
        spit(path, bad);
        REQUIRE_THROWS_MATCHES(hidec::load_checkpoint<double>(path.string()), hidec::Error,
                               HasCode(Errc::incompatible_checkpoint));
    }
    SECTION("precision must match the requested element type") {
        REQUIRE_THROWS_MATCHES(hidec::load_checkpoint<float>(path.string()), hidec::Error,
                               HasCode(Errc::incompatible_checkpoint));
    }
    SECTION("a different taxonomy is refused") {
        const Taxonomy other = hidec::load_taxonomy_text("Root\tX\tY");
        REQUIRE_THROWS_MATCHES(hidec::load_checkpoint<double>(path.string(), &other), hidec::Error,
                               HasCode(Errc::taxonomy_mismatch));
    }
    std::filesystem::remove(path);
}

TEST_CASE("config text applies assignments and rejects what it cannot parse") {
    ModelConfig m;
    TrainConfig tr;
    hidec::apply_config_text(
        "layers = 3\n"
        "lr=0.01\n"
        "# a comment line\n"
        "\n"
        "residual = true\n"
        "encoder = meanpool  # trailing comment\n",
        m, tr);
    REQUIRE(m.layers == 3);
    REQUIRE(tr.lr == 0.01);
    REQUIRE(m.residual);
    REQUIRE(m.encoder == hidec::EncoderKind::meanpool);

    REQUIRE_THROWS_MATCHES(hidec::apply_config_entry("no_such_key", "1", m, tr), hidec::Error,
                           HasCode(Errc::invalid_spec));
    REQUIRE_THROWS_MATCHES(hidec::apply_config_entry("layers", "three", m, tr), hidec::Error,
                           HasCode(Errc::invalid_spec));
    REQUIRE_THROWS_MATCHES(hidec::apply_config_text("just words", m, tr), hidec::Error,
                           HasCode(Errc::invalid_spec));

    SECTION("configs survive a JSON round trip") {
        const ModelConfig m2 = ModelConfig::from_json(m.to_json());
        REQUIRE(m2.to_json() == m.to_json());
        const TrainConfig t2 = TrainConfig::from_json(tr.to_json());
        REQUIRE(t2.to_json() == tr.to_json());
    }

    SECTION("validation rejects impossible settings") {
        ModelConfig bad = m;
        bad.model_dim = 6;
        bad.heads = 4;
        REQUIRE_THROWS_MATCHES(bad.validate(), hidec::Error, HasCode(Errc::invalid_spec));
        TrainConfig badt = tr;
        badt.precision = "f16";
        REQUIRE_THROWS_MATCHES(badt.validate(), hidec::Error, HasCode(Errc::invalid_spec));
    }
}
