// Command-line front end: taxonomy checks, sequence codec, synthetic data,
// training, prediction, evaluation, and attention export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <hidec/checkpoint.hpp>
#include <hidec/config.hpp>
#include <hidec/corpus.hpp>
#include <hidec/datagen.hpp>
#include <hidec/errors.hpp>
#include <hidec/inference.hpp>
#include <hidec/metrics.hpp>
#include <hidec/model.hpp>
#include <hidec/subhier.hpp>
#include <hidec/taxonomy.hpp>
#include <hidec/training.hpp>
#include <hidec/vocab.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) hidec::raise(hidec::Errc::invalid_format, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) hidec::raise(hidec::Errc::invalid_format, "short write to " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : csv) {
        if (ch == ',') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else if (ch != ' ') {
            item.push_back(ch);
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

std::set<hidec::LabelId> label_ids(const hidec::Taxonomy& t, const std::string& csv) {
    std::set<hidec::LabelId> ids;
    for (const std::string& name : split_list(csv)) ids.insert(t.require(name));
    if (ids.empty()) hidec::raise(hidec::Errc::empty_label_set, "no labels given");
    return ids;
}

std::string token_display(const hidec::Taxonomy& t, const hidec::Token& tok) {
    switch (tok.kind) {
        case hidec::TokenKind::open: return "(";
        case hidec::TokenKind::close: return ")";
        case hidec::TokenKind::terminator: return "[END]";
        default: return t.name(tok.label);
    }
}

std::set<std::string> stopword_set(const std::vector<std::string>& words) {
    return {words.begin(), words.end()};
}

// ---------------------------------------------------------------- taxonomy

int cmd_taxonomy_validate(const std::string& path) {
    const hidec::Taxonomy t = hidec::load_taxonomy(path);
    std::printf("labels %zu\n", t.size());
    std::printf("max_depth %zu\n", t.max_depth());
    std::printf("root %s\n", t.name(t.root()).c_str());
    std::size_t leaves = 0;
    for (hidec::LabelId v = 0; v < static_cast<hidec::LabelId>(t.size()); ++v)
        if (t.is_leaf(v)) ++leaves;
    std::printf("leaves %zu\n", leaves);
    std::printf("content_hash %llu\n", static_cast<unsigned long long>(t.content_hash()));
    std::printf("ok\n");
    return 0;
}

// ------------------------------------------------------------------- codec

int cmd_codec_encode(const std::string& taxonomy_path, const std::string& labels_csv) {
    const hidec::Taxonomy t = hidec::load_taxonomy(taxonomy_path);
    const auto sh = hidec::build_subhierarchy(t, label_ids(t, labels_csv));
    std::printf("%s\n", hidec::sequence_to_string(t, hidec::serialize(t, sh)).c_str());
    return 0;
}

int cmd_codec_decode(const std::string& taxonomy_path, const std::string& sequence) {
    const hidec::Taxonomy t = hidec::load_taxonomy(taxonomy_path);
    const auto sh = hidec::deserialize(t, hidec::sequence_from_string(t, sequence));
    std::string out;
    for (hidec::LabelId v : sh.assigned) {
        if (!out.empty()) out += ',';
        out += t.name(v);
    }
    std::printf("%s\n", out.c_str());
    return 0;
}

// -------------------------------------------------------------- synth-data

int cmd_synth(const hidec::SynthSpec& spec, const std::string& out_dir) {
    const hidec::SynthData data = hidec::generate_synth(spec);
    const fs::path out(out_dir);
    fs::create_directories(out);

    write_text(out / "taxonomy.tsv", hidec::taxonomy_to_text(data.taxonomy));
    hidec::save_jsonl_file((out / "train.jsonl").string(), data.train);
    if (!data.dev.empty()) hidec::save_jsonl_file((out / "dev.jsonl").string(), data.dev);
    if (!data.test.empty()) hidec::save_jsonl_file((out / "test.jsonl").string(), data.test);

    json manifest = {
        {"taxonomy", "taxonomy.tsv"},
        {"labels", data.taxonomy.size()},
        {"max_depth", data.taxonomy.max_depth()},
        {"train", {{"file", "train.jsonl"}, {"documents", data.train.size()}}},
        {"spec",
         {{"depth", spec.depth},
          {"branch_min", spec.branch_min},
          {"branch_max", spec.branch_max},
          {"keywords_per_label", spec.keywords_per_label},
          {"noise_vocab", spec.noise_vocab},
          {"noise_fraction", spec.noise_fraction},
          {"doc_len", spec.doc_len},
          {"avg_labels", spec.avg_labels},
          {"docs_train", spec.docs_train},
          {"docs_dev", spec.docs_dev},
          {"docs_test", spec.docs_test},
          {"seed", spec.seed}}},
    };
    if (!data.dev.empty())
        manifest["dev"] = {{"file", "dev.jsonl"}, {"documents", data.dev.size()}};
    if (!data.test.empty())
        manifest["test"] = {{"file", "test.jsonl"}, {"documents", data.test.size()}};
    write_json(out / "manifest.json", manifest);
    std::printf("wrote %s: %zu labels, %zu train docs\n", out_dir.c_str(),
                data.taxonomy.size(), data.train.size());
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainPaths {
    std::string taxonomy, train, dev, config, out;
    std::vector<std::string> overrides;
    std::size_t replicas = 1;
};

struct ReplicaScore {
    double micro = 0.0, macro = 0.0;
    std::size_t best_epoch = 0;
};

template <typename S>
ReplicaScore train_one(const hidec::Taxonomy& t, const std::vector<hidec::Document>& train_docs,
                       const std::vector<hidec::Document>& dev_docs,
                       const hidec::ModelConfig& mcfg, const hidec::TrainConfig& tcfg,
                       const fs::path& out) {
    fs::create_directories(out);
    write_json(out / "config.json", {{"model", mcfg.to_json()}, {"train", tcfg.to_json()}});

    const std::set<std::string> stopwords = stopword_set(hidec::default_stopwords());
    std::vector<std::vector<std::string>> tokenized;
    tokenized.reserve(train_docs.size());
    for (const hidec::Document& d : train_docs)
        tokenized.push_back(hidec::tokenize(d.text, stopwords));
    const hidec::Vocabulary vocab = hidec::Vocabulary::build(tokenized, tcfg.min_count);

    hidec::Model<S> model(t, vocab, mcfg);
    hidec::ParameterStore<S> store;
    hidec::Rng rng(tcfg.seed);
    model.init_params(store, rng);

    hidec::ParameterStore<S> best;
    const hidec::FitResult result =
        hidec::fit(model, store, vocab, stopwords, train_docs, dev_docs, tcfg, rng, &best,
                   &std::cout);
    write_text(out / "log.csv", result.log_csv);

    hidec::ModelBundle<S> bundle;
    bundle.model_cfg = mcfg;
    bundle.train_cfg = tcfg;
    bundle.taxonomy_hash = t.content_hash();
    bundle.vocab_words = vocab.word_list();
    bundle.stopwords = hidec::default_stopwords();
    bundle.params = std::move(best);
    hidec::save_checkpoint((out / "checkpoint.bin").string(), bundle);

    json manifest = {
        {"artifacts", {"config.json", "log.csv", "checkpoint.bin"}},
        {"taxonomy_hash", std::to_string(t.content_hash())},
        {"vocabulary_size", vocab.size()},
        {"steps", result.steps},
        {"final_train_loss", result.epoch_losses.back()},
    };
    if (result.best_epoch > 0) {
        manifest["best_epoch"] = result.best_epoch;
        manifest["dev_micro_f1"] = result.best_micro_f1;
        manifest["dev_macro_f1"] = result.best_macro_f1;
    }
    write_json(out / "manifest.json", manifest);
    return {result.best_micro_f1, result.best_macro_f1, result.best_epoch};
}

int cmd_train(const TrainPaths& paths) {
    const hidec::Taxonomy t = hidec::load_taxonomy(paths.taxonomy);
    const auto train_docs = hidec::load_jsonl_file(paths.train);
    std::vector<hidec::Document> dev_docs;
    if (!paths.dev.empty()) dev_docs = hidec::load_jsonl_file(paths.dev);

    hidec::ModelConfig mcfg;
    hidec::TrainConfig tcfg;
    if (!paths.config.empty()) {
        std::ifstream in(paths.config);
        if (!in) hidec::raise(hidec::Errc::invalid_format, "cannot open " + paths.config);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        hidec::apply_config_text(text, mcfg, tcfg);
    }
    for (const std::string& entry : paths.overrides) {
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos)
            hidec::raise(hidec::Errc::invalid_spec, "--set expects key=value, got " + entry);
        hidec::apply_config_entry(entry.substr(0, eq), entry.substr(eq + 1), mcfg, tcfg);
    }
    mcfg.validate();
    tcfg.validate();

    if (paths.replicas == 0) hidec::raise(hidec::Errc::invalid_spec, "replicas must be positive");
    if (paths.replicas > 1 && dev_docs.empty())
        hidec::raise(hidec::Errc::invalid_spec,
                     "replica scoring needs a dev corpus; pass --dev");

    auto run = [&](const hidec::TrainConfig& cfg, const fs::path& out) {
        return cfg.precision == "f64"
                   ? train_one<double>(t, train_docs, dev_docs, mcfg, cfg, out)
                   : train_one<float>(t, train_docs, dev_docs, mcfg, cfg, out);
    };

    const fs::path out(paths.out);
    if (paths.replicas == 1) {
        const ReplicaScore score = run(tcfg, out);
        if (score.best_epoch > 0)
            std::printf("best dev micro_f1 %.6f macro_f1 %.6f at epoch %zu\n", score.micro,
                        score.macro, score.best_epoch);
        std::printf("wrote %s\n", paths.out.c_str());
        return 0;
    }

    std::vector<ReplicaScore> scores;
    for (std::size_t i = 0; i < paths.replicas; ++i) {
        hidec::TrainConfig cfg = tcfg;
        cfg.seed = tcfg.seed + i;
        std::printf("replica %zu (seed %llu)\n", i,
                    static_cast<unsigned long long>(cfg.seed));
        scores.push_back(run(cfg, out / ("replica_" + std::to_string(i))));
    }
    auto mean_std = [&](auto pick) {
        double mean = 0.0;
        for (const ReplicaScore& s : scores) mean += pick(s);
        mean /= static_cast<double>(scores.size());
        double var = 0.0;
        for (const ReplicaScore& s : scores) var += (pick(s) - mean) * (pick(s) - mean);
        var /= static_cast<double>(scores.size());
        return std::pair<double, double>(mean, std::sqrt(var));
    };
    const auto [micro_mean, micro_std] = mean_std([](const ReplicaScore& s) { return s.micro; });
    const auto [macro_mean, macro_std] = mean_std([](const ReplicaScore& s) { return s.macro; });

    fs::create_directories(out);
    json per = json::array();
    for (std::size_t i = 0; i < scores.size(); ++i)
        per.push_back({{"replica", i},
                       {"seed", tcfg.seed + i},
                       {"dev_micro_f1", scores[i].micro},
                       {"dev_macro_f1", scores[i].macro},
                       {"best_epoch", scores[i].best_epoch}});
    write_json(out / "manifest.json", {{"replicas", paths.replicas},
                                       {"dev_micro_f1_mean", micro_mean},
                                       {"dev_micro_f1_std", micro_std},
                                       {"dev_macro_f1_mean", macro_mean},
                                       {"dev_macro_f1_std", macro_std},
                                       {"per_replica", per}});
    std::printf("dev micro_f1 %.6f +/- %.6f, macro_f1 %.6f +/- %.6f over %zu replicas\n",
                micro_mean, micro_std, macro_mean, macro_std, paths.replicas);
    return 0;
}

// ------------------------------------------------- checkpoint-backed tools

/// Everything predict/evaluate/inspect need from disk, at one precision.
template <typename S>
struct LoadedModel {
    hidec::ModelBundle<S> bundle;
    hidec::Vocabulary vocab;
    std::set<std::string> stopwords;
    hidec::Model<S> model;

    LoadedModel(const hidec::Taxonomy& t, const std::string& checkpoint)
        : bundle(hidec::load_checkpoint<S>(checkpoint, &t)),
          vocab(hidec::Vocabulary::from_words(bundle.vocab_words)),
          stopwords(stopword_set(bundle.stopwords)),
          model(t, vocab, bundle.model_cfg) {}
};

template <typename S>
int predict_impl(const hidec::Taxonomy& t, const std::string& checkpoint,
                 const std::string& input, const std::string& out_file, double threshold) {
    LoadedModel<S> lm(t, checkpoint);
    const double th = threshold > 0.0 ? threshold : lm.bundle.train_cfg.threshold;
    const auto docs = hidec::load_jsonl_file(input);

    std::string lines;
    for (const hidec::Document& d : docs) {
        const auto ids = lm.model.encode_text(d.text, lm.vocab, lm.stopwords);
        const hidec::DecodeResult res = hidec::predict_document(lm.model, lm.bundle.params, ids, th);
        json names = json::array();
        for (hidec::LabelId v : res.labels) names.push_back(t.name(v));
        lines += json{{"labels", names}, {"fallback_steps", res.state.fallback_steps}}.dump();
        lines += '\n';
    }
    write_text(out_file, lines);
    std::printf("wrote %zu predictions to %s\n", docs.size(), out_file.c_str());
    return 0;
}

template <typename S>
int evaluate_impl(const hidec::Taxonomy& t, const std::string& checkpoint,
                  const std::string& input, const std::string& out_dir, double threshold,
                  bool closure) {
    LoadedModel<S> lm(t, checkpoint);
    const double th = threshold > 0.0 ? threshold : lm.bundle.train_cfg.threshold;
    const auto docs = hidec::load_jsonl_file(input);
    if (docs.empty()) hidec::raise(hidec::Errc::empty_corpus, input + " has no documents");

    std::vector<std::set<hidec::LabelId>> gold, pred;
    for (const hidec::Document& d : docs) {
        if (d.labels.empty())
            hidec::raise(hidec::Errc::missing_labels,
                         "evaluation corpus has an unlabeled document");
        gold.push_back(hidec::document_label_ids(t, d));
        const auto ids = lm.model.encode_text(d.text, lm.vocab, lm.stopwords);
        pred.push_back(hidec::predict_document(lm.model, lm.bundle.params, ids, th).labels);
    }
    const hidec::EvalReport report = hidec::evaluate(gold, pred, t, closure);

    const fs::path out(out_dir);
    fs::create_directories(out);
    write_json(out / "report.json", report.to_json(t));
    write_text(out / "levels.csv", hidec::level_csv(report, t));
    std::printf("micro_f1 %.6f macro_f1 %.6f over %zu documents\n", report.micro_f1,
                report.macro_f1, report.documents);
    return 0;
}

template <typename S>
int inspect_impl(const hidec::Taxonomy& t, const std::string& checkpoint, const std::string& text,
                 const std::string& labels_csv, const std::string& out_dir, double threshold) {
    LoadedModel<S> lm(t, checkpoint);
    const auto ids = lm.model.encode_text(text, lm.vocab, lm.stopwords);

    hidec::SubHierarchy sh;
    if (!labels_csv.empty()) {
        sh = hidec::build_subhierarchy(t, label_ids(t, labels_csv));
    } else {
        const double th = threshold > 0.0 ? threshold : lm.bundle.train_cfg.threshold;
        const hidec::DecodeResult res =
            hidec::predict_document(lm.model, lm.bundle.params, ids, th);
        sh = hidec::decode_state_graph(res.state);
        sh.assigned = res.labels;
    }
    const hidec::SubHierSequence seq = hidec::serialize(t, sh);

    hidec::Tape<S> tape;
    hidec::BoundParams<S> params(tape, lm.bundle.params);
    hidec::Rng rng(0);
    auto H = lm.model.encoder().encode(tape, params, {ids}, {ids.size()}, 0.0, false, rng);
    const auto self_mask = hidec::mask_to_array<S>(hidec::build_hierarchy_mask(t, seq));
    hidec::AttentionCapture capture;
    lm.model.decoder().decoder_forward(tape, params, seq, H[0], &self_mask, nullptr, false, rng,
                                       &capture);

    std::vector<std::string> seq_names, text_names;
    for (const hidec::Token& tok : seq.tokens) seq_names.push_back(token_display(t, tok));
    // The mean-pooled encoder collapses the text to one state, so name the
    // key columns after words only when there is one state per word.
    const std::size_t text_cols =
        capture.cross_weights.empty() ? ids.size() : capture.cross_weights[0][0].cols;
    if (text_cols == ids.size())
        for (std::size_t id : ids) text_names.push_back(lm.vocab.word(id));
    else
        for (std::size_t c = 0; c < text_cols; ++c)
            text_names.push_back("state" + std::to_string(c));

    auto to_csv = [](const hidec::Array<double>& w, const std::vector<std::string>& rows,
                     const std::vector<std::string>& cols) {
        std::string csv = "query";
        for (const std::string& c : cols) csv += "," + c;
        csv += '\n';
        for (std::size_t r = 0; r < w.rows; ++r) {
            csv += rows[r];
            for (std::size_t c = 0; c < w.cols; ++c) {
                char cell[40];
                std::snprintf(cell, sizeof(cell), ",%.8f", w.at(r, c));
                csv += cell;
            }
            csv += '\n';
        }
        return csv;
    };

    const fs::path out(out_dir);
    fs::create_directories(out);
    json files = json::array();
    for (std::size_t l = 0; l < capture.self_weights.size(); ++l) {
        for (std::size_t h = 0; h < capture.self_weights[l].size(); ++h) {
            const std::string self_name =
                "self_layer" + std::to_string(l) + "_head" + std::to_string(h) + ".csv";
            const std::string cross_name =
                "cross_layer" + std::to_string(l) + "_head" + std::to_string(h) + ".csv";
            write_text(out / self_name, to_csv(capture.self_weights[l][h], seq_names, seq_names));
            write_text(out / cross_name,
                       to_csv(capture.cross_weights[l][h], seq_names, text_names));
            files.push_back(self_name);
            files.push_back(cross_name);
        }
    }
    write_text(out / "sequence.txt", hidec::sequence_to_string(t, seq) + "\n");
    files.push_back("sequence.txt");
    write_json(out / "manifest.json",
               {{"files", files},
                {"sequence_length", seq.length()},
                {"text_tokens", ids.size()},
                {"layers", capture.self_weights.size()},
                {"heads", lm.bundle.model_cfg.heads}});
    std::printf("wrote %zu attention maps to %s\n", files.size() - 1, out_dir.c_str());
    return 0;
}

/// Dispatches a checkpoint-consuming command on the stored precision.
template <template <typename> class Fn>
int with_checkpoint_precision(const std::string& checkpoint, auto&&... args) {
    if (hidec::checkpoint_precision(checkpoint) == "f64")
        return Fn<double>::run(checkpoint, std::forward<decltype(args)>(args)...);
    return Fn<float>::run(checkpoint, std::forward<decltype(args)>(args)...);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical text classification via sub-hierarchy sequences"};
    app.require_subcommand(1);
    int rc = 0;

    // taxonomy validate
    auto* taxonomy_cmd = app.add_subcommand("taxonomy", "taxonomy file utilities");
    taxonomy_cmd->require_subcommand(1);
    auto* validate_cmd =
        taxonomy_cmd->add_subcommand("validate", "check a taxonomy file and print its shape");
    static std::string val_path;
    validate_cmd->add_option("file", val_path, "taxonomy file")->required();
    validate_cmd->callback([&] { rc = cmd_taxonomy_validate(val_path); });

    // codec encode / decode
    auto* codec_cmd = app.add_subcommand("codec", "sub-hierarchy sequence codec");
    codec_cmd->require_subcommand(1);
    static std::string enc_taxonomy, enc_labels;
    auto* encode_cmd =
        codec_cmd->add_subcommand("encode", "serialize a label set to its token sequence");
    encode_cmd->add_option("--taxonomy", enc_taxonomy, "taxonomy file")->required();
    encode_cmd->add_option("--labels", enc_labels, "comma-separated label names")->required();
    encode_cmd->callback([&] { rc = cmd_codec_encode(enc_taxonomy, enc_labels); });

    static std::string dec_taxonomy, dec_sequence;
    auto* decode_cmd =
        codec_cmd->add_subcommand("decode", "recover the assigned labels from a sequence");
    decode_cmd->add_option("--taxonomy", dec_taxonomy, "taxonomy file")->required();
    decode_cmd->add_option("--sequence", dec_sequence, "token sequence text")->required();
    decode_cmd->callback([&] { rc = cmd_codec_decode(dec_taxonomy, dec_sequence); });

    // synth-data
    auto* synth_cmd = app.add_subcommand("synth-data", "generate a synthetic benchmark");
    static hidec::SynthSpec spec;
    static std::string synth_out;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--depth", spec.depth, "taxonomy depth");
    synth_cmd->add_option("--branch-min", spec.branch_min, "minimum children per internal node");
    synth_cmd->add_option("--branch-max", spec.branch_max, "maximum children per internal node");
    synth_cmd->add_option("--keywords-per-label", spec.keywords_per_label,
                          "keyword pool size per label");
    synth_cmd->add_option("--noise-vocab", spec.noise_vocab, "distinct noise tokens");
    synth_cmd->add_option("--noise-fraction", spec.noise_fraction,
                          "fraction of each document that is noise");
    synth_cmd->add_option("--doc-len", spec.doc_len, "target tokens per document");
    synth_cmd->add_option("--avg-labels", spec.avg_labels, "mean labels per document");
    synth_cmd->add_option("--docs-train", spec.docs_train, "training documents");
    synth_cmd->add_option("--docs-dev", spec.docs_dev, "dev documents");
    synth_cmd->add_option("--docs-test", spec.docs_test, "test documents");
    synth_cmd->add_option("--seed", spec.seed, "generator seed");
    synth_cmd->callback([&] { rc = cmd_synth(spec, synth_out); });

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model");
    static TrainPaths tp;
    train_cmd->add_option("--taxonomy", tp.taxonomy, "taxonomy file")->required();
    train_cmd->add_option("--train", tp.train, "training corpus (jsonl)")->required();
    train_cmd->add_option("--dev", tp.dev, "dev corpus for model selection (jsonl)");
    train_cmd->add_option("--config", tp.config, "key=value config file");
    train_cmd->add_option("--set", tp.overrides, "config override key=value (repeatable)");
    train_cmd->add_option("--out", tp.out, "output directory")->required();
    train_cmd->add_option("--replicas", tp.replicas, "train this many seeds and pool dev scores");
    train_cmd->callback([&] { rc = cmd_train(tp); });

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "decode label sets for documents");
    static std::string pr_taxonomy, pr_checkpoint, pr_input, pr_out;
    static double pr_threshold = 0.0;
    predict_cmd->add_option("--taxonomy", pr_taxonomy, "taxonomy file")->required();
    predict_cmd->add_option("--checkpoint", pr_checkpoint, "trained checkpoint")->required();
    predict_cmd->add_option("--input", pr_input, "documents to label (jsonl)")->required();
    predict_cmd->add_option("--out", pr_out, "output predictions file (jsonl)")->required();
    predict_cmd->add_option("--threshold", pr_threshold,
                            "decode threshold (default: from checkpoint)");
    predict_cmd->callback([&] {
        const hidec::Taxonomy t = hidec::load_taxonomy(pr_taxonomy);
        if (hidec::checkpoint_precision(pr_checkpoint) == "f64")
            rc = predict_impl<double>(t, pr_checkpoint, pr_input, pr_out, pr_threshold);
        else
            rc = predict_impl<float>(t, pr_checkpoint, pr_input, pr_out, pr_threshold);
    });

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against gold labels");
    static std::string ev_taxonomy, ev_checkpoint, ev_input, ev_out;
    static double ev_threshold = 0.0;
    static bool ev_raw = false;
    eval_cmd->add_option("--taxonomy", ev_taxonomy, "taxonomy file")->required();
    eval_cmd->add_option("--checkpoint", ev_checkpoint, "trained checkpoint")->required();
    eval_cmd->add_option("--input", ev_input, "labeled corpus (jsonl)")->required();
    eval_cmd->add_option("--out", ev_out, "output directory")->required();
    eval_cmd->add_option("--threshold", ev_threshold,
                         "decode threshold (default: from checkpoint)");
    eval_cmd->add_flag("--no-closure", ev_raw, "score raw label sets without ancestor closure");
    eval_cmd->callback([&] {
        const hidec::Taxonomy t = hidec::load_taxonomy(ev_taxonomy);
        if (hidec::checkpoint_precision(ev_checkpoint) == "f64")
            rc = evaluate_impl<double>(t, ev_checkpoint, ev_input, ev_out, ev_threshold, !ev_raw);
        else
            rc = evaluate_impl<float>(t, ev_checkpoint, ev_input, ev_out, ev_threshold, !ev_raw);
    });

    // inspect-attention
    auto* inspect_cmd =
        app.add_subcommand("inspect-attention", "export attention weights for one document");
    static std::string in_taxonomy, in_checkpoint, in_text, in_labels, in_out;
    static double in_threshold = 0.0;
    inspect_cmd->add_option("--taxonomy", in_taxonomy, "taxonomy file")->required();
    inspect_cmd->add_option("--checkpoint", in_checkpoint, "trained checkpoint")->required();
    inspect_cmd->add_option("--text", in_text, "document text")->required();
    inspect_cmd->add_option("--labels", in_labels,
                            "gold labels for the sequence (default: predict them)");
    inspect_cmd->add_option("--out", in_out, "output directory")->required();
    inspect_cmd->add_option("--threshold", in_threshold,
                            "decode threshold (default: from checkpoint)");
    inspect_cmd->callback([&] {
        const hidec::Taxonomy t = hidec::load_taxonomy(in_taxonomy);
        if (hidec::checkpoint_precision(in_checkpoint) == "f64")
            rc = inspect_impl<double>(t, in_checkpoint, in_text, in_labels, in_out, in_threshold);
        else
            rc = inspect_impl<float>(t, in_checkpoint, in_text, in_labels, in_out, in_threshold);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const hidec::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
