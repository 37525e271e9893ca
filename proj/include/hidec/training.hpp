#ifndef HIDEC_TRAINING_HPP
#define HIDEC_TRAINING_HPP

#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <hidec/config.hpp>
#include <hidec/corpus.hpp>
#include <hidec/errors.hpp>
#include <hidec/metrics.hpp>
#include <hidec/model.hpp>
#include <hidec/optimizer.hpp>
#include <hidec/rng.hpp>

namespace hidec {

/// A document preprocessed once per run: token ids, gold sequence with its
/// mask and targets, and the gold label-id set for evaluation.
struct DocPack {
    std::vector<std::size_t> ids;
    SubHierSequence seq;
    HierarchyMask mask;
    TargetLabels targets;
    std::set<LabelId> gold;
};

inline std::vector<DocPack> prepare_docs(const std::vector<Document>& docs, const Taxonomy& t,
                                         const Vocabulary& vocab,
                                         const std::set<std::string>& stopwords,
                                         std::size_t max_text_len) {
    std::vector<DocPack> packs;
    packs.reserve(docs.size());
    for (const Document& d : docs) {
        if (d.labels.empty()) raise(Errc::missing_labels, "document has no labels");
        DocPack p;
        p.ids = vocab.encode(tokenize(d.text, stopwords), max_text_len);
        p.gold = document_label_ids(t, d);
        const SubHierarchy sh = build_subhierarchy(t, p.gold);
        p.seq = serialize(t, sh);
        p.mask = build_hierarchy_mask(t, p.seq);
        p.targets = build_targets(t, sh, p.seq);
        packs.push_back(std::move(p));
    }
    return packs;
}

inline Batch assemble_batch(const std::vector<DocPack>& packs,
                            const std::vector<std::size_t>& indices) {
    Batch batch;
    std::size_t max_len = 0;
    for (std::size_t i : indices) max_len = std::max(max_len, packs[i].ids.size());
    for (std::size_t i : indices) {
        const DocPack& p = packs[i];
        std::vector<std::size_t> ids = p.ids;
        ids.resize(max_len, Vocabulary::kPad);
        batch.padded_ids.push_back(std::move(ids));
        batch.lengths.push_back(p.ids.size());
        batch.sequences.push_back(p.seq);
        batch.masks.push_back(p.mask);
        batch.targets.push_back(p.targets);
    }
    return batch;
}

struct FitResult {
    std::string log_csv;
    std::vector<double> epoch_losses;
    std::size_t best_epoch = 0;  // 1-based; 0 means dev was never evaluated
    double best_micro_f1 = -1.0;
    double best_macro_f1 = -1.0;
    std::size_t steps = 0;
};

/**
 * The training loop: seeded shuffling into fixed-size batches, teacher
 * forcing, global-norm clipping, Adam under a linear warmup-then-decay
 * schedule, and periodic dev evaluation by full recursive decoding. The
 * parameters with the best dev micro-F1 are copied into best_out (the
 * final parameters when there is no dev set). Runs with the same seed and
 * config produce identical logs and parameters.
 */
template <typename S>
FitResult fit(const Model<S>& model, ParameterStore<S>& store, const Vocabulary& vocab,
              const std::set<std::string>& stopwords, const std::vector<Document>& train_docs,
              const std::vector<Document>& dev_docs, const TrainConfig& tcfg, Rng& rng,
              ParameterStore<S>* best_out = nullptr, std::ostream* progress = nullptr) {
    tcfg.validate();
    if (train_docs.empty()) raise(Errc::empty_corpus, "no training documents");
    const Taxonomy& t = model.taxonomy();
    const std::size_t max_len = model.config().max_text_len;
    const std::vector<DocPack> train_packs = prepare_docs(train_docs, t, vocab, stopwords, max_len);
    const std::vector<DocPack> dev_packs = prepare_docs(dev_docs, t, vocab, stopwords, max_len);

    const std::size_t n = train_packs.size();
    const std::size_t steps_per_epoch = (n + tcfg.batch_size - 1) / tcfg.batch_size;
    const std::int64_t total_steps =
        static_cast<std::int64_t>(steps_per_epoch) * static_cast<std::int64_t>(tcfg.epochs);
    const std::int64_t warmup_steps =
        static_cast<std::int64_t>(std::llround(tcfg.warmup_ratio * static_cast<double>(total_steps)));
    const AdamConfig adam{tcfg.beta1, tcfg.beta2, tcfg.adam_eps};

    FitResult result;
    result.log_csv = "epoch,loss,dev_micro_f1,dev_macro_f1,lr\n";

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t pair_sum = 0;
        double last_lr = 0.0;
        for (std::size_t start = 0, bi = 0; start < n; start += tcfg.batch_size, ++bi) {
            const std::size_t stop = std::min(n, start + tcfg.batch_size);
            const std::vector<std::size_t> picks(order.begin() + start, order.begin() + stop);
            const Batch batch = assemble_batch(train_packs, picks);

            Tape<S> tape;
            BoundParams<S> params(tape, store);
            auto out = model.teacher_forced_loss(tape, params, batch, true, rng);
            const double loss = static_cast<double>(tape.value(out.loss).data[0]);
            if (!std::isfinite(loss))
                raise(Errc::numerical_divergence,
                      "non-finite loss in epoch " + std::to_string(epoch) + " batch " +
                          std::to_string(bi));
            loss_sum += loss * static_cast<double>(out.pairs);
            pair_sum += out.pairs;

            store.zero_grad();
            tape.backward(out.loss);
            params.harvest_grads();
            clip_global_norm(store, tcfg.clip_norm);
            last_lr = lr_at_step(tcfg.lr, store.step, warmup_steps, total_steps);
            adam_step(store, last_lr, adam);
            ++result.steps;
        }
        const double epoch_loss = loss_sum / static_cast<double>(pair_sum);
        result.epoch_losses.push_back(epoch_loss);

        const bool eval_now = !dev_packs.empty() && tcfg.eval_every > 0 &&
                              (epoch % tcfg.eval_every == 0 || epoch == tcfg.epochs);
        char line[160];
        if (eval_now) {
            std::vector<std::set<LabelId>> gold, pred;
            gold.reserve(dev_packs.size());
            pred.reserve(dev_packs.size());
            for (const DocPack& p : dev_packs) {
                gold.push_back(p.gold);
                pred.push_back(predict_document(model, store, p.ids, tcfg.threshold).labels);
            }
            const EvalReport report = evaluate(gold, pred, t, true);
            if (report.micro_f1 > result.best_micro_f1) {
                result.best_micro_f1 = report.micro_f1;
                result.best_macro_f1 = report.macro_f1;
                result.best_epoch = epoch;
                if (best_out) *best_out = store;
            }
            std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%.6f,%.8f\n", epoch, epoch_loss,
                          report.micro_f1, report.macro_f1, last_lr);
        } else {
            std::snprintf(line, sizeof(line), "%zu,%.6f,,,%.8f\n", epoch, epoch_loss, last_lr);
        }
        result.log_csv += line;
        if (progress) *progress << line << std::flush;
    }

    if (result.best_epoch == 0 && best_out) *best_out = store;
    return result;
}

}  // namespace hidec

#endif  // HIDEC_TRAINING_HPP
