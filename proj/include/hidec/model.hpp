#ifndef HIDEC_MODEL_HPP
#define HIDEC_MODEL_HPP

#include <set>
#include <string>
#include <vector>

#include <hidec/config.hpp>
#include <hidec/corpus.hpp>
#include <hidec/decoder.hpp>
#include <hidec/encoder.hpp>
#include <hidec/errors.hpp>
#include <hidec/inference.hpp>
#include <hidec/optimizer.hpp>
#include <hidec/rng.hpp>
#include <hidec/subhier.hpp>
#include <hidec/taxonomy.hpp>
#include <hidec/tensor.hpp>
#include <hidec/vocab.hpp>

namespace hidec {

/// Teacher-forcing targets for one sequence: at every label position, the
/// augmented candidate list and a 0/1 target per candidate. A child is
/// positive iff it belongs to the sub-hierarchy; the terminator is
/// positive iff the label is assigned.
struct TargetLabels {
    struct Item {
        std::size_t position;
        LabelId parent;
        std::vector<Taxonomy::Candidate> candidates;
        std::vector<int> targets;
    };
    std::vector<Item> items;

    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const Item& it : items) n += it.candidates.size();
        return n;
    }
};

inline TargetLabels build_targets(const Taxonomy& t, const SubHierarchy& sh,
                                  const SubHierSequence& seq) {
    TargetLabels out;
    for (std::size_t i = 0; i < seq.length(); ++i) {
        if (seq.tokens[i].kind != TokenKind::label) continue;
        TargetLabels::Item item;
        item.position = i;
        item.parent = seq.tokens[i].label;
        item.candidates = t.augmented_children(item.parent);
        item.targets.reserve(item.candidates.size());
        for (const Taxonomy::Candidate& c : item.candidates) {
            const bool y = c.is_end() ? sh.assigned.count(item.parent) != 0
                                      : sh.nodes.count(c.label) != 0;
            item.targets.push_back(y ? 1 : 0);
        }
        out.items.push_back(std::move(item));
    }
    return out;
}

/// Everything a training step needs for a slice of the corpus: text ids
/// padded to the batch maximum with true lengths alongside, plus each
/// document's gold sequence, hierarchy mask, and scoring targets.
struct Batch {
    std::vector<std::vector<std::size_t>> padded_ids;
    std::vector<std::size_t> lengths;
    std::vector<SubHierSequence> sequences;
    std::vector<HierarchyMask> masks;
    std::vector<TargetLabels> targets;

    std::size_t size() const { return padded_ids.size(); }
    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const TargetLabels& tl : targets) n += tl.pair_count();
        return n;
    }
};

inline Batch build_batch(const std::vector<Document>& docs, const Taxonomy& t,
                         const Vocabulary& vocab, const std::set<std::string>& stopwords,
                         std::size_t max_text_len) {
    if (docs.empty()) raise(Errc::empty_corpus, "empty batch");
    Batch batch;
    std::size_t max_len = 0;
    for (const Document& d : docs) {
        if (d.labels.empty()) raise(Errc::missing_labels, "document has no labels");
        std::vector<std::size_t> ids = vocab.encode(tokenize(d.text, stopwords), max_text_len);
        max_len = std::max(max_len, ids.size());
        batch.lengths.push_back(ids.size());
        batch.padded_ids.push_back(std::move(ids));

        const SubHierarchy sh = build_subhierarchy(t, document_label_ids(t, d));
        SubHierSequence seq = serialize(t, sh);
        batch.masks.push_back(build_hierarchy_mask(t, seq));
        batch.targets.push_back(build_targets(t, sh, seq));
        batch.sequences.push_back(std::move(seq));
    }
    for (auto& ids : batch.padded_ids) ids.resize(max_len, Vocabulary::kPad);
    return batch;
}

template <typename S>
Array<S> mask_to_array(const HierarchyMask& m) {
    Array<S> out(m.size(), m.size());
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<S>(m.entries()[i]);
    return out;
}

/**
 * The assembled classifier: text encoder, sub-hierarchy decoder, scoring
 * and loss. Batches are processed by concatenating the documents'
 * sequences into one tall matrix with a block-diagonal self mask and a
 * block cross mask, which makes batched outputs exactly equal the
 * unbatched ones.
 */
template <typename S>
class Model {
public:
    using Var = typename Tape<S>::Var;

    Model(const Taxonomy& t, const Vocabulary& vocab, const ModelConfig& cfg)
        : taxonomy_(&t),
          encoder_(cfg.encoder, vocab.size(), cfg.embed_dim, cfg.hidden_dim),
          decoder_(t.size(), t.max_depth(), encoder_.output_dim(), cfg),
          cfg_(cfg) {}

    const Taxonomy& taxonomy() const { return *taxonomy_; }
    const ModelConfig& config() const { return cfg_; }
    const TextEncoder<S>& encoder() const { return encoder_; }
    const SubHierDecoder<S>& decoder() const { return decoder_; }

    void init_params(ParameterStore<S>& store, Rng& rng) const {
        encoder_.init_params(store, rng);
        decoder_.init_params(store, rng);
    }

    struct ForwardOut {
        Var states;                        // all documents' decoder outputs stacked
        std::vector<std::size_t> offsets;  // row offset of each document in states
    };

    /// Encoder + decoder over a batch. Offsets locate each document's rows
    /// in the concatenated output.
    ForwardOut forward(Tape<S>& tape, BoundParams<S>& params, const Batch& batch, bool training,
                       Rng& rng, AttentionCapture* capture = nullptr) const {
        std::vector<Var> H = encoder_.encode(tape, params, batch.padded_ids, batch.lengths,
                                             cfg_.dropout_embed, training, rng);
        std::vector<Var> U0;
        std::vector<std::size_t> seq_rows, text_rows;
        U0.reserve(batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b) {
            U0.push_back(decoder_.embed_sequence(tape, params, batch.sequences[b], training, rng));
            seq_rows.push_back(batch.sequences[b].length());
            text_rows.push_back(tape.value(H[b]).rows);
        }

        ForwardOut out;
        std::size_t offset = 0;
        for (std::size_t r : seq_rows) {
            out.offsets.push_back(offset);
            offset += r;
        }
        const std::size_t m_total = offset;
        std::size_t n_total = 0;
        for (std::size_t r : text_rows) n_total += r;

        // Block-diagonal masks: inside a document's block the hierarchy
        // mask (self) or fully open attention (cross); everything across
        // documents is masked out.
        Array<S> self_mask(m_total, m_total);
        self_mask.fill(S(HierarchyMask::kMasked));
        Array<S> cross_mask(m_total, n_total);
        cross_mask.fill(S(HierarchyMask::kMasked));
        std::size_t rq = 0, rk = 0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const HierarchyMask& m = batch.masks[b];
            for (std::size_t q = 0; q < m.size(); ++q)
                for (std::size_t k = 0; k < m.size(); ++k)
                    self_mask.at(rq + q, rq + k) = static_cast<S>(m.at(q, k));
            for (std::size_t q = 0; q < seq_rows[b]; ++q)
                for (std::size_t k = 0; k < text_rows[b]; ++k)
                    cross_mask.at(rq + q, rk + k) = S(0);
            rq += seq_rows[b];
            rk += text_rows[b];
        }

        Var U0_cat = batch.size() == 1 ? U0[0] : tape.concat_rows(U0);
        Var H_cat = batch.size() == 1 ? H[0] : tape.concat_rows(H);
        out.states = decoder_.forward_layers(tape, params, U0_cat, H_cat, &self_mask, &cross_mask,
                                             training, rng, capture);
        return out;
    }

    struct LossOut {
        Var loss;
        std::size_t pairs = 0;
    };

    /// Teacher-forced mean binary cross-entropy over every scored
    /// (parent position, candidate) pair in the batch.
    LossOut teacher_forced_loss(Tape<S>& tape, BoundParams<S>& params, const Batch& batch,
                                bool training, Rng& rng) const {
        ForwardOut fwd = forward(tape, params, batch, training, rng);

        // Flatten all documents' scored positions against the
        // concatenated decoder output.
        std::vector<std::size_t> positions;
        std::vector<std::vector<Taxonomy::Candidate>> candidates;
        std::vector<S> ys;
        SubHierSequence flat_seq;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            for (const Token& tok : batch.sequences[b].tokens) flat_seq.tokens.push_back(tok);
            for (const auto& item : batch.targets[b].items) {
                positions.push_back(fwd.offsets[b] + item.position);
                candidates.push_back(item.candidates);
                for (int y : item.targets) ys.push_back(static_cast<S>(y));
            }
        }
        Var logits = decoder_.score_candidates(tape, params, fwd.states, flat_seq, positions,
                                               candidates);

        LossOut out;
        out.pairs = ys.size();
        out.loss = bce_from_logits(tape, logits, ys);
        return out;
    }

    /// Mean BCE between sigmoid(logits) and 0/1 targets, with
    /// probabilities clamped to [1e-7, 1 - 1e-7] for stability.
    static Var bce_from_logits(Tape<S>& tape, Var logits, const std::vector<S>& targets) {
        const std::size_t n = targets.size();
        if (tape.value(logits).numel() != n)
            raise(Errc::shape_error, "targets do not match logits");
        Array<S> y(n, 1), ybar(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            y.data[i] = targets[i];
            ybar.data[i] = S(1) - targets[i];
        }
        const S lo = S(1e-7);
        const S hi = S(1) - S(1e-7);
        Var p = tape.sigmoid(logits);
        Var log_p = tape.log(tape.clamp(p, lo, hi));
        Var log_q = tape.log(tape.clamp(tape.add_scalar(tape.scale(p, S(-1)), S(1)), lo, hi));
        Var ll = tape.add(tape.mul(tape.constant(std::move(y)), log_p),
                          tape.mul(tape.constant(std::move(ybar)), log_q));
        return tape.scale(tape.mean_all(ll), S(-1));
    }

    /// Token ids for one document's text.
    std::vector<std::size_t> encode_text(const std::string& text, const Vocabulary& vocab,
                                         const std::set<std::string>& stopwords) const {
        return vocab.encode(tokenize(text, stopwords), cfg_.max_text_len);
    }

private:
    const Taxonomy* taxonomy_;
    TextEncoder<S> encoder_;
    SubHierDecoder<S> decoder_;
    ModelConfig cfg_;
};

/**
 * Frozen-parameter scorer driving recursive decoding for one document.
 * The text is encoded once; every expansion then embeds the current
 * sequence, runs the decoder layers against the cached text states, and
 * scores the requested positions.
 */
template <typename S>
class DocumentScorer : public ChildScorer {
public:
    DocumentScorer(const Model<S>& model, ParameterStore<S>& store,
                   std::vector<std::size_t> token_ids)
        : model_(&model), store_(&store), rng_(0) {
        if (token_ids.empty()) raise(Errc::shape_error, "empty token ids");
        Tape<S> tape;
        BoundParams<S> params(tape, store);
        std::vector<Var> H = model.encoder().encode(tape, params, {token_ids},
                                                    {token_ids.size()}, 0.0, false, rng_);
        text_states_ = tape.value(H[0]);
    }

    std::vector<std::vector<double>> score(
        const SubHierSequence& seq, const std::vector<std::size_t>& positions,
        const std::vector<std::vector<Taxonomy::Candidate>>& candidates) override {
        Tape<S> tape;
        BoundParams<S> params(tape, *store_);
        Var H = tape.constant(text_states_);
        const Array<S> self_mask =
            mask_to_array<S>(build_hierarchy_mask(model_->taxonomy(), seq));
        Var U = model_->decoder().decoder_forward(tape, params, seq, H, &self_mask, nullptr,
                                                  false, rng_, capture_);
        Var logits = model_->decoder().score_candidates(tape, params, U, seq, positions,
                                                        candidates);
        const Array<S>& flat = tape.value(tape.sigmoid(logits));
        std::vector<std::vector<double>> out(positions.size());
        std::size_t cursor = 0;
        for (std::size_t k = 0; k < positions.size(); ++k) {
            out[k].reserve(candidates[k].size());
            for (std::size_t j = 0; j < candidates[k].size(); ++j)
                out[k].push_back(static_cast<double>(flat.data[cursor++]));
        }
        return out;
    }

    /// Route the next score() call's attention weights into cap.
    void capture_attention(AttentionCapture* cap) { capture_ = cap; }

    const Array<S>& text_states() const { return text_states_; }

private:
    using Var = typename Tape<S>::Var;

    const Model<S>* model_;
    ParameterStore<S>* store_;
    Rng rng_;  // never consulted: dropout is off outside training
    Array<S> text_states_;
    AttentionCapture* capture_ = nullptr;
};

/// Decode one document end to end with a frozen model.
template <typename S>
DecodeResult predict_document(const Model<S>& model, ParameterStore<S>& store,
                              const std::vector<std::size_t>& token_ids, double threshold) {
    DocumentScorer<S> scorer(model, store, token_ids);
    return recursive_decode(model.taxonomy(), scorer, threshold);
}

}  // namespace hidec

#endif  // HIDEC_MODEL_HPP
