#ifndef HIDEC_DECODER_HPP
#define HIDEC_DECODER_HPP

#include <cmath>
#include <string>
#include <vector>

#include <hidec/config.hpp>
#include <hidec/errors.hpp>
#include <hidec/optimizer.hpp>
#include <hidec/rng.hpp>
#include <hidec/subhier.hpp>
#include <hidec/taxonomy.hpp>
#include <hidec/tensor.hpp>

namespace hidec {

/// Post-softmax attention weights copied out of a forward pass, for the
/// inspect-attention export. Indexed [layer][head]; self weights are
/// M x M, cross weights M x N.
struct AttentionCapture {
    std::vector<std::vector<Array<double>>> self_weights;
    std::vector<std::vector<Array<double>>> cross_weights;
};

/**
 * The sub-hierarchy decoder stack: token + level embedding, R layers of
 * (hierarchy-masked self-attention, text cross-attention, feed-forward),
 * and child scoring against the tied token embedding table.
 *
 * One (C+3) x d table serves both as the sequence embedding and as the
 * scoring matrix: rows 0..C-1 are the labels, then OPEN, CLOSE and the
 * terminator. Levels are the only positional signal; the level table has
 * P+2 rows because a terminator under a deepest label sits at level P+2
 * (rows are indexed by level - 1).
 *
 * There are no residual connections and no layer normalization unless the
 * residual config flag is set, in which case each sublayer adds its input
 * back after dropout.
 */
template <typename S>
class SubHierDecoder {
public:
    using Var = typename Tape<S>::Var;

    SubHierDecoder(std::size_t num_labels, std::size_t max_depth, std::size_t encoder_dim,
                   const ModelConfig& cfg)
        : C_(num_labels), P_(max_depth), enc_dim_(encoder_dim), cfg_(cfg) {
        cfg_.validate();
    }

    std::size_t token_table_rows() const { return C_ + 3; }
    std::size_t level_table_rows() const { return P_ + 2; }

    /// Row of the tied embedding table for any sequence token.
    std::size_t token_row(const Token& tok) const {
        switch (tok.kind) {
            case TokenKind::label: return static_cast<std::size_t>(tok.label);
            case TokenKind::open: return C_;
            case TokenKind::close: return C_ + 1;
            case TokenKind::terminator: return C_ + 2;
        }
        raise(Errc::invalid_subhierarchy, "unreachable token kind");
    }

    std::size_t terminator_row() const { return C_ + 2; }

    void init_params(ParameterStore<S>& store, Rng& rng) const {
        const double sigma = 1.0 / std::sqrt(static_cast<double>(cfg_.model_dim));
        auto& tok = store.create("decoder.token_embed", token_table_rows(), cfg_.model_dim);
        init_normal(tok.value, rng, sigma);
        auto& lvl = store.create("decoder.level_embed", level_table_rows(), cfg_.model_dim);
        init_normal(lvl.value, rng, sigma);
        const double kd = 1.0 / std::sqrt(static_cast<double>(cfg_.model_dim));
        const double ke = 1.0 / std::sqrt(static_cast<double>(enc_dim_));
        const double kf = 1.0 / std::sqrt(static_cast<double>(cfg_.ffn_dim));
        for (std::size_t l = 0; l < cfg_.layers; ++l) {
            const std::string base = layer_name(l);
            for (const char* w : {"self.Wq", "self.Wk", "self.Wv", "self.Wo", "cross.Wq",
                                  "cross.Wo"}) {
                auto& p = store.create(base + w, cfg_.model_dim, cfg_.model_dim);
                init_uniform(p.value, rng, kd);
            }
            for (const char* w : {"cross.Wk", "cross.Wv"}) {
                auto& p = store.create(base + w, enc_dim_, cfg_.model_dim);
                init_uniform(p.value, rng, ke);
            }
            auto& w1 = store.create(base + "ffn.W1", cfg_.model_dim, cfg_.ffn_dim);
            init_uniform(w1.value, rng, kd);
            store.create(base + "ffn.b1", 1, cfg_.ffn_dim);
            auto& w2 = store.create(base + "ffn.W2", cfg_.ffn_dim, cfg_.model_dim);
            init_uniform(w2.value, rng, kf);
            store.create(base + "ffn.b2", 1, cfg_.model_dim);
        }
    }

    /// Token embedding plus level embedding per position, then embedding
    /// dropout. Level l uses level-table row l-1.
    Var embed_sequence(Tape<S>& tape, BoundParams<S>& params, const SubHierSequence& seq,
                       bool training, Rng& rng) const {
        std::vector<std::size_t> tok_rows, lvl_rows;
        tok_rows.reserve(seq.length());
        lvl_rows.reserve(seq.length());
        for (std::size_t i = 0; i < seq.length(); ++i) {
            tok_rows.push_back(token_row(seq.tokens[i]));
            const std::size_t level = seq.levels[i];
            if (level < 1 || level > level_table_rows())
                raise(Errc::level_overflow,
                      "token level " + std::to_string(level) + " exceeds the level table");
            lvl_rows.push_back(level - 1);
        }
        Var tok = tape.embedding_lookup(params.use("decoder.token_embed"), std::move(tok_rows));
        Var lvl = tape.embedding_lookup(params.use("decoder.level_embed"), std::move(lvl_rows));
        return tape.dropout(tape.add(tok, lvl), cfg_.dropout_embed, training, rng);
    }

    /**
     * One decoder layer: masked self-attention, then cross-attention over
     * the text states (only a key mask against rows from other batch
     * documents), then the two-layer ReLU feed-forward. Dropout follows
     * each sublayer output.
     */
    Var attentive_layer(Tape<S>& tape, BoundParams<S>& params, std::size_t layer, Var U, Var H,
                        const Array<S>* self_mask, const Array<S>* cross_mask, bool training,
                        Rng& rng, AttentionCapture* capture = nullptr) const {
        const std::string base = layer_name(layer);
        Var hat = attention(tape, params, base + "self.", U, U, self_mask, training, rng,
                            capture ? &capture->self_weights[layer] : nullptr);
        if (cfg_.residual) hat = tape.add(hat, U);
        Var tilde = attention(tape, params, base + "cross.", hat, H, cross_mask, training, rng,
                              capture ? &capture->cross_weights[layer] : nullptr);
        if (cfg_.residual) tilde = tape.add(tilde, hat);
        Var inner = tape.relu(tape.add_rowvec(tape.matmul(tilde, params.use(base + "ffn.W1")),
                                              params.use(base + "ffn.b1")));
        Var out = tape.add_rowvec(tape.matmul(inner, params.use(base + "ffn.W2")),
                                  params.use(base + "ffn.b2"));
        out = tape.dropout(out, cfg_.dropout_ffn, training, rng);
        if (cfg_.residual) out = tape.add(out, tilde);
        return out;
    }

    /// The full stack on an already-embedded sequence.
    Var forward_layers(Tape<S>& tape, BoundParams<S>& params, Var U0, Var H,
                       const Array<S>* self_mask, const Array<S>* cross_mask, bool training,
                       Rng& rng, AttentionCapture* capture = nullptr) const {
        if (capture) {
            capture->self_weights.assign(cfg_.layers, {});
            capture->cross_weights.assign(cfg_.layers, {});
        }
        Var U = U0;
        for (std::size_t l = 0; l < cfg_.layers; ++l)
            U = attentive_layer(tape, params, l, U, H, self_mask, cross_mask, training, rng,
                                capture);
        return U;
    }

    Var decoder_forward(Tape<S>& tape, BoundParams<S>& params, const SubHierSequence& seq, Var H,
                        const Array<S>* self_mask, const Array<S>* cross_mask, bool training,
                        Rng& rng, AttentionCapture* capture = nullptr) const {
        Var U0 = embed_sequence(tape, params, seq, training, rng);
        return forward_layers(tape, params, U0, H, self_mask, cross_mask, training, rng, capture);
    }

    /**
     * Scores candidate children for a set of label positions in one pass:
     * logit(position i, candidate j) = U_i . W^S[row of j]. Positions and
     * their candidate lists are flattened; the result is a T x 1 column of
     * logits in the same flat order.
     */
    Var score_candidates(Tape<S>& tape, BoundParams<S>& params, Var U, const SubHierSequence& seq,
                         const std::vector<std::size_t>& positions,
                         const std::vector<std::vector<Taxonomy::Candidate>>& candidates) const {
        if (positions.size() != candidates.size())
            raise(Errc::shape_error, "positions and candidate lists disagree");
        std::vector<std::size_t> query_rows, cand_rows;
        for (std::size_t k = 0; k < positions.size(); ++k) {
            const std::size_t i = positions[k];
            if (i >= seq.length()) raise(Errc::shape_error, "score position out of range");
            if (seq.tokens[i].kind != TokenKind::label)
                raise(Errc::not_a_label_position,
                      "scoring requested at special-token position " + std::to_string(i));
            for (const Taxonomy::Candidate& c : candidates[k]) {
                query_rows.push_back(i);
                cand_rows.push_back(c.is_end() ? terminator_row()
                                               : static_cast<std::size_t>(c.label));
            }
        }
        Var queries = tape.embedding_lookup(U, std::move(query_rows));
        Var cands = tape.embedding_lookup(params.use("decoder.token_embed"), std::move(cand_rows));
        return tape.row_sum(tape.mul(queries, cands));
    }

    const ModelConfig& config() const { return cfg_; }
    std::size_t num_labels() const { return C_; }
    std::size_t max_depth() const { return P_; }
    std::size_t encoder_dim() const { return enc_dim_; }

private:
    static std::string layer_name(std::size_t l) {
        return "decoder.layer" + std::to_string(l) + ".";
    }

    /// Multi-head attention with additive mask and output projection.
    /// Heads split the projected width evenly; scores are scaled by the
    /// inverse square root of the per-head width.
    Var attention(Tape<S>& tape, BoundParams<S>& params, const std::string& prefix, Var queries,
                  Var keys_values, const Array<S>* mask, bool training, Rng& rng,
                  std::vector<Array<double>>* capture) const {
        Var Q = tape.matmul(queries, params.use(prefix + "Wq"));
        Var K = tape.matmul(keys_values, params.use(prefix + "Wk"));
        Var V = tape.matmul(keys_values, params.use(prefix + "Wv"));
        const std::size_t dh = cfg_.model_dim / cfg_.heads;
        const S inv_sqrt = S(1.0 / std::sqrt(static_cast<double>(dh)));
        std::vector<Var> heads;
        heads.reserve(cfg_.heads);
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            Var Qh = tape.slice_cols(Q, h * dh, (h + 1) * dh);
            Var Kh = tape.slice_cols(K, h * dh, (h + 1) * dh);
            Var Vh = tape.slice_cols(V, h * dh, (h + 1) * dh);
            Var scores = tape.scale(tape.matmul(Qh, Kh, false, true), inv_sqrt);
            Var weights = tape.masked_softmax(scores, mask);
            if (capture) {
                const Array<S>& w = tape.value(weights);
                Array<double> copy(w.rows, w.cols);
                for (std::size_t i = 0; i < w.data.size(); ++i)
                    copy.data[i] = static_cast<double>(w.data[i]);
                capture->push_back(std::move(copy));
            }
            heads.push_back(tape.matmul(weights, Vh));
        }
        Var merged = tape.matmul(tape.concat_cols(heads), params.use(prefix + "Wo"));
        return tape.dropout(merged, cfg_.dropout_attn, training, rng);
    }

    std::size_t C_;
    std::size_t P_;
    std::size_t enc_dim_;
    ModelConfig cfg_;
};

}  // namespace hidec

#endif  // HIDEC_DECODER_HPP
