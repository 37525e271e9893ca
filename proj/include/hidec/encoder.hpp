#ifndef HIDEC_ENCODER_HPP
#define HIDEC_ENCODER_HPP

#include <cmath>
#include <string>
#include <vector>

#include <hidec/config.hpp>
#include <hidec/errors.hpp>
#include <hidec/optimizer.hpp>
#include <hidec/rng.hpp>
#include <hidec/tensor.hpp>
#include <hidec/vocab.hpp>

namespace hidec {

/**
 * Turns a document's token ids into its text feature matrix. Two encoders
 * share the interface: the real one is a word embedding followed by a
 * single-layer bidirectional GRU (N x 2h output, forward and backward
 * state of each position side by side); the mean-pooled one averages the
 * word embeddings into a single 1 x e row and exists to keep structural
 * tests cheap. Anything that yields a rows-by-output_dim matrix works for
 * the decoder's cross-attention.
 *
 * GRU recurrence per direction:
 *   z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
 *   r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
 *   n_t = tanh(x_t W_n + (r_t * h_{t-1}) U_n + b_n)
 *   h_t = z_t * h_{t-1} + (1 - z_t) * n_t
 *
 * The input projections x_t W_g are hoisted out of the time loop: one
 * matmul per gate over the whole padded batch, sliced per step.
 */
template <typename S>
class TextEncoder {
public:
    using Var = typename Tape<S>::Var;

    TextEncoder(EncoderKind kind, std::size_t vocab_size, std::size_t embed_dim,
                std::size_t hidden_dim)
        : kind_(kind), vocab_size_(vocab_size), embed_dim_(embed_dim), hidden_dim_(hidden_dim) {}

    std::size_t output_dim() const {
        return kind_ == EncoderKind::bigru ? 2 * hidden_dim_ : embed_dim_;
    }

    /// Creates all encoder parameters and fills them: embeddings from
    /// normal(0, e^-1/2), weights uniform over +-fan_in^-1/2, biases zero.
    void init_params(ParameterStore<S>& store, Rng& rng) const {
        auto& embed = store.create("encoder.embed", vocab_size_, embed_dim_);
        init_normal(embed.value, rng, 1.0 / std::sqrt(static_cast<double>(embed_dim_)));
        if (kind_ != EncoderKind::bigru) return;
        for (const char* dir : {"fwd", "bwd"}) {
            for (const char* gate : {"z", "r", "n"}) {
                const std::string base = std::string("encoder.") + dir + "." + gate;
                auto& W = store.create(base + ".W", embed_dim_, hidden_dim_);
                init_uniform(W.value, rng, 1.0 / std::sqrt(static_cast<double>(embed_dim_)));
                auto& U = store.create(base + ".U", hidden_dim_, hidden_dim_);
                init_uniform(U.value, rng, 1.0 / std::sqrt(static_cast<double>(hidden_dim_)));
                store.create(base + ".b", 1, hidden_dim_);
            }
        }
    }

    /**
     * Encodes a batch given the padded id matrix and true lengths from
     * build_batch. Embedding lookup runs over the whole padded matrix in
     * one op; padding rows are then never sliced into any GRU or pool, so
     * the padding embedding receives no gradient. Returns one feature
     * matrix per document.
     */
    std::vector<Var> encode(Tape<S>& tape, BoundParams<S>& params,
                            const std::vector<std::vector<std::size_t>>& padded_ids,
                            const std::vector<std::size_t>& lengths, double dropout_embed,
                            bool training, Rng& rng) const {
        if (padded_ids.size() != lengths.size())
            raise(Errc::shape_error, "batch ids and lengths disagree");
        const std::size_t batch = padded_ids.size();
        if (batch == 0) raise(Errc::empty_corpus, "cannot encode an empty batch");
        const std::size_t width = padded_ids[0].size();
        std::vector<std::size_t> flat;
        flat.reserve(batch * width);
        for (std::size_t b = 0; b < batch; ++b) {
            if (padded_ids[b].size() != width) raise(Errc::shape_error, "ragged padded batch");
            if (lengths[b] == 0 || lengths[b] > width)
                raise(Errc::shape_error, "document length out of range");
            for (std::size_t id : padded_ids[b])
                if (id >= vocab_size_) raise(Errc::unknown_token, "token id out of vocabulary");
            flat.insert(flat.end(), padded_ids[b].begin(), padded_ids[b].end());
        }

        Var table = params.use("encoder.embed");
        Var emb = tape.embedding_lookup(table, flat);
        emb = tape.dropout(emb, dropout_embed, training, rng);

        if (kind_ == EncoderKind::meanpool) {
            std::vector<Var> out;
            out.reserve(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                Var rows = tape.slice_rows(emb, b * width, b * width + lengths[b]);
                Var pooled = tape.matmul(tape.constant(mean_weights(lengths[b])), rows);
                out.push_back(pooled);
            }
            return out;
        }

        // One input projection per gate and direction over all rows at once.
        Var proj[2][3];
        Var U[2][3];
        const char* dirs[2] = {"fwd", "bwd"};
        const char* gates[3] = {"z", "r", "n"};
        for (int d = 0; d < 2; ++d) {
            for (int g = 0; g < 3; ++g) {
                const std::string base = std::string("encoder.") + dirs[d] + "." + gates[g];
                proj[d][g] = tape.add_rowvec(tape.matmul(emb, params.use(base + ".W")),
                                             params.use(base + ".b"));
                U[d][g] = params.use(base + ".U");
            }
        }

        std::vector<Var> out;
        out.reserve(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t n = lengths[b];
            const std::size_t row0 = b * width;
            auto step = [&](int d, Var h_prev, std::size_t t) {
                Var xz = tape.slice_rows(proj[d][0], row0 + t, row0 + t + 1);
                Var xr = tape.slice_rows(proj[d][1], row0 + t, row0 + t + 1);
                Var xn = tape.slice_rows(proj[d][2], row0 + t, row0 + t + 1);
                Var z = tape.sigmoid(tape.add(xz, tape.matmul(h_prev, U[d][0])));
                Var r = tape.sigmoid(tape.add(xr, tape.matmul(h_prev, U[d][1])));
                Var cand = tape.tanh(tape.add(xn, tape.matmul(tape.mul(r, h_prev), U[d][2])));
                Var keep = tape.mul(z, h_prev);
                Var fresh = tape.mul(tape.add_scalar(tape.scale(z, S(-1)), S(1)), cand);
                return tape.add(keep, fresh);
            };

            std::vector<Var> fwd(n), bwd(n);
            Var h = tape.constant(Array<S>(1, hidden_dim_));
            for (std::size_t t = 0; t < n; ++t) {
                h = step(0, h, t);
                fwd[t] = h;
            }
            h = tape.constant(Array<S>(1, hidden_dim_));
            for (std::size_t t = n; t-- > 0;) {
                h = step(1, h, t);
                bwd[t] = h;
            }
            out.push_back(tape.concat_cols({tape.concat_rows(fwd), tape.concat_rows(bwd)}));
        }
        return out;
    }

private:
    static Array<S> mean_weights(std::size_t n) {
        Array<S> w(1, n);
        w.fill(S(1) / static_cast<S>(n));
        return w;
    }

    EncoderKind kind_;
    std::size_t vocab_size_;
    std::size_t embed_dim_;
    std::size_t hidden_dim_;
};

}  // namespace hidec

#endif  // HIDEC_ENCODER_HPP
