#ifndef HIDEC_TENSOR_HPP
#define HIDEC_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <deque>
#include <vector>

#include <Eigen/Core>

#include <hidec/errors.hpp>
#include <hidec/rng.hpp>

namespace hidec {

/// Dense row-major 2-D value. Vectors are R x 1 or 1 x C, scalars 1 x 1.
template <typename S>
struct Array {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<S> data;

    Array() = default;
    Array(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, S(0)) {}
    Array(std::size_t r, std::size_t c, std::vector<S> d) : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != r * c) raise(Errc::shape_error, "data size does not match shape");
    }

    static Array zeros_like(const Array& other) { return Array(other.rows, other.cols); }
    static Array scalar(S x) {
        Array a(1, 1);
        a.data[0] = x;
        return a;
    }

    std::size_t numel() const { return rows * cols; }
    bool same_shape(const Array& o) const { return rows == o.rows && cols == o.cols; }

    S& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    S at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    void fill(S x) { std::fill(data.begin(), data.end(), x); }

    bool all_finite() const {
        for (S x : data) {
            if (!std::isfinite(static_cast<double>(x))) return false;
        }
        return true;
    }
};

namespace detail {

template <typename S>
using EigenMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
Eigen::Map<EigenMat<S>> emap(Array<S>& a) {
    return {a.data.data(), static_cast<Eigen::Index>(a.rows), static_cast<Eigen::Index>(a.cols)};
}

template <typename S>
Eigen::Map<const EigenMat<S>> emap(const Array<S>& a) {
    return {a.data.data(), static_cast<Eigen::Index>(a.rows), static_cast<Eigen::Index>(a.cols)};
}

}  // namespace detail

/**
 * Reverse-mode tape. Every operation appends a node holding its forward
 * value and a closure that scatters the node's gradient into its inputs;
 * creation order is a topological order, so backward is one reverse sweep.
 *
 * A tape is built per forward pass and discarded afterwards. Gradients of
 * leaves created with requires_grad survive until then and are harvested
 * by the caller (see BoundParams in optimizer.hpp).
 */
template <typename S>
class Tape {
public:
    struct Var {
        std::int32_t index = -1;
        bool valid() const { return index >= 0; }
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }

    Var leaf(Array<S> value, bool requires_grad = false) {
        return push(std::move(value), requires_grad, nullptr);
    }

    Var constant(Array<S> value) { return leaf(std::move(value), false); }
    Var constant_scalar(S x) { return leaf(Array<S>::scalar(x), false); }

    const Array<S>& value(Var v) const { return node(v).value; }

    /// Gradient of the last backward target with respect to v.
    const Array<S>& grad(Var v) const {
        const NodeRec& n = node(v);
        if (!n.requires_grad) raise(Errc::shape_error, "gradient requested for a non-grad node");
        return n.grad;
    }

    // ---- forward ops ----

    Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false) {
        const Array<S>& A = value(a);
        const Array<S>& B = value(b);
        const std::size_t am = trans_a ? A.cols : A.rows;
        const std::size_t ak = trans_a ? A.rows : A.cols;
        const std::size_t bk = trans_b ? B.cols : B.rows;
        const std::size_t bn = trans_b ? B.rows : B.cols;
        if (ak != bk) raise(Errc::shape_error, "matmul inner dimensions disagree");
        Array<S> out(am, bn);
        {
            auto Am = detail::emap(A);
            auto Bm = detail::emap(B);
            auto Om = detail::emap(out);
            if (!trans_a && !trans_b) Om.noalias() = Am * Bm;
            else if (trans_a && !trans_b) Om.noalias() = Am.transpose() * Bm;
            else if (!trans_a && trans_b) Om.noalias() = Am * Bm.transpose();
            else Om.noalias() = Am.transpose() * Bm.transpose();
        }
        return push(std::move(out), needs(a) || needs(b), [this, a, b, trans_a, trans_b](Var o) {
            auto G = detail::emap(node(o).grad);
            if (needs(a)) {
                auto dA = detail::emap(node(a).grad);
                auto Bm = detail::emap(node(b).value);
                // dA-bar = G * B-bar^T, folded back through the transpose flag.
                if (!trans_a && !trans_b) dA.noalias() += G * Bm.transpose();
                else if (!trans_a && trans_b) dA.noalias() += G * Bm;
                else if (trans_a && !trans_b) dA.noalias() += Bm * G.transpose();
                else dA.noalias() += Bm.transpose() * G.transpose();
            }
            if (needs(b)) {
                auto dB = detail::emap(node(b).grad);
                auto Am = detail::emap(node(a).value);
                if (!trans_a && !trans_b) dB.noalias() += Am.transpose() * G;
                else if (!trans_a && trans_b) dB.noalias() += G.transpose() * Am;
                else if (trans_a && !trans_b) dB.noalias() += Am * G;
                else dB.noalias() += G.transpose() * Am.transpose();
            }
        });
    }

    Var add(Var a, Var b) {
        const Array<S>& A = value(a);
        const Array<S>& B = value(b);
        if (!A.same_shape(B)) raise(Errc::shape_error, "add shapes disagree");
        Array<S> out = A;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](Var o) {
            const Array<S>& g = node(o).grad;
            if (needs(a)) accumulate(a, g);
            if (needs(b)) accumulate(b, g);
        });
    }

    Var sub(Var a, Var b) {
        const Array<S>& A = value(a);
        const Array<S>& B = value(b);
        if (!A.same_shape(B)) raise(Errc::shape_error, "sub shapes disagree");
        Array<S> out = A;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= B.data[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](Var o) {
            const Array<S>& g = node(o).grad;
            if (needs(a)) accumulate(a, g);
            if (needs(b)) {
                Array<S>& db = node(b).grad;
                for (std::size_t i = 0; i < g.data.size(); ++i) db.data[i] -= g.data[i];
            }
        });
    }

    Var mul(Var a, Var b) {
        const Array<S>& A = value(a);
        const Array<S>& B = value(b);
        if (!A.same_shape(B)) raise(Errc::shape_error, "mul shapes disagree");
        Array<S> out = A;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](Var o) {
            const Array<S>& g = node(o).grad;
            if (needs(a)) {
                Array<S>& da = node(a).grad;
                const Array<S>& bv = node(b).value;
                for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i] * bv.data[i];
            }
            if (needs(b)) {
                Array<S>& db = node(b).grad;
                const Array<S>& av = node(a).value;
                for (std::size_t i = 0; i < g.data.size(); ++i) db.data[i] += g.data[i] * av.data[i];
            }
        });
    }

    Var scale(Var a, S c) {
        Array<S> out = value(a);
        for (S& x : out.data) x *= c;
        return push(std::move(out), needs(a), [this, a, c](Var o) {
            const Array<S>& g = node(o).grad;
            Array<S>& da = node(a).grad;
            for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += c * g.data[i];
        });
    }

    Var add_scalar(Var a, S c) {
        Array<S> out = value(a);
        for (S& x : out.data) x += c;
        return push(std::move(out), needs(a), [this, a](Var o) {
            if (needs(a)) accumulate(a, node(o).grad);
        });
    }

    /// Adds a 1 x C row vector to every row of a.
    Var add_rowvec(Var a, Var b) {
        const Array<S>& A = value(a);
        const Array<S>& B = value(b);
        if (B.rows != 1 || B.cols != A.cols) raise(Errc::shape_error, "add_rowvec wants a 1 x C bias");
        Array<S> out = A;
        for (std::size_t r = 0; r < out.rows; ++r)
            for (std::size_t c = 0; c < out.cols; ++c) out.at(r, c) += B.data[c];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](Var o) {
            const Array<S>& g = node(o).grad;
            if (needs(a)) accumulate(a, g);
            if (needs(b)) {
                Array<S>& db = node(b).grad;
                for (std::size_t r = 0; r < g.rows; ++r)
                    for (std::size_t c = 0; c < g.cols; ++c) db.data[c] += g.at(r, c);
            }
        });
    }

    Var concat_rows(const std::vector<Var>& parts) {
        if (parts.empty()) raise(Errc::shape_error, "concat_rows of nothing");
        const std::size_t cols = value(parts[0]).cols;
        std::size_t rows = 0;
        for (Var p : parts) {
            if (value(p).cols != cols) raise(Errc::shape_error, "concat_rows column mismatch");
            rows += value(p).rows;
        }
        Array<S> out(rows, cols);
        std::size_t r = 0;
        for (Var p : parts) {
            const Array<S>& v = value(p);
            std::copy(v.data.begin(), v.data.end(), out.data.begin() + r * cols);
            r += v.rows;
        }
        bool any = false;
        for (Var p : parts) any = any || needs(p);
        return push(std::move(out), any, [this, parts](Var o) {
            const Array<S>& g = node(o).grad;
            std::size_t r = 0;
            for (Var p : parts) {
                const std::size_t pr = node(p).value.rows;
                if (needs(p)) {
                    Array<S>& dp = node(p).grad;
                    for (std::size_t i = 0; i < pr * g.cols; ++i)
                        dp.data[i] += g.data[r * g.cols + i];
                }
                r += pr;
            }
        });
    }

    Var concat_cols(const std::vector<Var>& parts) {
        if (parts.empty()) raise(Errc::shape_error, "concat_cols of nothing");
        const std::size_t rows = value(parts[0]).rows;
        std::size_t cols = 0;
        for (Var p : parts) {
            if (value(p).rows != rows) raise(Errc::shape_error, "concat_cols row mismatch");
            cols += value(p).cols;
        }
        Array<S> out(rows, cols);
        std::size_t c0 = 0;
        for (Var p : parts) {
            const Array<S>& v = value(p);
            for (std::size_t r = 0; r < rows; ++r)
                std::copy(v.data.begin() + r * v.cols, v.data.begin() + (r + 1) * v.cols,
                          out.data.begin() + r * cols + c0);
            c0 += v.cols;
        }
        bool any = false;
        for (Var p : parts) any = any || needs(p);
        return push(std::move(out), any, [this, parts](Var o) {
            const Array<S>& g = node(o).grad;
            std::size_t c0 = 0;
            for (Var p : parts) {
                const std::size_t pc = node(p).value.cols;
                if (needs(p)) {
                    Array<S>& dp = node(p).grad;
                    for (std::size_t r = 0; r < g.rows; ++r)
                        for (std::size_t c = 0; c < pc; ++c)
                            dp.at(r, c) += g.at(r, c0 + c);
                }
                c0 += pc;
            }
        });
    }

    /// Rows [r0, r1) of a.
    Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
        const Array<S>& A = value(a);
        if (r0 > r1 || r1 > A.rows) raise(Errc::shape_error, "slice_rows out of range");
        Array<S> out(r1 - r0, A.cols);
        std::copy(A.data.begin() + r0 * A.cols, A.data.begin() + r1 * A.cols, out.data.begin());
        return push(std::move(out), needs(a), [this, a, r0](Var o) {
            const Array<S>& g = node(o).grad;
            Array<S>& da = node(a).grad;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                da.data[r0 * g.cols + i] += g.data[i];
        });
    }

    /// Columns [c0, c1) of a.
    Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
        const Array<S>& A = value(a);
        if (c0 > c1 || c1 > A.cols) raise(Errc::shape_error, "slice_cols out of range");
        Array<S> out(A.rows, c1 - c0);
        for (std::size_t r = 0; r < A.rows; ++r)
            std::copy(A.data.begin() + r * A.cols + c0, A.data.begin() + r * A.cols + c1,
                      out.data.begin() + r * out.cols);
        return push(std::move(out), needs(a), [this, a, c0](Var o) {
            const Array<S>& g = node(o).grad;
            Array<S>& da = node(a).grad;
            for (std::size_t r = 0; r < g.rows; ++r)
                for (std::size_t c = 0; c < g.cols; ++c) da.at(r, c0 + c) += g.at(r, c);
        });
    }

    /// Out row i = table row ids[i]. Works for embedding tables and for
    /// gathering rows of any intermediate matrix.
    Var embedding_lookup(Var table, std::vector<std::size_t> ids) {
        const Array<S>& T = value(table);
        for (std::size_t id : ids) {
            if (id >= T.rows) raise(Errc::shape_error, "lookup id out of range");
        }
        Array<S> out(ids.size(), T.cols);
        for (std::size_t i = 0; i < ids.size(); ++i)
            std::copy(T.data.begin() + ids[i] * T.cols, T.data.begin() + (ids[i] + 1) * T.cols,
                      out.data.begin() + i * T.cols);
        return push(std::move(out), needs(table), [this, table, ids = std::move(ids)](Var o) {
            const Array<S>& g = node(o).grad;
            Array<S>& dt = node(table).grad;
            for (std::size_t i = 0; i < ids.size(); ++i)
                for (std::size_t c = 0; c < g.cols; ++c) dt.at(ids[i], c) += g.at(i, c);
        });
    }

    Var sigmoid(Var a) {
        Array<S> out = value(a);
        for (S& x : out.data) {
            if (x >= S(0)) {
                x = S(1) / (S(1) + std::exp(-x));
            } else {
                const S e = std::exp(x);
                x = e / (S(1) + e);
            }
        }
        return push(std::move(out), needs(a), [this, a](Var o) {
            const Array<S>& g = node(o).grad;
            const Array<S>& y = node(o).value;
            Array<S>& da = node(a).grad;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                da.data[i] += g.data[i] * y.data[i] * (S(1) - y.data[i]);
        });
    }

    Var tanh(Var a) {
        Array<S> out = value(a);
        for (S& x : out.data) x = std::tanh(x);
        return push(std::move(out), needs(a), [this, a](Var o) {
            const Array<S>& g = node(o).grad;
            const Array<S>& y = node(o).value;
            Array<S>& da = node(a).grad;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                da.data[i] += g.data[i] * (S(1) - y.data[i] * y.data[i]);
        });
    }

    Var relu(Var a) {
        Array<S> out = value(a);
        // The negative branch keeps NaN as NaN so divergence stays visible.
        for (S& x : out.data) x = (x > S(0) || std::isnan(x)) ? x : S(0);
        return push(std::move(out), needs(a), [this, a](Var o) {
            const Array<S>& g = node(o).grad;
            const Array<S>& x = node(a).value;
            Array<S>& da = node(a).grad;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (x.data[i] > S(0)) da.data[i] += g.data[i];
        });
    }

    Var log(Var a) {
        Array<S> out = value(a);
        for (S& x : out.data) x = std::log(x);
        return push(std::move(out), needs(a), [this, a](Var o) {
            const Array<S>& g = node(o).grad;
            const Array<S>& x = node(a).value;
            Array<S>& da = node(a).grad;
            for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i] / x.data[i];
        });
    }

    /// Clamp to [lo, hi]; gradient passes only strictly inside the range.
    Var clamp(Var a, S lo, S hi) {
        Array<S> out = value(a);
        for (S& x : out.data) x = x < lo ? lo : (x > hi ? hi : x);
        return push(std::move(out), needs(a), [this, a, lo, hi](Var o) {
            const Array<S>& g = node(o).grad;
            const Array<S>& x = node(a).value;
            Array<S>& da = node(a).grad;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (x.data[i] > lo && x.data[i] < hi) da.data[i] += g.data[i];
        });
    }

    static constexpr S kFullyMaskedCutoff = S(-1e8);

    /**
     * Row-wise softmax of scores + additive mask. A row whose every entry
     * is masked comes out all-zero instead of NaN.
     */
    Var masked_softmax(Var scores, const Array<S>* additive_mask = nullptr) {
        const Array<S>& Z = value(scores);
        if (additive_mask && !Z.same_shape(*additive_mask))
            raise(Errc::shape_error, "mask shape does not match scores");
        Array<S> out(Z.rows, Z.cols);
        for (std::size_t r = 0; r < Z.rows; ++r) {
            S mx = std::numeric_limits<S>::lowest();
            for (std::size_t c = 0; c < Z.cols; ++c) {
                const S z = Z.at(r, c) + (additive_mask ? additive_mask->at(r, c) : S(0));
                out.at(r, c) = z;
                // NaN must win the max, or a diverged row would be
                // indistinguishable from a fully masked one and come out
                // all-zero instead of propagating.
                if (std::isnan(z) || z > mx) mx = z;
            }
            if (mx <= kFullyMaskedCutoff) {
                for (std::size_t c = 0; c < Z.cols; ++c) out.at(r, c) = S(0);
                continue;
            }
            S sum = S(0);
            for (std::size_t c = 0; c < Z.cols; ++c) {
                const S e = std::exp(out.at(r, c) - mx);
                out.at(r, c) = e;
                sum += e;
            }
            for (std::size_t c = 0; c < Z.cols; ++c) out.at(r, c) /= sum;
        }
        return push(std::move(out), needs(scores), [this, scores](Var o) {
            const Array<S>& g = node(o).grad;
            const Array<S>& y = node(o).value;
            Array<S>& da = node(scores).grad;
            for (std::size_t r = 0; r < g.rows; ++r) {
                S dot = S(0);
                for (std::size_t c = 0; c < g.cols; ++c) dot += g.at(r, c) * y.at(r, c);
                for (std::size_t c = 0; c < g.cols; ++c)
                    da.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
            }
        });
    }

    /**
     * Inverted dropout: at train time each element is kept with probability
     * 1-p and scaled by 1/(1-p); outside training this is the identity.
     */
    Var dropout(Var a, double p, bool training, Rng& rng) {
        if (!training || p <= 0.0) return a;
        const Array<S>& A = value(a);
        auto keep = std::make_shared<Array<S>>(A.rows, A.cols);
        const S inv = S(1.0 / (1.0 - p));
        for (S& k : keep->data) k = rng.bernoulli(1.0 - p) ? inv : S(0);
        Array<S> out = A;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= keep->data[i];
        return push(std::move(out), needs(a), [this, a, keep](Var o) {
            const Array<S>& g = node(o).grad;
            Array<S>& da = node(a).grad;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                da.data[i] += g.data[i] * keep->data[i];
        });
    }

    /// Sum across each row: R x C -> R x 1.
    Var row_sum(Var a) {
        const Array<S>& A = value(a);
        Array<S> out(A.rows, 1);
        for (std::size_t r = 0; r < A.rows; ++r) {
            S s = S(0);
            for (std::size_t c = 0; c < A.cols; ++c) s += A.at(r, c);
            out.data[r] = s;
        }
        return push(std::move(out), needs(a), [this, a](Var o) {
            const Array<S>& g = node(o).grad;
            Array<S>& da = node(a).grad;
            for (std::size_t r = 0; r < da.rows; ++r)
                for (std::size_t c = 0; c < da.cols; ++c) da.at(r, c) += g.data[r];
        });
    }

    Var sum_all(Var a) {
        const Array<S>& A = value(a);
        S s = S(0);
        for (S x : A.data) s += x;
        return push(Array<S>::scalar(s), needs(a), [this, a](Var o) {
            const S g = node(o).grad.data[0];
            Array<S>& da = node(a).grad;
            for (S& x : da.data) x += g;
        });
    }

    Var mean_all(Var a) {
        const std::size_t n = value(a).numel();
        return scale(sum_all(a), S(1) / static_cast<S>(n));
    }

    // ---- backward ----

    /// Reverse sweep from a scalar loss. Populates grads of every
    /// requires_grad node the loss depends on.
    void backward(Var loss) {
        if (value(loss).numel() != 1) raise(Errc::shape_error, "backward target must be scalar");
        if (backward_done_) raise(Errc::double_backward, "backward already run on this tape");
        backward_done_ = true;
        if (!node(loss).requires_grad) return;  // loss independent of all parameters
        node(loss).grad.data[0] = S(1);
        for (std::int32_t i = loss.index; i >= 0; --i) {
            NodeRec& n = nodes_[static_cast<std::size_t>(i)];
            if (n.requires_grad && n.backprop) n.backprop(Var{i});
        }
    }

private:
    struct NodeRec {
        Array<S> value;
        Array<S> grad;
        bool requires_grad = false;
        std::function<void(Var)> backprop;
    };

    NodeRec& node(Var v) {
        if (!v.valid() || static_cast<std::size_t>(v.index) >= nodes_.size())
            raise(Errc::shape_error, "invalid tape variable");
        return nodes_[static_cast<std::size_t>(v.index)];
    }
    const NodeRec& node(Var v) const { return const_cast<Tape*>(this)->node(v); }

    bool needs(Var v) { return node(v).requires_grad; }

    void accumulate(Var v, const Array<S>& g) {
        Array<S>& dst = node(v).grad;
        for (std::size_t i = 0; i < g.data.size(); ++i) dst.data[i] += g.data[i];
    }

    template <typename F>
    Var push(Array<S> value, bool requires_grad, F&& backprop) {
        NodeRec n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        if (requires_grad) {
            n.grad = Array<S>::zeros_like(n.value);
            if constexpr (!std::is_same_v<F, std::nullptr_t>) n.backprop = std::forward<F>(backprop);
        }
        nodes_.push_back(std::move(n));
        return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    std::deque<NodeRec> nodes_;  // deque: references from value()/grad() stay valid as ops push
    bool backward_done_ = false;
};

}  // namespace hidec

#endif  // HIDEC_TENSOR_HPP
