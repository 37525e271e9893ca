#ifndef HIDEC_SUBHIER_HPP
#define HIDEC_SUBHIER_HPP

#include <cctype>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <hidec/errors.hpp>
#include <hidec/taxonomy.hpp>

namespace hidec {

/**
 * A document's slice of the taxonomy: the assigned labels plus all their
 * ancestors, connected by the taxonomy's parent edges. During recursive
 * decoding partially grown graphs also live here, so `assigned` may be any
 * subset of `nodes`.
 */
struct SubHierarchy {
    std::set<LabelId> nodes;
    std::set<std::pair<LabelId, LabelId>> edges;  // (parent, child)
    std::set<LabelId> assigned;

    bool operator==(const SubHierarchy&) const = default;
};

enum class TokenKind { open, close, terminator, label };

struct Token {
    TokenKind kind;
    LabelId label = kNoLabel;  // set for TokenKind::label only

    bool is_special() const { return kind != TokenKind::label; }
    bool operator==(const Token&) const = default;

    static Token open() { return {TokenKind::open}; }
    static Token close() { return {TokenKind::close}; }
    static Token terminator() { return {TokenKind::terminator}; }
    static Token of(LabelId v) { return {TokenKind::label, v}; }
};

/**
 * A sub-hierarchy linearized in parse-tree notation. Each node contributes
 * an (open, label, ..., close) frame; each assignment contributes an
 * (open, [END], close) triple after the node's child frames.
 *
 * `levels[i]` is depth+1 for label tokens, the bracketed token's level for
 * parens, and the owning label's level+1 for terminators. Level 0 is
 * reserved for padding. `owner[i]` names the label whose frame position i
 * belongs to.
 */
struct SubHierSequence {
    std::vector<Token> tokens;
    std::vector<std::size_t> levels;
    std::vector<LabelId> owner;

    std::size_t length() const { return tokens.size(); }
};

/// Additive self-attention biases: 0 keeps a (query, key) pair, kMasked
/// removes it. Special-token rows and columns are always kept.
class HierarchyMask {
public:
    static constexpr float kMasked = -1e9f;

    HierarchyMask() = default;
    explicit HierarchyMask(std::size_t size) : size_(size), entries_(size * size, 0.0f) {}

    std::size_t size() const { return size_; }
    float at(std::size_t q, std::size_t k) const { return entries_[q * size_ + k]; }
    void block(std::size_t q, std::size_t k) { entries_[q * size_ + k] = kMasked; }
    const std::vector<float>& entries() const { return entries_; }

private:
    std::size_t size_ = 0;
    std::vector<float> entries_;
};

inline SubHierarchy build_subhierarchy(const Taxonomy& t, const std::set<LabelId>& labels) {
    if (labels.empty()) raise(Errc::empty_label_set, "cannot build a sub-hierarchy from no labels");
    SubHierarchy sh;
    sh.assigned = labels;
    sh.nodes.insert(t.root());
    for (LabelId v : labels) {
        for (LabelId a : t.ancestors(v)) sh.nodes.insert(a);  // validates v
        sh.nodes.insert(v);
    }
    for (LabelId v : sh.nodes) {
        if (v != t.root()) sh.edges.emplace(t.parent(v), v);
    }
    return sh;
}

/// Structural soundness relative to the taxonomy: root present, nodes closed
/// under parents, edges exactly the implied parent links, assigned inside
/// nodes. Leaves without a terminator are allowed (partial decode states).
inline void validate_subhierarchy(const Taxonomy& t, const SubHierarchy& sh) {
    if (!sh.nodes.count(t.root()))
        raise(Errc::invalid_subhierarchy, "root is not a node");
    for (LabelId v : sh.nodes) {
        if (v < 0 || static_cast<std::size_t>(v) >= t.size())
            raise(Errc::invalid_subhierarchy, "node id out of range");
        if (v == t.root()) continue;
        if (!sh.nodes.count(t.parent(v)))
            raise(Errc::invalid_subhierarchy,
                  "node '" + t.name(v) + "' present without its parent");
        if (!sh.edges.count({t.parent(v), v}))
            raise(Errc::invalid_subhierarchy, "missing edge into '" + t.name(v) + "'");
    }
    if (sh.edges.size() != sh.nodes.size() - 1)
        raise(Errc::invalid_subhierarchy, "edge set does not match the node set");
    for (LabelId v : sh.assigned) {
        if (!sh.nodes.count(v))
            raise(Errc::invalid_subhierarchy, "assigned label '" + t.name(v) + "' is not a node");
    }
}

namespace detail {

inline void emit_node(const Taxonomy& t, const SubHierarchy& sh, LabelId v,
                      std::size_t level, SubHierSequence& out) {
    auto push = [&out](Token tok, std::size_t lvl, LabelId owner) {
        out.tokens.push_back(tok);
        out.levels.push_back(lvl);
        out.owner.push_back(owner);
    };
    push(Token::open(), level, v);
    push(Token::of(v), level, v);
    for (LabelId c : t.children(v)) {
        if (sh.nodes.count(c)) emit_node(t, sh, c, level + 1, out);
    }
    if (sh.assigned.count(v)) {
        push(Token::open(), level + 1, v);
        push(Token::terminator(), level + 1, v);
        push(Token::close(), level + 1, v);
    }
    push(Token::close(), level, v);
}

}  // namespace detail

inline SubHierSequence serialize(const Taxonomy& t, const SubHierarchy& sh) {
    validate_subhierarchy(t, sh);
    SubHierSequence seq;
    seq.tokens.reserve(3 * (sh.nodes.size() + sh.assigned.size()));
    detail::emit_node(t, sh, t.root(), 1, seq);
    return seq;
}

namespace detail {

struct SequenceParser {
    const Taxonomy& taxonomy;
    const std::vector<Token>& tokens;
    std::size_t pos = 0;
    SubHierarchy graph;
    std::vector<std::size_t> levels;
    std::vector<LabelId> owner;

    const Token& peek() const {
        if (pos >= tokens.size()) raise(Errc::parse_error, "unexpected end of sequence");
        return tokens[pos];
    }

    void expect(TokenKind kind, const char* what) {
        if (pos >= tokens.size() || tokens[pos].kind != kind)
            raise(Errc::parse_error, std::string("expected ") + what + " at position " +
                                         std::to_string(pos));
        ++pos;
    }

    void record(std::size_t level, LabelId own) {
        levels.push_back(level);
        owner.push_back(own);
    }

    // Parses one (open, label, ..., close) frame whose label must be a
    // taxonomy child of `parent` (or the root when parent is kNoLabel).
    void parse_frame(LabelId parent) {
        expect(TokenKind::open, "'('");
        const Token& head = peek();
        if (head.kind != TokenKind::label)
            raise(Errc::parse_error, "'(' must be followed by a label here");
        const LabelId v = head.label;
        if (v < 0 || static_cast<std::size_t>(v) >= taxonomy.size())
            raise(Errc::unknown_label, "label id " + std::to_string(v) + " out of range");
        if (parent == kNoLabel) {
            if (v != taxonomy.root())
                raise(Errc::invalid_edge, "sequence must start at the root label");
        } else if (taxonomy.parent(v) != parent) {
            raise(Errc::invalid_edge, "'" + taxonomy.name(v) + "' is not a child of '" +
                                          taxonomy.name(parent) + "'");
        }
        if (graph.nodes.count(v))
            raise(Errc::duplicate_label, "label '" + taxonomy.name(v) + "' appears twice");
        graph.nodes.insert(v);
        if (parent != kNoLabel) graph.edges.emplace(parent, v);

        const std::size_t level = taxonomy.depth(v) + 1;
        record(level, v);  // the open
        ++pos;
        record(level, v);  // the label

        while (pos < tokens.size() && tokens[pos].kind == TokenKind::open) {
            if (pos + 1 < tokens.size() && tokens[pos + 1].kind == TokenKind::terminator) {
                if (graph.assigned.count(v))
                    raise(Errc::parse_error, "duplicate terminator under '" + taxonomy.name(v) + "'");
                graph.assigned.insert(v);
                ++pos;
                record(level + 1, v);  // open
                ++pos;
                record(level + 1, v);  // terminator
                expect(TokenKind::close, "')' after terminator");
                record(level + 1, v);
            } else {
                parse_frame(v);
            }
        }
        expect(TokenKind::close, "')'");
        record(level, v);
    }

    void run() {
        parse_frame(kNoLabel);
        if (pos != tokens.size())
            raise(Errc::parse_error, "trailing tokens after position " + std::to_string(pos));
    }
};

}  // namespace detail

/// Inverse of serialize. Accepts any grammatical ordering of child frames;
/// the result is set-valued so reserializing canonicalizes.
inline SubHierarchy deserialize(const Taxonomy& t, const SubHierSequence& seq) {
    detail::SequenceParser parser{t, seq.tokens};
    parser.run();
    return parser.graph;
}

/// Recomputes per-token levels from the token stream alone.
inline std::vector<std::size_t> token_levels(const Taxonomy& t, const SubHierSequence& seq) {
    detail::SequenceParser parser{t, seq.tokens};
    parser.run();
    return parser.levels;
}

/**
 * Additive self-attention mask: a label query keeps itself, its ancestors,
 * and every special token; everything else is removed. Special-token
 * queries keep all positions.
 */
inline HierarchyMask build_hierarchy_mask(const Taxonomy& t, const SubHierSequence& seq) {
    const std::size_t m = seq.length();
    HierarchyMask mask(m);
    for (std::size_t q = 0; q < m; ++q) {
        if (seq.tokens[q].is_special()) continue;
        const LabelId vq = seq.tokens[q].label;
        for (std::size_t k = 0; k < m; ++k) {
            if (seq.tokens[k].is_special()) continue;
            const LabelId vk = seq.tokens[k].label;
            if (vk == vq || t.is_ancestor(vk, vq)) continue;
            mask.block(q, k);
        }
    }
    return mask;
}

/// Renders the sequence in the compact textual notation, e.g.
/// `(R(A([END])))`.
inline std::string sequence_to_string(const Taxonomy& t, const SubHierSequence& seq) {
    std::string out;
    for (const Token& tok : seq.tokens) {
        switch (tok.kind) {
            case TokenKind::open: out += '('; break;
            case TokenKind::close: out += ')'; break;
            case TokenKind::terminator: out += "[END]"; break;
            case TokenKind::label: out += t.name(tok.label); break;
        }
    }
    return out;
}

/// Parses the textual notation back into a validated sequence. Label names
/// are maximal runs without parens; whitespace between tokens is ignored.
inline SubHierSequence sequence_from_string(const Taxonomy& t, const std::string& text) {
    SubHierSequence seq;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '(') {
            seq.tokens.push_back(Token::open());
            ++i;
        } else if (c == ')') {
            seq.tokens.push_back(Token::close());
            ++i;
        } else {
            std::size_t j = i;
            while (j < text.size() && text[j] != '(' && text[j] != ')') ++j;
            std::string word = text.substr(i, j - i);
            while (!word.empty() && std::isspace(static_cast<unsigned char>(word.back())))
                word.pop_back();
            if (word == "[END]") {
                seq.tokens.push_back(Token::terminator());
            } else {
                seq.tokens.push_back(Token::of(t.require(word)));
            }
            i = j;
        }
    }
    // Validate and fill levels/owner through the parser.
    detail::SequenceParser parser{t, seq.tokens};
    parser.run();
    seq.levels = parser.levels;
    seq.owner = parser.owner;
    return seq;
}

}  // namespace hidec

#endif  // HIDEC_SUBHIER_HPP
