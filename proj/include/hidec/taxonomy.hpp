#ifndef HIDEC_TAXONOMY_HPP
#define HIDEC_TAXONOMY_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <hidec/errors.hpp>

namespace hidec {

using LabelId = std::int32_t;

constexpr LabelId kNoLabel = -1;

/**
 * The label tree: dense ids 0..C-1, one root, every other label with exactly
 * one parent. Immutable after construction; all queries are const.
 */
class Taxonomy {
public:
    /// Builds and validates a tree from (name, parent-name-or-empty) records
    /// in id order. Prefer load_taxonomy for file input.
    static Taxonomy build(const std::vector<std::string>& names,
                          const std::vector<LabelId>& parents);

    std::size_t size() const { return names_.size(); }
    LabelId root() const { return root_; }
    std::size_t max_depth() const { return max_depth_; }

    const std::string& name(LabelId v) const {
        check(v);
        return names_[static_cast<std::size_t>(v)];
    }

    /// kNoLabel for the root.
    LabelId parent(LabelId v) const {
        check(v);
        return parents_[static_cast<std::size_t>(v)];
    }

    const std::vector<LabelId>& children(LabelId v) const {
        check(v);
        return children_[static_cast<std::size_t>(v)];
    }

    std::size_t depth(LabelId v) const {
        check(v);
        return depths_[static_cast<std::size_t>(v)];
    }

    bool is_leaf(LabelId v) const { return children(v).empty(); }

    std::optional<LabelId> find(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) return std::nullopt;
        return it->second;
    }

    LabelId require(const std::string& name) const {
        auto id = find(name);
        if (!id) raise(Errc::unknown_label, "no label named '" + name + "'");
        return *id;
    }

    /// Root-to-parent chain, exclusive of v. Empty for the root.
    std::vector<LabelId> ancestors(LabelId v) const {
        check(v);
        std::vector<LabelId> chain;
        for (LabelId u = parent(v); u != kNoLabel; u = parent(u)) chain.push_back(u);
        std::reverse(chain.begin(), chain.end());
        return chain;
    }

    bool is_ancestor(LabelId maybe_ancestor, LabelId v) const {
        check(maybe_ancestor);
        for (LabelId u = parent(v); u != kNoLabel; u = parent(u)) {
            if (u == maybe_ancestor) return true;
        }
        return false;
    }

    /// Candidate set for expanding v: taxonomy children in canonical order
    /// followed by the terminator pseudo-child. Exactly one entry (the
    /// terminator) for a taxonomy leaf.
    struct Candidate {
        LabelId label;  // kNoLabel marks the terminator
        bool is_end() const { return label == kNoLabel; }
    };

    std::vector<Candidate> augmented_children(LabelId v) const {
        check(v);
        std::vector<Candidate> out;
        out.reserve(children(v).size() + 1);
        for (LabelId c : children(v)) out.push_back({c});
        out.push_back({kNoLabel});
        return out;
    }

    /// FNV-1a over the canonical (name, parent) records; used to pair
    /// checkpoints with the taxonomy they were trained against.
    std::uint64_t content_hash() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](const void* data, std::size_t n) {
            const auto* p = static_cast<const unsigned char*>(data);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= p[i];
                h *= 1099511628211ull;
            }
        };
        for (std::size_t i = 0; i < names_.size(); ++i) {
            mix(names_[i].data(), names_[i].size());
            const LabelId p = parents_[i];
            mix(&p, sizeof(p));
        }
        return h;
    }

private:
    void check(LabelId v) const {
        if (v < 0 || static_cast<std::size_t>(v) >= names_.size())
            raise(Errc::unknown_label, "label id " + std::to_string(v) + " out of range");
    }

    std::vector<std::string> names_;
    std::vector<LabelId> parents_;
    std::vector<std::vector<LabelId>> children_;
    std::vector<std::size_t> depths_;
    std::unordered_map<std::string, LabelId> by_name_;
    LabelId root_ = 0;
    std::size_t max_depth_ = 0;
};

inline Taxonomy Taxonomy::build(const std::vector<std::string>& names,
                                const std::vector<LabelId>& parents) {
    if (names.size() != parents.size() || names.empty())
        raise(Errc::invalid_format, "names and parents must be non-empty and aligned");

    Taxonomy t;
    t.names_ = names;
    t.parents_ = parents;
    const std::size_t n = names.size();
    t.children_.assign(n, {});
    t.depths_.assign(n, 0);

    for (std::size_t i = 0; i < n; ++i) {
        if (names[i].empty()) raise(Errc::invalid_format, "empty label name at id " + std::to_string(i));
        if (!t.by_name_.emplace(names[i], static_cast<LabelId>(i)).second)
            raise(Errc::invalid_format, "duplicate label name '" + names[i] + "'");
    }

    LabelId root = kNoLabel;
    for (std::size_t i = 0; i < n; ++i) {
        const LabelId p = parents[i];
        if (p == kNoLabel) {
            if (root != kNoLabel)
                raise(Errc::orphan_label,
                      "label '" + names[i] + "' has no parent and is not the root");
            root = static_cast<LabelId>(i);
        } else if (p < 0 || static_cast<std::size_t>(p) >= n) {
            raise(Errc::unknown_label, "parent id out of range for '" + names[i] + "'");
        } else {
            t.children_[static_cast<std::size_t>(p)].push_back(static_cast<LabelId>(i));
        }
    }
    if (root == kNoLabel) raise(Errc::cyclic_taxonomy, "no root label");
    t.root_ = root;

    // Canonical child order is ascending id (first-appearance order).
    for (auto& kids : t.children_) std::sort(kids.begin(), kids.end());

    // Depths via iterative DFS; anything unreached sits on a cycle.
    std::vector<char> seen(n, 0);
    std::vector<LabelId> stack{root};
    seen[static_cast<std::size_t>(root)] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
        const LabelId v = stack.back();
        stack.pop_back();
        ++reached;
        const std::size_t vi = static_cast<std::size_t>(v);
        t.max_depth_ = std::max(t.max_depth_, t.depths_[vi]);
        for (LabelId c : t.children_[vi]) {
            const std::size_t ci = static_cast<std::size_t>(c);
            if (seen[ci]) raise(Errc::cyclic_taxonomy, "label '" + names[ci] + "' reached twice");
            seen[ci] = 1;
            t.depths_[ci] = t.depths_[vi] + 1;
            stack.push_back(c);
        }
    }
    if (reached != n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!seen[i])
                raise(Errc::cyclic_taxonomy, "label '" + names[i] + "' is unreachable from the root");
        }
    }
    return t;
}

/**
 * Loads a taxonomy from tab-separated `parent child...` lines. The
 * first-appearing parent of the first record is the root; ids follow
 * first-appearance order. Lines starting with '#' are comments.
 */
inline Taxonomy load_taxonomy_text(const std::string& text) {
    std::vector<std::string> names;
    std::vector<LabelId> parents;
    std::unordered_map<std::string, LabelId> ids;
    std::vector<char> defined_as_child;  // aligned with names

    auto intern = [&](const std::string& name) -> LabelId {
        auto it = ids.find(name);
        if (it != ids.end()) return it->second;
        const LabelId id = static_cast<LabelId>(names.size());
        ids.emplace(name, id);
        names.push_back(name);
        parents.push_back(kNoLabel);
        defined_as_child.push_back(0);
        return id;
    };

    std::istringstream in(text);
    std::string line;
    bool first_record = true;
    LabelId root = kNoLabel;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        for (const auto& f : fields) {
            if (f.empty()) raise(Errc::invalid_format, "empty field in line: " + line);
        }

        const LabelId parent = intern(fields[0]);
        if (first_record) {
            root = parent;
            first_record = false;
        }
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const LabelId child = intern(fields[i]);
            if (child == root)
                raise(Errc::cyclic_taxonomy, "root '" + fields[i] + "' cannot have a parent");
            if (defined_as_child[static_cast<std::size_t>(child)])
                raise(Errc::multiple_parents,
                      "label '" + fields[i] + "' assigned more than one parent");
            defined_as_child[static_cast<std::size_t>(child)] = 1;
            parents[static_cast<std::size_t>(child)] = parent;
        }
    }
    if (names.empty()) raise(Errc::invalid_format, "taxonomy file defines no labels");

    // A name used only as a parent and never attached below anything must be
    // the root; otherwise it dangles.
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!defined_as_child[i] && static_cast<LabelId>(i) != root)
            raise(Errc::orphan_label, "label '" + names[i] + "' is never defined as a child");
    }
    return Taxonomy::build(names, parents);
}

inline Taxonomy load_taxonomy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::invalid_format, "cannot open taxonomy file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_taxonomy_text(buf.str());
}

/// Writes the tree back out in the tab-separated record format. One
/// `parent\tchild` line per non-root node in child-id order; whenever parents
/// precede children in id order (true for every taxonomy this library builds
/// from files or generates), reloading reproduces the exact same ids and
/// content hash, not just the shape.
inline std::string taxonomy_to_text(const Taxonomy& t) {
    std::ostringstream out;
    if (t.size() == 1) {
        out << t.name(t.root()) << '\n';
        return out.str();
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
        const LabelId v = static_cast<LabelId>(i);
        if (v == t.root()) continue;
        out << t.name(t.parent(v)) << '\t' << t.name(v) << '\n';
    }
    return out.str();
}

}  // namespace hidec

#endif  // HIDEC_TAXONOMY_HPP
