#ifndef HIDEC_VOCAB_HPP
#define HIDEC_VOCAB_HPP

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <hidec/errors.hpp>

namespace hidec {

/// Short English stopword list applied during tokenization. Kept in the
/// binary so tokenization never depends on a data file being installed;
/// a custom list can be passed instead and is persisted in checkpoints.
inline const std::vector<std::string>& default_stopwords() {
    static const std::vector<std::string> words = {
        "a",    "an",   "and",  "are",  "as",   "at",   "be",   "but",  "by",   "for",
        "from", "had",  "has",  "have", "he",   "her",  "his",  "if",   "in",   "is",
        "it",   "its",  "no",   "not",  "of",   "on",   "or",   "she",  "so",   "that",
        "the",  "their", "then", "there", "they", "this", "to",  "was",  "we",   "were",
        "what", "when", "which", "will", "with", "would", "you",
    };
    return words;
}

/**
 * Lowercases ASCII letters, keeps [a-z0-9] runs as tokens, treats every
 * other byte as a separator, and drops stopwords. May return an empty
 * list; Vocabulary::encode turns that into a single unknown token.
 */
inline std::vector<std::string> tokenize(const std::string& text,
                                         const std::set<std::string>& stopwords) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            if (!stopwords.count(current)) tokens.push_back(current);
            current.clear();
        }
    };
    for (unsigned char ch : text) {
        const unsigned char lo = static_cast<unsigned char>(std::tolower(ch));
        if ((lo >= 'a' && lo <= 'z') || (lo >= '0' && lo <= '9')) {
            current.push_back(static_cast<char>(lo));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

/**
 * Word-to-id table with two reserved rows: padding at 0 and the unknown
 * token at 1. Real words get ids by descending training count, ties broken
 * alphabetically, so the same corpus always yields the same table.
 */
class Vocabulary {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;

    static const std::string& pad_token() {
        static const std::string t = "[PAD]";
        return t;
    }
    static const std::string& unk_token() {
        static const std::string t = "[UNK]";
        return t;
    }

    /// Builds from tokenized training documents, dropping words seen fewer
    /// than min_count times.
    static Vocabulary build(const std::vector<std::vector<std::string>>& docs,
                            std::size_t min_count) {
        std::map<std::string, std::size_t> counts;
        for (const auto& doc : docs)
            for (const auto& tok : doc) ++counts[tok];
        std::vector<std::pair<std::string, std::size_t>> kept;
        for (const auto& [word, n] : counts)
            if (n >= min_count) kept.emplace_back(word, n);
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        std::vector<std::string> words;
        words.reserve(kept.size());
        for (auto& [word, n] : kept) words.push_back(std::move(word));
        return from_words(words);
    }

    /// Rebuilds from the word list in id order (ids 2..), as stored in a
    /// checkpoint.
    static Vocabulary from_words(const std::vector<std::string>& words) {
        Vocabulary v;
        v.words_.push_back(pad_token());
        v.words_.push_back(unk_token());
        for (const auto& w : words) {
            if (w.empty()) raise(Errc::invalid_format, "empty vocabulary word");
            if (v.ids_.count(w) || w == pad_token() || w == unk_token())
                raise(Errc::invalid_format, "duplicate vocabulary word " + w);
            v.ids_.emplace(w, v.words_.size());
            v.words_.push_back(w);
        }
        return v;
    }

    std::size_t size() const { return words_.size(); }

    std::size_t id_of(const std::string& word) const {
        auto it = ids_.find(word);
        return it == ids_.end() ? kUnk : it->second;
    }

    const std::string& word(std::size_t id) const {
        if (id >= words_.size()) raise(Errc::unknown_token, "word id out of range");
        return words_[id];
    }

    /// Ids for a token list, truncated to max_len. An empty list encodes as
    /// one unknown token so every document occupies at least one position.
    std::vector<std::size_t> encode(const std::vector<std::string>& tokens,
                                    std::size_t max_len) const {
        std::vector<std::size_t> ids;
        const std::size_t n = std::min(tokens.size(), max_len);
        ids.reserve(n == 0 ? 1 : n);
        for (std::size_t i = 0; i < n; ++i) ids.push_back(id_of(tokens[i]));
        if (ids.empty()) ids.push_back(kUnk);
        return ids;
    }

    /// Real words in id order (excludes the two reserved tokens).
    std::vector<std::string> word_list() const {
        return {words_.begin() + 2, words_.end()};
    }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> ids_;
};

}  // namespace hidec

#endif  // HIDEC_VOCAB_HPP
