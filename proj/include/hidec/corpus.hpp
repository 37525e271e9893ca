#ifndef HIDEC_CORPUS_HPP
#define HIDEC_CORPUS_HPP

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <hidec/errors.hpp>
#include <hidec/taxonomy.hpp>

namespace hidec {

/// One labeled text. Labels are taxonomy node names; the list may be empty
/// for documents awaiting prediction.
struct Document {
    std::string text;
    std::vector<std::string> labels;
};

/// Parses one JSON object per line: {"text": ..., "labels": [...]}. Blank
/// lines are skipped; "labels" may be absent.
inline std::vector<Document> load_jsonl(std::istream& in, const std::string& origin = "<stream>") {
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            raise(Errc::invalid_format,
                  origin + ":" + std::to_string(lineno) + ": not a JSON object");
        if (!j.contains("text") || !j["text"].is_string())
            raise(Errc::invalid_format,
                  origin + ":" + std::to_string(lineno) + ": missing string field \"text\"");
        Document d;
        d.text = j["text"].get<std::string>();
        if (j.contains("labels")) {
            if (!j["labels"].is_array())
                raise(Errc::invalid_format,
                      origin + ":" + std::to_string(lineno) + ": \"labels\" must be an array");
            for (const auto& item : j["labels"]) {
                if (!item.is_string())
                    raise(Errc::invalid_format,
                          origin + ":" + std::to_string(lineno) + ": labels must be strings");
                d.labels.push_back(item.get<std::string>());
            }
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

inline std::vector<Document> load_jsonl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::invalid_format, "cannot open " + path);
    return load_jsonl(in, path);
}

inline void save_jsonl(std::ostream& out, const std::vector<Document>& docs) {
    for (const Document& d : docs) {
        nlohmann::json j;
        j["text"] = d.text;
        j["labels"] = d.labels;
        out << j.dump() << "\n";
    }
}

inline void save_jsonl_file(const std::string& path, const std::vector<Document>& docs) {
    std::ofstream out(path);
    if (!out) raise(Errc::invalid_format, "cannot write " + path);
    save_jsonl(out, docs);
}

/// Maps a document's label names to taxonomy ids. Unknown names raise;
/// with ancestor closure every proper ancestor except the root is added.
inline std::set<LabelId> document_label_ids(const Taxonomy& t, const Document& d,
                                            bool close_ancestors = false) {
    std::set<LabelId> ids;
    for (const std::string& name : d.labels) {
        const LabelId v = t.require(name);
        ids.insert(v);
        if (close_ancestors) {
            for (LabelId a : t.ancestors(v))
                if (a != t.root()) ids.insert(a);
        }
    }
    return ids;
}

}  // namespace hidec

#endif  // HIDEC_CORPUS_HPP
