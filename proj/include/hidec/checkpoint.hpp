#ifndef HIDEC_CHECKPOINT_HPP
#define HIDEC_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include <hidec/config.hpp>
#include <hidec/errors.hpp>
#include <hidec/optimizer.hpp>
#include <hidec/taxonomy.hpp>
#include <hidec/vocab.hpp>

namespace hidec {

/**
 * Checkpoint container, little-endian throughout:
 *
 *   bytes 0..7    magic "HIDECKPT"
 *   bytes 8..11   format version, uint32
 *   bytes 12..19  manifest length in bytes, uint64
 *   ...           manifest: one JSON object (UTF-8, no trailing newline)
 *   ...           for each manifest tensor, in listed order: rows*cols
 *                 values, IEEE-754 f32 or f64 per the manifest precision
 *   last 8 bytes  FNV-1a 64-bit hash of every preceding byte, uint64
 *
 * The manifest holds the model and training configs, the taxonomy content
 * hash, the vocabulary and stopword lists, and the tensor directory
 * (name, rows, cols). Parameter values only; optimizer moments are not
 * persisted. Writing the same bundle twice produces identical bytes.
 */
inline constexpr char kCheckpointMagic[8] = {'H', 'I', 'D', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename S>
struct ModelBundle {
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    std::uint64_t taxonomy_hash = 0;
    std::vector<std::string> vocab_words;  // real words in id order
    std::vector<std::string> stopwords;
    ParameterStore<S> params;
};

namespace detail {

struct Fnv1a64 {
    std::uint64_t h = 1469598103934665603ull;
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    }
};

inline void require_little_endian() {
    if constexpr (std::endian::native != std::endian::little)
        raise(Errc::invalid_spec, "checkpoint format requires a little-endian host");
}

template <typename T>
void append_raw(std::string& buf, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    buf.append(bytes, sizeof(T));
}

template <typename S>
const char* dtype_name() {
    if constexpr (std::is_same_v<S, float>) return "f32";
    else return "f64";
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const ModelBundle<S>& bundle) {
    detail::require_little_endian();
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, p] : bundle.params.entries())
        tensors.push_back({{"name", name}, {"rows", p.value.rows}, {"cols", p.value.cols}});
    nlohmann::json manifest = {
        {"format_version", kCheckpointVersion},
        {"precision", detail::dtype_name<S>()},
        {"model_config", bundle.model_cfg.to_json()},
        {"train_config", bundle.train_cfg.to_json()},
        {"taxonomy_hash", std::to_string(bundle.taxonomy_hash)},
        {"vocabulary", bundle.vocab_words},
        {"stopwords", bundle.stopwords},
        {"tensors", tensors},
    };
    const std::string mtext = manifest.dump();

    std::string buf;
    buf.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::append_raw(buf, kCheckpointVersion);
    detail::append_raw(buf, static_cast<std::uint64_t>(mtext.size()));
    buf += mtext;
    for (const auto& [name, p] : bundle.params.entries())
        buf.append(reinterpret_cast<const char*>(p.value.data.data()),
                   p.value.data.size() * sizeof(S));

    detail::Fnv1a64 fnv;
    fnv.update(buf.data(), buf.size());
    detail::append_raw(buf, fnv.h);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::invalid_format, "cannot write " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) raise(Errc::invalid_format, "short write to " + path);
}

namespace detail {

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::invalid_format, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

/// Header + checksum validation shared by load and precision peeking.
/// Returns the parsed manifest and the offset of the tensor data.
inline std::pair<nlohmann::json, std::size_t> open_checkpoint(const std::string& bytes,
                                                              const std::string& path) {
    constexpr std::size_t header = sizeof(kCheckpointMagic) + sizeof(std::uint32_t) +
                                   sizeof(std::uint64_t);
    if (bytes.size() < header + sizeof(std::uint64_t))
        raise(Errc::checksum_error, path + " is too short to be a checkpoint");
    if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        raise(Errc::incompatible_checkpoint, path + " is not a checkpoint file");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + sizeof(kCheckpointMagic), sizeof(version));
    if (version != kCheckpointVersion)
        raise(Errc::incompatible_checkpoint,
              path + " has format version " + std::to_string(version));

    Fnv1a64 fnv;
    fnv.update(bytes.data(), bytes.size() - sizeof(std::uint64_t));
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - sizeof(stored), sizeof(stored));
    if (fnv.h != stored) raise(Errc::checksum_error, path + " failed its checksum");

    std::uint64_t mlen;
    std::memcpy(&mlen, bytes.data() + sizeof(kCheckpointMagic) + sizeof(std::uint32_t),
                sizeof(mlen));
    if (header + mlen + sizeof(std::uint64_t) > bytes.size())
        raise(Errc::checksum_error, path + " manifest overruns the file");
    nlohmann::json manifest =
        nlohmann::json::parse(bytes.substr(header, static_cast<std::size_t>(mlen)), nullptr, false);
    if (manifest.is_discarded())
        raise(Errc::incompatible_checkpoint, path + " has an unreadable manifest");
    return {std::move(manifest), header + static_cast<std::size_t>(mlen)};
}

}  // namespace detail

/// Element type stored in a checkpoint ("f32" or "f64"), for dispatching
/// to the right load_checkpoint instantiation.
inline std::string checkpoint_precision(const std::string& path) {
    const std::string bytes = detail::read_file_bytes(path);
    return detail::open_checkpoint(bytes, path).first.at("precision").get<std::string>();
}

/**
 * Loads and fully validates a checkpoint. When a taxonomy is given its
 * content hash must match the one recorded at save time.
 */
template <typename S>
ModelBundle<S> load_checkpoint(const std::string& path, const Taxonomy* expect_taxonomy = nullptr) {
    detail::require_little_endian();
    const std::string bytes = detail::read_file_bytes(path);
    auto [manifest, offset] = detail::open_checkpoint(bytes, path);

    if (manifest.at("precision").get<std::string>() != detail::dtype_name<S>())
        raise(Errc::incompatible_checkpoint,
              path + " stores " + manifest.at("precision").get<std::string>() +
                  " parameters, not " + detail::dtype_name<S>());

    ModelBundle<S> bundle;
    bundle.model_cfg = ModelConfig::from_json(manifest.at("model_config"));
    bundle.train_cfg = TrainConfig::from_json(manifest.at("train_config"));
    bundle.taxonomy_hash = std::stoull(manifest.at("taxonomy_hash").get<std::string>());
    bundle.vocab_words = manifest.at("vocabulary").get<std::vector<std::string>>();
    bundle.stopwords = manifest.at("stopwords").get<std::vector<std::string>>();
    if (expect_taxonomy && expect_taxonomy->content_hash() != bundle.taxonomy_hash)
        raise(Errc::taxonomy_mismatch,
              path + " was trained against a different taxonomy");

    std::size_t cursor = offset;
    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::size_t rows = entry.at("rows").get<std::size_t>();
        const std::size_t cols = entry.at("cols").get<std::size_t>();
        const std::size_t nbytes = rows * cols * sizeof(S);
        if (cursor + nbytes + sizeof(std::uint64_t) > bytes.size())
            raise(Errc::checksum_error, path + " tensor data overruns the file");
        auto& p = bundle.params.create(name, rows, cols);
        std::memcpy(p.value.data.data(), bytes.data() + cursor, nbytes);
        cursor += nbytes;
    }
    if (cursor + sizeof(std::uint64_t) != bytes.size())
        raise(Errc::checksum_error, path + " has trailing bytes after the tensor data");
    return bundle;
}

}  // namespace hidec

#endif  // HIDEC_CHECKPOINT_HPP
