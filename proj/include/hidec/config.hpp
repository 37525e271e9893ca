#ifndef HIDEC_CONFIG_HPP
#define HIDEC_CONFIG_HPP

#include <cstdint>
#include <string>

#include <json.hpp>

#include <hidec/errors.hpp>

namespace hidec {

enum class EncoderKind { bigru, meanpool };

inline std::string encoder_kind_name(EncoderKind k) {
    return k == EncoderKind::bigru ? "bigru" : "meanpool";
}

inline EncoderKind encoder_kind_from_name(const std::string& name) {
    if (name == "bigru") return EncoderKind::bigru;
    if (name == "meanpool") return EncoderKind::meanpool;
    raise(Errc::invalid_spec, "unknown encoder kind " + name);
}

/// Architecture hyperparameters. Everything that changes the parameter set
/// or the forward computation lives here and is persisted in checkpoints.
struct ModelConfig {
    EncoderKind encoder = EncoderKind::bigru;
    std::size_t embed_dim = 64;    // word embedding width
    std::size_t hidden_dim = 64;   // GRU width per direction; text states are 2x this
    std::size_t model_dim = 64;    // decoder width
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t ffn_dim = 128;
    std::size_t max_text_len = 256;
    double dropout_embed = 0.5;
    double dropout_attn = 0.1;
    double dropout_ffn = 0.1;
    bool residual = false;  // residual connections around decoder sublayers

    void validate() const {
        if (embed_dim == 0 || hidden_dim == 0 || model_dim == 0 || layers == 0 || heads == 0 ||
            ffn_dim == 0 || max_text_len == 0)
            raise(Errc::invalid_spec, "model dimensions must be positive");
        if (model_dim % heads != 0)
            raise(Errc::invalid_spec, "model_dim must be divisible by heads");
        for (double p : {dropout_embed, dropout_attn, dropout_ffn})
            if (p < 0.0 || p >= 1.0) raise(Errc::invalid_spec, "dropout must be in [0, 1)");
    }

    nlohmann::json to_json() const {
        return {
            {"encoder", encoder_kind_name(encoder)},
            {"embed_dim", embed_dim},   {"hidden_dim", hidden_dim},
            {"model_dim", model_dim},   {"layers", layers},
            {"heads", heads},           {"ffn_dim", ffn_dim},
            {"max_text_len", max_text_len}, {"dropout_embed", dropout_embed},
            {"dropout_attn", dropout_attn}, {"dropout_ffn", dropout_ffn},
            {"residual", residual},
        };
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.encoder = encoder_kind_from_name(j.at("encoder").get<std::string>());
        c.embed_dim = j.at("embed_dim").get<std::size_t>();
        c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        c.model_dim = j.at("model_dim").get<std::size_t>();
        c.layers = j.at("layers").get<std::size_t>();
        c.heads = j.at("heads").get<std::size_t>();
        c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
        c.max_text_len = j.at("max_text_len").get<std::size_t>();
        c.dropout_embed = j.at("dropout_embed").get<double>();
        c.dropout_attn = j.at("dropout_attn").get<double>();
        c.dropout_ffn = j.at("dropout_ffn").get<double>();
        c.residual = j.at("residual").get<bool>();
        c.validate();
        return c;
    }
};

/// Optimization settings for a training run.
struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double warmup_ratio = 0.1;  // fraction of total update steps spent warming up
    double clip_norm = 1.0;
    std::size_t min_count = 2;  // vocabulary threshold
    double threshold = 0.5;     // decision threshold during decoding
    std::uint64_t seed = 0;
    std::string precision = "f32";  // f32 for training, f64 for verification
    std::size_t eval_every = 1;     // epochs between dev evaluations; 0 disables

    void validate() const {
        if (epochs == 0 || batch_size == 0)
            raise(Errc::invalid_spec, "epochs and batch_size must be positive");
        if (lr <= 0.0) raise(Errc::invalid_spec, "learning rate must be positive");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || adam_eps <= 0.0)
            raise(Errc::invalid_spec, "bad Adam settings");
        if (warmup_ratio < 0.0 || warmup_ratio >= 1.0)
            raise(Errc::invalid_spec, "warmup_ratio must be in [0, 1)");
        if (threshold <= 0.0 || threshold >= 1.0)
            raise(Errc::invalid_spec, "threshold must be in (0, 1)");
        if (precision != "f32" && precision != "f64")
            raise(Errc::invalid_spec, "precision must be f32 or f64");
    }

    nlohmann::json to_json() const {
        return {
            {"epochs", epochs},       {"batch_size", batch_size},
            {"lr", lr},               {"beta1", beta1},
            {"beta2", beta2},         {"adam_eps", adam_eps},
            {"warmup_ratio", warmup_ratio}, {"clip_norm", clip_norm},
            {"min_count", min_count}, {"threshold", threshold},
            {"seed", seed},           {"precision", precision},
            {"eval_every", eval_every},
        };
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        c.epochs = j.at("epochs").get<std::size_t>();
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.lr = j.at("lr").get<double>();
        c.beta1 = j.at("beta1").get<double>();
        c.beta2 = j.at("beta2").get<double>();
        c.adam_eps = j.at("adam_eps").get<double>();
        c.warmup_ratio = j.at("warmup_ratio").get<double>();
        c.clip_norm = j.at("clip_norm").get<double>();
        c.min_count = j.at("min_count").get<std::size_t>();
        c.threshold = j.at("threshold").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.precision = j.at("precision").get<std::string>();
        c.eval_every = j.at("eval_every").get<std::size_t>();
        c.validate();
        return c;
    }
};

/**
 * Applies one `key=value` assignment from a config file or CLI override to
 * the matching field. Unknown keys raise InvalidSpec so typos surface.
 */
inline void apply_config_entry(const std::string& key, const std::string& value, ModelConfig& model,
                               TrainConfig& train) {
    auto to_size = [&](const std::string& v) {
        try {
            return static_cast<std::size_t>(std::stoull(v));
        } catch (const std::exception&) {
            raise(Errc::invalid_spec, "bad integer for " + key + ": " + v);
        }
    };
    auto to_real = [&](const std::string& v) {
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            raise(Errc::invalid_spec, "bad number for " + key + ": " + v);
        }
    };
    if (key == "encoder") model.encoder = encoder_kind_from_name(value);
    else if (key == "embed_dim") model.embed_dim = to_size(value);
    else if (key == "hidden_dim") model.hidden_dim = to_size(value);
    else if (key == "model_dim") model.model_dim = to_size(value);
    else if (key == "layers") model.layers = to_size(value);
    else if (key == "heads") model.heads = to_size(value);
    else if (key == "ffn_dim") model.ffn_dim = to_size(value);
    else if (key == "max_text_len") model.max_text_len = to_size(value);
    else if (key == "dropout_embed") model.dropout_embed = to_real(value);
    else if (key == "dropout_attn") model.dropout_attn = to_real(value);
    else if (key == "dropout_ffn") model.dropout_ffn = to_real(value);
    else if (key == "residual") model.residual = (value == "1" || value == "true");
    else if (key == "epochs") train.epochs = to_size(value);
    else if (key == "batch_size") train.batch_size = to_size(value);
    else if (key == "lr") train.lr = to_real(value);
    else if (key == "beta1") train.beta1 = to_real(value);
    else if (key == "beta2") train.beta2 = to_real(value);
    else if (key == "adam_eps") train.adam_eps = to_real(value);
    else if (key == "warmup_ratio") train.warmup_ratio = to_real(value);
    else if (key == "clip_norm") train.clip_norm = to_real(value);
    else if (key == "min_count") train.min_count = to_size(value);
    else if (key == "threshold") train.threshold = to_real(value);
    else if (key == "seed") train.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "precision") train.precision = value;
    else if (key == "eval_every") train.eval_every = to_size(value);
    else raise(Errc::invalid_spec, "unknown config key " + key);
}

/// Reads a `key = value` config file: one assignment per line, `#` comments.
inline void apply_config_text(const std::string& text, ModelConfig& model, TrainConfig& train) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const std::size_t b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const std::size_t e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            raise(Errc::invalid_spec, "config line is not key=value: " + line);
        apply_config_entry(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), model, train);
    }
}

}  // namespace hidec

#endif  // HIDEC_CONFIG_HPP
