#include "sidekit/config.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "sidekit/binary_io.hpp"
#include "sidekit/error.hpp"

namespace sidekit {

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T v{};
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end || text.empty()) {
        throw InvalidArgument("bad value for '" + std::string(key) + "': '" + std::string(text) + "'");
    }
    return v;
}

float parse_float(std::string_view key, std::string_view text) {
    const float v = parse_number<float>(key, text);
    if (!std::isfinite(v)) throw InvalidArgument("'" + std::string(key) + "' must be finite");
    return v;
}

std::size_t positive(std::string_view key, std::string_view text) {
    const auto v = parse_number<std::size_t>(key, text);
    if (v == 0) throw InvalidArgument("'" + std::string(key) + "' must be positive");
    return v;
}

}  // namespace

std::string_view pipeline_quantizer_name(PipelineQuantizer kind) {
    switch (kind) {
        case PipelineQuantizer::KMeans: return "kmeans";
        case PipelineQuantizer::Residual: return "rq";
        case PipelineQuantizer::Product: return "pq";
        case PipelineQuantizer::Fsq: return "fsq";
        case PipelineQuantizer::Dpca: return "dpca";
    }
    return "?";
}

PipelineQuantizer parse_pipeline_quantizer(std::string_view text) {
    for (auto k : {PipelineQuantizer::KMeans, PipelineQuantizer::Residual, PipelineQuantizer::Product,
                   PipelineQuantizer::Fsq, PipelineQuantizer::Dpca}) {
        if (text == pipeline_quantizer_name(k)) return k;
    }
    throw InvalidArgument("unknown quantizer '" + std::string(text) + "' (expected kmeans|rq|pq|fsq|dpca)");
}

std::vector<std::size_t> parse_size_list(std::string_view text) {
    std::vector<std::size_t> out;
    text = trim(text);
    if (text.empty() || text == "none") return out;
    while (true) {
        const auto comma = text.find(',');
        out.push_back(positive("list", trim(text.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        text = text.substr(comma + 1);
    }
    return out;
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "quantizer") {
        quantizer = parse_pipeline_quantizer(value);
    } else if (key == "levels") {
        levels = parse_number<std::uint32_t>(key, value);
    } else if (key == "depth") {
        depth = positive(key, value);
    } else if (key == "groups") {
        groups = positive(key, value);
    } else if (key == "latent") {
        latent = positive(key, value);
    } else if (key == "ngram") {
        ngram = positive(key, value);
    } else if (key == "hidden") {
        hidden = parse_size_list(value);
    } else if (key == "trunk") {
        trunk = parse_size_list(value);
    } else if (key == "head") {
        head = parse_size_list(value);
    } else if (key == "epochs") {
        epochs = positive(key, value);
    } else if (key == "batch") {
        batch = positive(key, value);
    } else if (key == "lr") {
        lr = parse_float(key, value);
    } else if (key == "dropout") {
        dropout = parse_float(key, value);
    } else if (key == "commitment") {
        commitment = parse_float(key, value);
    } else if (key == "codebook") {
        codebook = parse_float(key, value);
    } else if (key == "kmeans_iters") {
        kmeans_iters = positive(key, value);
    } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(key, value);
    } else {
        throw InvalidArgument("unknown config key '" + std::string(key) + "'");
    }
    explicit_keys.emplace(key);
}

void PipelineConfig::validate() const {
    const auto kind = std::string(pipeline_quantizer_name(quantizer));
    const bool has_depth = quantizer == PipelineQuantizer::Dpca || quantizer == PipelineQuantizer::Residual;
    const bool has_groups = quantizer == PipelineQuantizer::Dpca || quantizer == PipelineQuantizer::Product;
    if (is_set("depth") && !has_depth) throw InvalidArgument("depth applies only to dpca and rq, not " + kind);
    if (is_set("groups") && !has_groups) throw InvalidArgument("groups applies only to dpca and pq, not " + kind);
    if (is_set("latent") && !uses_fusion()) throw InvalidArgument("latent applies only to fsq and dpca, not " + kind);
    if (quantizer == PipelineQuantizer::Dpca && levels != 3) {
        throw InvalidArgument("dpca codes are ternary; levels must be 3");
    }
    if (levels < 2) throw InvalidArgument("levels must be at least 2");
    if (quantizer == PipelineQuantizer::Dpca && latent % groups != 0) {
        throw InvalidArgument("latent " + std::to_string(latent) + " is not divisible by groups " +
                              std::to_string(groups));
    }
    if (!(lr >= 0.0f)) throw InvalidArgument("lr must be non-negative");
    if (dropout < 0.0f || dropout > 1.0f) throw InvalidArgument("dropout must lie in [0, 1]");
    if (commitment < 0.0f || codebook < 0.0f) throw InvalidArgument("loss weights must be non-negative");
    (void)sid_scheme();
}

std::size_t PipelineConfig::code_length() const {
    switch (quantizer) {
        case PipelineQuantizer::KMeans: return 1;
        case PipelineQuantizer::Residual: return depth;
        case PipelineQuantizer::Product: return groups;
        case PipelineQuantizer::Fsq: return latent;
        case PipelineQuantizer::Dpca: return depth * groups;
    }
    return 0;
}

double PipelineConfig::bits() const {
    return static_cast<double>(code_length()) * std::log2(static_cast<double>(levels));
}

FusionSpec PipelineConfig::fusion_spec(std::vector<std::size_t> signal_dims) const {
    if (!uses_fusion()) {
        throw InvalidArgument("quantizer " + std::string(pipeline_quantizer_name(quantizer)) +
                              " has no fusion model");
    }
    FusionSpec spec;
    spec.signal_dims = std::move(signal_dims);
    spec.encoder_hidden = hidden;
    spec.trunk = trunk;
    spec.head_hidden = head;
    if (quantizer == PipelineQuantizer::Fsq) {
        spec.quantizer.kind = QuantizerKind::Fsq;
        spec.quantizer.levels = levels;
        spec.quantizer.fsq_dims = latent;
    } else {
        spec.quantizer.kind = QuantizerKind::Dpca;
        spec.quantizer.depth = depth;
        spec.quantizer.groups = groups;
        spec.quantizer.group_width = latent / groups;
    }
    spec.validate();
    return spec;
}

TrainConfig PipelineConfig::train_config() const {
    TrainConfig cfg;
    cfg.batch_size = batch;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.commitment = commitment;
    cfg.codebook = codebook;
    cfg.dropout = dropout;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

SidScheme PipelineConfig::sid_scheme() const { return SidScheme(levels, static_cast<std::uint32_t>(ngram)); }

PipelineConfig parse_pipeline_config(std::string_view text, PipelineConfig base) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t line_start = pos;
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw FormatError("expected 'key = value'", line_start);
        try {
            base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const InvalidArgument& e) {
            throw FormatError(e.what(), line_start);
        }
    }
    return base;
}

PipelineConfig read_pipeline_config(const std::filesystem::path& path) {
    return parse_pipeline_config(io::read_file(path));
}

}  // namespace sidekit
