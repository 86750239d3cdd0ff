#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sidekit/fusion.hpp"
#include "sidekit/sid_codec.hpp"

namespace sidekit {

enum class PipelineQuantizer : std::uint8_t { KMeans, Residual, Product, Fsq, Dpca };

std::string_view pipeline_quantizer_name(PipelineQuantizer kind);
PipelineQuantizer parse_pipeline_quantizer(std::string_view text);

/// Settings shared by the train/encode/sweep pipelines.
///
/// `levels` is L (FSQ levels, or centroids per k-means layer), `depth` is D,
/// `groups` is P and `latent` is the fused width m.
struct PipelineConfig {
    PipelineQuantizer quantizer = PipelineQuantizer::Dpca;
    std::uint32_t levels = 3;
    std::size_t depth = 5;
    std::size_t groups = 3;
    std::size_t latent = 15;
    std::size_t ngram = 5;

    std::vector<std::size_t> hidden{256, 256};
    std::vector<std::size_t> trunk{256};
    std::vector<std::size_t> head{256};

    std::size_t epochs = 20;
    std::size_t batch = 256;
    float lr = 1e-3f;
    float dropout = 0.0f;
    float commitment = 0.25f;
    float codebook = 1.0f;
    std::size_t kmeans_iters = 25;
    std::uint64_t seed = 0;

    /// Keys assigned through set(), in any source.
    std::set<std::string> explicit_keys;

    /// Assigns one key from its textual value. Throws InvalidArgument for an
    /// unknown key or a malformed value.
    void set(std::string_view key, std::string_view value);
    bool is_set(std::string_view key) const { return explicit_keys.count(std::string(key)) != 0; }

    /// Rejects parameter combinations that do not apply to the quantizer kind.
    void validate() const;

    bool uses_fusion() const noexcept {
        return quantizer == PipelineQuantizer::Fsq || quantizer == PipelineQuantizer::Dpca;
    }
    /// Codeword length per item: m for FSQ, D*P for DPCA and k-means stacks.
    std::size_t code_length() const;
    /// Bits carried by one code.
    double bits() const;

    FusionSpec fusion_spec(std::vector<std::size_t> signal_dims) const;
    TrainConfig train_config() const;
    SidScheme sid_scheme() const;
};

/// `key = value` lines; `#` starts a comment. Errors carry the byte offset of the line.
PipelineConfig parse_pipeline_config(std::string_view text, PipelineConfig base = {});
PipelineConfig read_pipeline_config(const std::filesystem::path& path);

std::vector<std::size_t> parse_size_list(std::string_view text);

}  // namespace sidekit
