#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "sidekit/graph.hpp"

namespace sidekit::nn {

/// Checkpoint layout (all integers u32 little-endian):
///   "SIDK" | version | entry count | entries...
///   entry = name length | UTF-8 name | rows | cols | rows*cols f32 LE
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ParamSet& params);
ParamSet decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace sidekit::nn
