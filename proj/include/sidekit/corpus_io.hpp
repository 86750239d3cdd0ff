#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "sidekit/tensor.hpp"

namespace sidekit::io {

/// Embedding corpus file (little-endian):
///   "SIDE" | u32 version | u32 rows | u32 dim | rows*dim f32
inline constexpr std::uint32_t kCorpusVersion = 1;

std::string format_corpus(const Tensor2& corpus);
Tensor2 parse_corpus(std::string_view bytes);

void corpus_write(const std::filesystem::path& path, const Tensor2& corpus);
Tensor2 corpus_read(const std::filesystem::path& path);

}  // namespace sidekit::io
