#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sidekit/quant/codeword.hpp"

namespace sidekit {

/// Radix, n-gram length and centering offset of a Semantic ID.
///
/// An n-gram of centered digits c_1..c_n packs to s = sum_k L^k (offset + c_k)
/// with k starting at 1, so every SID is a multiple of L and s / L is the
/// plain base-L value. Centered digits range over [-offset, L - 1 - offset].
class SidScheme {
public:
    explicit SidScheme(std::uint32_t base = 3, std::uint32_t ngram = 3, std::uint32_t offset = 1);

    std::uint32_t base() const noexcept { return base_; }
    std::uint32_t ngram() const noexcept { return ngram_; }
    std::uint32_t offset() const noexcept { return offset_; }
    int min_digit() const noexcept { return -static_cast<int>(offset_); }
    int max_digit() const noexcept { return static_cast<int>(base_ - 1 - offset_); }
    /// Largest valid SID: L^(n+1) - L.
    std::uint64_t max_value() const noexcept { return max_; }
    /// Number of distinct SIDs: L^n.
    std::uint64_t cardinality() const noexcept { return max_ / base_ + 1; }
    /// SIDs needed for a code of `code_length` digits.
    std::size_t grams_for(std::size_t code_length) const noexcept { return (code_length + ngram_ - 1) / ngram_; }

    friend bool operator==(const SidScheme&, const SidScheme&) = default;

private:
    std::uint32_t base_;
    std::uint32_t ngram_;
    std::uint32_t offset_;
    std::uint64_t max_;
};

struct SemanticId {
    std::uint64_t value = 0;
    friend bool operator==(const SemanticId&, const SemanticId&) = default;
};

SemanticId pack(const SidScheme& scheme, std::span<const int> digits);
std::vector<int> unpack(const SidScheme& scheme, SemanticId sid);
bool is_valid(const SidScheme& scheme, SemanticId sid) noexcept;

/// Splits a code into consecutive n-grams; the last gram is padded with the
/// centered zero digit.
std::vector<SemanticId> pack_codeword(const SidScheme& scheme, const quant::CodewordVector& code);
quant::CodewordVector unpack_codeword(const SidScheme& scheme, std::span<const SemanticId> sids,
                                      std::size_t code_length);

/// Table-free embedding: the centered digits of every SID as floats,
/// concatenated. Length is sids.size() * n.
std::vector<float> side_embed(const SidScheme& scheme, std::span<const SemanticId> sids);

/// Modulo hashing into a table of `table_size` rows.
std::uint64_t sid_hash(SemanticId sid, std::uint64_t table_size);

/// Newline-delimited SID records, `grams` SIDs per record.
struct SidFile {
    SidScheme scheme;
    std::size_t grams = 0;
    std::vector<std::vector<SemanticId>> records;
};

/// Keeps only the listed gram positions of every record, in the given order.
/// Lets SIDE consume a subset of the grams (e.g. the first one only).
SidFile select_grams(const SidFile& file, std::span<const std::size_t> positions);

std::string format_sid_file(const SidFile& file);
SidFile parse_sid_file(const std::string& text);
void write_sid_file(const std::filesystem::path& path, const SidFile& file);
SidFile read_sid_file(const std::filesystem::path& path);

}  // namespace sidekit
