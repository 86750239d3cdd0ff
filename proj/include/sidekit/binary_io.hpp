#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sidekit::io {

/// Little-endian byte sink.
class ByteWriter {
public:
    void bytes(std::string_view raw);
    void u32(std::uint32_t v);
    void f32(float v);
    void f32s(std::span<const float> values);

    const std::string& buffer() const noexcept { return buf_; }

private:
    std::string buf_;
};

/// Little-endian byte source over an in-memory buffer. Every failed read
/// throws FormatError carrying the offset at which the read started.
class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::string_view bytes(std::size_t n, std::string_view what);
    std::uint32_t u32(std::string_view what);
    void f32s(std::span<float> out, std::string_view what);

    std::uint64_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace sidekit::io
