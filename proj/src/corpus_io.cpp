#include "sidekit/corpus_io.hpp"

#include <limits>

#include "sidekit/binary_io.hpp"
#include "sidekit/error.hpp"

namespace sidekit::io {

std::string format_corpus(const Tensor2& corpus) {
    if (corpus.rows() > std::numeric_limits<std::uint32_t>::max() ||
        corpus.cols() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("corpus " + corpus.shape_string() + " is too large for the file format");
    }
    ByteWriter w;
    w.bytes("SIDE");
    w.u32(kCorpusVersion);
    w.u32(static_cast<std::uint32_t>(corpus.rows()));
    w.u32(static_cast<std::uint32_t>(corpus.cols()));
    w.f32s(corpus.values());
    return w.buffer();
}

Tensor2 parse_corpus(std::string_view bytes) {
    ByteReader r(bytes);
    if (r.bytes(4, "magic") != "SIDE") throw FormatError("bad corpus magic (expected 'SIDE')", 0);
    const std::uint64_t version_at = r.offset();
    const std::uint32_t version = r.u32("version");
    if (version != kCorpusVersion) throw FormatError("unsupported corpus version " + std::to_string(version), version_at);
    const std::uint32_t rows = r.u32("rows");
    const std::uint32_t dim = r.u32("dim");
    const std::uint64_t payload = static_cast<std::uint64_t>(rows) * dim * 4;
    if (payload != r.remaining()) {
        throw FormatError("corpus payload: expected " + std::to_string(payload) + " bytes, found " +
                              std::to_string(r.remaining()),
                          r.offset());
    }
    Tensor2 out(rows, dim);
    r.f32s(out.values(), "corpus payload");
    return out;
}

void corpus_write(const std::filesystem::path& path, const Tensor2& corpus) {
    write_file_atomic(path, format_corpus(corpus));
}

Tensor2 corpus_read(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

}  // namespace sidekit::io
