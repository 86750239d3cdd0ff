#include "sidekit/checkpoint.hpp"

#include "sidekit/binary_io.hpp"
#include "sidekit/error.hpp"

namespace sidekit::nn {

std::string encode_checkpoint(const ParamSet& params) {
    io::ByteWriter w;
    w.bytes("SIDK");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params.name(i);
        const Tensor2& t = params.value(i);
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.u32(static_cast<std::uint32_t>(t.rows()));
        w.u32(static_cast<std::uint32_t>(t.cols()));
        w.f32s(t.values());
    }
    return w.buffer();
}

ParamSet decode_checkpoint(std::string_view bytes) {
    io::ByteReader r(bytes);
    if (r.bytes(4, "magic") != "SIDK") throw FormatError("bad checkpoint magic", 0);
    const std::uint64_t version_at = r.offset();
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
    }
    const std::uint32_t count = r.u32("entry count");
    ParamSet params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32("name length");
        std::string name(r.bytes(name_len, "parameter name"));
        const std::uint32_t rows = r.u32("rows");
        const std::uint32_t cols = r.u32("cols");
        const std::uint64_t payload = static_cast<std::uint64_t>(rows) * cols * 4;
        if (payload > r.remaining()) {
            throw FormatError("truncated payload for '" + name + "': expected " +
                                  std::to_string(payload) + " bytes, found " +
                                  std::to_string(r.remaining()),
                              r.offset());
        }
        Tensor2 t(rows, cols);
        r.f32s(t.values(), "parameter payload");
        const std::uint64_t at = r.offset();
        try {
            params.add(std::move(name), std::move(t));
        } catch (const InvalidArgument& e) {
            throw FormatError(e.what(), at);
        }
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.offset());
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
    io::write_file_atomic(path, encode_checkpoint(params));
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path));
}

}  // namespace sidekit::nn
