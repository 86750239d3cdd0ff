#include "sidekit/sid_codec.hpp"

#include <charconv>
#include <sstream>

#include "sidekit/binary_io.hpp"
#include "sidekit/error.hpp"

namespace sidekit {

namespace {

std::string scheme_string(const SidScheme& s) {
    return "base " + std::to_string(s.base()) + ", ngram " + std::to_string(s.ngram());
}

}  // namespace

SidScheme::SidScheme(std::uint32_t base, std::uint32_t ngram, std::uint32_t offset)
    : base_(base), ngram_(ngram), offset_(offset), max_(0) {
    if (base < 2) throw InvalidArgument("SID base must be at least 2, got " + std::to_string(base));
    if (ngram < 1) throw InvalidArgument("SID n-gram length must be at least 1");
    if (offset >= base) {
        throw InvalidArgument("SID centering offset " + std::to_string(offset) + " must be below the base " +
                              std::to_string(base));
    }
    // L^(n+1) must not exceed 2^64.
    unsigned __int128 power = 1;
    const unsigned __int128 limit = static_cast<unsigned __int128>(1) << 64;
    for (std::uint32_t k = 0; k <= ngram; ++k) {
        power *= base;
        if (power > limit) {
            throw InvalidArgument("SID scheme " + scheme_string(*this) + " overflows 64 bits");
        }
    }
    max_ = static_cast<std::uint64_t>(power - base);
}

SemanticId pack(const SidScheme& scheme, std::span<const int> digits) {
    if (digits.size() != scheme.ngram()) {
        throw ShapeError("pack expects " + std::to_string(scheme.ngram()) + " digits, got " +
                         std::to_string(digits.size()));
    }
    std::uint64_t s = 0;
    std::uint64_t weight = scheme.base();
    for (std::size_t k = 0; k < digits.size(); ++k) {
        const int c = digits[k];
        if (c < scheme.min_digit() || c > scheme.max_digit()) {
            throw InvalidArgument("digit " + std::to_string(c) + " at position " + std::to_string(k) +
                                  " outside [" + std::to_string(scheme.min_digit()) + ", " +
                                  std::to_string(scheme.max_digit()) + "]");
        }
        s += weight * static_cast<std::uint64_t>(c + static_cast<int>(scheme.offset()));
        if (k + 1 < digits.size()) weight *= scheme.base();
    }
    return {s};
}

bool is_valid(const SidScheme& scheme, SemanticId sid) noexcept {
    return sid.value <= scheme.max_value() && sid.value % scheme.base() == 0;
}

std::vector<int> unpack(const SidScheme& scheme, SemanticId sid) {
    if (sid.value > scheme.max_value()) {
        throw InvalidArgument("SID " + std::to_string(sid.value) + " exceeds the maximum " +
                              std::to_string(scheme.max_value()) + " for " + scheme_string(scheme));
    }
    if (sid.value % scheme.base() != 0) {
        throw InvalidArgument("SID " + std::to_string(sid.value) + " is not a multiple of the base " +
                              std::to_string(scheme.base()));
    }
    std::vector<int> digits(scheme.ngram());
    std::uint64_t rest = sid.value / scheme.base();
    for (auto& d : digits) {
        d = static_cast<int>(rest % scheme.base()) - static_cast<int>(scheme.offset());
        rest /= scheme.base();
    }
    return digits;
}

std::vector<SemanticId> pack_codeword(const SidScheme& scheme, const quant::CodewordVector& code) {
    if (code.base != scheme.base()) {
        throw InvalidArgument("codeword base " + std::to_string(code.base) + " does not match SID base " +
                              std::to_string(scheme.base()));
    }
    const std::size_t n = scheme.ngram();
    std::vector<SemanticId> out(scheme.grams_for(code.size()));
    std::vector<int> digits(n);
    for (std::size_t g = 0; g < out.size(); ++g) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = g * n + k;
            if (i >= code.size()) {
                digits[k] = 0;
                continue;
            }
            if (code.levels[i] >= code.base) {
                throw InvalidArgument("codeword level " + std::to_string(code.levels[i]) + " at position " +
                                      std::to_string(i) + " is not below base " + std::to_string(code.base));
            }
            digits[k] = static_cast<int>(code.levels[i]) - static_cast<int>(scheme.offset());
        }
        out[g] = pack(scheme, digits);
    }
    return out;
}

quant::CodewordVector unpack_codeword(const SidScheme& scheme, std::span<const SemanticId> sids,
                                      std::size_t code_length) {
    if (sids.size() != scheme.grams_for(code_length)) {
        throw ShapeError("a code of length " + std::to_string(code_length) + " needs " +
                         std::to_string(scheme.grams_for(code_length)) + " SIDs, got " +
                         std::to_string(sids.size()));
    }
    quant::CodewordVector code{std::vector<std::uint32_t>(code_length), scheme.base()};
    for (std::size_t g = 0; g < sids.size(); ++g) {
        const auto digits = unpack(scheme, sids[g]);
        for (std::size_t k = 0; k < digits.size(); ++k) {
            const std::size_t i = g * scheme.ngram() + k;
            if (i < code_length) code.levels[i] = static_cast<std::uint32_t>(digits[k] + static_cast<int>(scheme.offset()));
        }
    }
    return code;
}

std::vector<float> side_embed(const SidScheme& scheme, std::span<const SemanticId> sids) {
    std::vector<float> out;
    out.reserve(sids.size() * scheme.ngram());
    for (const SemanticId sid : sids) {
        for (const int d : unpack(scheme, sid)) out.push_back(static_cast<float>(d));
    }
    return out;
}

std::uint64_t sid_hash(SemanticId sid, std::uint64_t table_size) {
    if (table_size == 0) throw InvalidArgument("hash table size must be at least 1");
    return sid.value % table_size;
}

std::string format_sid_file(const SidFile& file) {
    std::ostringstream out;
    out << "#SIDv1 base=" << file.scheme.base() << " ngram=" << file.scheme.ngram() << " grams=" << file.grams;
    if (file.scheme.offset() != 1) out << " offset=" << file.scheme.offset();
    out << '\n';
    for (std::size_t r = 0; r < file.records.size(); ++r) {
        const auto& rec = file.records[r];
        if (rec.size() != file.grams) {
            throw ShapeError("record " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                             " SIDs, expected " + std::to_string(file.grams));
        }
        for (std::size_t i = 0; i < rec.size(); ++i) {
            if (i) out << ' ';
            out << rec[i].value;
        }
        out << '\n';
    }
    return out.str();
}

namespace {

std::uint64_t parse_u64(std::string_view token, std::uint64_t offset, const char* what) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || end != token.data() + token.size()) {
        throw FormatError(std::string("invalid ") + what + " '" + std::string(token) + "'", offset);
    }
    return v;
}

/// Splits on single spaces, reporting each token's byte offset relative to the line.
std::vector<std::pair<std::string_view, std::size_t>> tokens(std::string_view line) {
    std::vector<std::pair<std::string_view, std::size_t>> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ') ++i;
        if (i > start) out.emplace_back(line.substr(start, i - start), start);
    }
    return out;
}

}  // namespace

SidFile parse_sid_file(const std::string& text) {
    std::string_view rest(text);
    std::size_t pos = 0;
    std::size_t line_start = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= text.size()) return false;
        const std::size_t nl = text.find('\n', pos);
        const std::size_t end = nl == std::string::npos ? text.size() : nl;
        line_start = pos;
        line = rest.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        return true;
    };

    std::string_view line;
    if (!next_line(line) || !line.starts_with("#SIDv1")) throw FormatError("missing '#SIDv1' header", 0);
    std::uint64_t base = 0, ngram = 0, grams = 0, offset = 1;
    bool have_base = false, have_ngram = false, have_grams = false;
    for (const auto& [tok, at] : tokens(line.substr(6))) {
        const std::size_t where = 6 + at;
        const std::size_t eq = tok.find('=');
        if (eq == std::string_view::npos) throw FormatError("malformed header field '" + std::string(tok) + "'", where);
        const auto key = tok.substr(0, eq);
        const auto value = parse_u64(tok.substr(eq + 1), where + eq + 1, "header value");
        if (key == "base") {
            base = value;
            have_base = true;
        } else if (key == "ngram") {
            ngram = value;
            have_ngram = true;
        } else if (key == "grams") {
            grams = value;
            have_grams = true;
        } else if (key == "offset") {
            offset = value;
        } else {
            throw FormatError("unknown header field '" + std::string(key) + "'", where);
        }
    }
    if (!have_base || !have_ngram || !have_grams) throw FormatError("header needs base, ngram and grams", 0);
    if (base > UINT32_MAX || ngram > UINT32_MAX || offset > UINT32_MAX) throw FormatError("header value too large", 0);

    SidFile file;
    try {
        file.scheme = SidScheme(static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(ngram),
                                static_cast<std::uint32_t>(offset));
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what(), 0);
    }
    file.grams = static_cast<std::size_t>(grams);
    while (next_line(line)) {
        if (line.empty()) continue;
        std::vector<SemanticId> rec;
        for (const auto& [tok, at] : tokens(line)) {
            const SemanticId sid{parse_u64(tok, line_start + at, "SID")};
            if (!is_valid(file.scheme, sid)) {
                throw FormatError("SID " + std::string(tok) + " is not valid for the header scheme", line_start + at);
            }
            rec.push_back(sid);
        }
        if (rec.size() != file.grams) {
            throw FormatError("record " + std::to_string(file.records.size()) + " has " +
                                  std::to_string(rec.size()) + " SIDs, expected " + std::to_string(file.grams),
                              line_start);
        }
        file.records.push_back(std::move(rec));
    }
    return file;
}

void write_sid_file(const std::filesystem::path& path, const SidFile& file) {
    io::write_file_atomic(path, format_sid_file(file));
}

SidFile read_sid_file(const std::filesystem::path& path) { return parse_sid_file(io::read_file(path)); }

SidFile select_grams(const SidFile& file, std::span<const std::size_t> positions) {
    if (positions.empty()) throw InvalidArgument("select_grams: no gram positions given");
    for (std::size_t p : positions) {
        if (p >= file.grams) {
            throw InvalidArgument("gram position " + std::to_string(p) + " out of range (records have " +
                                  std::to_string(file.grams) + ")");
        }
    }
    SidFile out{file.scheme, positions.size(), {}};
    out.records.reserve(file.records.size());
    for (const auto& rec : file.records) {
        std::vector<SemanticId> kept;
        kept.reserve(positions.size());
        for (std::size_t p : positions) kept.push_back(rec[p]);
        out.records.push_back(std::move(kept));
    }
    return out;
}

}  // namespace sidekit
