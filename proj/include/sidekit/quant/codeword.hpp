#pragma once

#include <cstdint>
#include <vector>

namespace sidekit::quant {

/// Per-dimension level indices in [0, base). Ternary codes {-1, 0, +1} are
/// stored shifted as {0, 1, 2}.
struct CodewordVector {
    std::vector<std::uint32_t> levels;
    std::uint32_t base = 3;

    std::size_t size() const noexcept { return levels.size(); }
    friend bool operator==(const CodewordVector&, const CodewordVector&) = default;
};

}  // namespace sidekit::quant
