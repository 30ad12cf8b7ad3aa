#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "svbsc/rng.hpp"

namespace svbsc {

using Bit = std::uint8_t;  // value 0 or 1
using BitVec = std::vector<Bit>;

// Third "no information" state used at the decoder input after puncturing.
// Never appears on the wire; the wire form of the non-null states is binary.
enum class NullableBit : std::uint8_t { Zero = 0, One = 1, Null = 2 };

using NullableVec = std::vector<NullableBit>;

inline NullableBit to_nullable(Bit b) {
    return b ? NullableBit::One : NullableBit::Zero;
}

inline BitVec random_bits(std::size_t n, Rng& rng) {
    BitVec v(n);
    for (auto& b : v) b = rng.bit();
    return v;
}

inline std::size_t hamming_distance(const BitVec& a, const BitVec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

}  // namespace svbsc
