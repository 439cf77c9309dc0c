#pragma once

#include <cstdint>
#include <random>

namespace laplab::detail {

// mt19937_64 output is standardized; distributions are not. Map raw draws to
// [0,1) the canonical way so streams are identical across toolchains.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double symmetric_uniform(std::mt19937_64& rng) { return 2.0 * unit_uniform(rng) - 1.0; }

}  // namespace laplab::detail
