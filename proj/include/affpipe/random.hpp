#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace affpipe {

// Seed for a named substream ("init", "shuffle", "synth", ...) of a run
// seed. Stable across platforms: FNV-1a over the name mixed with the seed
// through splitmix64.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
    return std::mt19937_64(substream_seed(seed, name));
}

}  // namespace affpipe
