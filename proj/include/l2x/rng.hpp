#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace l2x {

using Rng = std::mt19937_64;

// Seed for a named substream ("data", "init", "noise", ...) of a root seed.
// Substreams are independent of each other and of the order they are created in.
std::uint64_t substream_seed(std::uint64_t root, std::string_view name);

inline Rng make_rng(std::uint64_t root, std::string_view name) {
  return Rng(substream_seed(root, name));
}

}  // namespace l2x
