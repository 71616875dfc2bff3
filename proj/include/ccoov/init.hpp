#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ccoov/autodiff.hpp"

namespace ccoov {

using Rng = std::mt19937_64;

// I.i.d. normal(0, sqrt(2 / fan_in)) weights (He et al. "Kaiming normal").
ad::Tensor kaiming_init(const ad::Shape& shape, std::size_t fan_in, Rng& rng);

// Stable 64-bit hash of a string mixed with a seed (FNV-1a followed by splitmix64).
std::uint64_t stable_hash(std::string_view text, std::uint64_t seed);

}  // namespace ccoov
