#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace screenorder {

using Rng = std::mt19937_64;

/// Derives an independent per-component seed from a run seed, so that a
/// single --seed drives every random stream in a run.
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view component);

/// Unbiased draw from [0, bound). Implemented with rejection sampling rather
/// than std::uniform_int_distribution, whose output is library-specific.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
double uniform_unit(Rng& rng);

} // namespace screenorder
