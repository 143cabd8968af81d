#include "screenorder/rng.hpp"

#include <limits>

namespace screenorder {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view component) {
    // FNV-1a over the component name, then mixed with the run seed.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : component) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(run_seed ^ splitmix64(h));
}

std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    if (bound <= 1) {
        return 0;
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return draw % bound;
}

double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace screenorder
