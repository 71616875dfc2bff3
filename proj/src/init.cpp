#include "ccoov/init.hpp"

#include <cmath>
#include <string>

namespace ccoov {

ad::Tensor kaiming_init(const ad::Shape& shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) throw Error("kaiming_init: fan_in must be >= 1");
    ad::Tensor t(shape);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& v : t.values()) v = normal(rng);
    return t;
}

std::uint64_t stable_hash(std::string_view text, std::uint64_t seed) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::uint64_t z = h ^ (seed + 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace ccoov
