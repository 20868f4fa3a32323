#include "fastbat/rng.hpp"

#include <cmath>

namespace fastbat {

uint64_t Rng::splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t Rng::next_u64() {
    state_ = splitmix(state_);
    return state_;
}

Rng Rng::stream(std::string_view label, uint64_t index) const {
    // FNV-1a over the label, then mix in the index and parent state.
    uint64_t h = 0xcbf29ce484222325ull;
    for (char ch : label) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ull;
    }
    Rng child(0);
    child.state_ = splitmix(splitmix(state_ ^ h) ^ (index + 0x1234567890abcdefull));
    return child;
}

double Rng::next_gauss() {
    if (have_gauss_) {
        have_gauss_ = false;
        return cached_gauss_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 1e-300) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    cached_gauss_ = r * std::sin(t);
    have_gauss_ = true;
    return r * std::cos(t);
}

} // namespace fastbat
