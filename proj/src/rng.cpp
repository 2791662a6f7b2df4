#include "qflair/rng.hpp"

#include <cmath>

namespace qflair {

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index) {
    // FNV-1a over the tag, then mix with root and index through splitmix64.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : tag) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(root ^ h) ^ splitmix64(index + 0x9e3779b97f4a7c15ULL));
}

double Rng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * M_PI * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
}

std::vector<std::uint32_t> Rng::sample_without_replacement(std::uint32_t n, std::uint32_t k) {
    if (k > n) k = n;
    std::vector<std::uint32_t> idx(n);
    for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
    // partial Fisher-Yates: the first k slots are the sample
    for (std::uint32_t i = 0; i < k; ++i) {
        const std::uint64_t j = i + below(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace qflair
