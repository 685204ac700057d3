#include "flowlab/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flowlab {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, rng_stream stream) {
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
}

namespace {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

/// 53-bit uniform from two words, strictly inside (0,1] so log() is safe.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(hi) << 21) | (lo >> 11);
    return (static_cast<double>(bits) + 1.0) * 0x1p-53;
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::uint64_t key) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(0xD2511F53u, counter[0], hi0, lo0);
        mulhilo(0xCD9E8D57u, counter[2], hi1, lo1);
        counter = {hi1 ^ counter[1] ^ k0, lo1, hi0 ^ counter[3] ^ k1, lo0};
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
    }
    return counter;
}

double uniform01(std::uint64_t key, std::uint32_t row, std::uint32_t step,
                 std::uint32_t draw, std::uint32_t block) {
    const auto words = philox4x32({row, step, draw, block}, key);
    return to_unit(words[0], words[1]);
}

std::pair<double, double> gaussian_pair(std::uint64_t key, std::uint32_t row,
                                        std::uint32_t step, std::uint32_t draw,
                                        std::uint32_t block) {
    const auto words = philox4x32({row, step, draw, block}, key);
    const double u1 = to_unit(words[0], words[1]);
    const double u2 = to_unit(words[2], words[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

Eigen::MatrixXd standard_normal_matrix(std::uint64_t key, int n, int d,
                                       std::uint32_t step, std::uint32_t draw) {
    if (n < 0 || d <= 0)
        throw std::invalid_argument("standard_normal_matrix: need n >= 0, d > 0");
    Eigen::MatrixXd out(n, d);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < d; c += 2) {
            const auto [z0, z1] = gaussian_pair(
                key, static_cast<std::uint32_t>(r), step, draw,
                static_cast<std::uint32_t>(c / 2));
            out(r, c) = z0;
            if (c + 1 < d) out(r, c + 1) = z1;
        }
    }
    return out;
}

NoiseDraw draw_noise(std::uint64_t seed, int timestep_index,
                     int realization_index, int n, int d) {
    if (timestep_index < 0 || realization_index < 0)
        throw std::invalid_argument("draw_noise: indices must be nonnegative");
    NoiseDraw nd;
    nd.timestep_index = timestep_index;
    nd.realization_index = realization_index;
    nd.values = standard_normal_matrix(
        derive_key(seed, rng_stream::edit_noise), n, d,
        static_cast<std::uint32_t>(timestep_index),
        static_cast<std::uint32_t>(realization_index));
    return nd;
}

} // namespace flowlab
