#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include <Eigen/Dense>

namespace flowlab {

/// Purpose tags for deriving independent random substreams from one user
/// seed. Draws made under different streams are decorrelated even when the
/// numeric seed is identical.
enum class rng_stream : std::uint64_t {
    mixture_component = 1, ///< categorical component choice when sampling a mixture
    mixture_normal = 2,    ///< the Gaussian part of mixture sampling
    edit_noise = 3,        ///< per-timestep noise inside editing loops
    train_batch = 4,       ///< minibatch construction during training
    weight_init = 5,       ///< network weight initialization
    calibration = 6,       ///< resampling for the two-sample test threshold
    fresh_target = 7,      ///< held-out draws used as the comparison set in metrics
    scratch = 8,           ///< miscellaneous test/tool draws
};

/// SplitMix64 avalanche; used only for key derivation, never as the stream.
std::uint64_t splitmix64(std::uint64_t x);

/// Derive the Philox key for (seed, stream).
std::uint64_t derive_key(std::uint64_t seed, rng_stream stream);

/// Philox4x32-10 counter-based generator: maps (counter, key) to four random
/// 32-bit words. Pure function: the same inputs give the same words on every
/// call, which is what makes any draw replayable in isolation.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::uint64_t key);

/// Uniform in (0,1] built from 53 random bits (two words of one block).
double uniform01(std::uint64_t key, std::uint32_t row, std::uint32_t step,
                 std::uint32_t draw, std::uint32_t block);

/// Two independent N(0,1) variates from one Philox block via Box-Muller.
std::pair<double, double> gaussian_pair(std::uint64_t key, std::uint32_t row,
                                        std::uint32_t step, std::uint32_t draw,
                                        std::uint32_t block);

/// n x d matrix of iid standard normals. Row r is generated from counters
/// (r, step, draw, block) under `key`, so each row is reproducible on its own
/// and the result does not depend on how rows are scheduled.
Eigen::MatrixXd standard_normal_matrix(std::uint64_t key, int n, int d,
                                       std::uint32_t step, std::uint32_t draw);

/// One realization of the per-timestep noise used by editing loops:
/// `values` is n x d, tied to (seed, timestep_index, realization_index).
/// Regenerating with the same arguments reproduces the matrix bit for bit.
struct NoiseDraw {
    Eigen::MatrixXd values;
    int timestep_index = 0;
    int realization_index = 0;
};

NoiseDraw draw_noise(std::uint64_t seed, int timestep_index,
                     int realization_index, int n, int d);

} // namespace flowlab
