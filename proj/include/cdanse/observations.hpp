#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdanse/fem.hpp"
#include "cdanse/mesh.hpp"

namespace cdanse {

/// Deterministic, platform-independent normal sampler: xoshiro256++ seeded
/// through splitmix64, feeding the Box-Muller transform. The algorithm is
/// fixed so stored seeds reproduce noise arrays bit-for-bit everywhere.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed);

    double next();  // standard normal

private:
    std::uint64_t next_u64();
    double next_uniform();  // in (0, 1]

    std::uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct ObservationSet {
    CoarseGrid grid;
    std::vector<int> obs_vertices;
    CellValues clean_values;
    CellValues noisy_values;
    double snr = 0.0;
    std::uint64_t seed = 0;
    double u_max = 1.0;
};

/// Velocity components of the reference at each observation vertex.
CellValues sample_pointwise(const Field& reference, std::span<const int> obs_vertices);

/// Adds iid N(0, (snr * u_max)^2) draws to every component. snr = 0 returns
/// the input unchanged (no RNG draws).
CellValues add_gaussian_noise(const CellValues& clean, double snr, double u_max,
                              std::uint64_t seed);

/// Piecewise-constant L2 norm of the noise interpolant:
/// (sum_cells |cell| |noisy - clean|^2)^(1/2).
double noise_interpolant_norm(const ObservationSet& obs);

ObservationSet make_observation_set(const Field& reference, const CoarseGrid& grid,
                                    std::span<const int> obs_vertices, double snr,
                                    double u_max, std::uint64_t seed);

std::string observation_set_to_json(const ObservationSet& obs);
ObservationSet observation_set_from_json(const std::string& text);

}  // namespace cdanse
