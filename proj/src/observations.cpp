#include "cdanse/observations.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace cdanse {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

GaussianSampler::GaussianSampler(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t GaussianSampler::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double GaussianSampler::next_uniform() {
    // 53-bit mantissa, shifted into (0, 1]
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double GaussianSampler::next() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

CellValues sample_pointwise(const Field& reference, std::span<const int> obs_vertices) {
    CellValues out;
    out.reserve(obs_vertices.size());
    for (int v : obs_vertices) out.push_back(velocity_at_vertex(reference, v));
    return out;
}

CellValues add_gaussian_noise(const CellValues& clean, double snr, double u_max,
                              std::uint64_t seed) {
    if (snr < 0.0) throw std::invalid_argument("add_gaussian_noise: snr must be nonnegative");
    if (u_max <= 0.0) throw std::invalid_argument("add_gaussian_noise: u_max must be positive");
    if (snr == 0.0) return clean;

    const double sigma = snr * u_max;
    GaussianSampler rng(seed);
    CellValues out;
    out.reserve(clean.size());
    for (const Vec2 v : clean)
        out.push_back({v.x + sigma * rng.next(), v.y + sigma * rng.next()});
    return out;
}

double noise_interpolant_norm(const ObservationSet& obs) {
    const double cell_area = obs.grid.H * obs.grid.H;
    double acc = 0.0;
    for (std::size_t i = 0; i < obs.clean_values.size(); ++i) {
        const double ex = obs.noisy_values[i].x - obs.clean_values[i].x;
        const double ey = obs.noisy_values[i].y - obs.clean_values[i].y;
        acc += cell_area * (ex * ex + ey * ey);
    }
    return std::sqrt(acc);
}

ObservationSet make_observation_set(const Field& reference, const CoarseGrid& grid,
                                    std::span<const int> obs_vertices, double snr,
                                    double u_max, std::uint64_t seed) {
    ObservationSet obs;
    obs.grid = grid;
    obs.obs_vertices.assign(obs_vertices.begin(), obs_vertices.end());
    obs.clean_values = sample_pointwise(reference, obs_vertices);
    obs.noisy_values = add_gaussian_noise(obs.clean_values, snr, u_max, seed);
    obs.snr = snr;
    obs.seed = seed;
    obs.u_max = u_max;
    return obs;
}

std::string observation_set_to_json(const ObservationSet& obs) {
    nlohmann::json j;
    j["N"] = obs.grid.N;
    j["snr"] = obs.snr;
    j["seed"] = obs.seed;
    j["u_max"] = obs.u_max;
    j["vertex_ids"] = obs.obs_vertices;
    auto values = [](const CellValues& v) {
        std::vector<std::array<double, 2>> rows;
        rows.reserve(v.size());
        for (const Vec2 p : v) rows.push_back({p.x, p.y});
        return rows;
    };
    j["clean"] = values(obs.clean_values);
    j["noisy"] = values(obs.noisy_values);
    return j.dump(2);
}

ObservationSet observation_set_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ObservationSet obs;
    obs.grid = CoarseGrid::make(j.at("N").get<int>());
    obs.snr = j.at("snr").get<double>();
    obs.seed = j.at("seed").get<std::uint64_t>();
    obs.u_max = j.at("u_max").get<double>();
    obs.obs_vertices = j.at("vertex_ids").get<std::vector<int>>();
    auto values = [](const nlohmann::json& arr) {
        CellValues v;
        v.reserve(arr.size());
        for (const auto& row : arr) v.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
        return v;
    };
    obs.clean_values = values(j.at("clean"));
    obs.noisy_values = values(j.at("noisy"));
    return obs;
}

}  // namespace cdanse
