/// @file brownian.cpp
/// @brief Counter-based Brownian driver with bridge refinement.
#include "kiw/brownian.hpp"

#include "kiw/types.hpp"

#include <cmath>
#include <random>

namespace kiw {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, int path, int channel, int level) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(path));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(channel) << 32));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(level) << 48));
    return h;
}

double BrownianDriver::value(int path, int channel, int step) const {
    double w = 0.0;
    const auto inc = increments(path, channel);
    for (int s = 0; s < step; ++s) w += inc[s];
    return w;
}

int BrownianDriver::step_of(double t) const {
    const double r = t / dt_;
    const long s = std::lround(r);
    if (std::abs(r - static_cast<double>(s)) > 1e-9 || s < 0 || s > steps_)
        throw ConfigError("time is not on the driver grid");
    return static_cast<int>(s);
}

BrownianDriver make_driver(std::uint64_t seed, double T, double dt, int n_paths, int n_channels) {
    if (n_paths < 1) throw ConfigError("make_driver: n_paths must be >= 1");
    if (n_channels < 0) throw ConfigError("make_driver: negative channel count");
    if (!(T > 0.0) || !(dt > 0.0)) throw ConfigError("make_driver: T and dt must be positive");
    const double ratio = T / dt;
    const long steps = std::lround(ratio);
    if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("make_driver: dt must divide T");

    BrownianDriver d;
    d.seed_ = seed;
    d.T_ = T;
    d.dt_ = T / static_cast<double>(steps);
    d.steps_ = static_cast<int>(steps);
    d.n_paths_ = n_paths;
    d.n_channels_ = n_channels;
    d.level_ = 0;
    d.increments_.resize(static_cast<std::size_t>(n_paths) * n_channels * d.steps_);
    const double sd = std::sqrt(d.dt_);
    for (int p = 0; p < n_paths; ++p)
        for (int c = 0; c < n_channels; ++c) {
            std::mt19937_64 eng(stream_seed(seed, p, c, 0));
            std::normal_distribution<double> normal(0.0, 1.0);
            double* out = d.increments_.data() + d.index(p, c);
            for (int s = 0; s < d.steps_; ++s) out[s] = sd * normal(eng);
        }
    return d;
}

BrownianDriver refine(const BrownianDriver& coarse) {
    BrownianDriver d;
    d.seed_ = coarse.seed_;
    d.T_ = coarse.T_;
    d.dt_ = coarse.dt_ / 2.0;
    d.steps_ = coarse.steps_ * 2;
    d.n_paths_ = coarse.n_paths_;
    d.n_channels_ = coarse.n_channels_;
    d.level_ = coarse.level_ + 1;
    d.increments_.resize(coarse.increments_.size() * 2);
    // Bridge midpoint: W_mid = (W_l + W_r)/2 + sqrt(dt_coarse)/2 * Z, so the two halves are
    // dW/2 + s Z and dW/2 - s Z.
    const double s = std::sqrt(coarse.dt_) / 2.0;
    for (int p = 0; p < d.n_paths_; ++p)
        for (int c = 0; c < d.n_channels_; ++c) {
            std::mt19937_64 eng(stream_seed(d.seed_, p, c, d.level_));
            std::normal_distribution<double> normal(0.0, 1.0);
            const auto in = coarse.increments(p, c);
            double* out = d.increments_.data() + d.index(p, c);
            for (int k = 0; k < coarse.steps_; ++k) {
                const double half = in[k] / 2.0;
                const double dev = s * normal(eng);
                out[2 * k] = half + dev;
                // keeps the pair summing to the coarse increment in floating point
                out[2 * k + 1] = in[k] - out[2 * k];
            }
        }
    return d;
}

}  // namespace kiw
