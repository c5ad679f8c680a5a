/// @file brownian.hpp
/// @brief Deterministic, bridge-refinable Brownian increments on a uniform grid.
///
/// Channels are the underlying independent Brownian motions. Noise sources in
/// the flow (B^j) and in a semimartingale form (W^i, N^{ij}) name a channel id;
/// two sources naming the same id are the same Brownian motion, distinct ids
/// are independent.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace kiw {

class BrownianDriver {
public:
    BrownianDriver() = default;

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] double horizon() const { return T_; }
    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] int steps() const { return steps_; }
    [[nodiscard]] int n_paths() const { return n_paths_; }
    [[nodiscard]] int n_channels() const { return n_channels_; }
    /// Number of bridge refinements applied since construction.
    [[nodiscard]] int level() const { return level_; }

    [[nodiscard]] double time(int step) const { return step * dt_; }
    [[nodiscard]] double increment(int path, int channel, int step) const {
        return increments_[index(path, channel) + static_cast<std::size_t>(step)];
    }
    [[nodiscard]] std::span<const double> increments(int path, int channel) const {
        return {increments_.data() + index(path, channel), static_cast<std::size_t>(steps_)};
    }
    /// W(t_step) for the given path and channel (W(0) = 0).
    [[nodiscard]] double value(int path, int channel, int step) const;
    /// Grid index of time t; throws if t is not on the grid.
    [[nodiscard]] int step_of(double t) const;

    friend BrownianDriver make_driver(std::uint64_t, double, double, int, int);
    friend BrownianDriver refine(const BrownianDriver&);

private:
    [[nodiscard]] std::size_t index(int path, int channel) const {
        return (static_cast<std::size_t>(path) * n_channels_ + static_cast<std::size_t>(channel)) * steps_;
    }

    std::uint64_t seed_ = 0;
    double T_ = 0.0;
    double dt_ = 0.0;
    int steps_ = 0;
    int n_paths_ = 0;
    int n_channels_ = 0;
    int level_ = 0;
    std::vector<double> increments_;
};

/// Increments Normal(0, dt), reproducible from (seed, path, channel).
/// Throws ConfigError if dt does not divide T or n_paths < 1.
BrownianDriver make_driver(std::uint64_t seed, double T, double dt, int n_paths, int n_channels);

/// Halve the step by inserting Brownian-bridge midpoints. Every coarse increment
/// equals the sum of its two fine increments.
BrownianDriver refine(const BrownianDriver& driver);

/// Counter-based stream seed derived from (seed, path, channel, level).
std::uint64_t stream_seed(std::uint64_t seed, int path, int channel, int level);

}  // namespace kiw
