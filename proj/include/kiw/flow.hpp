/// @file flow.hpp
/// @brief Stochastic flow integration with a co-propagated Jacobian.
///
/// Integrates d phi = b(t, phi) dt + sum_j xi_j(t, phi) o dB^j, phi_0(x) = x, either
/// by stochastic Heun (Stratonovich) or by Euler-Maruyama on the Ito-corrected
/// drift b^ = b + 1/2 sum_j (xi_j . grad) xi_j. The Jacobian J = D phi is the exact
/// derivative of the discrete step map, so J' = M J with M the step Jacobian.
#pragma once

#include "kiw/brownian.hpp"
#include "kiw/fields.hpp"
#include "kiw/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace kiw {

enum class Scheme { stratonovich_heun, ito_euler_corrected };

Scheme scheme_from_string(const std::string& s);
std::string to_string(Scheme s);

struct NoiseField {
    FieldJet field;  // vector field xi_j
    int channel = 0;  // driver channel of B^j
};

struct FlowModel {
    FieldJet drift;                 // vector field b
    std::vector<NoiseField> noise;  // xi_j with their channels
    Scheme scheme = Scheme::stratonovich_heun;

    [[nodiscard]] int dim() const { return drift.dim(); }
    /// Throws ConfigError on inconsistent dimensions or channels beyond the driver.
    void validate(int n_channels) const;
};

/// b^(t,x) = b + 1/2 sum_j xi_j^l d_l xi_j.
Vec ito_drift_correction(const FieldJet& b, const std::vector<FieldJet>& xis, double t, const Vec& x);

/// Result of one step of the scheme at a point.
struct StepResult {
    Vec x;  // new position
    Mat M;  // Jacobian of the step map at the old position
};

/// One step from (t, x) with per-noise increments dB (same order as model.noise).
StepResult flow_step(const FlowModel& model, double t, double dt, std::span<const double> dB, const Vec& x,
                     bool want_jacobian = true);

/// Variational update J' = M J for one step; returns the step result too.
StepResult propagate_jacobian(const FlowModel& model, double t, double dt, std::span<const double> dB,
                              const Vec& x, Mat& J);

/// Blow-up policy thresholds.
struct BlowUpPolicy {
    double max_state_norm = 1e10;
    double min_abs_det = 1e-8;
    double max_abs_det = 1e8;
    double max_excluded_fraction = 0.01;
};

/// Flow and Jacobian on the driver grid for a set of seed points and a range of paths.
class FlowSample {
public:
    FlowSample() = default;
    FlowSample(int dim, int path_begin, int path_count, int n_seeds, int steps, double dt, bool has_inverse);

    [[nodiscard]] int dim() const { return n_; }
    [[nodiscard]] int path_begin() const { return path_begin_; }
    [[nodiscard]] int path_count() const { return path_count_; }
    [[nodiscard]] int n_seeds() const { return n_seeds_; }
    [[nodiscard]] int steps() const { return steps_; }
    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] bool has_inverse() const { return has_inverse_; }

    /// Accessors take the global path index.
    [[nodiscard]] Vec point(int path, int seed, int step) const;
    [[nodiscard]] Mat jacobian(int path, int seed, int step) const;
    [[nodiscard]] Mat inverse_jacobian(int path, int seed, int step) const;
    [[nodiscard]] bool excluded(int path) const { return excluded_[static_cast<std::size_t>(path - path_begin_)] != 0; }
    [[nodiscard]] int n_excluded() const;

    void set(int path, int seed, int step, const Vec& x, const Mat& J, const Mat* Jinv);
    void mark_excluded(int path) { excluded_[static_cast<std::size_t>(path - path_begin_)] = 1; }

    /// Raw little-endian layout, see write_flow_sample.
    [[nodiscard]] const std::vector<double>& raw() const { return data_; }

private:
    [[nodiscard]] std::size_t offset(int path, int seed, int step) const;
    [[nodiscard]] int record_size() const { return n_ + n_ * n_ * (has_inverse_ ? 2 : 1); }

    int n_ = 0;
    int path_begin_ = 0;
    int path_count_ = 0;
    int n_seeds_ = 0;
    int steps_ = 0;
    double dt_ = 0.0;
    bool has_inverse_ = false;
    std::vector<double> data_;
    std::vector<std::uint8_t> excluded_;
};

struct FlowOptions {
    bool want_inverse = false;
    int path_begin = 0;
    int path_count = -1;  // -1: all paths from path_begin
    int workers = 1;
    BlowUpPolicy policy{};
};

/// Integrate the flow for every seed along each requested path. Paths that blow up are
/// marked excluded (their samples past the blow-up are left at the last finite state).
FlowSample integrate_flow(const FlowModel& model, const BrownianDriver& driver, const std::vector<Vec>& seeds,
                          const FlowOptions& options = {});

/// Throws NumericalError if the excluded fraction exceeds the policy limit.
void check_exclusions(const FlowSample& sample, const BlowUpPolicy& policy = {});

enum class InverseMethod { newton_exact, reversed_heun };

InverseMethod inverse_method_from_string(const std::string& s);

struct InverseFlow {
    Vec preimage;  // phi_t^{-1}(y)
    Mat jacobian;  // D(phi_t^{-1})(y)
};

/// Map y at grid step `step` back to time 0 along one path.
/// newton_exact inverts each forward step to roundoff (the exact inverse of the discrete
/// forward flow); reversed_heun integrates the time-reversed Heun scheme on the same
/// increments (Stratonovich scheme only).
InverseFlow inverse_flow(const FlowModel& model, const BrownianDriver& driver, int path, int step, const Vec& y,
                         InverseMethod method = InverseMethod::newton_exact);

/// Binary dump: 8-byte magic "KIWFLOW1", then little-endian uint64 header fields
/// n, L (steps), n_paths, n_seeds, seed, has_inverse, path_begin, then float64 dt; then n_paths uint64
/// excluded flags; then float64 records ordered [path][seed][step], each record
/// phi (n), J (n*n row-major), and Jinv (n*n row-major) when has_inverse.
void write_flow_sample(const std::string& file, const FlowSample& sample, std::uint64_t seed);
FlowSample read_flow_sample(const std::string& file, std::uint64_t* seed = nullptr);

}  // namespace kiw
