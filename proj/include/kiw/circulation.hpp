/// @file circulation.hpp
/// @brief Material loops under the stochastic flow and pathwise circulation checks.
#pragma once

#include "kiw/advect.hpp"
#include "kiw/brownian.hpp"
#include "kiw/fields.hpp"
#include "kiw/flow.hpp"

#include <string>
#include <vector>

namespace kiw {

/// Closed polygon: node M-1 connects back to node 0. No duplicated endpoint.
struct Loop {
    std::vector<Vec> nodes;
    std::vector<double> params;  // initial arc parameter of each node, in [0, 1)

    [[nodiscard]] int size() const { return static_cast<int>(nodes.size()); }
    /// Largest distance of a node from the node centroid.
    [[nodiscard]] double scale() const;
    [[nodiscard]] double min_segment() const;
    /// Throws ConfigError when M < 16 or a node is non-finite.
    void validate() const;
};

inline constexpr int kMinLoopNodes = 16;

/// Circle of the given radius in the (axis0, axis1) coordinate plane.
Loop circle_loop(const Vec& center, double radius, int M, int axis0 = 0, int axis1 = 1);
/// Same loop starting at node `shift`.
Loop rotate_start(const Loop& loop, int shift);

/// Loop nodes at grid step `step`, when the loop nodes are seeds [seed_offset, seed_offset + M)
/// of the flow sample. Throws NumericalError for an excluded path.
Loop advect_loop(const Loop& loop, const FlowSample& flow, int path, int step, int seed_offset = 0);
/// Integrates the flow of the loop nodes on one path.
Loop advect_loop(const Loop& loop, const FlowModel& model, const BrownianDriver& driver, int path, int step);

/// Midpoint-rule line integral sum_j v(mid_j) . (x_{j+1} - x_j) of a 1-form field.
/// Throws NumericalError on coincident nodes.
double circulation(const FieldJet& v, const Loop& loop, double t = 0.0);
/// Same for an advected 1-form on one path.
double circulation(const AdvectedField& v, const Loop& loop, int path, double t);

/// Kelvin-Noether 1-form v(t) along characteristics: v(t)(y) = D psi(y)^T w_t(psi(y)) with
/// w_t(X) = v0(X) + int_0^t (phi_s^* F)(X) ds and psi = phi_t^{-1}.
class KelvinField {
public:
    KelvinField(FieldJet v0, FieldJet rho_inv_F, FlowModel model, const BrownianDriver* driver,
                InverseMethod method);
    /// v(t)(y) on a path.
    [[nodiscard]] Vec value(int path, int step, const Vec& y) const;
    /// w_t(X): the pulled-back form phi_t^* v(t) evaluated at X.
    [[nodiscard]] Vec pulled_back(int path, int step, const Vec& X) const;

private:
    FieldJet v0_;
    FieldJet F_;
    FlowModel model_;
    const BrownianDriver* driver_;
    InverseMethod method_;
};

struct CirculationSeries {
    int path = 0;
    std::vector<double> t;
    std::vector<double> I;
    std::vector<double> forcing_accum;
    std::vector<double> defect;
    bool degenerate = false;  // min segment fell below 1e-8 of the loop scale
};

struct KelvinOptions {
    std::vector<int> checkpoint_steps;  // empty: default_checkpoints plus step 0
    int path_begin = 0;
    int path_count = -1;
    InverseMethod method = InverseMethod::reversed_heun;
    int workers = 1;
    BlowUpPolicy policy{};
};

struct KelvinResult {
    std::vector<CirculationSeries> series;  // retained paths only, in path order
    int n_paths = 0;
    int n_excluded = 0;

    /// Largest |defect| over all paths and checkpoints.
    [[nodiscard]] double max_abs_defect() const;
    /// Root-mean-square of the terminal defects.
    [[nodiscard]] double rms_terminal_defect() const;
    /// Columns: t, path, I, forcing_accum, defect.
    [[nodiscard]] std::string to_csv() const;
};

/// I(t) = circulation of v(t) around c_t = phi_t(c_0); forcing_accum = trapezoid in time of
/// the loop integrals of rho^{-1} F around c_s; defect = I(t) - I(0) - forcing_accum.
/// rho_inv_F may be an invalid FieldJet (zero forcing).
KelvinResult kelvin_check(const FieldJet& v0, const FieldJet& rho_inv_F, const FlowModel& model,
                          const BrownianDriver& driver, const Loop& loop, const KelvinOptions& options = {});

/// Both sides of the change of variables: circulation of v(t) on the advected loop and of
/// phi_t^* v(t) on the initial loop.
struct ChangeOfVariables {
    double advected = 0.0;
    double initial = 0.0;
};
ChangeOfVariables change_of_variables(const KelvinField& v, const FlowModel& model, const BrownianDriver& driver,
                                      const Loop& loop, int path, int step);

}  // namespace kiw
