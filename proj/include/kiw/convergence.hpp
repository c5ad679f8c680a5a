/// @file convergence.hpp
/// @brief Strong self-convergence tables over coupled refinements of one Brownian driver.
#pragma once

#include "kiw/brownian.hpp"
#include "kiw/flow.hpp"
#include "kiw/kiw.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace kiw {

struct ConvergenceTable {
    std::string quantity;
    std::vector<double> dt;
    std::vector<double> error;
    std::vector<int> n_excluded;
    SlopeFit fit;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// RMS over paths and seeds of |phi_T at dt_l - phi_T at dt_l/2|, for l = 0..levels-1
/// (levels + 1 drivers are generated by bridge refinement).
ConvergenceTable flow_self_convergence(const FlowModel& model, const BrownianDriver& base, const std::vector<Vec>& seeds,
                                       int levels, int workers = 1, const BlowUpPolicy& policy = {});

/// RMS over paths, seeds and checkpoints of |RHS_strat(sm) - RHS_ito(to_ito(sm))| (component
/// norm) on the same flow sample, per refinement level. sm must be Stratonovich.
ConvergenceTable duality_convergence(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& base,
                                     const std::vector<Vec>& seeds, int levels, int workers = 1,
                                     const BlowUpPolicy& policy = {});

/// Convergence table of the KIW residual rms from a report.
ConvergenceTable kiw_convergence(const KiwReport& report);

/// Rows (quantity, dt, error, n_excluded) of several tables.
std::string convergence_csv(const std::vector<ConvergenceTable>& tables);

}  // namespace kiw
