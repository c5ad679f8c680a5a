/// @file convergence.cpp
/// @brief Coupled-refinement convergence tables.
#include "kiw/convergence.hpp"

#include "kiw/io.hpp"
#include "kiw/parallel.hpp"

#include <cmath>

namespace kiw {

nlohmann::json ConvergenceTable::to_json() const {
    return {{"quantity", quantity},
            {"dt", dt},
            {"error", error},
            {"n_excluded", n_excluded},
            {"slope", fit.slope},
            {"intercept", fit.intercept},
            {"r_squared", fit.r_squared},
            {"fit_points", fit.points}};
}

namespace {

double sum_squares(const KFormValue& v) {
    double s = 0.0;
    for (int i = 0; i < v.size(); ++i) s += v[i] * v[i];
    return s;
}

// Fixed-order reduction of per-path (sum of squares, count).
double rms_of(const std::vector<std::pair<double, long>>& per_path) {
    double s = 0.0;
    long c = 0;
    for (const auto& [ss, cnt] : per_path) {
        s += ss;
        c += cnt;
    }
    return c > 0 ? std::sqrt(s / static_cast<double>(c)) : 0.0;
}

}  // namespace

ConvergenceTable flow_self_convergence(const FlowModel& model, const BrownianDriver& base, const std::vector<Vec>& seeds,
                                       int levels, int workers, const BlowUpPolicy& policy) {
    if (levels < 2) throw ConfigError("flow convergence needs at least two levels");
    if (seeds.empty()) throw ConfigError("flow convergence needs at least one seed point");
    model.validate(base.n_channels());
    ConvergenceTable tab;
    tab.quantity = "flow";
    FlowOptions fo;
    fo.workers = workers;
    fo.policy = policy;
    BrownianDriver coarse = base;
    FlowSample fc = integrate_flow(model, coarse, seeds, fo);
    check_exclusions(fc, policy);
    for (int level = 0; level < levels; ++level) {
        const BrownianDriver fine = refine(coarse);
        FlowSample ff = integrate_flow(model, fine, seeds, fo);
        check_exclusions(ff, policy);
        const int P = base.n_paths();
        std::vector<std::pair<double, long>> acc(static_cast<std::size_t>(P), {0.0, 0});
        int excl = 0;
        for (int p = 0; p < P; ++p) {
            if (fc.excluded(p) || ff.excluded(p)) {
                ++excl;
                continue;
            }
            auto& a = acc[static_cast<std::size_t>(p)];
            for (int s = 0; s < static_cast<int>(seeds.size()); ++s) {
                a.first += (fc.point(p, s, coarse.steps()) - ff.point(p, s, fine.steps())).squaredNorm();
                ++a.second;
            }
        }
        tab.dt.push_back(coarse.dt());
        tab.error.push_back(rms_of(acc));
        tab.n_excluded.push_back(excl);
        coarse = fine;
        fc = std::move(ff);
    }
    tab.fit = fit_log2_slope(tab.dt, tab.error);
    return tab;
}

ConvergenceTable duality_convergence(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& base,
                                     const std::vector<Vec>& seeds, int levels, int workers,
                                     const BlowUpPolicy& policy) {
    if (sm.convention() != Convention::stratonovich) throw ConfigError("duality needs a Stratonovich form");
    if (levels < 2) throw ConfigError("duality convergence needs at least two levels");
    if (seeds.empty()) throw ConfigError("duality convergence needs at least one seed point");
    sm.validate(base.n_channels());
    model.validate(base.n_channels());
    const SemimartingaleForm ito = to_ito(sm);
    ConvergenceTable tab;
    tab.quantity = "duality";
    BrownianDriver driver = base;
    for (int level = 0; level < levels; ++level) {
        if (level > 0) driver = refine(driver);
        FlowOptions fo;
        fo.workers = workers;
        fo.policy = policy;
        const FlowSample flow = integrate_flow(model, driver, seeds, fo);
        check_exclusions(flow, policy);
        const auto checkpoints = default_checkpoints(driver.steps());
        const int P = driver.n_paths();
        std::vector<std::pair<double, long>> acc(static_cast<std::size_t>(P), {0.0, 0});
        parallel_for(P, workers, [&](int p) {
            if (flow.excluded(p)) return;
            auto& a = acc[static_cast<std::size_t>(p)];
            for (int s = 0; s < static_cast<int>(seeds.size()); ++s) {
                const KiwSides strat = kiw_sides(sm, model, driver, flow, p, s, checkpoints);
                const KiwSides conv = kiw_sides(ito, model, driver, flow, p, s, checkpoints);
                for (std::size_t q = 0; q < checkpoints.size(); ++q) {
                    a.first += sum_squares(strat.rhs[q] - conv.rhs[q]);
                    ++a.second;
                }
            }
        });
        tab.dt.push_back(driver.dt());
        tab.error.push_back(rms_of(acc));
        tab.n_excluded.push_back(flow.n_excluded());
    }
    tab.fit = fit_log2_slope(tab.dt, tab.error);
    return tab;
}

ConvergenceTable kiw_convergence(const KiwReport& report) {
    ConvergenceTable tab;
    tab.quantity = "kiw";
    for (const auto& lv : report.levels) {
        tab.dt.push_back(lv.dt);
        tab.error.push_back(lv.rms_residual);
        tab.n_excluded.push_back(lv.n_excluded);
    }
    tab.fit = report.fit;
    return tab;
}

std::string convergence_csv(const std::vector<ConvergenceTable>& tables) {
    std::string out = csv_line({"quantity", "dt", "error", "n_excluded"});
    for (const auto& t : tables)
        for (std::size_t i = 0; i < t.dt.size(); ++i)
            out += csv_line({t.quantity, fmt17(t.dt[i]), fmt17(t.error[i]), std::to_string(t.n_excluded[i])});
    return out;
}

}  // namespace kiw
