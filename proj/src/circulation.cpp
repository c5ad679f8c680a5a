/// @file circulation.cpp
/// @brief Loops, circulation and the Kelvin checks.
#include "kiw/circulation.hpp"

#include "kiw/io.hpp"
#include "kiw/kiw.hpp"
#include "kiw/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace kiw {

double Loop::scale() const {
    if (nodes.empty()) return 0.0;
    Vec c = Vec::Zero(nodes[0].size());
    for (const auto& x : nodes) c += x;
    c /= static_cast<double>(nodes.size());
    double r = 0.0;
    for (const auto& x : nodes) r = std::max(r, (x - c).norm());
    return r;
}

double Loop::min_segment() const {
    double m = std::numeric_limits<double>::infinity();
    const int M = size();
    for (int j = 0; j < M; ++j) m = std::min(m, (nodes[static_cast<std::size_t>((j + 1) % M)] - nodes[static_cast<std::size_t>(j)]).norm());
    return m;
}

void Loop::validate() const {
    if (size() < kMinLoopNodes) throw ConfigError("loop needs at least 16 nodes");
    for (const auto& x : nodes)
        if (!x.allFinite()) throw ConfigError("loop node is not finite");
}

Loop circle_loop(const Vec& center, double radius, int M, int axis0, int axis1) {
    const int n = static_cast<int>(center.size());
    if (axis0 < 0 || axis1 < 0 || axis0 >= n || axis1 >= n || axis0 == axis1)
        throw ConfigError("circle_loop: invalid plane axes");
    if (!(radius > 0.0)) throw ConfigError("circle_loop: radius must be positive");
    Loop loop;
    for (int j = 0; j < M; ++j) {
        const double s = static_cast<double>(j) / M;
        Vec x = center;
        x(axis0) += radius * std::cos(2.0 * std::numbers::pi * s);
        x(axis1) += radius * std::sin(2.0 * std::numbers::pi * s);
        loop.nodes.push_back(x);
        loop.params.push_back(s);
    }
    loop.validate();
    return loop;
}

Loop rotate_start(const Loop& loop, int shift) {
    Loop out;
    const int M = loop.size();
    for (int j = 0; j < M; ++j) {
        const auto src = static_cast<std::size_t>(((j + shift) % M + M) % M);
        out.nodes.push_back(loop.nodes[src]);
        if (!loop.params.empty()) out.params.push_back(loop.params[src]);
    }
    return out;
}

Loop advect_loop(const Loop& loop, const FlowSample& flow, int path, int step, int seed_offset) {
    loop.validate();
    if (seed_offset < 0 || seed_offset + loop.size() > flow.n_seeds())
        throw ConfigError("advect_loop: loop nodes are not among the flow seeds");
    if (flow.excluded(path)) throw NumericalError("advect_loop: path " + std::to_string(path) + " is excluded");
    Loop out;
    out.params = loop.params;
    for (int j = 0; j < loop.size(); ++j) out.nodes.push_back(flow.point(path, seed_offset + j, step));
    return out;
}

Loop advect_loop(const Loop& loop, const FlowModel& model, const BrownianDriver& driver, int path, int step) {
    FlowOptions fo;
    fo.path_begin = path;
    fo.path_count = 1;
    const FlowSample fs = integrate_flow(model, driver, loop.nodes, fo);
    return advect_loop(loop, fs, path, step);
}

namespace {

template <class ValueAt>
double line_integral(const Loop& loop, ValueAt&& value_at) {
    const int M = loop.size();
    if (M < 2) throw ConfigError("circulation: loop too short");
    double s = 0.0;
    for (int j = 0; j < M; ++j) {
        const Vec& a = loop.nodes[static_cast<std::size_t>(j)];
        const Vec& b = loop.nodes[static_cast<std::size_t>((j + 1) % M)];
        const Vec d = b - a;
        if (d.norm() == 0.0) throw NumericalError("circulation: degenerate segment (coincident nodes)");
        const Vec mid = 0.5 * (a + b);
        s += value_at(mid).dot(d);
    }
    return s;
}

Vec oneform_vec(const KFormValue& v) {
    Vec out(v.dim);
    for (int i = 0; i < v.dim; ++i) out(i) = v[i];
    return out;
}

void require_oneform(const FieldJet& v, const char* what) {
    if (!v.valid() || v.kind() != FieldKind::kform || v.degree() != 1)
        throw ConfigError(std::string(what) + " must be a 1-form");
}

}  // namespace

double circulation(const FieldJet& v, const Loop& loop, double t) {
    require_oneform(v, "circulation integrand");
    return line_integral(loop, [&](const Vec& x) { return v.value(t, x); });
}

double circulation(const AdvectedField& v, const Loop& loop, int path, double t) {
    if (v.degree() != 1) throw ConfigError("circulation integrand must be a 1-form");
    return line_integral(loop, [&](const Vec& x) { return oneform_vec(v.evaluate(path, t, x)); });
}

// ---------------------------------------------------------------------------------------
// Kelvin

KelvinField::KelvinField(FieldJet v0, FieldJet rho_inv_F, FlowModel model, const BrownianDriver* driver,
                         InverseMethod method)
    : v0_(std::move(v0)), F_(std::move(rho_inv_F)), model_(std::move(model)), driver_(driver), method_(method) {
    if (driver_ == nullptr) throw ConfigError("kelvin: driver required");
    require_oneform(v0_, "v0");
    if (F_.valid()) require_oneform(F_, "rho^-1 F");
    model_.validate(driver_->n_channels());
    if (v0_.dim() != model_.dim() || (F_.valid() && F_.dim() != model_.dim()))
        throw ConfigError("kelvin: field and flow dimensions differ");
}

Vec KelvinField::pulled_back(int path, int step, const Vec& X) const {
    Vec w = v0_.value(0.0, X);
    if (!F_.valid() || step == 0) return w;
    // int_0^t J_s^T F(s, phi_s X) ds by the trapezoid rule along the forward flow from X.
    const double dt = driver_->dt();
    const int n = model_.dim();
    std::vector<double> dB(model_.noise.size());
    Vec x = X;
    Mat J = Mat::Identity(n, n);
    Vec prev = J.transpose() * F_.value(0.0, x);
    for (int k = 0; k < step; ++k) {
        for (std::size_t j = 0; j < model_.noise.size(); ++j) dB[j] = driver_->increment(path, model_.noise[j].channel, k);
        const StepResult r = propagate_jacobian(model_, driver_->time(k), dt, dB, x, J);
        x = r.x;
        const Vec next = J.transpose() * F_.value(driver_->time(k + 1), x);
        w += 0.5 * dt * (prev + next);
        prev = next;
    }
    return w;
}

Vec KelvinField::value(int path, int step, const Vec& y) const {
    const InverseFlow inv = inverse_flow(model_, *driver_, path, step, y, method_);
    return inv.jacobian.transpose() * pulled_back(path, step, inv.preimage);
}

double KelvinResult::max_abs_defect() const {
    double m = 0.0;
    for (const auto& s : series)
        for (double d : s.defect) m = std::max(m, std::abs(d));
    return m;
}

double KelvinResult::rms_terminal_defect() const {
    if (series.empty()) return 0.0;
    double s = 0.0;
    for (const auto& c : series) s += c.defect.back() * c.defect.back();
    return std::sqrt(s / static_cast<double>(series.size()));
}

std::string KelvinResult::to_csv() const {
    std::string out = csv_line({"t", "path", "I", "forcing_accum", "defect"});
    for (const auto& s : series)
        for (std::size_t q = 0; q < s.t.size(); ++q)
            out += csv_line({fmt17(s.t[q]), std::to_string(s.path), fmt17(s.I[q]), fmt17(s.forcing_accum[q]),
                             fmt17(s.defect[q])});
    return out;
}

KelvinResult kelvin_check(const FieldJet& v0, const FieldJet& rho_inv_F, const FlowModel& model,
                          const BrownianDriver& driver, const Loop& loop, const KelvinOptions& options) {
    loop.validate();
    const KelvinField field(v0, rho_inv_F, model, &driver, options.method);
    std::vector<int> checkpoints = options.checkpoint_steps;
    if (checkpoints.empty()) {
        checkpoints = default_checkpoints(driver.steps());
        checkpoints.insert(checkpoints.begin(), 0);
    }
    std::sort(checkpoints.begin(), checkpoints.end());
    checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
    for (int s : checkpoints)
        if (s < 0 || s > driver.steps()) throw ConfigError("kelvin: checkpoint outside the grid");
    const int last = checkpoints.back();

    FlowOptions fo;
    fo.path_begin = options.path_begin;
    fo.path_count = options.path_count;
    fo.workers = options.workers;
    fo.policy = options.policy;
    const FlowSample flow = integrate_flow(model, driver, loop.nodes, fo);
    check_exclusions(flow, options.policy);

    const int P = flow.path_count();
    const double scale0 = loop.scale();
    std::vector<CirculationSeries> all(static_cast<std::size_t>(P));
    parallel_for(P, options.workers, [&](int local) {
        const int path = flow.path_begin() + local;
        auto& cs = all[static_cast<std::size_t>(local)];
        cs.path = path;
        if (flow.excluded(path)) return;
        double forcing = 0.0;
        double prev_loop_F = 0.0;
        double I0 = 0.0;
        std::size_t q = 0;
        for (int step = 0; step <= last; ++step) {
            const Loop c = advect_loop(loop, flow, path, step);
            if (c.min_segment() < 1e-8 * std::max(scale0, 1e-300)) cs.degenerate = true;
            if (rho_inv_F.valid()) {
                const double lf = circulation(rho_inv_F, c, driver.time(step));
                if (step > 0) forcing += 0.5 * driver.dt() * (prev_loop_F + lf);
                prev_loop_F = lf;
            }
            if (q < checkpoints.size() && checkpoints[q] == step) {
                const double I = line_integral(c, [&](const Vec& y) { return field.value(path, step, y); });
                if (q == 0) I0 = I;
                cs.t.push_back(driver.time(step));
                cs.I.push_back(I);
                cs.forcing_accum.push_back(forcing);
                cs.defect.push_back(I - I0 - forcing);
                ++q;
            }
        }
        if (checkpoints.front() != 0) {
            // defect is relative to I(0) on the initial loop
            const double Iinit = line_integral(loop, [&](const Vec& y) { return field.value(path, 0, y); });
            for (std::size_t i = 0; i < cs.I.size(); ++i) cs.defect[i] = cs.I[i] - Iinit - cs.forcing_accum[i];
        }
    });

    KelvinResult res;
    res.n_paths = P;
    res.n_excluded = flow.n_excluded();
    for (auto& s : all)
        if (!flow.excluded(s.path)) res.series.push_back(std::move(s));
    return res;
}

ChangeOfVariables change_of_variables(const KelvinField& v, const FlowModel& model, const BrownianDriver& driver,
                                      const Loop& loop, int path, int step) {
    loop.validate();
    const int M = loop.size();
    std::vector<Vec> seeds = loop.nodes;
    for (int j = 0; j < M; ++j)
        seeds.push_back(0.5 * (loop.nodes[static_cast<std::size_t>(j)] + loop.nodes[static_cast<std::size_t>((j + 1) % M)]));
    FlowOptions fo;
    fo.path_begin = path;
    fo.path_count = 1;
    const FlowSample flow = integrate_flow(model, driver, seeds, fo);
    if (flow.excluded(path)) throw NumericalError("change_of_variables: path is excluded");

    ChangeOfVariables out;
    const Loop c = advect_loop(loop, flow, path, step);
    out.advected = line_integral(c, [&](const Vec& y) { return v.value(path, step, y); });
    double s = 0.0;
    for (int j = 0; j < M; ++j) {
        const Vec d = loop.nodes[static_cast<std::size_t>((j + 1) % M)] - loop.nodes[static_cast<std::size_t>(j)];
        const Vec y = flow.point(path, M + j, step);
        const Mat J = flow.jacobian(path, M + j, step);
        s += (J.transpose() * v.value(path, step, y)).dot(d);
    }
    out.initial = s;
    return out;
}

}  // namespace kiw
