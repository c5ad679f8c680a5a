/// @file kiw.cpp
/// @brief Semimartingale forms and both sides of the transport formula along flow samples.
#include "kiw/kiw.hpp"

#include "kiw/io.hpp"
#include "kiw/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace kiw {

Convention convention_from_string(const std::string& s) {
    if (s == "ito") return Convention::ito;
    if (s == "stratonovich") return Convention::stratonovich;
    throw ConfigError("unknown convention '" + s + "' (expected ito or stratonovich)");
}

std::string to_string(Convention c) { return c == Convention::ito ? "ito" : "stratonovich"; }

// ---------------------------------------------------------------------------------------
// SemimartingaleForm

SemimartingaleForm SemimartingaleForm::from_terms(FieldJet K0, std::vector<SemimartingaleTerm> terms,
                                                  Convention conv) {
    SemimartingaleForm sm;
    sm.K0_ = std::move(K0);
    sm.terms_ = std::move(terms);
    sm.convention_ = conv;
    return sm;
}

SemimartingaleForm SemimartingaleForm::ito(FieldJet K0, FieldJet G, std::vector<ItoDiffusion> H) {
    std::vector<SemimartingaleTerm> terms;
    if (G.valid()) terms.push_back({G, Integrator::ds, -1, CoefficientKind::one, -1});
    for (auto& h : H) terms.push_back({h.H, Integrator::dW, h.channel, CoefficientKind::one, -1});
    return from_terms(std::move(K0), std::move(terms), Convention::ito);
}

SemimartingaleForm SemimartingaleForm::stratonovich(FieldJet K0, FieldJet G, std::vector<StratonovichDiffusion> H) {
    std::vector<SemimartingaleTerm> terms;
    if (G.valid()) terms.push_back({G, Integrator::ds, -1, CoefficientKind::one, -1});
    for (auto& d : H) {
        if (d.H0.valid()) terms.push_back({d.H0, Integrator::dW, d.channel, CoefficientKind::one, -1});
        if (d.g.valid()) terms.push_back({d.g, Integrator::dW, d.channel, CoefficientKind::time, -1});
        for (auto& hj : d.h) terms.push_back({hj.h, Integrator::dW, d.channel, CoefficientKind::brownian, hj.channel});
    }
    return from_terms(std::move(K0), std::move(terms), Convention::stratonovich);
}

void SemimartingaleForm::validate(int n_channels) const {
    if (!K0_.valid() || K0_.kind() == FieldKind::vector) throw ConfigError("K0 must be a scalar or k-form field");
    if (K0_.time_dependent()) throw ConfigError("K0 must be time-independent");
    const int n = K0_.dim();
    const int k = K0_.degree();
    for (const auto& t : terms_) {
        if (!t.form.valid() || t.form.kind() == FieldKind::vector || t.form.dim() != n || t.form.degree() != k)
            throw ConfigError("semimartingale terms must be forms of the same degree and dimension as K0");
        if (t.form.time_dependent()) throw ConfigError("semimartingale term fields must be time-independent");
        if (t.integrator == Integrator::dW && (t.channel < 0 || t.channel >= n_channels))
            throw ConfigError("semimartingale channel binding missing or outside the driver");
        if (t.coefficient == CoefficientKind::brownian &&
            (t.coefficient_channel < 0 || t.coefficient_channel >= n_channels))
            throw ConfigError("coefficient channel binding missing or outside the driver");
    }
}

SemimartingaleForm to_ito(const SemimartingaleForm& sm) {
    if (sm.convention() == Convention::ito) return sm;
    std::vector<SemimartingaleTerm> terms = sm.terms();
    for (const auto& t : sm.terms())
        if (t.integrator == Integrator::dW && t.coefficient == CoefficientKind::brownian &&
            t.coefficient_channel == t.channel)
            terms.push_back({scaled(0.5, t.form), Integrator::ds, -1, CoefficientKind::one, -1});
    return SemimartingaleForm::from_terms(sm.K0(), std::move(terms), Convention::ito);
}

// ---------------------------------------------------------------------------------------
// Coefficient processes

namespace {

std::vector<double> brownian_path(const BrownianDriver& d, int path, int channel) {
    std::vector<double> w(static_cast<std::size_t>(d.steps()) + 1, 0.0);
    const auto inc = d.increments(path, channel);
    for (int k = 0; k < d.steps(); ++k) w[k + 1] = w[k] + inc[k];
    return w;
}

/// c_term(t_k), k = 0..L.
std::vector<std::vector<double>> coefficient_values(const SemimartingaleForm& sm, const BrownianDriver& d, int path) {
    const int L = d.steps();
    std::map<int, std::vector<double>> paths;
    std::vector<std::vector<double>> out;
    out.reserve(sm.terms().size());
    for (const auto& t : sm.terms()) {
        std::vector<double> c(static_cast<std::size_t>(L) + 1, 1.0);
        if (t.coefficient == CoefficientKind::time) {
            for (int k = 0; k <= L; ++k) c[k] = d.time(k);
        } else if (t.coefficient == CoefficientKind::brownian) {
            auto it = paths.find(t.coefficient_channel);
            if (it == paths.end()) it = paths.emplace(t.coefficient_channel, brownian_path(d, path, t.coefficient_channel)).first;
            c = it->second;
        }
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

std::vector<std::vector<double>> coefficient_integrals(const SemimartingaleForm& sm, const BrownianDriver& driver,
                                                       int path) {
    const int L = driver.steps();
    const double dt = driver.dt();
    const auto c = coefficient_values(sm, driver, path);
    std::vector<std::vector<double>> a;
    a.reserve(c.size());
    for (std::size_t i = 0; i < sm.terms().size(); ++i) {
        const auto& t = sm.terms()[i];
        const auto& ci = c[i];
        std::vector<double> ai(static_cast<std::size_t>(L) + 1, 0.0);
        for (int k = 0; k < L; ++k) {
            double inc;
            if (t.integrator == Integrator::ds) {
                inc = 0.5 * (ci[k] + ci[k + 1]) * dt;
            } else {
                const double dW = driver.increment(path, t.channel, k);
                inc = sm.convention() == Convention::ito ? ci[k] * dW : 0.5 * (ci[k] + ci[k + 1]) * dW;
            }
            ai[k + 1] = ai[k] + inc;
        }
        a.push_back(std::move(ai));
    }
    return a;
}

KFormValue eval_K(const SemimartingaleForm& sm, const BrownianDriver& driver, int path, double t, const Vec& x) {
    sm.validate(driver.n_channels());
    const int step = driver.step_of(t);
    const int n = sm.dim();
    const int k = sm.degree();
    const auto a = coefficient_integrals(sm, driver, path);
    JetSample s;
    sm.K0().sample(0.0, x, 0, s);
    KFormValue K = form_value(s, n, k);
    for (std::size_t i = 0; i < sm.terms().size(); ++i) {
        sm.terms()[i].form.sample(0.0, x, 0, s);
        K += a[i][static_cast<std::size_t>(step)] * form_value(s, n, k);
    }
    return K;
}

// ---------------------------------------------------------------------------------------
// Both sides along one path

namespace {

/// Pulled-back integrands at one grid time.
struct Integrands {
    KFormValue drift;                           // G + L_b K (+ 1/2 sum L_xi L_xi K for Ito)
    std::vector<KFormValue> H;                  // per W channel slot
    std::vector<KFormValue> LxiK;               // per noise field
    std::vector<std::vector<KFormValue>> LxiH;  // [noise][W channel slot]
};

}  // namespace

KiwSides kiw_sides(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& driver,
                   const FlowSample& flow, int path, int seed, const std::vector<int>& checkpoint_steps) {
    sm.validate(driver.n_channels());
    model.validate(driver.n_channels());
    const int n = sm.dim();
    const int k = sm.degree();
    if (model.dim() != n || flow.dim() != n) throw ConfigError("flow and semimartingale dimensions differ");
    if (flow.steps() != driver.steps() || std::abs(flow.dt() - driver.dt()) > 1e-15 * driver.horizon())
        throw ConfigError("flow sample and driver grids differ");
    for (int s : checkpoint_steps)
        if (s < 0 || s > driver.steps()) throw ConfigError("checkpoint outside the driver grid");

    const bool ito = sm.convention() == Convention::ito;
    const double dt = driver.dt();
    const auto& terms = sm.terms();
    const std::size_t nt = terms.size();
    const std::size_t nxi = model.noise.size();

    // W channel slots used by dW terms.
    std::vector<int> wchan;
    std::vector<int> slot_of(nt, -1);
    for (std::size_t i = 0; i < nt; ++i) {
        if (terms[i].integrator != Integrator::dW) continue;
        auto it = std::find(wchan.begin(), wchan.end(), terms[i].channel);
        if (it == wchan.end()) {
            wchan.push_back(terms[i].channel);
            it = wchan.end() - 1;
        }
        slot_of[i] = static_cast<int>(it - wchan.begin());
    }
    const std::size_t nw = wchan.size();

    const auto c = coefficient_values(sm, driver, path);
    const auto a = coefficient_integrals(sm, driver, path);
    const int order = ito ? 2 : 1;

    JetSample K0s, Fs, bs, Kt;
    std::vector<JetSample> Fjets(nt);
    std::vector<JetSample> xis(nxi);
    std::vector<JetSample> Hjets(nw);

    auto integrands_at = [&](int step, KFormValue* lhs_out) {
        const double t = driver.time(step);
        const Vec y = flow.point(path, seed, step);
        const Mat J = flow.jacobian(path, seed, step);
        const auto ks = static_cast<std::size_t>(step);

        sm.K0().sample(0.0, y, order, K0s);
        Kt = K0s;
        KFormValue G(n, k);
        for (auto& h : Hjets) h.reset(K0s.ncomp, n);
        for (std::size_t i = 0; i < nt; ++i) {
            terms[i].form.sample(0.0, y, order, Fjets[i]);
            Kt.axpy(a[i][ks], Fjets[i], order);
            if (terms[i].integrator == Integrator::ds)
                G += c[i][ks] * form_value(Fjets[i], n, k);
            else
                Hjets[static_cast<std::size_t>(slot_of[i])].axpy(c[i][ks], Fjets[i], 1);
        }
        if (lhs_out != nullptr) *lhs_out = pullback_linear(J, form_value(Kt, n, k));

        model.drift.sample(t, y, 1, bs);
        for (std::size_t j = 0; j < nxi; ++j) model.noise[j].field.sample(t, y, order, xis[j]);

        KFormValue drift = G + lie_derivative(bs, Kt, n, k);
        Integrands out;
        out.H.resize(nw);
        out.LxiK.resize(nxi);
        out.LxiH.assign(nxi, std::vector<KFormValue>(nw));
        for (std::size_t j = 0; j < nxi; ++j) {
            out.LxiK[j] = pullback_linear(J, lie_derivative(xis[j], Kt, n, k));
            if (ito) {
                drift += 0.5 * double_lie_derivative(xis[j], Kt, n, k);
                for (std::size_t w = 0; w < nw; ++w)
                    out.LxiH[j][w] = pullback_linear(J, lie_derivative(xis[j], Hjets[w], n, k));
            }
        }
        for (std::size_t w = 0; w < nw; ++w) out.H[w] = pullback_linear(J, form_value(Hjets[w], n, k));
        out.drift = pullback_linear(J, drift);
        return out;
    };

    std::vector<int> want(checkpoint_steps);
    const int last = want.empty() ? 0 : *std::max_element(want.begin(), want.end());

    KiwSides sides;
    sides.steps = want;
    sides.lhs.assign(want.size(), KFormValue(n, k));
    sides.rhs.assign(want.size(), KFormValue(n, k));

    JetSample k0x;
    sm.K0().sample(0.0, flow.point(path, seed, 0), 0, k0x);
    KFormValue rhs = form_value(k0x, n, k);

    auto record = [&](int step, const KFormValue& lhs) {
        for (std::size_t q = 0; q < want.size(); ++q)
            if (want[q] == step) {
                sides.lhs[q] = lhs;
                sides.rhs[q] = rhs;
            }
    };

    KFormValue lhs(n, k);
    Integrands prev = integrands_at(0, &lhs);
    record(0, lhs);
    std::vector<double> dW(nw), dB(nxi);
    for (int step = 0; step < last; ++step) {
        Integrands next = integrands_at(step + 1, &lhs);
        for (std::size_t w = 0; w < nw; ++w) dW[w] = driver.increment(path, wchan[w], step);
        for (std::size_t j = 0; j < nxi; ++j) dB[j] = driver.increment(path, model.noise[j].channel, step);

        rhs += (0.5 * dt) * (prev.drift + next.drift);
        if (ito) {
            for (std::size_t w = 0; w < nw; ++w) rhs += dW[w] * prev.H[w];
            for (std::size_t j = 0; j < nxi; ++j) {
                rhs += dB[j] * prev.LxiK[j];
                for (std::size_t w = 0; w < nw; ++w)
                    if (wchan[w] == model.noise[j].channel) rhs += (dW[w] * dB[j]) * prev.LxiH[j][w];
            }
        } else {
            for (std::size_t w = 0; w < nw; ++w) rhs += (0.5 * dW[w]) * (prev.H[w] + next.H[w]);
            for (std::size_t j = 0; j < nxi; ++j) rhs += (0.5 * dB[j]) * (prev.LxiK[j] + next.LxiK[j]);
        }
        record(step + 1, lhs);
        prev = std::move(next);
    }
    return sides;
}

namespace {

double contract_set(const KFormValue& K, const std::vector<Vec>& vs) {
    if (static_cast<int>(vs.size()) != K.degree) throw ConfigError("test vector count must equal the form degree");
    for (const auto& v : vs)
        if (v.size() != K.dim) throw ConfigError("test vector dimension mismatch");
    return contract(K, vs);
}

KiwSides sides_at(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& driver,
                  const FlowSample& flow, int path, int seed, double t) {
    return kiw_sides(sm, model, driver, flow, path, seed, {driver.step_of(t)});
}

}  // namespace

double kiw_rhs_ito(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& driver,
                   const FlowSample& flow, int path, int seed, double t, const std::vector<Vec>& test_vectors) {
    if (sm.convention() != Convention::ito) throw ConfigError("kiw_rhs_ito requires an Ito semimartingale");
    return contract_set(sides_at(sm, model, driver, flow, path, seed, t).rhs[0], test_vectors);
}

double kiw_rhs_stratonovich(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& driver,
                            const FlowSample& flow, int path, int seed, double t,
                            const std::vector<Vec>& test_vectors) {
    if (sm.convention() != Convention::stratonovich)
        throw ConfigError("kiw_rhs_stratonovich requires a Stratonovich semimartingale");
    return contract_set(sides_at(sm, model, driver, flow, path, seed, t).rhs[0], test_vectors);
}

double kiw_lhs(const SemimartingaleForm& sm, const BrownianDriver& driver, const FlowSample& flow, int path,
               int seed, double t, const std::vector<Vec>& test_vectors) {
    const int step = driver.step_of(t);
    const KFormValue K = eval_K(sm, driver, path, t, flow.point(path, seed, step));
    return contract_set(pullback_linear(flow.jacobian(path, seed, step), K), test_vectors);
}

// ---------------------------------------------------------------------------------------
// Harness

std::vector<std::vector<Vec>> default_test_sets(int n, int k, int n_random, std::uint64_t seed) {
    std::vector<Vec> pool;
    for (int i = 0; i < n; ++i) {
        Vec e = Vec::Zero(n);
        e(i) = 1.0;
        pool.push_back(e);
    }
    std::mt19937_64 eng(stream_seed(seed, 0, 0, 1000));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int r = 0; r < n_random; ++r) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = uni(eng);
        pool.push_back(v);
    }
    std::vector<std::vector<Vec>> sets;
    const int m = static_cast<int>(pool.size());
    if (k == 0) return {{}};
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        std::vector<Vec> s;
        for (int i : idx) s.push_back(pool[static_cast<std::size_t>(i)]);
        sets.push_back(std::move(s));
        int p = k - 1;
        while (p >= 0 && idx[p] == m - k + p) --p;
        if (p < 0) break;
        ++idx[p];
        for (int q = p + 1; q < k; ++q) idx[q] = idx[q - 1] + 1;
    }
    return sets;
}

std::vector<int> default_checkpoints(int steps) {
    std::vector<int> c{static_cast<int>(std::lround(steps / 3.0)), static_cast<int>(std::lround(2.0 * steps / 3.0)),
                       steps};
    for (auto& s : c) s = std::clamp(s, 1, steps);
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
}

SlopeFit fit_log2_slope(const std::vector<double>& dt, const std::vector<double>& err) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < dt.size() && i < err.size(); ++i)
        if (dt[i] > 0.0 && err[i] > 0.0 && std::isfinite(err[i])) {
            xs.push_back(std::log2(dt[i]));
            ys.push_back(std::log2(err[i]));
        }
    SlopeFit f;
    f.points = static_cast<int>(xs.size());
    if (f.points < 2) return f;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

double KiwReport::max_residual() const {
    double m = 0.0;
    for (const auto& l : levels) m = std::max(m, l.max_abs_residual);
    return m;
}

nlohmann::json KiwReport::to_json() const {
    nlohmann::json j;
    j["convention"] = to_string(convention);
    j["dimension"] = dim;
    j["degree"] = degree;
    j["n_seeds"] = n_seeds;
    j["n_test_sets"] = n_test_sets;
    j["checkpoint_times"] = checkpoint_times;
    j["levels"] = nlohmann::json::array();
    for (const auto& l : levels)
        j["levels"].push_back({{"dt", l.dt},
                               {"mean_abs_residual", l.mean_abs_residual},
                               {"rms_residual", l.rms_residual},
                               {"max_abs_residual", l.max_abs_residual},
                               {"n_paths", l.n_paths},
                               {"n_excluded", l.n_excluded}});
    j["fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}, {"points", fit.points}};
    j["max_residual"] = max_residual();
    j["terminal_residuals"] = terminal_residuals;
    return j;
}

std::string KiwReport::to_csv() const {
    std::string out = csv_line({"dt", "mean_abs_residual", "rms_residual", "n_excluded"});
    for (const auto& l : levels)
        out += csv_line({fmt17(l.dt), fmt17(l.mean_abs_residual), fmt17(l.rms_residual), std::to_string(l.n_excluded)});
    return out;
}

KiwReport kiw_residual(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& base,
                       const std::vector<Vec>& seeds, const KiwOptions& options) {
    if (options.levels < 2) throw ConfigError("kiw_residual needs at least two refinement levels");
    if (seeds.empty()) throw ConfigError("kiw_residual needs at least one seed point");
    sm.validate(base.n_channels());
    model.validate(base.n_channels());
    const int n = sm.dim();
    const int k = sm.degree();
    const auto sets = options.test_sets.empty() ? default_test_sets(n, k, 3, base.seed()) : options.test_sets;

    KiwReport rep;
    rep.convention = sm.convention();
    rep.dim = n;
    rep.degree = k;
    rep.n_seeds = static_cast<int>(seeds.size());
    rep.n_test_sets = static_cast<int>(sets.size());

    BrownianDriver driver = base;
    std::vector<double> dts, rms;
    for (int level = 0; level < options.levels; ++level) {
        if (level > 0) driver = refine(driver);
        FlowOptions fo;
        fo.workers = options.workers;
        fo.policy = options.policy;
        const FlowSample flow = integrate_flow(model, driver, seeds, fo);
        check_exclusions(flow, options.policy);
        const auto checkpoints = default_checkpoints(driver.steps());
        if (level == 0)
            for (int s : checkpoints) rep.checkpoint_times.push_back(driver.time(s));

        const int P = driver.n_paths();
        // per path: residuals ordered [seed][checkpoint][set]
        std::vector<std::vector<double>> per_path(static_cast<std::size_t>(P));
        parallel_for(P, options.workers, [&](int p) {
            if (flow.excluded(p)) return;
            auto& r = per_path[static_cast<std::size_t>(p)];
            r.reserve(seeds.size() * checkpoints.size() * sets.size());
            for (int s = 0; s < static_cast<int>(seeds.size()); ++s) {
                const KiwSides sd = kiw_sides(sm, model, driver, flow, p, s, checkpoints);
                for (std::size_t q = 0; q < checkpoints.size(); ++q) {
                    const KFormValue diff = sd.lhs[q] - sd.rhs[q];
                    for (const auto& set : sets) r.push_back(contract(diff, set));
                }
            }
        });

        KiwLevel lv;
        lv.dt = driver.dt();
        lv.n_paths = P;
        lv.n_excluded = flow.n_excluded();
        double sum_abs = 0.0, sum_sq = 0.0, mx = 0.0;
        std::size_t count = 0;
        for (const auto& r : per_path)
            for (double v : r) {
                sum_abs += std::abs(v);
                sum_sq += v * v;
                mx = std::max(mx, std::abs(v));
                ++count;
            }
        if (count > 0) {
            lv.mean_abs_residual = sum_abs / static_cast<double>(count);
            lv.rms_residual = std::sqrt(sum_sq / static_cast<double>(count));
        }
        lv.max_abs_residual = mx;
        rep.levels.push_back(lv);
        dts.push_back(lv.dt);
        rms.push_back(lv.rms_residual);

        if (level == options.levels - 1) {
            const std::size_t nq = checkpoints.size();
            const std::size_t ns = sets.size();
            rep.terminal_residuals.assign(static_cast<std::size_t>(P), {});
            for (int p = 0; p < P; ++p) {
                const auto& r = per_path[static_cast<std::size_t>(p)];
                if (r.empty()) continue;
                auto& out = rep.terminal_residuals[static_cast<std::size_t>(p)];
                for (std::size_t s = 0; s < seeds.size(); ++s)
                    for (std::size_t m = 0; m < ns; ++m) out.push_back(r[(s * nq + (nq - 1)) * ns + m]);
            }
        }
    }
    rep.fit = fit_log2_slope(dts, rms);
    return rep;
}

}  // namespace kiw
