/// @file catalog.cpp
/// @brief Analytic field catalog and its manifest.
#include "kiw/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

namespace kiw {

namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Analytic scalar sources

class ConstantSource final : public FieldSource {
public:
    explicit ConstantSource(double c) : c_(c) {}
    void sample(double, const Vec& x, int, JetSample& out) const override {
        out.reset(1, static_cast<int>(x.size()));
        out.value[0] = c_;
    }

private:
    double c_;
};

class AffineSource final : public FieldSource {
public:
    AffineSource(std::vector<double> a, double c) : a_(std::move(a)), c_(c) {}
    void sample(double, const Vec& x, int, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        out.reset(1, n);
        double v = c_;
        for (int l = 0; l < n; ++l) {
            v += a_[l] * x(l);
            out.d1[0][l] = a_[l];
        }
        out.value[0] = v;
    }

private:
    std::vector<double> a_;
    double c_;
};

// c * prod_i x_i^{e_i}
class MonomialSource final : public FieldSource {
public:
    MonomialSource(double c, std::vector<int> e) : c_(c), e_(std::move(e)) {}
    void sample(double, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        out.reset(1, n);
        std::array<double, 3> p{}, dp{}, ddp{};
        for (int i = 0; i < n; ++i) {
            const int e = e_[i];
            p[i] = std::pow(x(i), e);
            dp[i] = e >= 1 ? e * std::pow(x(i), e - 1) : 0.0;
            ddp[i] = e >= 2 ? e * (e - 1) * std::pow(x(i), e - 2) : 0.0;
        }
        auto prod_except = [&](int a, int b) {
            double r = c_;
            for (int i = 0; i < n; ++i)
                if (i != a && i != b) r *= p[i];
            return r;
        };
        out.value[0] = prod_except(-1, -1);
        if (order < 1) return;
        for (int l = 0; l < n; ++l) {
            out.d1[0][l] = dp[l] * prod_except(l, -1);
            if (order < 2) continue;
            for (int m = 0; m < n; ++m)
                out.d2[0][l][m] = (l == m) ? ddp[l] * prod_except(l, -1) : dp[l] * dp[m] * prod_except(l, m);
        }
    }

private:
    double c_;
    std::vector<int> e_;
};

// exp(-|x - c|^2 / (2 sigma^2))
class GaussianSource final : public FieldSource {
public:
    GaussianSource(double sigma, std::vector<double> center) : sigma_(sigma), center_(std::move(center)) {}
    void sample(double, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        out.reset(1, n);
        const double s2 = sigma_ * sigma_;
        std::array<double, 3> d{};
        double r2 = 0.0;
        for (int l = 0; l < n; ++l) {
            d[l] = x(l) - center_[l];
            r2 += d[l] * d[l];
        }
        const double g = std::exp(-r2 / (2.0 * s2));
        out.value[0] = g;
        if (order < 1) return;
        for (int l = 0; l < n; ++l) {
            out.d1[0][l] = -d[l] / s2 * g;
            if (order < 2) continue;
            for (int m = 0; m < n; ++m)
                out.d2[0][l][m] = (d[l] * d[m] / (s2 * s2) - (l == m ? 1.0 / s2 : 0.0)) * g;
        }
    }

private:
    double sigma_;
    std::vector<double> center_;
};

struct TrigTerm {
    double amplitude;
    std::array<double, 3> wave;
    double phase;
};

// c0 + sum_t a_t sin(m_t . x + p_t)
class TrigSeriesSource final : public FieldSource {
public:
    TrigSeriesSource(double c0, std::vector<TrigTerm> terms) : c0_(c0), terms_(std::move(terms)) {}
    void sample(double, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        out.reset(1, n);
        double v = c0_;
        for (const auto& term : terms_) {
            double arg = term.phase;
            for (int l = 0; l < n; ++l) arg += term.wave[l] * x(l);
            const double s = std::sin(arg);
            const double c = std::cos(arg);
            v += term.amplitude * s;
            if (order < 1) continue;
            for (int l = 0; l < n; ++l) {
                out.d1[0][l] += term.amplitude * term.wave[l] * c;
                if (order < 2) continue;
                for (int m = 0; m < n; ++m) out.d2[0][l][m] -= term.amplitude * term.wave[l] * term.wave[m] * s;
            }
        }
        out.value[0] = v;
    }

private:
    double c0_;
    std::vector<TrigTerm> terms_;
};

// exp((sum_i cos x_i - n) / sigma^2): smooth periodic bump peaked at the origin
class PeriodicBumpSource final : public FieldSource {
public:
    explicit PeriodicBumpSource(double sigma) : inv_s2_(1.0 / (sigma * sigma)) {}
    void sample(double, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        out.reset(1, n);
        double e = -n;
        for (int l = 0; l < n; ++l) e += std::cos(x(l));
        const double g = std::exp(e * inv_s2_);
        out.value[0] = g;
        if (order < 1) return;
        for (int l = 0; l < n; ++l) {
            out.d1[0][l] = -std::sin(x(l)) * inv_s2_ * g;
            if (order < 2) continue;
            for (int m = 0; m < n; ++m) {
                double v = std::sin(x(l)) * std::sin(x(m)) * inv_s2_ * inv_s2_ * g;
                if (l == m) v -= std::cos(x(l)) * inv_s2_ * g;
                out.d2[0][l][m] = v;
            }
        }
    }

private:
    double inv_s2_;
};

class ProductSource final : public FieldSource {
public:
    ProductSource(FieldJet f, FieldJet g) : f_(std::move(f)), g_(std::move(g)) {}
    void sample(double t, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        JetSample a, b;
        f_.sample(t, x, order, a);
        g_.sample(t, x, order, b);
        out.reset(1, n);
        out.value[0] = a.value[0] * b.value[0];
        if (order < 1) return;
        for (int l = 0; l < n; ++l) {
            out.d1[0][l] = a.d1[0][l] * b.value[0] + a.value[0] * b.d1[0][l];
            if (order < 2) continue;
            for (int m = 0; m < n; ++m)
                out.d2[0][l][m] = a.d2[0][l][m] * b.value[0] + a.d1[0][l] * b.d1[0][m] + a.d1[0][m] * b.d1[0][l] +
                                  a.value[0] * b.d2[0][l][m];
        }
    }

private:
    FieldJet f_;
    FieldJet g_;
};

// ---------------------------------------------------------------------------
// Builders

FieldJet scalar_of(std::shared_ptr<const FieldSource> src, int n, bool periodic, std::string label) {
    return FieldJet({FieldKind::scalar, n, 0}, std::move(src), Backend::analytic, false, periodic, 0.0,
                    std::move(label));
}

FieldJet constant(double c, int n) { return scalar_of(std::make_shared<ConstantSource>(c), n, true, "constant"); }

FieldJet coordinate(int i, double scale, int n) {
    std::vector<double> a(n, 0.0);
    a[i] = scale;
    return scalar_of(std::make_shared<AffineSource>(a, 0.0), n, false, "coordinate");
}

FieldJet trig(double c0, std::vector<TrigTerm> terms, int n, bool periodic) {
    return scalar_of(std::make_shared<TrigSeriesSource>(c0, std::move(terms)), n, periodic, "trig");
}

FieldJet gaussian(double sigma, std::vector<double> center) {
    const int n = static_cast<int>(center.size());
    return scalar_of(std::make_shared<GaussianSource>(sigma, std::move(center)), n, false, "gaussian");
}

FieldJet product(const FieldJet& f, const FieldJet& g) {
    return scalar_of(std::make_shared<ProductSource>(f, g), f.dim(), f.periodic() && g.periodic(), "product");
}

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-12; }

int binom(int n, int k) { return component_count({FieldKind::kform, n, k}); }

constexpr double kHalfPi = std::numbers::pi / 2.0;

std::array<double, 3> unit_wave(int i) {
    std::array<double, 3> w{};
    w[i] = 1.0;
    return w;
}

struct Entry {
    std::string name;
    std::string kind;       // scalar | vector | kform
    std::string degree;     // "0", "1", "n", "param"; informational
    std::vector<int> dims;
    std::string params;     // human-readable schema
    bool periodic;
    std::function<int(int n, const std::vector<double>& p)> param_count;
    std::function<FieldJet(const std::vector<double>& p, int n)> build;
};

int form_param_count(int n, const std::vector<double>& p, int fixed_after_k) {
    if (p.empty()) return 1;
    const double k = p[0];
    if (!is_integer(k) || k < 0 || k > n) return -1;
    return 1 + fixed_after_k + binom(n, static_cast<int>(k));
}

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = [] {
        std::vector<Entry> e;
        const std::vector<int> all{1, 2, 3};

        // ---- scalars
        e.push_back({"constant_scalar", "scalar", "0", all, "[c]", true, [](int, auto&) { return 1; },
                     [](const auto& p, int n) { return constant(p[0], n); }});
        e.push_back({"affine_scalar", "scalar", "0", all, "[a_1..a_n, c]", false,
                     [](int n, auto&) { return n + 1; },
                     [](const auto& p, int n) {
                         std::vector<double> a(p.begin(), p.begin() + n);
                         return scalar_of(std::make_shared<AffineSource>(a, p[n]), n, false, "affine_scalar");
                     }});
        e.push_back({"monomial", "scalar", "0", all, "[c, e_1..e_n] (non-negative integer exponents)", false,
                     [](int n, auto&) { return n + 1; },
                     [](const auto& p, int n) {
                         std::vector<int> ex(n);
                         for (int i = 0; i < n; ++i) {
                             if (!is_integer(p[1 + i]) || p[1 + i] < 0)
                                 throw ConfigError("monomial: exponents must be non-negative integers");
                             ex[i] = static_cast<int>(std::lround(p[1 + i]));
                         }
                         return scalar_of(std::make_shared<MonomialSource>(p[0], ex), n, false, "monomial");
                     }});
        e.push_back({"gaussian_bump", "scalar", "0", all, "[sigma]", false, [](int, auto&) { return 1; },
                     [](const auto& p, int n) {
                         if (!(p[0] > 0)) throw ConfigError("gaussian_bump: sigma must be positive");
                         return gaussian(p[0], std::vector<double>(n, 0.0));
                     }});
        e.push_back({"shifted_gaussian", "scalar", "0", all, "[sigma, c_1..c_n]", false,
                     [](int n, auto&) { return n + 1; },
                     [](const auto& p, int n) {
                         if (!(p[0] > 0)) throw ConfigError("shifted_gaussian: sigma must be positive");
                         return gaussian(p[0], std::vector<double>(p.begin() + 1, p.begin() + 1 + n));
                     }});
        e.push_back({"trig_scalar", "scalar", "0", all, "[c0, a, m_1..m_n, phase]: c0 + a sin(m.x + phase)", true,
                     [](int n, auto&) { return n + 3; },
                     [](const auto& p, int n) {
                         TrigTerm t{p[1], {}, p[2 + n]};
                         bool periodic = true;
                         for (int i = 0; i < n; ++i) {
                             t.wave[i] = p[2 + i];
                             periodic = periodic && is_integer(p[2 + i]);
                         }
                         return trig(p[0], {t}, n, periodic);
                     }});
        e.push_back({"periodic_bump", "scalar", "0", all, "[sigma]: exp((sum cos x_i - n)/sigma^2)", true,
                     [](int, auto&) { return 1; },
                     [](const auto& p, int n) {
                         if (!(p[0] > 0)) throw ConfigError("periodic_bump: sigma must be positive");
                         return scalar_of(std::make_shared<PeriodicBumpSource>(p[0]), n, true, "periodic_bump");
                     }});

        // ---- vectors
        e.push_back({"constant_vector", "vector", "1", all, "[c_1..c_n]", true, [](int n, auto&) { return n; },
                     [](const auto& p, int n) {
                         std::vector<FieldJet> c;
                         for (int i = 0; i < n; ++i) c.push_back(constant(p[i], n));
                         return make_vector(c);
                     }});
        e.push_back({"linear_vector", "vector", "1", all, "[A_11..A_nn (row-major), c_1..c_n]: A x + c", false,
                     [](int n, auto&) { return n * n + n; },
                     [](const auto& p, int n) {
                         std::vector<FieldJet> c;
                         for (int i = 0; i < n; ++i) {
                             std::vector<double> row(p.begin() + i * n, p.begin() + (i + 1) * n);
                             c.push_back(scalar_of(std::make_shared<AffineSource>(row, p[n * n + i]), n, false, "row"));
                         }
                         return make_vector(c);
                     }});
        e.push_back({"identity_vector", "vector", "1", all, "[]: u(x) = x", false, [](int, auto&) { return 0; },
                     [](const auto&, int n) {
                         std::vector<FieldJet> c;
                         for (int i = 0; i < n; ++i) c.push_back(coordinate(i, 1.0, n));
                         return make_vector(c);
                     }});
        e.push_back({"rigid_rotation", "vector", "1", {2, 3}, "[]: (-x_2, x_1[, 0])", false,
                     [](int, auto&) { return 0; },
                     [](const auto&, int n) {
                         std::vector<FieldJet> c{coordinate(1, -1.0, n), coordinate(0, 1.0, n)};
                         if (n == 3) c.push_back(constant(0.0, n));
                         return make_vector(c);
                     }});
        e.push_back({"shear", "vector", "1", {2, 3}, "[a]: (a x_2, 0[, 0])", false, [](int, auto&) { return 1; },
                     [](const auto& p, int n) {
                         std::vector<FieldJet> c{coordinate(1, p[0], n), constant(0.0, n)};
                         if (n == 3) c.push_back(constant(0.0, n));
                         return make_vector(c);
                     }});
        e.push_back({"gaussian_shear", "vector", "1", {2, 3}, "[a, sigma]: (a x_2 g(x), 0[, 0])", false,
                     [](int, auto&) { return 2; },
                     [](const auto& p, int n) {
                         if (!(p[1] > 0)) throw ConfigError("gaussian_shear: sigma must be positive");
                         auto g = gaussian(p[1], std::vector<double>(n, 0.0));
                         std::vector<FieldJet> c{product(coordinate(1, p[0], n), g), constant(0.0, n)};
                         if (n == 3) c.push_back(constant(0.0, n));
                         return make_vector(c);
                     }});
        e.push_back({"gaussian_swirl", "vector", "1", {2, 3}, "[a, sigma]: a g(x) (-x_2, x_1[, 0])", false,
                     [](int, auto&) { return 2; },
                     [](const auto& p, int n) {
                         if (!(p[1] > 0)) throw ConfigError("gaussian_swirl: sigma must be positive");
                         auto g = gaussian(p[1], std::vector<double>(n, 0.0));
                         std::vector<FieldJet> c{product(coordinate(1, -p[0], n), g), product(coordinate(0, p[0], n), g)};
                         if (n == 3) c.push_back(constant(0.0, n));
                         return make_vector(c);
                     }});
        e.push_back({"cellular_flow", "vector", "1", {2}, "[a]: a (sin x_1 cos x_2, -cos x_1 sin x_2)", true,
                     [](int, auto&) { return 1; },
                     [](const auto& p, int n) {
                         const double a = p[0];
                         // sin x1 cos x2 = (sin(x1+x2) + sin(x1-x2)) / 2
                         auto u1 = trig(0.0, {{a / 2, {1, 1, 0}, 0.0}, {a / 2, {1, -1, 0}, 0.0}}, n, true);
                         // -cos x1 sin x2 = -(sin(x1+x2) - sin(x1-x2)) / 2
                         auto u2 = trig(0.0, {{-a / 2, {1, 1, 0}, 0.0}, {a / 2, {1, -1, 0}, 0.0}}, n, true);
                         return make_vector({u1, u2});
                     }});
        auto abc_components = [](const std::vector<double>& p, int n) {
            const double A = p[0], B = p[1], C = p[2];
            auto u1 = trig(0.0, {{A, unit_wave(2), 0.0}, {C, unit_wave(1), kHalfPi}}, n, true);
            auto u2 = trig(0.0, {{B, unit_wave(0), 0.0}, {A, unit_wave(2), kHalfPi}}, n, true);
            auto u3 = trig(0.0, {{C, unit_wave(1), 0.0}, {B, unit_wave(0), kHalfPi}}, n, true);
            return std::vector<FieldJet>{u1, u2, u3};
        };
        e.push_back({"abc_flow", "vector", "1", {3},
                     "[A, B, C]: (A sin x3 + C cos x2, B sin x1 + A cos x3, C sin x2 + B cos x1)", true,
                     [](int, auto&) { return 3; },
                     [abc_components](const auto& p, int n) { return make_vector(abc_components(p, n)); }});
        e.push_back({"compressible_sine", "vector", "1", all, "[a_1..a_n]: u_i = a_i sin x_i", true,
                     [](int n, auto&) { return n; },
                     [](const auto& p, int n) {
                         std::vector<FieldJet> c;
                         for (int i = 0; i < n; ++i) c.push_back(trig(0.0, {{p[i], unit_wave(i), 0.0}}, n, true));
                         return make_vector(c);
                     }});
        e.push_back({"shear_sine", "vector", "1", {2, 3}, "[a]: (a sin x_2, 0[, 0])", true,
                     [](int, auto&) { return 1; },
                     [](const auto& p, int n) {
                         std::vector<FieldJet> c{trig(0.0, {{p[0], unit_wave(1), 0.0}}, n, true), constant(0.0, n)};
                         if (n == 3) c.push_back(constant(0.0, n));
                         return make_vector(c);
                     }});

        // ---- forms
        e.push_back({"constant_form", "kform", "param", all, "[k, c_1..c_C(n,k)]", true,
                     [](int n, const auto& p) { return form_param_count(n, p, 0); },
                     [](const auto& p, int n) {
                         const int k = static_cast<int>(p[0]);
                         std::vector<FieldJet> c;
                         for (int i = 0; i < binom(n, k); ++i) c.push_back(constant(p[1 + i], n));
                         return make_form(k, c);
                     }});
        e.push_back({"volume_form", "kform", "n", all, "[c]: c dx^1 ^ ... ^ dx^n", true,
                     [](int, auto&) { return 1; },
                     [](const auto& p, int n) { return make_form(n, {constant(p[0], n)}); }});
        e.push_back({"rotation_oneform", "kform", "1", {2}, "[]: (-x_2 dx^1 + x_1 dx^2) / 2", false,
                     [](int, auto&) { return 0; },
                     [](const auto&, int n) { return make_form(1, {coordinate(1, -0.5, n), coordinate(0, 0.5, n)}); }});
        e.push_back({"abc_oneform", "kform", "1", {3}, "[A, B, C]: ABC field as a 1-form", true,
                     [](int, auto&) { return 3; },
                     [abc_components](const auto& p, int n) { return make_form(1, abc_components(p, n)); }});
        e.push_back({"gaussian_oneform", "kform", "1", all, "[sigma, w_1..w_n]: g(x) sum w_i dx^i", false,
                     [](int n, auto&) { return n + 1; },
                     [](const auto& p, int n) {
                         if (!(p[0] > 0)) throw ConfigError("gaussian_oneform: sigma must be positive");
                         auto g = gaussian(p[0], std::vector<double>(n, 0.0));
                         std::vector<FieldJet> c;
                         for (int i = 0; i < n; ++i) c.push_back(scaled(p[1 + i], g));
                         return make_form(1, c);
                     }});
        e.push_back({"gaussian_form", "kform", "param", all, "[k, sigma, w_1..w_C(n,k)]: g(x) sum_I w_I dx^I", false,
                     [](int n, const auto& p) { return form_param_count(n, p, 1); },
                     [](const auto& p, int n) {
                         const int k = static_cast<int>(p[0]);
                         if (!(p[1] > 0)) throw ConfigError("gaussian_form: sigma must be positive");
                         auto g = gaussian(p[1], std::vector<double>(n, 0.0));
                         std::vector<FieldJet> c;
                         for (int i = 0; i < binom(n, k); ++i) c.push_back(scaled(p[2 + i], g));
                         return make_form(k, c);
                     }});
        e.push_back({"cellular_oneform", "kform", "1", {2}, "[a]: a (sin x_1 cos x_2 dx^1 - cos x_1 sin x_2 dx^2)",
                     true, [](int, auto&) { return 1; },
                     [](const auto& p, int n) {
                         const double a = p[0];
                         auto u1 = trig(0.0, {{a / 2, {1, 1, 0}, 0.0}, {a / 2, {1, -1, 0}, 0.0}}, n, true);
                         auto u2 = trig(0.0, {{-a / 2, {1, 1, 0}, 0.0}, {a / 2, {1, -1, 0}, 0.0}}, n, true);
                         return make_form(1, {u1, u2});
                     }});
        return e;
    }();
    return entries;
}

std::string join_dims(const std::vector<int>& dims) {
    std::ostringstream os;
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    return os.str();
}

}  // namespace

FieldJet catalog_field(const std::string& name, const std::vector<double>& params, int n) {
    for (const auto& entry : registry()) {
        if (entry.name != name) continue;
        if (std::find(entry.dims.begin(), entry.dims.end(), n) == entry.dims.end())
            throw ConfigError("catalog entry '" + name + "' does not support dimension " + std::to_string(n) +
                              " (supported: " + join_dims(entry.dims) + ")");
        const int expected = entry.param_count(n, params);
        if (expected < 0 || static_cast<int>(params.size()) != expected)
            throw ConfigError("catalog entry '" + name + "' expects parameters " + entry.params + " (got " +
                              std::to_string(params.size()) + ")");
        for (double p : params)
            if (!std::isfinite(p)) throw ConfigError("catalog entry '" + name + "': non-finite parameter");
        return entry.build(params, n);
    }
    throw ConfigError("unknown catalog entry '" + name + "'");
}

std::vector<std::string> catalog_names() {
    std::vector<std::string> names;
    for (const auto& e : registry()) names.push_back(e.name);
    return names;
}

json catalog_manifest() {
    json entries = json::array();
    for (const auto& e : registry()) {
        entries.push_back({{"name", e.name},
                           {"kind", e.kind},
                           {"degree", e.degree},
                           {"dimensions", e.dims},
                           {"params", e.params},
                           {"periodic", e.periodic}});
    }
    return {{"format", "kiw-field-catalog"}, {"version", 1}, {"entries", entries}};
}

FieldJet field_from_json(const json& spec, int n, const std::string& where) {
    if (!spec.is_object()) throw ConfigError(where + ": field spec must be an object");
    try {
        if (spec.contains("name")) {
            std::vector<double> params;
            if (spec.contains("params")) params = spec.at("params").get<std::vector<double>>();
            try {
                return catalog_field(spec.at("name").get<std::string>(), params, n);
            } catch (const ConfigError& e) {
                throw ConfigError(where + ".name: " + e.what());
            }
        }
        if (spec.contains("vector")) {
            std::vector<FieldJet> c;
            const auto& arr = spec.at("vector");
            for (std::size_t i = 0; i < arr.size(); ++i)
                c.push_back(field_from_json(arr[i], n, where + ".vector[" + std::to_string(i) + "]"));
            return make_vector(c);
        }
        if (spec.contains("form")) {
            const int k = spec.at("form").get<int>();
            std::vector<FieldJet> c;
            const auto& arr = spec.at("components");
            for (std::size_t i = 0; i < arr.size(); ++i)
                c.push_back(field_from_json(arr[i], n, where + ".components[" + std::to_string(i) + "]"));
            return make_form(k, c);
        }
        if (spec.contains("zero")) {
            const auto& z = spec.at("zero");
            if (z.is_string() && z == "scalar") return zero_field({FieldKind::scalar, n, 0});
            if (z.is_string() && z == "vector") return zero_field({FieldKind::vector, n, 1});
            if (z.is_number_integer()) return zero_field({FieldKind::kform, n, z.get<int>()});
            throw ConfigError(where + ".zero: expected \"scalar\", \"vector\" or a form degree");
        }
        if (spec.contains("modulate")) {
            const auto m = spec.at("modulate").get<std::vector<double>>();
            if (m.size() != 2) throw ConfigError(where + ".modulate: expected [amplitude, omega]");
            return modulated(field_from_json(spec.at("field"), n, where + ".field"), m[0], m[1]);
        }
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": field spec needs one of name/vector/form/zero/modulate");
}

}  // namespace kiw
