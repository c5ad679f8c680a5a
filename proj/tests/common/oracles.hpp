/// @file oracles.hpp
/// @brief Independent reference implementations and random instance generators shared by the test programs.
#pragma once

#include "kiw/catalog.hpp"
#include "kiw/exterior.hpp"
#include "kiw/flow.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace kiw::testing {

/// Random analytic instances drawn from the catalog.
struct Sampler {
    std::mt19937_64 rng;
    explicit Sampler(std::uint64_t seed) : rng(seed) {}
    double uni(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
    int pick(int count) { return std::uniform_int_distribution<int>(0, count - 1)(rng); }

    Vec point(int n) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x(i) = uni(-1.5, 1.5);
        return x;
    }
    std::vector<double> weights(int count) {
        std::vector<double> w;
        for (int i = 0; i < count; ++i) w.push_back(uni(-1.0, 1.0));
        return w;
    }
    FieldJet form(int n, int k) {
        const int C = binomial(n, k);
        std::vector<double> p;
        switch (pick(3)) {
            case 0: {
                if (k == 0) {
                    p = {uni(0.0, 1.0), uni(0.5, 1.5)};
                    for (int i = 0; i < n; ++i) p.push_back(1 + pick(2));
                    p.push_back(uni(0.0, 3.0));
                    return catalog_field("trig_scalar", p, n);
                }
                p = {static_cast<double>(k), uni(0.8, 1.6)};
                for (double w : weights(C)) p.push_back(w);
                return catalog_field("gaussian_form", p, n);
            }
            case 1: {
                if (k == 0) {
                    p = {uni(0.8, 1.5)};
                    for (int i = 0; i < n; ++i) p.push_back(uni(-0.5, 0.5));
                    return catalog_field("shifted_gaussian", p, n);
                }
                std::vector<FieldJet> comps;
                for (int c = 0; c < C; ++c) {
                    std::vector<double> q{uni(0.2, 1.0), uni(0.5, 1.5)};
                    for (int i = 0; i < n; ++i) q.push_back(1 + pick(2));
                    q.push_back(uni(0.0, 3.0));
                    comps.push_back(catalog_field("trig_scalar", q, n));
                }
                return make_form(k, comps);
            }
            default: {
                if (k == 0) {
                    p = {uni(0.5, 1.5)};
                    for (int i = 0; i < n; ++i) p.push_back(pick(3));
                    return catalog_field("monomial", p, n);
                }
                std::vector<FieldJet> comps;
                for (int c = 0; c < C; ++c) {
                    std::vector<double> q{uni(0.8, 1.5)};
                    for (int i = 0; i < n; ++i) q.push_back(uni(-0.5, 0.5));
                    comps.push_back(scaled(uni(-1.0, 1.0), catalog_field("shifted_gaussian", q, n)));
                }
                return make_form(k, comps);
            }
        }
    }
    FieldJet vector(int n) {
        switch (pick(4)) {
            case 0: return catalog_field("gaussian_swirl", {uni(0.3, 1.2), uni(0.8, 1.5)}, n);
            case 1: return catalog_field("compressible_sine", weights(n), n);
            case 2: {
                std::vector<double> p = weights(n * n + n);
                return catalog_field("linear_vector", p, n);
            }
            default: return catalog_field("gaussian_shear", {uni(0.3, 1.2), uni(0.8, 1.5)}, n);
        }
    }
};

/// (phi_eps^* K - phi_{-eps}^* K) / (2 eps) at x for phi_eps(x) = x + eps u(x).
inline KFormValue lie_by_pullback(const FieldJet& u, const FieldJet& K, const Vec& x, double eps) {
    const int n = K.dim();
    const int k = K.degree();
    const JetSample us = u.jet(0.0, x, 1);
    Mat Du(n, n);
    Vec uv(n);
    for (int i = 0; i < n; ++i) {
        uv(i) = us.value[i];
        for (int j = 0; j < n; ++j) Du(i, j) = us.d1[i][j];
    }
    auto pulled = [&](double e) {
        const Mat A = Mat::Identity(n, n) + e * Du;
        const JetSample ks = K.jet(0.0, x + e * uv, 0);
        return pullback_linear(A, form_value(ks, n, k));
    };
    KFormValue d = pulled(eps) - pulled(-eps);
    d *= 1.0 / (2.0 * eps);
    return d;
}


// Independent scalar oracle: f(t, phi_t x) for f(t, y) = f0(y) + t g(y) + sum_i W^i(t) h_i(y)
// along the Stratonovich flow, written from the scalar formula with Ito integrals:
//   f0(x) + int [g + b.grad f + 1/2 (xi_a xi_b d_ab f + xi_a d_a xi_b d_b f)] ds
//         + sum_i int h_i dW^i + sum_j int xi_j.grad f dB^j + sum_{i,j} int xi_j.grad h_i d[W^i, B^j]
// with trapezoid ds, left-point stochastic integrals and realized cross increments.


struct ScalarCase {
    int n = 1;
    FieldJet f0, g;
    std::vector<std::pair<FieldJet, int>> h;  // (h_i, channel of W^i)
    FlowModel model;
    int channels = 1;
};

struct OracleSides {
    std::vector<double> lhs, rhs;
};

inline OracleSides scalar_oracle(const ScalarCase& sc, const BrownianDriver& driver, const FlowSample& flow, int path, int seed) {
    const int n = sc.n;
    const double dt = driver.dt();
    const int L = driver.steps();
    struct Pt {
        double f = 0.0, drift = 0.0;
        std::vector<double> h, xif;
        std::vector<std::vector<double>> xih;  // [j][i]
    };
    auto at = [&](int step) {
        const double t = driver.time(step);
        const Vec y = flow.point(path, seed, step);
        const JetSample F0 = sc.f0.jet(0.0, y, 2), G = sc.g.jet(0.0, y, 2);
        // f and its derivatives at (t, y)
        double f = F0.value[0] + t * G.value[0];
        double df[3] = {0, 0, 0}, ddf[3][3] = {};
        for (int a = 0; a < n; ++a) {
            df[a] = F0.d1[0][a] + t * G.d1[0][a];
            for (int b = 0; b < n; ++b) ddf[a][b] = F0.d2[0][a][b] + t * G.d2[0][a][b];
        }
        Pt p;
        std::vector<JetSample> H;
        for (const auto& [hi, ch] : sc.h) {
            const JetSample s = hi.jet(0.0, y, 2);
            const double W = driver.value(path, ch, step);
            f += W * s.value[0];
            for (int a = 0; a < n; ++a) {
                df[a] += W * s.d1[0][a];
                for (int b = 0; b < n; ++b) ddf[a][b] += W * s.d2[0][a][b];
            }
            p.h.push_back(s.value[0]);
            H.push_back(s);
        }
        p.f = f;
        const JetSample B = sc.model.drift.jet(t, y, 1);
        double drift = G.value[0];
        for (int a = 0; a < n; ++a) drift += B.value[a] * df[a];
        for (const auto& nf : sc.model.noise) {
            const JetSample X = nf.field.jet(t, y, 1);
            double xf = 0.0;
            for (int a = 0; a < n; ++a) {
                xf += X.value[a] * df[a];
                for (int b = 0; b < n; ++b) drift += 0.5 * (X.value[a] * X.value[b] * ddf[a][b] + X.value[a] * X.d1[b][a] * df[b]);
            }
            p.xif.push_back(xf);
            std::vector<double> xh;
            for (const auto& s : H) {
                double v = 0.0;
                for (int a = 0; a < n; ++a) v += X.value[a] * s.d1[0][a];
                xh.push_back(v);
            }
            p.xih.push_back(xh);
        }
        p.drift = drift;
        return p;
    };
    OracleSides out;
    Pt prev = at(0);
    double rhs = prev.f;
    out.lhs.push_back(prev.f);
    out.rhs.push_back(rhs);
    for (int k = 0; k < L; ++k) {
        const Pt next = at(k + 1);
        rhs += 0.5 * dt * (prev.drift + next.drift);
        for (std::size_t i = 0; i < sc.h.size(); ++i) rhs += prev.h[i] * driver.increment(path, sc.h[i].second, k);
        for (std::size_t j = 0; j < sc.model.noise.size(); ++j) {
            const double dB = driver.increment(path, sc.model.noise[j].channel, k);
            rhs += prev.xif[j] * dB;
            for (std::size_t i = 0; i < sc.h.size(); ++i)
                if (sc.h[i].second == sc.model.noise[j].channel)
                    rhs += prev.xih[j][i] * driver.increment(path, sc.h[i].second, k) * dB;
        }
        out.lhs.push_back(next.f);
        out.rhs.push_back(rhs);
        prev = next;
    }
    return out;
}

inline ScalarCase random_scalar_case(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<int> pick(0, 1 << 20);
    ScalarCase sc;
    sc.n = 1 + pick(rng) % 3;
    const int n = sc.n;
    auto scalar = [&](int which) {
        std::vector<double> p;
        switch (which % 3) {
            case 0:
                p = {0.8 + 0.5 * std::abs(U(rng))};
                for (int i = 0; i < n; ++i) p.push_back(0.5 * U(rng));
                return catalog_field("shifted_gaussian", p, n);
            case 1:
                p = {U(rng), 0.5 + 0.5 * std::abs(U(rng))};
                for (int i = 0; i < n; ++i) p.push_back(1 + pick(rng) % 2);
                p.push_back(3.0 * std::abs(U(rng)));
                return catalog_field("trig_scalar", p, n);
            default:
                for (int i = 0; i < n; ++i) p.push_back(U(rng));
                p.push_back(U(rng));
                return catalog_field("affine_scalar", p, n);
        }
    };
    auto vec = [&](int which) {
        std::vector<double> p;
        if (n == 1 || which % 3 == 0) {
            for (int i = 0; i < n; ++i) p.push_back(0.6 * U(rng));
            return catalog_field("compressible_sine", p, n);
        }
        if (which % 3 == 1) return catalog_field("gaussian_swirl", {0.8 * U(rng), 1.0}, n);
        return catalog_field("gaussian_shear", {0.8 * U(rng), 1.2}, n);
    };
    sc.channels = 2;
    sc.f0 = scalar(pick(rng));
    sc.g = scalar(pick(rng));
    sc.h.push_back({scalar(pick(rng)), pick(rng) % 2});
    if (pick(rng) % 2) sc.h.push_back({scalar(pick(rng)), pick(rng) % 2});
    sc.model.drift = vec(pick(rng));
    sc.model.noise.push_back({vec(pick(rng)), pick(rng) % 2});
    if (pick(rng) % 2) sc.model.noise.push_back({vec(pick(rng)), pick(rng) % 2});
    return sc;
}


}  // namespace kiw::testing
