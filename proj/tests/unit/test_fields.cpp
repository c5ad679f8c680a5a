/// @file test_fields.cpp
/// @brief Catalog entries against finite differences of their own values; FD backend on known functions.
#include "doctest.h"

#include "kiw/catalog.hpp"
#include "kiw/fields.hpp"
#include "kiw/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace kiw;

namespace {

/// Valid parameters for every catalog entry at dimension n.
std::vector<double> sample_params(const std::string& name, int n) {
    auto seq = [](int count, double start, double step) {
        std::vector<double> v;
        for (int i = 0; i < count; ++i) v.push_back(start + step * i);
        return v;
    };
    auto cat = [](std::vector<double> a, const std::vector<double>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    const int C1 = n, C2 = n == 1 ? 0 : (n == 2 ? 1 : 3);
    if (name == "constant_scalar") return {1.7};
    if (name == "affine_scalar") return cat(seq(n, 0.5, -0.3), {0.2});
    if (name == "monomial") return cat({1.3}, seq(n, 2, 1));
    if (name == "gaussian_bump") return {1.1};
    if (name == "shifted_gaussian") return cat({0.9}, seq(n, 0.2, -0.3));
    if (name == "trig_scalar") return cat(cat({0.3, 1.2}, seq(n, 1, 1)), {0.4});
    if (name == "periodic_bump") return {0.9};
    if (name == "constant_vector") return seq(n, 0.5, 0.25);
    if (name == "linear_vector") return cat(seq(n * n, -0.4, 0.15), seq(n, 0.1, 0.1));
    if (name == "identity_vector" || name == "rigid_rotation" || name == "rotation_oneform") return {};
    if (name == "shear" || name == "shear_sine" || name == "cellular_flow" || name == "cellular_oneform") return {0.8};
    if (name == "gaussian_shear" || name == "gaussian_swirl") return {0.7, 1.2};
    if (name == "abc_flow" || name == "abc_oneform") return {1.0, 0.7, 0.4};
    if (name == "compressible_sine") return seq(n, 0.3, 0.2);
    if (name == "volume_form") return {1.4};
    if (name == "gaussian_oneform") return cat({1.1}, seq(C1, 0.6, -0.4));
    if (name == "constant_form") return cat({static_cast<double>(n >= 2 ? 2 : 1)}, seq(n >= 2 ? C2 : C1, 0.4, 0.3));
    if (name == "gaussian_form") return cat({static_cast<double>(n >= 2 ? 2 : 1), 1.2}, seq(n >= 2 ? C2 : C1, 0.5, -0.3));
    FAIL("no sample parameters for " << name);
    return {};
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); }

}  // namespace

TEST_CASE("every catalog entry matches finite differences of its own values") {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    const auto manifest = catalog_manifest();
    int checked = 0;
    for (const auto& e : manifest.at("entries")) {
        const std::string name = e.at("name");
        for (int n : e.at("dimensions").get<std::vector<int>>()) {
            const FieldJet f = catalog_field(name, sample_params(name, n), n);
            REQUIRE(f.backend() == Backend::analytic);
            const FieldJet fd = fd_jet(f, 1e-4);
            double worst = 0.0;
            for (int p = 0; p < 100; ++p) {
                Vec x(n);
                for (int i = 0; i < n; ++i) x(i) = U(rng);
                const JetSample a = f.jet(0.0, x, 2);
                const JetSample b = fd.jet(0.0, x, 2);
                for (int c = 0; c < a.ncomp; ++c)
                    for (int l = 0; l < n; ++l) {
                        worst = std::max(worst, rel_gap(a.d1[c][l], b.d1[c][l]));
                        for (int m = 0; m < n; ++m) worst = std::max(worst, rel_gap(a.d2[c][l][m], b.d2[c][l][m]));
                    }
            }
            INFO(name << " n=" << n << " worst " << worst);
            CHECK(worst <= 1e-5);
            ++checked;
        }
    }
    CHECK(checked >= 40);
}

TEST_CASE("catalog evaluation is pure") {
    const FieldJet f = catalog_field("abc_flow", {1.0, 0.7, 0.4}, 3);
    const Vec x = make_vec({0.3, -1.1, 2.2});
    const JetSample a = f.jet(0.0, x), b = f.jet(0.0, x);
    for (int c = 0; c < 3; ++c) {
        CHECK(a.value[c] == b.value[c]);
        for (int l = 0; l < 3; ++l) CHECK(a.d1[c][l] == b.d1[c][l]);
    }
}

TEST_CASE("catalog examples") {
    const FieldJet u = catalog_field("constant_vector", {1.0, 0.0}, 2);
    const JetSample s = u.jet(0.0, make_vec({0.4, -2.0}));
    CHECK(s.value[0] == 1.0);
    CHECK(s.value[1] == 0.0);
    for (int c = 0; c < 2; ++c)
        for (int l = 0; l < 2; ++l) CHECK(s.d1[c][l] == 0.0);

    const FieldJet rot = catalog_field("rigid_rotation", {}, 2);
    const JetSample r = rot.jet(0.0, make_vec({0.7, 1.9}));
    CHECK(r.value[0] == doctest::Approx(-1.9));
    CHECK(r.value[1] == doctest::Approx(0.7));
    CHECK(r.d1[0][0] + r.d1[1][1] == 0.0);

    const FieldJet g = catalog_field("gaussian_bump", {1.0}, 2);
    const JetSample gs = g.jet(0.0, make_vec({0.0, 0.0}));
    CHECK(gs.value[0] == doctest::Approx(1.0));
    CHECK(gs.d1[0][0] == 0.0);
    CHECK(gs.d1[0][1] == 0.0);
}

TEST_CASE("catalog errors") {
    CHECK_THROWS_AS(catalog_field("no_such_field", {}, 2), ConfigError);
    CHECK_THROWS_AS(catalog_field("shear", {1.0, 2.0}, 2), ConfigError);
    CHECK_THROWS_AS(catalog_field("cellular_flow", {1.0}, 3), ConfigError);
}

TEST_CASE("finite-difference backend on known functions") {
    SUBCASE("x^2 at 3") {
        const FieldJet f = fd_jet({FieldKind::scalar, 1, 0}, [](double, const Vec& x, double* o) { o[0] = x(0) * x(0); });
        const JetSample s = f.jet(0.0, make_vec({3.0}));
        CHECK(std::abs(s.d1[0][0] - 6.0) <= 1e-8);
        CHECK(std::abs(s.d2[0][0][0] - 2.0) <= 1e-6);
    }
    SUBCASE("constant") {
        const FieldJet f = fd_jet({FieldKind::scalar, 2, 0}, [](double, const Vec&, double* o) { o[0] = 5.0; });
        const JetSample s = f.jet(0.0, make_vec({0.3, 0.1}));
        for (int l = 0; l < 2; ++l) {
            CHECK(s.d1[0][l] == 0.0);
            for (int m = 0; m < 2; ++m) CHECK(s.d2[0][l][m] == 0.0);
        }
    }
    SUBCASE("sin at 0") {
        const FieldJet f = fd_jet({FieldKind::scalar, 1, 0}, [](double, const Vec& x, double* o) { o[0] = std::sin(x(0)); });
        CHECK(std::abs(f.jet(0.0, make_vec({0.0})).d1[0][0] - 1.0) <= 1e-8);
    }
    SUBCASE("quadratic polynomials are exact to roundoff") {
        const FieldJet f = fd_jet({FieldKind::scalar, 2, 0},
                                  [](double, const Vec& x, double* o) { o[0] = 1.0 + 2.0 * x(0) - x(1) + 0.5 * x(0) * x(1); });
        const JetSample s = f.jet(0.0, make_vec({0.2, -0.4}));
        CHECK(std::abs(s.d1[0][0] - (2.0 + 0.5 * -0.4)) <= 1e-10);
        CHECK(std::abs(s.d2[0][0][1] - 0.5) <= 1e-6);
    }
    SUBCASE("non-finite samples are rejected") {
        const FieldJet f = fd_jet({FieldKind::scalar, 1, 0}, [](double, const Vec& x, double* o) { o[0] = std::log(x(0)); });
        CHECK_THROWS_AS(static_cast<void>(f.jet(0.0, make_vec({0.0})).value[0]), NumericalError);
    }
}

TEST_CASE("shipped catalog manifest matches the library") {
    const auto shipped = nlohmann::json::parse(read_text_file(std::string(KIW_SOURCE_DIR) + "/data/catalog.json"));
    CHECK(shipped == catalog_manifest());
}
