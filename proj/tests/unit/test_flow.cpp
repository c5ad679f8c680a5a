/// @file test_flow.cpp
/// @brief Brownian driver and stochastic flow: exact solutions, Jacobian oracles, inverse, dump format.
#include "doctest.h"

#include "kiw/brownian.hpp"
#include "kiw/catalog.hpp"
#include "kiw/flow.hpp"
#include "kiw/kiw.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace kiw;

namespace {

FlowModel model_of(FieldJet b, std::vector<NoiseField> xi, Scheme s = Scheme::stratonovich_heun) {
    FlowModel m;
    m.drift = std::move(b);
    m.noise = std::move(xi);
    m.scheme = s;
    return m;
}

Mat expm_series(const Mat& A) {
    Mat term = Mat::Identity(A.rows(), A.cols());
    Mat sum = term;
    for (int i = 1; i < 40; ++i) {
        term = term * A / static_cast<double>(i);
        sum += term;
    }
    return sum;
}

}  // namespace

TEST_CASE("driver is deterministic and independent of the path count") {
    const auto a = make_driver(42, 1.0, 1.0 / 64, 8, 2);
    const auto b = make_driver(42, 1.0, 1.0 / 64, 3, 2);
    const auto c = make_driver(43, 1.0, 1.0 / 64, 8, 2);
    for (int p = 0; p < 3; ++p)
        for (int ch = 0; ch < 2; ++ch)
            for (int k = 0; k < 64; ++k) CHECK(a.increment(p, ch, k) == b.increment(p, ch, k));
    CHECK(a.increment(0, 0, 0) != c.increment(0, 0, 0));
    CHECK(a.increment(0, 0, 0) != a.increment(0, 1, 0));
    CHECK_THROWS_AS(make_driver(1, 1.0, 0.3, 1, 1), ConfigError);
    CHECK_THROWS_AS(make_driver(1, 1.0, 0.25, 0, 1), ConfigError);
}

TEST_CASE("bridge refinement keeps the coarse path") {
    const auto d = make_driver(5, 1.0, 1.0 / 16, 4, 2);
    const auto f = refine(d);
    CHECK(f.steps() == 32);
    CHECK(f.dt() == 1.0 / 32);
    for (int p = 0; p < 4; ++p)
        for (int ch = 0; ch < 2; ++ch) {
            for (int k = 0; k < 16; ++k)
                CHECK(std::abs(f.increment(p, ch, 2 * k) + f.increment(p, ch, 2 * k + 1) - d.increment(p, ch, k)) <= 1e-15);
            CHECK(f.value(p, ch, 32) == doctest::Approx(d.value(p, ch, 16)).epsilon(1e-14));
        }
}

TEST_CASE("increment moments") {
    const double dt = 1.0 / 64;
    auto d = make_driver(9, 1.0, dt, 256, 1);
    for (int level = 0; level < 2; ++level) {
        if (level) d = refine(d);
        double s = 0.0, s2 = 0.0;
        long count = 0;
        for (int p = 0; p < 256; ++p)
            for (int k = 0; k < d.steps(); ++k) {
                const double x = d.increment(p, 0, k);
                s += x;
                s2 += x * x;
                ++count;
            }
        const double mean = s / count, var = s2 / count;
        // 5 standard errors
        CHECK(std::abs(mean) <= 5.0 * std::sqrt(d.dt() / count));
        CHECK(std::abs(var / d.dt() - 1.0) <= 5.0 * std::sqrt(2.0 / count));
    }
}

TEST_CASE("constant drift and additive noise are integrated exactly") {
    const auto driver = make_driver(3, 1.0, 1.0 / 32, 4, 1);
    const auto model = model_of(catalog_field("constant_vector", {0.5, -1.0}, 2),
                                {{catalog_field("constant_vector", {0.3, 0.2}, 2), 0}});
    const auto fs = integrate_flow(model, driver, {make_vec({0.1, 0.2})});
    for (int p = 0; p < 4; ++p) {
        const double B = driver.value(p, 0, 32);
        const Vec expect = make_vec({0.1 + 0.5 + 0.3 * B, 0.2 - 1.0 + 0.2 * B});
        CHECK((fs.point(p, 0, 32) - expect).norm() <= 1e-13);
        CHECK((fs.jacobian(p, 0, 32) - Mat::Identity(2, 2)).norm() <= 1e-15);
    }
}

TEST_CASE("geometric noise matches x exp(B_t): Heun order >= 0.5, Euler order one half") {
    for (Scheme s : {Scheme::stratonovich_heun, Scheme::ito_euler_corrected}) {
        const auto model = model_of(catalog_field("constant_vector", {0.0}, 1), {{catalog_field("identity_vector", {}, 1), 0}}, s);
        auto driver = make_driver(17, 1.0, 1.0 / 32, 128, 1);
        std::vector<double> dts, errs;
        for (int level = 0; level < 4; ++level) {
            if (level) driver = refine(driver);
            const auto fs = integrate_flow(model, driver, {make_vec({1.3})});
            double e2 = 0.0;
            for (int p = 0; p < 128; ++p) {
                const double exact = 1.3 * std::exp(driver.value(p, 0, driver.steps()));
                e2 += std::pow(fs.point(p, 0, driver.steps())(0) - exact, 2);
            }
            dts.push_back(driver.dt());
            errs.push_back(std::sqrt(e2 / 128));
        }
        const auto fit = fit_log2_slope(dts, errs);
        MESSAGE(to_string(s) << " slope " << fit.slope);
        // Euler-Maruyama has strong order exactly 1/2 here; allow fit noise
        CHECK(fit.slope >= (s == Scheme::stratonovich_heun ? 0.5 : 0.35));
    }
}

TEST_CASE("linear drift: J = exp(t A)") {
    Mat A(2, 2);
    A << 0.3, -1.0, 0.8, -0.2;
    const auto model = model_of(catalog_field("linear_vector", {0.3, -1.0, 0.8, -0.2, 0.0, 0.0}, 2), {});
    const auto driver = make_driver(1, 1.0, 1.0 / 1024, 1, 0);
    const auto fs = integrate_flow(model, driver, {make_vec({0.4, -0.7})});
    CHECK((fs.jacobian(0, 0, 1024) - expm_series(A)).norm() <= 1e-6);
}

TEST_CASE("Jacobian matches finite differences of the flow at dt = 2^-10") {
    const auto model = model_of(catalog_field("gaussian_swirl", {1.0, 1.0}, 2),
                                {{catalog_field("shear", {0.5}, 2), 0}, {catalog_field("gaussian_shear", {0.7, 1.2}, 2), 1}});
    const auto driver = make_driver(23, 1.0, 1.0 / 1024, 4, 2);
    const Vec x = make_vec({0.4, -0.3});
    const double h = 1e-5;
    FlowOptions fo;
    fo.want_inverse = true;
    const auto fs = integrate_flow(model, driver, {x, x + make_vec({h, 0}), x - make_vec({h, 0}), x + make_vec({0, h}), x - make_vec({0, h})}, fo);
    double worst = 0.0, inv = 0.0;
    for (int p = 0; p < 4; ++p)
        for (int step : {256, 1024}) {
            Mat fd(2, 2);
            fd.col(0) = (fs.point(p, 1, step) - fs.point(p, 2, step)) / (2 * h);
            fd.col(1) = (fs.point(p, 3, step) - fs.point(p, 4, step)) / (2 * h);
            const Mat J = fs.jacobian(p, 0, step);
            worst = std::max(worst, (J - fd).cwiseAbs().maxCoeff() / std::max(1.0, J.cwiseAbs().maxCoeff()));
            inv = std::max(inv, (J * fs.inverse_jacobian(p, 0, step) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff());
        }
    MESSAGE("worst " << worst << " inverse " << inv);
    CHECK(worst <= 1e-3);
    CHECK(inv <= 1e-8);
}

TEST_CASE("Stratonovich Heun and corrected Ito Euler approximate the same flow") {
    const auto xi = catalog_field("gaussian_shear", {0.8, 1.0}, 2);
    const auto b = catalog_field("rigid_rotation", {}, 2);
    auto driver = make_driver(31, 1.0, 1.0 / 64, 64, 1);
    std::vector<double> dts, errs;
    for (int level = 0; level < 4; ++level) {
        if (level) driver = refine(driver);
        const auto fh = integrate_flow(model_of(b, {{xi, 0}}), driver, {make_vec({0.3, 0.5})});
        const auto fe = integrate_flow(model_of(b, {{xi, 0}}, Scheme::ito_euler_corrected), driver, {make_vec({0.3, 0.5})});
        double e2 = 0.0;
        for (int p = 0; p < 64; ++p) e2 += (fh.point(p, 0, driver.steps()) - fe.point(p, 0, driver.steps())).squaredNorm();
        dts.push_back(driver.dt());
        errs.push_back(std::sqrt(e2 / 64));
    }
    const auto fit = fit_log2_slope(dts, errs);
    MESSAGE("slope " << fit.slope);
    CHECK(fit.slope >= 0.35);
}

TEST_CASE("Ito drift correction") {
    // xi = (a x2, 0): (xi . grad) xi = 0; xi = x: (xi . grad) xi = x
    const auto b = catalog_field("constant_vector", {0.0, 0.0}, 2);
    const Vec x = make_vec({0.4, 0.9});
    CHECK(ito_drift_correction(b, {catalog_field("shear", {1.5}, 2)}, 0.0, x).norm() == 0.0);
    CHECK((ito_drift_correction(b, {catalog_field("identity_vector", {}, 2)}, 0.0, x) - 0.5 * x).norm() <= 1e-15);
}

TEST_CASE("inverse flow") {
    const auto model = model_of(catalog_field("gaussian_swirl", {1.0, 1.0}, 2), {{catalog_field("shear", {0.5}, 2), 0}});
    const auto driver = make_driver(2, 1.0, 1.0 / 128, 2, 1);
    const Vec x = make_vec({0.2, 0.6});
    FlowOptions fo;
    fo.want_inverse = true;
    const auto fs = integrate_flow(model, driver, {x}, fo);
    for (int p = 0; p < 2; ++p) {
        const Vec y = fs.point(p, 0, 128);
        const auto ex = inverse_flow(model, driver, p, 128, y, InverseMethod::newton_exact);
        CHECK((ex.preimage - x).norm() <= 1e-10);
        CHECK((ex.jacobian - fs.inverse_jacobian(p, 0, 128)).cwiseAbs().maxCoeff() <= 1e-8);
        const auto rv = inverse_flow(model, driver, p, 128, y, InverseMethod::reversed_heun);
        CHECK((rv.preimage - x).norm() <= 1e-2);
    }
}

TEST_CASE("blow-up exclusion") {
    const auto model = model_of(catalog_field("linear_vector", {40.0, 0.0, 0.0, 40.0, 0.0, 0.0}, 2), {});
    const auto driver = make_driver(1, 1.0, 1.0 / 64, 2, 0);
    const auto fs = integrate_flow(model, driver, {make_vec({1.0, 1.0})});
    CHECK(fs.n_excluded() == 2);
    CHECK_THROWS_AS(check_exclusions(fs), NumericalError);
}

TEST_CASE("flow dump round trip") {
    const auto model = model_of(catalog_field("rigid_rotation", {}, 2), {{catalog_field("shear", {0.5}, 2), 0}});
    const auto driver = make_driver(77, 1.0, 1.0 / 16, 3, 1);
    FlowOptions fo;
    fo.want_inverse = true;
    const auto fs = integrate_flow(model, driver, {make_vec({0.1, 0.2}), make_vec({-1.0, 0.5})}, fo);
    const std::string file = (std::filesystem::temp_directory_path() / "kiw_flow_roundtrip.bin").string();
    write_flow_sample(file, fs, 77);
    std::uint64_t seed = 0;
    const auto back = read_flow_sample(file, &seed);
    std::remove(file.c_str());
    CHECK(seed == 77);
    CHECK(back.dim() == 2);
    CHECK(back.steps() == 16);
    CHECK(back.n_seeds() == 2);
    CHECK(back.has_inverse());
    CHECK(back.dt() == fs.dt());
    CHECK(back.raw() == fs.raw());
    CHECK_THROWS_AS(read_flow_sample(file), IoError);
}
