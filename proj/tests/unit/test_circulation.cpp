/// @file test_circulation.cpp
/// @brief Loop advection, line integrals and the pathwise Kelvin check.
#include "doctest.h"

#include "kiw/catalog.hpp"
#include "kiw/circulation.hpp"
#include "kiw/kiw.hpp"

#include <cmath>
#include <numbers>

using namespace kiw;

namespace {

FlowModel model_of(FieldJet b, std::vector<NoiseField> xi) {
    FlowModel m;
    m.drift = std::move(b);
    m.noise = std::move(xi);
    return m;
}

const double kPi = std::numbers::pi;

}  // namespace

TEST_CASE("area form around the unit circle") {
    const auto v = catalog_field("rotation_oneform", {}, 2);
    const Loop c = circle_loop(make_vec({0.0, 0.0}), 1.0, 256);
    const double I = circulation(v, c);
    // chord-midpoint rule on a linear form gives the inscribed polygon area exactly
    CHECK(std::abs(I - kPi) <= 1e-3);
    CHECK(std::abs(I - 128.0 * std::sin(2.0 * kPi / 256)) <= 1e-12);
    CHECK(circulation(v, circle_loop(make_vec({0.0, 0.0}), 2.0, 256)) == doctest::Approx(4.0 * I).epsilon(1e-14));
}

TEST_CASE("kelvin F = 0 defect decays with dt under the reversed scheme") {
    const auto model = model_of(catalog_field("gaussian_swirl", {0.3, 1.0}, 2),
                                {{catalog_field("shear", {1.0}, 2), 0}, {catalog_field("gaussian_shear", {1.0, 1.0}, 2), 1}});
    const auto v0 = catalog_field("gaussian_oneform", {1.0, 1.0, -0.5}, 2);
    const Loop c = circle_loop(make_vec({0.2, 0.1}), 0.7, 1024);
    auto driver = make_driver(12, 1.0, 1.0 / 32, 4, 2);
    std::vector<double> dts, errs;
    for (int level = 0; level < 4; ++level) {
        if (level) driver = refine(driver);
        const auto r = kelvin_check(v0, FieldJet{}, model, driver, c);
        dts.push_back(driver.dt());
        errs.push_back(r.rms_terminal_defect());
        MESSAGE("dt " << driver.dt() << " defect " << errs.back());
    }
    const auto fit = fit_log2_slope(dts, errs);
    MESSAGE("slope " << fit.slope);
    CHECK(fit.slope >= 0.35);
}

TEST_CASE("rotation-invariant circulation under rigid rotation is exact") {
    const auto model = model_of(catalog_field("rigid_rotation", {}, 2), {});
    const auto driver = make_driver(1, 1.0, 1.0 / 256, 1, 0);
    KelvinOptions o;
    o.method = InverseMethod::newton_exact;
    const auto r = kelvin_check(catalog_field("rotation_oneform", {}, 2), FieldJet{}, model, driver,
                                circle_loop(make_vec({0.0, 0.0}), 1.0, 256), o);
    MESSAGE("defect " << r.max_abs_defect());
    CHECK(r.max_abs_defect() <= 1e-8);
}

TEST_CASE("change of variables on the advected loop") {
    const auto model = model_of(catalog_field("gaussian_swirl", {0.3, 1.0}, 2),
                                {{catalog_field("shear", {1.0}, 2), 0}, {catalog_field("gaussian_shear", {1.0, 1.0}, 2), 1}});
    const auto driver = make_driver(3, 1.0, 1.0 / 256, 2, 2);
    const KelvinField v(catalog_field("gaussian_oneform", {1.0, 1.0, -0.5}, 2),
                        catalog_field("gaussian_oneform", {0.8, 0.3, 0.2}, 2), model, &driver,
                        InverseMethod::newton_exact);
    const auto cv = change_of_variables(v, model, driver, circle_loop(make_vec({0.2, 0.1}), 0.7, 2048), 1, 256);
    MESSAGE(cv.advected << " " << cv.initial);
    CHECK(std::abs(cv.advected - cv.initial) <= 1e-6 * std::abs(cv.initial));
}
