/// @file test_advect.cpp
/// @brief Characteristics solutions, torus diagnostics and the diamond pairing.
#include "doctest.h"

#include "kiw/advect.hpp"
#include "kiw/catalog.hpp"

#include <cmath>
#include <numbers>

using namespace kiw;

namespace {

FlowModel model_of(FieldJet b, std::vector<NoiseField> xi, Scheme s = Scheme::stratonovich_heun) {
    FlowModel m;
    m.drift = std::move(b);
    m.noise = std::move(xi);
    m.scheme = s;
    return m;
}

FlowModel torus_model2() {
    return model_of(catalog_field("cellular_flow", {0.6}, 2),
                    {{catalog_field("compressible_sine", {0.3, 0.2}, 2), 0},
                     {catalog_field("shear_sine", {0.4}, 2), 1}});
}

}  // namespace

TEST_CASE("advected fields equal the initial data at t = 0") {
    const auto driver = make_driver(5, 1.0, 1.0 / 32, 2, 2);
    const auto D0 = catalog_field("periodic_bump", {1.0}, 2);
    const auto f = advect(AdvectedKind::density, D0, torus_model2(), driver);
    const Vec y = make_vec({0.3, 1.1});
    CHECK(f.evaluate(1, 0.0, y)[0] == doctest::Approx(D0.value(0.0, y)(0)).epsilon(1e-15));
}

TEST_CASE("advect-then-pullback recovers the initial form at seed points") {
    const auto driver = make_driver(9, 1.0, 1.0 / 256, 3, 2);
    const auto model = torus_model2();
    const auto K0 = catalog_field("cellular_oneform", {1.0}, 2);
    const auto f = advect(AdvectedKind::kform, K0, model, driver);
    const std::vector<Vec> seeds{make_vec({0.4, 0.9}), make_vec({2.0, -1.0}), make_vec({4.5, 3.3})};
    const auto flow = integrate_flow(model, driver, seeds);
    double worst = 0.0;
    for (int p = 0; p < 3; ++p)
        for (int s = 0; s < 3; ++s) {
            const int L = driver.steps();
            const KFormValue Kt = f.evaluate(p, 1.0, flow.point(p, s, L));
            const KFormValue back = pullback_linear(flow.jacobian(p, s, L), Kt);
            JetSample js;
            K0.sample(0.0, seeds[static_cast<std::size_t>(s)], 0, js);
            const KFormValue ref = form_value(js, 2, 1);
            worst = std::max(worst, (back - ref).max_abs() / std::max(ref.max_abs(), 1e-300));
        }
    MESSAGE("worst relative " << worst);
    CHECK(worst <= 1e-6);
}

TEST_CASE("deterministic expansion b = x thins a unit density as exp(-t)") {
    const auto model = model_of(catalog_field("identity_vector", {}, 1), {});
    double prev_err = 0.0;
    for (int L : {64, 128, 256}) {
        const auto driver = make_driver(1, 1.0, 1.0 / L, 1, 0);
        const auto f = advect(AdvectedKind::density, catalog_field("constant_scalar", {1.0}, 1), model, driver);
        const double err = std::abs(f.evaluate(0, 1.0, make_vec({0.7}))[0] - std::exp(-1.0));
        CHECK(err <= 1e-4);
        if (prev_err > 0.0) CHECK(std::log2(prev_err / err) == doctest::Approx(2.0).epsilon(0.1));
        prev_err = err;
    }
}

TEST_CASE("constant density under incompressible transport stays constant") {
    const auto driver = make_driver(2, 1.0, 1.0 / 128, 4, 1);
    const auto model = model_of(catalog_field("rigid_rotation", {}, 2), {{catalog_field("constant_vector", {0.3, -0.5}, 2), 0}});
    const auto f = advect(AdvectedKind::density, catalog_field("constant_scalar", {2.5}, 2), model, driver);
    for (int p = 0; p < 4; ++p) CHECK(f.evaluate(p, 1.0, make_vec({0.2 * p, 1.0}))[0] == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("total mass is conserved pathwise on the torus") {
    const auto driver = make_driver(4, 1.0, 1.0 / 256, 2, 2);
    const auto f = advect(AdvectedKind::density, catalog_field("periodic_bump", {0.8}, 2), torus_model2(), driver);
    const QuadratureGrid g(2, 32);
    for (int p = 0; p < 2; ++p) {
        const double m0 = total_mass(f, g, p, 0.0);
        const double m1 = total_mass(f, g, p, 1.0);
        MESSAGE("mass drift " << std::abs(m1 - m0) / m0);
        CHECK(std::abs(m1 - m0) / m0 <= 1e-3);
    }
}

TEST_CASE("unit density has total mass (2 pi)^2") {
    const auto driver = make_driver(4, 1.0, 1.0 / 32, 1, 2);
    const auto f = advect(AdvectedKind::density, catalog_field("constant_scalar", {1.0}, 2), torus_model2(), driver);
    CHECK(total_mass(f, QuadratureGrid(2, 16), 0, 0.0) == doctest::Approx(4.0 * std::numbers::pi * std::numbers::pi));
}

TEST_CASE("magnetic potential: dB vanishes") {
    const auto driver = make_driver(6, 0.5, 1.0 / 64, 1, 1);
    const auto model = model_of(catalog_field("abc_flow", {1.0, 0.7, 0.4}, 3), {{catalog_field("compressible_sine", {0.2, 0.1, 0.3}, 3), 0}});
    const AdvectedMagnetic mag(catalog_field("abc_oneform", {1.0, 1.0, 1.0}, 3), model, driver);
    const auto dB = mag.dB(0, 0.5, make_vec({0.3, 1.2, 2.2}));
    const auto B = mag.B(0, 0.5, make_vec({0.3, 1.2, 2.2}));
    MESSAGE("|dB| " << dB.max_abs() << " |B| " << B.max_abs());
    CHECK(dB.max_abs() <= 1e-4);
}

TEST_CASE("diamond pairing on supported types") {
    const QuadratureGrid g(2, 32);
    const auto u = catalog_field("cellular_flow", {0.8}, 2);
    const auto a = catalog_field("periodic_bump", {1.0}, 2);
    const auto b = catalog_field("trig_scalar", {0.2, 1.0, 1.0, 2.0, 0.3}, 2);
    const auto d1 = diamond_pairing(b, a, DiamondType::scalar, u, g);
    const auto d2 = diamond_pairing(b, a, DiamondType::density, u, g);
    const auto bv = catalog_field("compressible_sine", {0.5, -0.4}, 2);
    const auto d3 = diamond_pairing(bv, catalog_field("cellular_oneform", {1.0}, 2), DiamondType::one_form,
                                    catalog_field("shear_sine", {0.7}, 2), g);
    MESSAGE(d1.lhs << " " << d1.defect() << " " << d2.lhs << " " << d2.defect() << " " << d3.lhs << " " << d3.defect());
    CHECK(d1.defect() <= 1e-6);
    CHECK(d2.defect() <= 1e-6);
    CHECK(d3.defect() <= 1e-6);
}
