/// @file fields.hpp
/// @brief Evaluatable smooth fields reporting value, gradient and Hessian per component.
///
/// A FieldJet is an immutable handle to a field source. Sources are either
/// analytic (catalog entries and combinators built from them) or a central
/// finite-difference wrapper around a plain component function.
#pragma once

#include "kiw/types.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>

namespace kiw {

enum class FieldKind { scalar, vector, kform };
enum class Backend { analytic, finite_difference };

/// Components of a field and their first and second partials at one point.
/// Component count never exceeds three for n <= 3 (vectors, or C(n,k) form components).
struct JetSample {
    int ncomp = 0;
    int dim = 0;
    std::array<double, 3> value{};
    std::array<std::array<double, 3>, 3> d1{};                    // d1[c][l] = d_l value[c]
    std::array<std::array<std::array<double, 3>, 3>, 3> d2{};     // d2[c][l][m]

    void reset(int components, int n) {
        ncomp = components;
        dim = n;
        value.fill(0.0);
        for (auto& r : d1) r.fill(0.0);
        for (auto& a : d2)
            for (auto& r : a) r.fill(0.0);
    }
    /// this += s * other, up to the given derivative order.
    void axpy(double s, const JetSample& other, int order);
};

/// Implementation interface for field sources. `order` is the highest
/// derivative order the caller needs (0, 1 or 2); sources may fill more.
class FieldSource {
public:
    virtual ~FieldSource() = default;
    virtual void sample(double t, const Vec& x, int order, JetSample& out) const = 0;
};

struct FieldShape {
    FieldKind kind = FieldKind::scalar;
    int dim = 1;
    int degree = 0;  // form degree; 0 for scalar, 1 for vector (unused)
};

int component_count(const FieldShape& shape);

class FieldJet {
public:
    FieldJet() = default;
    FieldJet(FieldShape shape, std::shared_ptr<const FieldSource> source, Backend backend,
             bool time_dependent = false, bool periodic = false, double fd_step = 0.0,
             std::string label = {});

    [[nodiscard]] bool valid() const { return source_ != nullptr; }
    [[nodiscard]] FieldKind kind() const { return shape_.kind; }
    [[nodiscard]] const FieldShape& shape() const { return shape_; }
    [[nodiscard]] int dim() const { return shape_.dim; }
    /// Form degree: 0 for scalars, k for k-forms. Throws for vector fields.
    [[nodiscard]] int degree() const;
    [[nodiscard]] int components() const { return component_count(shape_); }
    [[nodiscard]] Backend backend() const { return backend_; }
    [[nodiscard]] bool time_dependent() const { return time_dependent_; }
    /// True when the field is 2*pi periodic in every coordinate.
    [[nodiscard]] bool periodic() const { return periodic_; }
    [[nodiscard]] double fd_step() const { return fd_step_; }
    [[nodiscard]] const std::string& label() const { return label_; }

    void sample(double t, const Vec& x, int order, JetSample& out) const;
    [[nodiscard]] JetSample jet(double t, const Vec& x, int order = 2) const;
    /// Component values only.
    [[nodiscard]] Vec value(double t, const Vec& x) const;

private:
    FieldShape shape_{};
    std::shared_ptr<const FieldSource> source_;
    Backend backend_ = Backend::analytic;
    bool time_dependent_ = false;
    bool periodic_ = false;
    double fd_step_ = 0.0;
    std::string label_;
};

/// Plain component function used by the finite-difference backend.
/// Writes ncomp values for (t, x).
using ComponentFn = std::function<void(double t, const Vec& x, double* out)>;

inline constexpr double kDefaultFdStep = 1e-4;

/// Wrap a component function with central second-order difference stencils.
/// Throws NumericalError if a stencil sample is non-finite.
FieldJet fd_jet(FieldShape shape, ComponentFn eval, double h = kDefaultFdStep,
                bool time_dependent = false, bool periodic = false);

/// Re-back an existing field by finite differences of its own values.
FieldJet fd_jet(const FieldJet& field, double h = kDefaultFdStep);

// Combinators over analytic sources. Results are analytic when inputs are.

/// Vector field assembled from n scalar fields.
FieldJet make_vector(const std::vector<FieldJet>& components);
/// k-form assembled from C(n,k) scalar component fields (increasing multi-index order).
FieldJet make_form(int degree, const std::vector<FieldJet>& components);
/// Linear combination sum_i c_i F_i of same-shaped fields.
FieldJet linear_combination(const std::vector<double>& coeffs, const std::vector<FieldJet>& fields);
FieldJet scaled(double c, const FieldJet& f);
/// Zero field of the given shape.
FieldJet zero_field(FieldShape shape);
/// (1 + amplitude * sin(omega t)) * F: time-dependent wrapper.
FieldJet modulated(const FieldJet& f, double amplitude, double omega);

}  // namespace kiw
