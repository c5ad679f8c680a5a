/// @file advect.hpp
/// @brief Pathwise solutions of dK + L_b K dt + L_xi K o dW = 0 by characteristics, and
/// integral diagnostics on the periodic torus.
///
/// The solution at time t is the pushforward of the initial data, K(t) = (phi_t)_* K0,
/// evaluated as the pullback of K0 by the inverse flow psi = phi_t^{-1}.
#pragma once

#include "kiw/brownian.hpp"
#include "kiw/exterior.hpp"
#include "kiw/fields.hpp"
#include "kiw/flow.hpp"

#include <functional>
#include <string>
#include <vector>

namespace kiw {

enum class AdvectedKind { scalar, kform, density, magnetic_potential };

AdvectedKind advected_kind_from_string(const std::string& s);

class AdvectedField {
public:
    AdvectedField() = default;
    /// Density and scalar kinds take a scalar initial field; kform and magnetic_potential take
    /// a k-form (a 1-form for the potential).
    AdvectedField(AdvectedKind kind, FieldJet initial, FlowModel model, const BrownianDriver* driver,
                  InverseMethod method = InverseMethod::newton_exact);

    [[nodiscard]] AdvectedKind kind() const { return kind_; }
    [[nodiscard]] const FieldJet& initial() const { return initial_; }
    [[nodiscard]] const FlowModel& model() const { return model_; }
    [[nodiscard]] const BrownianDriver& driver() const { return *driver_; }
    [[nodiscard]] int dim() const { return initial_.dim(); }
    /// Degree of the returned value: 0 for scalar and density kinds.
    [[nodiscard]] int degree() const;

    /// Value at (t, y) on a path. scalar: s0(psi(y)); density: D0(psi(y)) det D psi(y);
    /// kform / magnetic_potential: psi^* K0 at y.
    [[nodiscard]] KFormValue evaluate(int path, double t, const Vec& y) const;
    /// Same, reusing an already computed inverse flow at y.
    [[nodiscard]] KFormValue evaluate_at(const InverseFlow& inv) const;
    [[nodiscard]] InverseFlow inverse(int path, double t, const Vec& y) const;

    /// Snapshot K(t, .) on one path as a finite-difference backed field.
    [[nodiscard]] FieldJet snapshot(int path, double t, double h = kDefaultFdStep) const;

private:
    AdvectedKind kind_ = AdvectedKind::scalar;
    FieldJet initial_;
    FlowModel model_;
    const BrownianDriver* driver_ = nullptr;
    InverseMethod method_ = InverseMethod::newton_exact;
};

AdvectedField advect(AdvectedKind kind, const FieldJet& initial, const FlowModel& model, const BrownianDriver& driver,
                     InverseMethod method = InverseMethod::newton_exact);

/// Advected potential A(t) and the magnetic field B(t) = dA(t).
class AdvectedMagnetic {
public:
    AdvectedMagnetic(const FieldJet& A0, const FlowModel& model, const BrownianDriver& driver,
                     InverseMethod method = InverseMethod::newton_exact, double fd_step = 1e-3);

    [[nodiscard]] const AdvectedField& potential() const { return A_; }
    [[nodiscard]] KFormValue A(int path, double t, const Vec& y) const { return A_.evaluate(path, t, y); }
    /// B = dA(t) by central differences of the reconstructed potential.
    [[nodiscard]] KFormValue B(int path, double t, const Vec& y) const;
    /// FD-backed jet of B(t, .) on one path.
    [[nodiscard]] FieldJet B_snapshot(int path, double t) const;
    /// d(B) at y: central differences of the FD-backed B. Zero-sized for n = 2.
    [[nodiscard]] KFormValue dB(int path, double t, const Vec& y) const;

private:
    AdvectedField A_;
    double h_;
};

/// Uniform periodic trapezoid rule on [0, 2 pi)^n.
class QuadratureGrid {
public:
    QuadratureGrid(int n, int N);

    [[nodiscard]] int dim() const { return n_; }
    [[nodiscard]] int per_axis() const { return N_; }
    [[nodiscard]] long size() const { return size_; }
    [[nodiscard]] double weight() const { return w_; }
    [[nodiscard]] Vec node(long i) const;
    /// Sum of weights, (2 pi)^n.
    [[nodiscard]] double total_weight() const { return w_ * static_cast<double>(size_); }
    /// Sum of w * f(node) in node order.
    [[nodiscard]] double integrate(const std::function<double(const Vec&)>& f) const;

private:
    int n_;
    int N_;
    long size_;
    double w_;
};

/// Throws ConfigError unless every field involved is 2 pi periodic.
void require_periodic(const AdvectedField& f);

double total_mass(const AdvectedField& density, const QuadratureGrid& grid, int path, double t);
/// S = int D Phi(s) d^n x with D and s sharing one flow.
double entropy_integral(const AdvectedField& density, const AdvectedField& s, const std::function<double(double)>& Phi,
                        const QuadratureGrid& grid, int path, double t);
/// int A ^ dA (n = 3) with dA(t) = psi^* dA0, the exterior derivative carried through
/// the pullback.
double magnetic_helicity(const AdvectedField& potential, const QuadratureGrid& grid, int path, double t);

struct DiagnosticFields {
    const AdvectedField* density = nullptr;
    const AdvectedField* scalar = nullptr;
    const AdvectedField* potential = nullptr;
    std::function<double(double)> Phi = [](double s) { return s; };
};

/// name in {total_mass, entropy_integral, magnetic_helicity}.
double integral_diagnostic(const std::string& name, const DiagnosticFields& fields, const QuadratureGrid& grid,
                           double t, int path);

/// Tensor type of the advected quantity a in the diamond pairing; b is of the dual type
/// (density for scalar a, scalar for density a, vector density for 1-form a).
enum class DiamondType { scalar, density, one_form };

struct DiamondPairing {
    double lhs = 0.0;  // int (b <> a) . u
    double rhs = 0.0;  // -int b . L_u a
    [[nodiscard]] double defect() const { return std::abs(lhs - rhs); }
};

/// Both sides of <b <> a, u> = -int b . L_u a by quadrature. Coordinate formulas:
///   scalar a, density b:    b <> a = -b grad a
///   density a, scalar b:    b <> a = a grad b
///   1-form a, vector b:     (b <> a)_i = a_i div b + b^j d_j a_i - b^j d_i a_j
DiamondPairing diamond_pairing(const FieldJet& b, const FieldJet& a, DiamondType a_type, const FieldJet& u,
                               const QuadratureGrid& grid, double t = 0.0);
double diamond_pairing_defect(const FieldJet& b, const FieldJet& a, DiamondType a_type, const FieldJet& u,
                              const QuadratureGrid& grid, double t = 0.0);

}  // namespace kiw
