/// @file advect.cpp
/// @brief Advected fields, conserved integrals, magnetic two-form and diamond pairing.
#include "kiw/advect.hpp"

#include <cmath>
#include <numbers>

namespace kiw {

AdvectedKind advected_kind_from_string(const std::string& s) {
    if (s == "scalar") return AdvectedKind::scalar;
    if (s == "kform") return AdvectedKind::kform;
    if (s == "density") return AdvectedKind::density;
    if (s == "magnetic_potential") return AdvectedKind::magnetic_potential;
    throw ConfigError("unknown advected kind '" + s + "'");
}

AdvectedField::AdvectedField(AdvectedKind kind, FieldJet initial, FlowModel model, const BrownianDriver* driver,
                             InverseMethod method)
    : kind_(kind), initial_(std::move(initial)), model_(std::move(model)), driver_(driver), method_(method) {
    if (driver_ == nullptr) throw ConfigError("advect: driver required");
    if (!initial_.valid()) throw ConfigError("advect: initial field missing");
    model_.validate(driver_->n_channels());
    if (initial_.dim() != model_.dim()) throw ConfigError("advect: initial field and flow dimensions differ");
    if (initial_.time_dependent()) throw ConfigError("advect: initial field must be time-independent");
    switch (kind_) {
        case AdvectedKind::scalar:
        case AdvectedKind::density:
            if (initial_.kind() != FieldKind::scalar) throw ConfigError("advect: scalar or density needs a scalar field");
            break;
        case AdvectedKind::kform:
            if (initial_.kind() == FieldKind::vector) throw ConfigError("advect: kform needs a form field");
            break;
        case AdvectedKind::magnetic_potential:
            if (initial_.kind() != FieldKind::kform || initial_.degree() != 1)
                throw ConfigError("advect: magnetic potential must be a 1-form");
            if (initial_.dim() < 2) throw ConfigError("advect: magnetic potential needs n >= 2");
            break;
    }
}

int AdvectedField::degree() const {
    return (kind_ == AdvectedKind::scalar || kind_ == AdvectedKind::density) ? 0 : initial_.degree();
}

InverseFlow AdvectedField::inverse(int path, double t, const Vec& y) const {
    return inverse_flow(model_, *driver_, path, driver_->step_of(t), y, method_);
}

KFormValue AdvectedField::evaluate_at(const InverseFlow& inv) const {
    const int n = dim();
    JetSample s;
    initial_.sample(0.0, inv.preimage, 0, s);
    switch (kind_) {
        case AdvectedKind::scalar:
            return form_value(s, n, 0);
        case AdvectedKind::density: {
            KFormValue v = form_value(s, n, 0);
            v *= inv.jacobian.determinant();
            return v;
        }
        default:
            return pullback_linear(inv.jacobian, form_value(s, n, initial_.degree()));
    }
}

KFormValue AdvectedField::evaluate(int path, double t, const Vec& y) const { return evaluate_at(inverse(path, t, y)); }

FieldJet AdvectedField::snapshot(int path, double t, double h) const {
    const int n = dim();
    const int k = degree();
    FieldShape shape{k == 0 ? FieldKind::scalar : FieldKind::kform, n, k};
    AdvectedField self = *this;
    bool periodic = initial_.periodic() && model_.drift.periodic();
    for (const auto& x : model_.noise) periodic = periodic && x.field.periodic();
    return fd_jet(
        shape,
        [self, path, t](double, const Vec& y, double* out) {
            const KFormValue v = self.evaluate(path, t, y);
            for (int c = 0; c < v.size(); ++c) out[c] = v[c];
        },
        h, false, periodic);
}

AdvectedField advect(AdvectedKind kind, const FieldJet& initial, const FlowModel& model, const BrownianDriver& driver,
                     InverseMethod method) {
    return AdvectedField(kind, initial, model, &driver, method);
}

// ---------------------------------------------------------------------------------------
// Magnetic sector

AdvectedMagnetic::AdvectedMagnetic(const FieldJet& A0, const FlowModel& model, const BrownianDriver& driver,
                                   InverseMethod method, double fd_step)
    : A_(AdvectedKind::magnetic_potential, A0, model, &driver, method), h_(fd_step) {
    if (!(h_ > 0.0)) throw ConfigError("advect_magnetic: fd step must be positive");
}

KFormValue AdvectedMagnetic::B(int path, double t, const Vec& y) const {
    return exterior_derivative(A_.snapshot(path, t, h_), 0.0, y);
}

FieldJet AdvectedMagnetic::B_snapshot(int path, double t) const {
    const int n = A_.dim();
    const FieldJet Asnap = A_.snapshot(path, t, h_);
    FieldShape shape{FieldKind::kform, n, 2};
    return fd_jet(
        shape,
        [Asnap](double, const Vec& y, double* out) {
            const KFormValue v = exterior_derivative(Asnap, 0.0, y);
            for (int c = 0; c < v.size(); ++c) out[c] = v[c];
        },
        h_, false, Asnap.periodic());
}

KFormValue AdvectedMagnetic::dB(int path, double t, const Vec& y) const {
    return exterior_derivative(B_snapshot(path, t), 0.0, y, true);
}

// ---------------------------------------------------------------------------------------
// Quadrature

QuadratureGrid::QuadratureGrid(int n, int N) : n_(n), N_(N) {
    if (n < 1 || n > kMaxDim) throw ConfigError("quadrature: dimension must be 1, 2 or 3");
    if (N < 2) throw ConfigError("quadrature: need at least two nodes per axis");
    size_ = 1;
    for (int i = 0; i < n; ++i) size_ *= N;
    w_ = std::pow(2.0 * std::numbers::pi / N, n);
}

Vec QuadratureGrid::node(long i) const {
    Vec x(n_);
    const double h = 2.0 * std::numbers::pi / N_;
    for (int a = 0; a < n_; ++a) {
        x(a) = h * static_cast<double>(i % N_);
        i /= N_;
    }
    return x;
}

double QuadratureGrid::integrate(const std::function<double(const Vec&)>& f) const {
    double s = 0.0;
    for (long i = 0; i < size_; ++i) s += f(node(i));
    return s * w_;
}

void require_periodic(const AdvectedField& f) {
    if (!f.initial().periodic()) throw ConfigError("torus diagnostic: initial field is not periodic");
    if (!f.model().drift.periodic()) throw ConfigError("torus diagnostic: drift is not periodic");
    for (const auto& x : f.model().noise)
        if (!x.field.periodic()) throw ConfigError("torus diagnostic: noise field is not periodic");
}

double total_mass(const AdvectedField& density, const QuadratureGrid& grid, int path, double t) {
    if (density.kind() != AdvectedKind::density) throw ConfigError("total_mass needs a density");
    require_periodic(density);
    return grid.integrate([&](const Vec& y) { return density.evaluate(path, t, y)[0]; });
}

double entropy_integral(const AdvectedField& density, const AdvectedField& s, const std::function<double(double)>& Phi,
                        const QuadratureGrid& grid, int path, double t) {
    if (density.kind() != AdvectedKind::density || s.kind() != AdvectedKind::scalar)
        throw ConfigError("entropy_integral needs a density and a scalar");
    require_periodic(density);
    require_periodic(s);
    return grid.integrate([&](const Vec& y) {
        const InverseFlow inv = density.inverse(path, t, y);
        return density.evaluate_at(inv)[0] * Phi(s.evaluate_at(inv)[0]);
    });
}

double magnetic_helicity(const AdvectedField& potential, const QuadratureGrid& grid, int path, double t) {
    if (potential.kind() != AdvectedKind::magnetic_potential || potential.dim() != 3)
        throw ConfigError("magnetic_helicity needs a 3D magnetic potential");
    require_periodic(potential);
    const FieldJet& A0 = potential.initial();
    return grid.integrate([&](const Vec& y) {
        const InverseFlow inv = potential.inverse(path, t, y);
        const KFormValue A = potential.evaluate_at(inv);
        const KFormValue dA = pullback_linear(inv.jacobian, exterior_derivative(A0, 0.0, inv.preimage));
        return wedge(A, dA)[0];
    });
}

double integral_diagnostic(const std::string& name, const DiagnosticFields& f, const QuadratureGrid& grid, double t,
                           int path) {
    if (name == "total_mass") {
        if (f.density == nullptr) throw ConfigError("total_mass: density field missing");
        return total_mass(*f.density, grid, path, t);
    }
    if (name == "entropy_integral") {
        if (f.density == nullptr || f.scalar == nullptr) throw ConfigError("entropy_integral: fields missing");
        return entropy_integral(*f.density, *f.scalar, f.Phi, grid, path, t);
    }
    if (name == "magnetic_helicity") {
        if (f.potential == nullptr) throw ConfigError("magnetic_helicity: potential missing");
        return magnetic_helicity(*f.potential, grid, path, t);
    }
    throw ConfigError("unknown diagnostic '" + name + "'");
}

// ---------------------------------------------------------------------------------------
// Diamond pairing

DiamondPairing diamond_pairing(const FieldJet& b, const FieldJet& a, DiamondType a_type, const FieldJet& u,
                               const QuadratureGrid& grid, double t) {
    const int n = grid.dim();
    if (a.dim() != n || b.dim() != n || u.dim() != n) throw ConfigError("diamond: dimension mismatch");
    if (u.kind() != FieldKind::vector) throw ConfigError("diamond: u must be a vector field");
    if (!a.periodic() || !b.periodic() || !u.periodic()) throw ConfigError("diamond: fields must be periodic");
    switch (a_type) {
        case DiamondType::scalar:
        case DiamondType::density:
            if (a.kind() != FieldKind::scalar || b.kind() != FieldKind::scalar)
                throw ConfigError("diamond: scalar/density pairing needs scalar component fields");
            break;
        case DiamondType::one_form:
            if (a.kind() != FieldKind::kform || a.degree() != 1 || b.kind() != FieldKind::vector)
                throw ConfigError("diamond: 1-form pairing needs a 1-form a and a vector b");
            break;
    }

    JetSample as, bs, us;
    double lhs = 0.0, rhs = 0.0;
    for (long node = 0; node < grid.size(); ++node) {
        const Vec x = grid.node(node);
        a.sample(t, x, 1, as);
        b.sample(t, x, 1, bs);
        u.sample(t, x, 1, us);
        double l = 0.0, r = 0.0;
        switch (a_type) {
            case DiamondType::scalar:
                for (int i = 0; i < n; ++i) {
                    l += -bs.value[0] * as.d1[0][i] * us.value[i];
                    r += -bs.value[0] * us.value[i] * as.d1[0][i];
                }
                break;
            case DiamondType::density: {
                double div_au = 0.0;
                for (int i = 0; i < n; ++i) {
                    div_au += as.d1[0][i] * us.value[i] + as.value[0] * us.d1[i][i];
                    l += as.value[0] * bs.d1[0][i] * us.value[i];
                }
                r = -bs.value[0] * div_au;
                break;
            }
            case DiamondType::one_form: {
                double divb = 0.0;
                for (int j = 0; j < n; ++j) divb += bs.d1[j][j];
                for (int i = 0; i < n; ++i) {
                    double c = as.value[i] * divb;
                    for (int j = 0; j < n; ++j) c += bs.value[j] * (as.d1[i][j] - as.d1[j][i]);
                    l += us.value[i] * c;
                }
                for (int j = 0; j < n; ++j) {
                    double lie = 0.0;
                    for (int i = 0; i < n; ++i) lie += us.value[i] * as.d1[j][i] + as.value[i] * us.d1[i][j];
                    r += -bs.value[j] * lie;
                }
                break;
            }
        }
        lhs += l;
        rhs += r;
    }
    return {lhs * grid.weight(), rhs * grid.weight()};
}

double diamond_pairing_defect(const FieldJet& b, const FieldJet& a, DiamondType a_type, const FieldJet& u,
                              const QuadratureGrid& grid, double t) {
    return diamond_pairing(b, a, a_type, u, grid, t).defect();
}

}  // namespace kiw
