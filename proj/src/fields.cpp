/// @file fields.cpp
/// @brief Field jets and the finite-difference backend.
#include "kiw/fields.hpp"

#include <cmath>
#include <utility>

namespace kiw {

namespace {

int binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    int r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

class FiniteDifferenceSource final : public FieldSource {
public:
    FiniteDifferenceSource(int ncomp, int dim, ComponentFn fn, double h)
        : ncomp_(ncomp), dim_(dim), fn_(std::move(fn)), h_(h) {}

    void sample(double t, const Vec& x, int order, JetSample& out) const override {
        out.reset(ncomp_, dim_);
        std::array<double, 3> f0{};
        probe(t, x, f0.data());
        for (int c = 0; c < ncomp_; ++c) out.value[c] = f0[c];
        if (order < 1) return;

        const double h = h_;
        std::array<std::array<double, 3>, 3> fp{}, fm{};
        Vec y = x;
        for (int l = 0; l < dim_; ++l) {
            y(l) = x(l) + h;
            probe(t, y, fp[l].data());
            y(l) = x(l) - h;
            probe(t, y, fm[l].data());
            y(l) = x(l);
            for (int c = 0; c < ncomp_; ++c) out.d1[c][l] = (fp[l][c] - fm[l][c]) / (2.0 * h);
        }
        if (order < 2) return;

        for (int l = 0; l < dim_; ++l) {
            for (int c = 0; c < ncomp_; ++c)
                out.d2[c][l][l] = (fp[l][c] - 2.0 * f0[c] + fm[l][c]) / (h * h);
            for (int m = l + 1; m < dim_; ++m) {
                std::array<double, 3> fpp{}, fpm{}, fmp{}, fmm{};
                y(l) = x(l) + h; y(m) = x(m) + h; probe(t, y, fpp.data());
                y(m) = x(m) - h; probe(t, y, fpm.data());
                y(l) = x(l) - h; probe(t, y, fmm.data());
                y(m) = x(m) + h; probe(t, y, fmp.data());
                y(l) = x(l); y(m) = x(m);
                for (int c = 0; c < ncomp_; ++c) {
                    const double v = (fpp[c] - fpm[c] - fmp[c] + fmm[c]) / (4.0 * h * h);
                    out.d2[c][l][m] = v;
                    out.d2[c][m][l] = v;
                }
            }
        }
    }

private:
    void probe(double t, const Vec& x, double* out) const {
        fn_(t, x, out);
        for (int c = 0; c < ncomp_; ++c)
            if (!std::isfinite(out[c])) throw NumericalError("fd_jet: non-finite sample on stencil");
    }

    int ncomp_;
    int dim_;
    ComponentFn fn_;
    double h_;
};

class ComponentsSource final : public FieldSource {
public:
    explicit ComponentsSource(std::vector<FieldJet> parts) : parts_(std::move(parts)) {}

    void sample(double t, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        out.reset(static_cast<int>(parts_.size()), n);
        JetSample s;
        for (std::size_t c = 0; c < parts_.size(); ++c) {
            parts_[c].sample(t, x, order, s);
            out.value[c] = s.value[0];
            out.d1[c] = s.d1[0];
            out.d2[c] = s.d2[0];
        }
    }

private:
    std::vector<FieldJet> parts_;
};

class LinearCombinationSource final : public FieldSource {
public:
    LinearCombinationSource(std::vector<double> coeffs, std::vector<FieldJet> fields, int ncomp)
        : coeffs_(std::move(coeffs)), fields_(std::move(fields)), ncomp_(ncomp) {}

    void sample(double t, const Vec& x, int order, JetSample& out) const override {
        out.reset(ncomp_, static_cast<int>(x.size()));
        JetSample s;
        for (std::size_t i = 0; i < fields_.size(); ++i) {
            fields_[i].sample(t, x, order, s);
            out.axpy(coeffs_[i], s, order);
        }
    }

private:
    std::vector<double> coeffs_;
    std::vector<FieldJet> fields_;
    int ncomp_;
};

class ZeroSource final : public FieldSource {
public:
    explicit ZeroSource(int ncomp) : ncomp_(ncomp) {}
    void sample(double, const Vec& x, int, JetSample& out) const override {
        out.reset(ncomp_, static_cast<int>(x.size()));
    }

private:
    int ncomp_;
};

class ModulatedSource final : public FieldSource {
public:
    ModulatedSource(FieldJet f, double a, double w) : f_(std::move(f)), a_(a), w_(w) {}
    void sample(double t, const Vec& x, int order, JetSample& out) const override {
        JetSample s;
        f_.sample(t, x, order, s);
        out.reset(s.ncomp, s.dim);
        out.axpy(1.0 + a_ * std::sin(w_ * t), s, order);
    }

private:
    FieldJet f_;
    double a_;
    double w_;
};

bool same_shape(const FieldShape& a, const FieldShape& b) {
    return a.kind == b.kind && a.dim == b.dim && (a.kind != FieldKind::kform || a.degree == b.degree);
}

}  // namespace

void JetSample::axpy(double s, const JetSample& other, int order) {
    for (int c = 0; c < ncomp; ++c) {
        value[c] += s * other.value[c];
        if (order < 1) continue;
        for (int l = 0; l < dim; ++l) {
            d1[c][l] += s * other.d1[c][l];
            if (order < 2) continue;
            for (int m = 0; m < dim; ++m) d2[c][l][m] += s * other.d2[c][l][m];
        }
    }
}

int component_count(const FieldShape& shape) {
    switch (shape.kind) {
        case FieldKind::scalar: return 1;
        case FieldKind::vector: return shape.dim;
        case FieldKind::kform: return binomial(shape.dim, shape.degree);
    }
    return 0;
}

FieldJet::FieldJet(FieldShape shape, std::shared_ptr<const FieldSource> source, Backend backend,
                   bool time_dependent, bool periodic, double fd_step, std::string label)
    : shape_(shape),
      source_(std::move(source)),
      backend_(backend),
      time_dependent_(time_dependent),
      periodic_(periodic),
      fd_step_(fd_step),
      label_(std::move(label)) {
    if (shape_.dim < 1 || shape_.dim > kMaxDim) throw ConfigError("field dimension must be 1, 2 or 3");
    if (shape_.kind == FieldKind::kform && (shape_.degree < 0 || shape_.degree > shape_.dim))
        throw ConfigError("form degree out of range");
    if (shape_.kind == FieldKind::scalar) shape_.degree = 0;
}

int FieldJet::degree() const {
    if (shape_.kind == FieldKind::vector) throw ConfigError("vector field has no form degree");
    return shape_.degree;
}

void FieldJet::sample(double t, const Vec& x, int order, JetSample& out) const {
    if (x.size() != shape_.dim) throw ConfigError("field evaluated at point of wrong dimension");
    source_->sample(t, x, order, out);
}

JetSample FieldJet::jet(double t, const Vec& x, int order) const {
    JetSample s;
    sample(t, x, order, s);
    return s;
}

Vec FieldJet::value(double t, const Vec& x) const {
    JetSample s;
    sample(t, x, 0, s);
    Vec v(s.ncomp);
    for (int c = 0; c < s.ncomp; ++c) v(c) = s.value[c];
    return v;
}

FieldJet fd_jet(FieldShape shape, ComponentFn eval, double h, bool time_dependent, bool periodic) {
    if (!(h > 0.0)) throw ConfigError("fd_jet: step must be positive");
    const int ncomp = component_count(shape);
    return FieldJet(shape, std::make_shared<FiniteDifferenceSource>(ncomp, shape.dim, std::move(eval), h),
                    Backend::finite_difference, time_dependent, periodic, h, "fd");
}

FieldJet fd_jet(const FieldJet& field, double h) {
    auto f = field;
    ComponentFn fn = [f](double t, const Vec& x, double* out) {
        JetSample s;
        f.sample(t, x, 0, s);
        for (int c = 0; c < s.ncomp; ++c) out[c] = s.value[c];
    };
    FieldJet r = fd_jet(field.shape(), std::move(fn), h, field.time_dependent(), field.periodic());
    return r;
}

FieldJet make_vector(const std::vector<FieldJet>& components) {
    if (components.empty() || components.size() > kMaxDim) throw ConfigError("make_vector: need 1..3 components");
    const int n = components.front().dim();
    if (static_cast<int>(components.size()) != n)
        throw ConfigError("make_vector: component count must equal dimension");
    bool td = false, periodic = true, analytic = true;
    for (const auto& c : components) {
        if (c.kind() != FieldKind::scalar || c.dim() != n) throw ConfigError("make_vector: components must be scalars of equal dimension");
        td = td || c.time_dependent();
        periodic = periodic && c.periodic();
        analytic = analytic && c.backend() == Backend::analytic;
    }
    return FieldJet({FieldKind::vector, n, 1}, std::make_shared<ComponentsSource>(components),
                    analytic ? Backend::analytic : Backend::finite_difference, td, periodic);
}

FieldJet make_form(int degree, const std::vector<FieldJet>& components) {
    if (components.empty()) throw ConfigError("make_form: need components");
    const int n = components.front().dim();
    const FieldShape shape{FieldKind::kform, n, degree};
    if (degree < 0 || degree > n) throw ConfigError("make_form: degree out of range");
    if (static_cast<int>(components.size()) != component_count(shape))
        throw ConfigError("make_form: expected C(n,k) components");
    bool td = false, periodic = true, analytic = true;
    for (const auto& c : components) {
        if (c.kind() != FieldKind::scalar || c.dim() != n) throw ConfigError("make_form: components must be scalars of equal dimension");
        td = td || c.time_dependent();
        periodic = periodic && c.periodic();
        analytic = analytic && c.backend() == Backend::analytic;
    }
    return FieldJet(shape, std::make_shared<ComponentsSource>(components),
                    analytic ? Backend::analytic : Backend::finite_difference, td, periodic);
}

FieldJet linear_combination(const std::vector<double>& coeffs, const std::vector<FieldJet>& fields) {
    if (fields.empty() || coeffs.size() != fields.size()) throw ConfigError("linear_combination: size mismatch");
    const FieldShape shape = fields.front().shape();
    bool td = false, periodic = true, analytic = true;
    for (const auto& f : fields) {
        if (!same_shape(f.shape(), shape)) throw ConfigError("linear_combination: shape mismatch");
        td = td || f.time_dependent();
        periodic = periodic && f.periodic();
        analytic = analytic && f.backend() == Backend::analytic;
    }
    return FieldJet(shape, std::make_shared<LinearCombinationSource>(coeffs, fields, component_count(shape)),
                    analytic ? Backend::analytic : Backend::finite_difference, td, periodic);
}

FieldJet scaled(double c, const FieldJet& f) { return linear_combination({c}, {f}); }

FieldJet zero_field(FieldShape shape) {
    return FieldJet(shape, std::make_shared<ZeroSource>(component_count(shape)), Backend::analytic, false, true, 0.0,
                    "zero");
}

FieldJet modulated(const FieldJet& f, double amplitude, double omega) {
    return FieldJet(f.shape(), std::make_shared<ModulatedSource>(f, amplitude, omega), f.backend(), true,
                    f.periodic());
}

}  // namespace kiw
