/// @file exterior.cpp
/// @brief Pointwise exterior calculus on k-form values and jets.
#include "kiw/exterior.hpp"

#include <algorithm>
#include <cmath>

namespace kiw {

namespace {

using Basis = std::vector<MultiIndex>;

Basis build_basis(int n, int k) {
    Basis out;
    if (k < 0 || k > n) return out;
    MultiIndex I;
    I.degree = k;
    for (int a = 0; a < k; ++a) I.idx[a] = a;
    while (true) {
        out.push_back(I);
        int a = k - 1;
        while (a >= 0 && I.idx[a] == n - k + a) --a;
        if (a < 0) break;
        ++I.idx[a];
        for (int b = a + 1; b < k; ++b) I.idx[b] = I.idx[b - 1] + 1;
    }
    return out;
}

/// Sort a small index tuple; returns the permutation sign, or 0 on a repeated index.
int sort_with_sign(std::array<int, 4>& v, int len) {
    int sign = 1;
    for (int i = 1; i < len; ++i)
        for (int j = i; j > 0 && v[j - 1] > v[j]; --j) {
            std::swap(v[j - 1], v[j]);
            sign = -sign;
        }
    for (int i = 1; i < len; ++i)
        if (v[i] == v[i - 1]) return 0;
    return sign;
}

double det_small(const std::array<std::array<double, 3>, 3>& m, int k) {
    switch (k) {
        case 0: return 1.0;
        case 1: return m[0][0];
        case 2: return m[0][0] * m[1][1] - m[0][1] * m[1][0];
        case 3:
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        default: return 0.0;
    }
}

void check_dim(int n) {
    if (n < 1 || n > kMaxDim) throw ConfigError("dimension must be 1, 2 or 3");
}

Vec unit(int n, int i) {
    Vec e = Vec::Zero(n);
    e(i) = 1.0;
    return e;
}

/// Components of a k-linear alternating map given as a callable on k basis-derived vectors.
template <class F>
KFormValue components_from(int n, int k, F&& eval_on) {
    KFormValue out(n, k);
    const auto& basis = form_basis(n, k);
    std::array<Vec, 3> vs;
    for (std::size_t b = 0; b < basis.size(); ++b) {
        for (int a = 0; a < k; ++a) vs[a] = unit(n, basis[b].idx[a]);
        out[static_cast<int>(b)] = eval_on(std::span<const Vec>(vs.data(), k));
    }
    return out;
}

Mat grad_matrix(const JetSample& u, int n) {
    Mat D(n, n);
    for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) D(i, l) = u.d1[i][l];
    return D;
}

Vec vec_value(const JetSample& u, int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = u.value[i];
    return v;
}

/// Directional derivative (u . grad) K as a form value.
KFormValue advective_derivative(const Vec& u, const JetSample& K, int n, int k) {
    KFormValue out(n, k);
    for (int c = 0; c < out.size(); ++c) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += u(l) * K.d1[c][l];
        out[c] = s;
    }
    return out;
}

/// Sum over slots p of K(v_1, ..., A v_p, ..., v_k).
double slot_sum(const KFormValue& K, std::span<const Vec> v, const Mat& A) {
    const int k = static_cast<int>(v.size());
    std::array<Vec, 3> w;
    double s = 0.0;
    for (int p = 0; p < k; ++p) {
        for (int a = 0; a < k; ++a) w[a] = v[a];
        w[p] = A * v[p];
        s += contract(K, std::span<const Vec>(w.data(), k));
    }
    return s;
}

// --------------------------------------------------------------------------- jet combinators

class LieDerivativeJetSource final : public FieldSource {
public:
    LieDerivativeJetSource(FieldJet u, FieldJet K) : u_(std::move(u)), K_(std::move(K)) {}
    void sample(double t, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        const int k = K_.degree();
        JetSample us, Ks;
        u_.sample(t, x, order >= 1 ? 2 : 1, us);
        K_.sample(t, x, order >= 1 ? 2 : 1, Ks);
        const KFormValue L = lie_derivative(us, Ks, n, k);
        out.reset(L.size(), n);
        for (int c = 0; c < L.size(); ++c) out.value[c] = L[c];
        if (order < 1) return;
        // d_m (L_u K) = L_{d_m u} K + L_u (d_m K), with d_m u and d_m K carrying their own gradients.
        for (int m = 0; m < n; ++m) {
            JetSample du, dK;
            du.reset(us.ncomp, n);
            dK.reset(Ks.ncomp, n);
            for (int c = 0; c < us.ncomp; ++c) {
                du.value[c] = us.d1[c][m];
                for (int l = 0; l < n; ++l) du.d1[c][l] = us.d2[c][m][l];
            }
            for (int c = 0; c < Ks.ncomp; ++c) {
                dK.value[c] = Ks.d1[c][m];
                for (int l = 0; l < n; ++l) dK.d1[c][l] = Ks.d2[c][m][l];
            }
            const KFormValue a = lie_derivative(du, Ks, n, k);
            const KFormValue b = lie_derivative(us, dK, n, k);
            for (int c = 0; c < L.size(); ++c) out.d1[c][m] = a[c] + b[c];
        }
    }

private:
    FieldJet u_, K_;
};

class InteriorJetSource final : public FieldSource {
public:
    InteriorJetSource(FieldJet u, FieldJet K) : u_(std::move(u)), K_(std::move(K)) {}
    void sample(double t, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        const int k = K_.degree();
        JetSample us, Ks;
        u_.sample(t, x, std::min(order, 1), us);
        K_.sample(t, x, std::min(order, 1), Ks);
        const Vec u = vec_value(us, n);
        const KFormValue Kv = form_value(Ks, n, k);
        const KFormValue r = interior_product(u, Kv);
        out.reset(r.size(), n);
        for (int c = 0; c < r.size(); ++c) out.value[c] = r[c];
        if (order < 1) return;
        for (int m = 0; m < n; ++m) {
            Vec du(n);
            for (int i = 0; i < n; ++i) du(i) = us.d1[i][m];
            const KFormValue a = interior_product(du, Kv) + interior_product(u, form_partial(Ks, n, k, m));
            for (int c = 0; c < r.size(); ++c) out.d1[c][m] = a[c];
        }
    }

private:
    FieldJet u_, K_;
};

class ExteriorJetSource final : public FieldSource {
public:
    explicit ExteriorJetSource(FieldJet K) : K_(std::move(K)) {}
    void sample(double t, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        const int k = K_.degree();
        JetSample Ks;
        K_.sample(t, x, order >= 1 ? 2 : 1, Ks);
        const KFormValue d = exterior_derivative(Ks, n, k);
        out.reset(d.size(), n);
        for (int c = 0; c < d.size(); ++c) out.value[c] = d[c];
        if (order < 1) return;
        for (int m = 0; m < n; ++m) {
            JetSample dK;
            dK.reset(Ks.ncomp, n);
            for (int c = 0; c < Ks.ncomp; ++c)
                for (int l = 0; l < n; ++l) dK.d1[c][l] = Ks.d2[c][m][l];
            const KFormValue dd = exterior_derivative(dK, n, k);
            for (int c = 0; c < d.size(); ++c) out.d1[c][m] = dd[c];
        }
    }

private:
    FieldJet K_;
};

class WedgeJetSource final : public FieldSource {
public:
    WedgeJetSource(FieldJet a, FieldJet b) : a_(std::move(a)), b_(std::move(b)) {}
    void sample(double t, const Vec& x, int order, JetSample& out) const override {
        const int n = static_cast<int>(x.size());
        const int ka = a_.degree(), kb = b_.degree();
        JetSample as, bs;
        a_.sample(t, x, std::min(order, 1), as);
        b_.sample(t, x, std::min(order, 1), bs);
        const KFormValue av = form_value(as, n, ka), bv = form_value(bs, n, kb);
        const KFormValue w = wedge(av, bv);
        out.reset(w.size(), n);
        for (int c = 0; c < w.size(); ++c) out.value[c] = w[c];
        if (order < 1) return;
        for (int m = 0; m < n; ++m) {
            const KFormValue d = wedge(form_partial(as, n, ka, m), bv) + wedge(av, form_partial(bs, n, kb, m));
            for (int c = 0; c < w.size(); ++c) out.d1[c][m] = d[c];
        }
    }

private:
    FieldJet a_, b_;
};

}  // namespace

bool MultiIndex::contains(int i) const {
    for (int a = 0; a < degree; ++a)
        if (idx[a] == i) return true;
    return false;
}

int binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    int r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

const std::vector<MultiIndex>& form_basis(int n, int k) {
    static const auto table = [] {
        std::array<std::array<Basis, 5>, 4> t;
        for (int nn = 0; nn <= 3; ++nn)
            for (int kk = 0; kk <= 4; ++kk) t[nn][kk] = build_basis(nn, kk);
        return t;
    }();
    static const Basis empty;
    if (n < 0 || n > 3 || k < 0 || k > 4) return empty;
    return table[n][k];
}

int basis_position(int n, const MultiIndex& I) {
    const auto& b = form_basis(n, I.degree);
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b[i] == I) return static_cast<int>(i);
    return -1;
}

KFormValue::KFormValue(int n, int k) : dim(n), degree(k) {
    check_dim(n);
    if (k < 0 || k > n + 1) throw ConfigError("form degree out of range");
}

KFormValue& KFormValue::operator+=(const KFormValue& o) {
    if (o.dim != dim || o.degree != degree) throw ConfigError("form shape mismatch in addition");
    for (int i = 0; i < 3; ++i) comps[i] += o.comps[i];
    return *this;
}

KFormValue& KFormValue::operator-=(const KFormValue& o) {
    if (o.dim != dim || o.degree != degree) throw ConfigError("form shape mismatch in subtraction");
    for (int i = 0; i < 3; ++i) comps[i] -= o.comps[i];
    return *this;
}

KFormValue& KFormValue::operator*=(double s) {
    for (auto& c : comps) c *= s;
    return *this;
}

double KFormValue::max_abs() const {
    double m = 0.0;
    for (int i = 0; i < size(); ++i) m = std::max(m, std::abs(comps[i]));
    return m;
}

KFormValue form_value(const JetSample& s, int n, int k) {
    KFormValue v(n, k);
    if (s.ncomp != v.size()) throw ConfigError("jet component count does not match form shape");
    for (int c = 0; c < v.size(); ++c) v[c] = s.value[c];
    return v;
}

KFormValue form_partial(const JetSample& s, int n, int k, int l) {
    KFormValue v(n, k);
    for (int c = 0; c < v.size(); ++c) v[c] = s.d1[c][l];
    return v;
}

double contract(const KFormValue& K, std::span<const Vec> vectors) {
    const int k = K.degree;
    if (static_cast<int>(vectors.size()) != k) throw ConfigError("contract: need exactly k vectors");
    if (k == 0) return K[0];
    const auto& basis = form_basis(K.dim, k);
    double s = 0.0;
    std::array<std::array<double, 3>, 3> m{};
    for (std::size_t b = 0; b < basis.size(); ++b) {
        if (K[static_cast<int>(b)] == 0.0) continue;
        for (int a = 0; a < k; ++a)
            for (int c = 0; c < k; ++c) m[a][c] = vectors[c](basis[b].idx[a]);
        s += K[static_cast<int>(b)] * det_small(m, k);
    }
    return s;
}

KFormValue wedge(const KFormValue& a, const KFormValue& b) {
    if (a.dim != b.dim) throw ConfigError("wedge: dimension mismatch");
    const int n = a.dim;
    const int ka = a.degree, kb = b.degree;
    if (ka + kb > n) throw ConfigError("wedge: degree overflow");
    KFormValue out(n, ka + kb);
    const auto& ba = form_basis(n, ka);
    const auto& bb = form_basis(n, kb);
    for (std::size_t i = 0; i < ba.size(); ++i) {
        if (a[static_cast<int>(i)] == 0.0) continue;
        for (std::size_t j = 0; j < bb.size(); ++j) {
            std::array<int, 4> v{};
            for (int p = 0; p < ka; ++p) v[p] = ba[i].idx[p];
            for (int p = 0; p < kb; ++p) v[ka + p] = bb[j].idx[p];
            const int sign = sort_with_sign(v, ka + kb);
            if (sign == 0) continue;
            MultiIndex I;
            I.degree = ka + kb;
            for (int p = 0; p < ka + kb; ++p) I.idx[p] = v[p];
            out[basis_position(n, I)] += sign * a[static_cast<int>(i)] * b[static_cast<int>(j)];
        }
    }
    return out;
}

KFormValue exterior_derivative(const JetSample& K, int n, int k, bool allow_top) {
    check_dim(n);
    if (k >= n) {
        if (!allow_top) throw ConfigError("exterior_derivative: degree equals dimension");
        return KFormValue(n, k + 1);
    }
    KFormValue out(n, k + 1);
    const auto& target = form_basis(n, k + 1);
    for (std::size_t j = 0; j < target.size(); ++j) {
        const MultiIndex& J = target[j];
        double s = 0.0;
        // (dK)_J = sum_a (-1)^a d_{J_a} K_{J without J_a}
        for (int a = 0; a <= k; ++a) {
            MultiIndex I;
            I.degree = k;
            for (int b = 0, c = 0; b <= k; ++b)
                if (b != a) I.idx[c++] = J.idx[b];
            const int pos = basis_position(n, I);
            s += ((a % 2) ? -1.0 : 1.0) * K.d1[pos][J.idx[a]];
        }
        out[static_cast<int>(j)] = s;
    }
    return out;
}

KFormValue exterior_derivative(const FieldJet& K, double t, const Vec& x, bool allow_top) {
    JetSample s;
    K.sample(t, x, 1, s);
    return exterior_derivative(s, K.dim(), K.degree(), allow_top);
}

KFormValue interior_product(const Vec& X, const KFormValue& K) {
    const int k = K.degree;
    if (k == 0) throw ConfigError("interior_product: degree-0 form");
    if (X.size() != K.dim) throw ConfigError("interior_product: dimension mismatch");
    const int n = K.dim;
    KFormValue out(n, k - 1);
    const auto& target = form_basis(n, k - 1);
    for (std::size_t j = 0; j < target.size(); ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            if (X(i) == 0.0 || target[j].contains(i)) continue;
            std::array<int, 4> v{};
            v[0] = i;
            for (int p = 0; p < k - 1; ++p) v[1 + p] = target[j].idx[p];
            const int sign = sort_with_sign(v, k);
            MultiIndex I;
            I.degree = k;
            for (int p = 0; p < k; ++p) I.idx[p] = v[p];
            s += X(i) * sign * K[basis_position(n, I)];
        }
        out[static_cast<int>(j)] = s;
    }
    return out;
}

KFormValue lie_derivative(const JetSample& u, const JetSample& K, int n, int k) {
    if (u.ncomp != n) throw ConfigError("lie_derivative: u must be a vector field of dimension n");
    const KFormValue Kv = form_value(K, n, k);
    const Vec uv = vec_value(u, n);
    const Mat Du = grad_matrix(u, n);
    const KFormValue adv = advective_derivative(uv, K, n, k);
    return components_from(n, k, [&](std::span<const Vec> v) {
        return contract(adv, v) + slot_sum(Kv, v, Du);
    });
}

KFormValue lie_derivative(const FieldJet& u, const FieldJet& K, double t, const Vec& x) {
    if (u.kind() != FieldKind::vector || u.dim() != K.dim()) throw ConfigError("lie_derivative: dimension mismatch");
    JetSample us, Ks;
    u.sample(t, x, 1, us);
    K.sample(t, x, 1, Ks);
    return lie_derivative(us, Ks, K.dim(), K.degree());
}

Vec lie_derivative_vector(const JetSample& u, const JetSample& w, int n) {
    if (u.ncomp != n || w.ncomp != n) throw ConfigError("lie_derivative_vector: dimension mismatch");
    Vec out(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += u.value[l] * w.d1[i][l] - w.value[l] * u.d1[i][l];
        out(i) = s;
    }
    return out;
}

Vec lie_derivative_vector(const FieldJet& u, const FieldJet& w, double t, const Vec& x) {
    if (u.kind() != FieldKind::vector || w.kind() != FieldKind::vector || u.dim() != w.dim())
        throw ConfigError("lie_derivative_vector: dimension mismatch");
    JetSample us, ws;
    u.sample(t, x, 1, us);
    w.sample(t, x, 1, ws);
    return lie_derivative_vector(us, ws, u.dim());
}

KFormValue double_lie_derivative(const JetSample& u, const JetSample& K, int n, int k) {
    if (u.ncomp != n) throw ConfigError("double_lie_derivative: u must be a vector field of dimension n");
    const KFormValue Kv = form_value(K, n, k);
    const Vec uv = vec_value(u, n);
    const Mat Du = grad_matrix(u, n);
    const Mat DuDu = Du * Du;
    // W^i_m = u^l d_l d_m u^i
    Mat W = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m) {
            double s = 0.0;
            for (int l = 0; l < n; ++l) s += uv(l) * u.d2[i][l][m];
            W(i, m) = s;
        }
    // First term: u^l d_l (u^m d_m K_J) = (u^l d_l u^m) d_m K_J + u^l u^m d_l d_m K_J
    KFormValue first(n, k);
    const Vec uDu = Du * uv;
    for (int c = 0; c < first.size(); ++c) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) {
            s += uDu(m) * K.d1[c][m];
            for (int l = 0; l < n; ++l) s += uv(l) * uv(m) * K.d2[c][l][m];
        }
        first[c] = s;
    }
    const KFormValue adv = advective_derivative(uv, K, n, k);

    return components_from(n, k, [&](std::span<const Vec> v) {
        double s = contract(first, v);
        // Single-slot terms: derivative of the coefficient times Du, the derivative of Du
        // along u, and the slot acted on twice by Du.
        s += 2.0 * slot_sum(adv, v, Du) + slot_sum(Kv, v, W) + slot_sum(Kv, v, DuDu);
        // Distinct-slot cross terms, p != q.
        std::array<Vec, 3> w;
        for (int p = 0; p < k; ++p)
            for (int q = 0; q < k; ++q) {
                if (p == q) continue;
                for (int a = 0; a < k; ++a) w[a] = v[a];
                w[p] = Du * v[p];
                w[q] = Du * v[q];
                s += contract(Kv, std::span<const Vec>(w.data(), k));
            }
        return s;
    });
}

KFormValue double_lie_derivative(const FieldJet& u, const FieldJet& K, double t, const Vec& x) {
    if (u.kind() != FieldKind::vector || u.dim() != K.dim())
        throw ConfigError("double_lie_derivative: dimension mismatch");
    JetSample us, Ks;
    u.sample(t, x, 2, us);
    K.sample(t, x, 2, Ks);
    return double_lie_derivative(us, Ks, K.dim(), K.degree());
}

KFormValue pullback_linear(const Mat& A, const KFormValue& K) {
    const int n = K.dim;
    if (A.rows() != n || A.cols() != n) throw ConfigError("pullback: Jacobian dimension mismatch");
    const int k = K.degree;
    KFormValue out(n, k);
    const auto& basis = form_basis(n, k);
    std::array<Vec, 3> vs;
    for (std::size_t b = 0; b < basis.size(); ++b) {
        for (int a = 0; a < k; ++a) vs[a] = A.col(basis[b].idx[a]);
        out[static_cast<int>(b)] = contract(K, std::span<const Vec>(vs.data(), k));
    }
    return out;
}

KFormValue pullback(const JacobianSample& jac, const KFormValue& K_at_image) {
    const double det = jac.J.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-300) throw NumericalError("pullback: singular Jacobian");
    return pullback_linear(jac.J, K_at_image);
}

Vec pushforward_vector(const JacobianSample& jac, const Vec& u_at_x) {
    if (u_at_x.size() != jac.J.rows()) throw ConfigError("pushforward_vector: dimension mismatch");
    return jac.J * u_at_x;
}

KFormValue pushforward_form(const JacobianSample& jac, const KFormValue& K_at_x) {
    if (!jac.Jinv) throw ConfigError("pushforward_form: inverse Jacobian not available");
    return pullback_linear(*jac.Jinv, K_at_x);
}

FieldJet lie_derivative_jet(const FieldJet& u, const FieldJet& K) {
    if (u.kind() != FieldKind::vector || u.dim() != K.dim()) throw ConfigError("lie_derivative_jet: dimension mismatch");
    const FieldShape shape{K.kind() == FieldKind::scalar ? FieldKind::scalar : FieldKind::kform, K.dim(), K.degree()};
    return FieldJet(shape, std::make_shared<LieDerivativeJetSource>(u, K), Backend::analytic,
                    u.time_dependent() || K.time_dependent(), u.periodic() && K.periodic());
}

FieldJet interior_product_jet(const FieldJet& u, const FieldJet& K) {
    if (u.kind() != FieldKind::vector || u.dim() != K.dim()) throw ConfigError("interior_product_jet: dimension mismatch");
    if (K.degree() == 0) throw ConfigError("interior_product_jet: degree-0 form");
    const int k = K.degree() - 1;
    const FieldShape shape{k == 0 ? FieldKind::scalar : FieldKind::kform, K.dim(), k};
    return FieldJet(shape, std::make_shared<InteriorJetSource>(u, K), Backend::analytic,
                    u.time_dependent() || K.time_dependent(), u.periodic() && K.periodic());
}

FieldJet exterior_derivative_jet(const FieldJet& K) {
    if (K.degree() >= K.dim()) throw ConfigError("exterior_derivative_jet: degree equals dimension");
    return FieldJet({FieldKind::kform, K.dim(), K.degree() + 1}, std::make_shared<ExteriorJetSource>(K),
                    K.backend(), K.time_dependent(), K.periodic());
}

FieldJet wedge_jet(const FieldJet& a, const FieldJet& b) {
    if (a.dim() != b.dim()) throw ConfigError("wedge_jet: dimension mismatch");
    const int k = a.degree() + b.degree();
    if (k > a.dim()) throw ConfigError("wedge_jet: degree overflow");
    const FieldShape shape{k == 0 ? FieldKind::scalar : FieldKind::kform, a.dim(), k};
    return FieldJet(shape, std::make_shared<WedgeJetSource>(a, b), Backend::analytic,
                    a.time_dependent() || b.time_dependent(), a.periodic() && b.periodic());
}

}  // namespace kiw
