/// @file exterior.hpp
/// @brief Pointwise exterior calculus on k-forms over R^n, n <= 3.
///
/// Forms are stored by their components on strictly increasing multi-indices,
/// K = sum_{I increasing} K_I dx^{I_1} ^ ... ^ dx^{I_k}, and act on vectors by the
/// determinant convention K(v_1,...,v_k) = sum_I K_I det[v_a^{I_b}]. This is the
/// same contraction as K_{i_1..i_k} v_1^{i_1} ... v_k^{i_k} over the fully
/// antisymmetric component tensor.
#pragma once

#include "kiw/fields.hpp"
#include "kiw/types.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace kiw {

/// Strictly increasing index tuple (0-based), length = degree.
struct MultiIndex {
    int degree = 0;
    std::array<int, 3> idx{};

    [[nodiscard]] bool contains(int i) const;
    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

int binomial(int n, int k);

/// Increasing multi-indices of length k drawn from {0..n-1}, lexicographic order.
const std::vector<MultiIndex>& form_basis(int n, int k);

/// Position of an increasing multi-index in form_basis(n, k), or -1.
int basis_position(int n, const MultiIndex& I);

struct KFormValue {
    int dim = 0;
    int degree = 0;
    std::array<double, 3> comps{};

    KFormValue() = default;
    KFormValue(int n, int k);

    [[nodiscard]] int size() const { return binomial(dim, degree); }
    double& operator[](int i) { return comps[i]; }
    double operator[](int i) const { return comps[i]; }

    KFormValue& operator+=(const KFormValue& o);
    KFormValue& operator-=(const KFormValue& o);
    KFormValue& operator*=(double s);
    friend KFormValue operator+(KFormValue a, const KFormValue& b) { return a += b; }
    friend KFormValue operator-(KFormValue a, const KFormValue& b) { return a -= b; }
    friend KFormValue operator*(double s, KFormValue a) { return a *= s; }

    /// Largest absolute component.
    [[nodiscard]] double max_abs() const;
};

/// Read a form value out of a jet sample (scalar jets are 0-forms).
KFormValue form_value(const JetSample& s, int n, int k);
/// Partial derivative d_l of every component.
KFormValue form_partial(const JetSample& s, int n, int k, int l);

/// K(v_1, ..., v_k). vectors.size() must equal the degree.
double contract(const KFormValue& K, std::span<const Vec> vectors);

KFormValue wedge(const KFormValue& a, const KFormValue& b);

/// dK at a point from first partials. Degree n input yields an empty degree-(n+1) value
/// when allow_top is true, otherwise throws.
KFormValue exterior_derivative(const JetSample& K, int n, int k, bool allow_top = true);
KFormValue exterior_derivative(const FieldJet& K, double t, const Vec& x, bool allow_top = true);

/// i_X K = K(X, ...). Throws for degree 0.
KFormValue interior_product(const Vec& X, const KFormValue& K);

/// L_u K at a point from first-order jets of u and K:
/// (L_u K)(v) = u^l d_l K(v) + sum_p K(v_1, ..., Du v_p, ..., v_k).
KFormValue lie_derivative(const JetSample& u, const JetSample& K, int n, int k);
KFormValue lie_derivative(const FieldJet& u, const FieldJet& K, double t, const Vec& x);

/// Jacobi-Lie bracket [u, w] = (u . grad) w - (w . grad) u.
Vec lie_derivative_vector(const JetSample& u, const JetSample& w, int n);
Vec lie_derivative_vector(const FieldJet& u, const FieldJet& w, double t, const Vec& x);

/// L_u L_u K at a point from second-order jets of u and K, by the explicit index-sum
/// expansion (no nested differentiation).
KFormValue double_lie_derivative(const JetSample& u, const JetSample& K, int n, int k);
KFormValue double_lie_derivative(const FieldJet& u, const FieldJet& K, double t, const Vec& x);

struct JacobianSample {
    Mat J;                    // J(i, j) = d_j phi^i
    std::optional<Mat> Jinv;

    explicit JacobianSample(Mat j) : J(std::move(j)) {}
    JacobianSample(Mat j, Mat jinv) : J(std::move(j)), Jinv(std::move(jinv)) {}
};

/// (phi^* K)_J(x) = K(phi(x))(J e_{J_1}, ..., J e_{J_k}). Throws on singular J.
KFormValue pullback(const JacobianSample& jac, const KFormValue& K_at_image);
/// Pullback by an arbitrary linear map without the singularity check.
KFormValue pullback_linear(const Mat& A, const KFormValue& K);

/// phi_* u at phi(x) = J u(x).
Vec pushforward_vector(const JacobianSample& jac, const Vec& u_at_x);
/// (phi_* K)(phi(x)) = pullback of K(x) by Jinv. Throws if Jinv is absent.
KFormValue pushforward_form(const JacobianSample& jac, const KFormValue& K_at_x);

// Analytic jet combinators (first-order jets of derived fields).

/// Field x -> (L_u K)(x), reporting first derivatives. u and K need d2.
FieldJet lie_derivative_jet(const FieldJet& u, const FieldJet& K);
/// Field x -> (i_u K)(x), reporting first derivatives.
FieldJet interior_product_jet(const FieldJet& u, const FieldJet& K);
/// Field x -> (dK)(x), reporting first derivatives.
FieldJet exterior_derivative_jet(const FieldJet& K);
/// Field x -> (a ^ b)(x), reporting first derivatives.
FieldJet wedge_jet(const FieldJet& a, const FieldJet& b);

}  // namespace kiw
