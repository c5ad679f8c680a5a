/// @file kiw.hpp
/// @brief Pathwise evaluation of both sides of the Kunita-Ito-Wentzell formula for k-forms.
///
/// A SemimartingaleForm is held in separable form
///     K(t, y) = K0(y) + sum_terms a_term(t) F_term(y),
///     a_term(t) = int_0^t c_term(s) dX_term(s),
/// with X in {s, W^c} and coefficient process c in {1, s, N^c_s}. This covers
/// K = K0 + int G ds + sum_i int H_i dW^i with time-independent G, H_i, and the
/// Stratonovich case where each H_i is itself H_i0 + int g_i ds + sum_j int h_ij dN^{ij}.
#pragma once

#include "kiw/brownian.hpp"
#include "kiw/exterior.hpp"
#include "kiw/fields.hpp"
#include "kiw/flow.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace kiw {

enum class Convention { ito, stratonovich };

Convention convention_from_string(const std::string& s);
std::string to_string(Convention c);

enum class Integrator { ds, dW };
enum class CoefficientKind { one, time, brownian };

struct SemimartingaleTerm {
    FieldJet form;  // time-independent k-form F
    Integrator integrator = Integrator::ds;
    int channel = -1;  // W channel for dW terms
    CoefficientKind coefficient = CoefficientKind::one;
    int coefficient_channel = -1;  // N channel for brownian coefficients
};

struct ItoDiffusion {
    FieldJet H;
    int channel = 0;
};

struct StratonovichDiffusion {
    int channel = 0;  // W^i
    FieldJet H0;      // H_i(0, .)
    FieldJet g;       // drift of H_i (may be invalid: zero)
    struct Noise {
        FieldJet h;
        int channel = 0;  // N^{ij}
    };
    std::vector<Noise> h;
};

class SemimartingaleForm {
public:
    SemimartingaleForm() = default;

    /// K = K0 + int G ds + sum_i int H_i dW^i (Ito integrals). G may be invalid (zero).
    static SemimartingaleForm ito(FieldJet K0, FieldJet G, std::vector<ItoDiffusion> H);
    /// K = K0 + int G ds + sum_i int H_i o dW^i with H_i carrying its own data.
    static SemimartingaleForm stratonovich(FieldJet K0, FieldJet G, std::vector<StratonovichDiffusion> H);
    /// Direct term-list construction.
    static SemimartingaleForm from_terms(FieldJet K0, std::vector<SemimartingaleTerm> terms, Convention conv);

    [[nodiscard]] int dim() const { return K0_.dim(); }
    [[nodiscard]] int degree() const { return K0_.degree(); }
    [[nodiscard]] Convention convention() const { return convention_; }
    [[nodiscard]] const FieldJet& K0() const { return K0_; }
    [[nodiscard]] const std::vector<SemimartingaleTerm>& terms() const { return terms_; }

    /// Throws ConfigError on mismatched degree or dimension, time-dependent data, or a
    /// channel outside [0, n_channels).
    void validate(int n_channels) const;

private:
    FieldJet K0_;
    std::vector<SemimartingaleTerm> terms_;
    Convention convention_ = Convention::ito;
};

/// Ito form of a Stratonovich semimartingale: H o dW = H dW + 1/2 d[H, W], which adds
/// 1/2 h_ij ds for every N^{ij} identified with W^i.
SemimartingaleForm to_ito(const SemimartingaleForm& sm);

/// Coefficient integrals a_term(t_k), k = 0..L, on one path. Ito: left-point for dW,
/// trapezoid for ds; Stratonovich: trapezoid for both.
std::vector<std::vector<double>> coefficient_integrals(const SemimartingaleForm& sm, const BrownianDriver& driver,
                                                       int path);

/// K(t, x) on one path. t must lie on the driver grid.
KFormValue eval_K(const SemimartingaleForm& sm, const BrownianDriver& driver, int path, double t, const Vec& x);

/// Both sides of the formula at the grid checkpoints for one (path, seed), as forms at the
/// seed point x: lhs = phi_t^* K(t) (x), rhs = the integral expansion.
struct KiwSides {
    std::vector<int> steps;
    std::vector<KFormValue> lhs;
    std::vector<KFormValue> rhs;
};

/// Evaluate with the RHS convention taken from sm (Ito: six integral groups; Stratonovich:
/// four). The cross variation d[W^c, B^j] is discretized by the realized product of
/// increments when the channels coincide and is 0 otherwise.
KiwSides kiw_sides(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& driver,
                   const FlowSample& flow, int path, int seed, const std::vector<int>& checkpoint_steps);

/// RHS at (t, seed x) contracted with one set of k test vectors (values at x).
double kiw_rhs_ito(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& driver,
                   const FlowSample& flow, int path, int seed, double t, const std::vector<Vec>& test_vectors);
double kiw_rhs_stratonovich(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& driver,
                            const FlowSample& flow, int path, int seed, double t,
                            const std::vector<Vec>& test_vectors);
/// LHS <phi_t^* K(t)(x), test vectors>.
double kiw_lhs(const SemimartingaleForm& sm, const BrownianDriver& driver, const FlowSample& flow, int path,
               int seed, double t, const std::vector<Vec>& test_vectors);

/// All increasing k-subsets of the pool {e_1..e_n} + n_random constant vectors with entries
/// uniform in [-1, 1] drawn from `seed`.
std::vector<std::vector<Vec>> default_test_sets(int n, int k, int n_random, std::uint64_t seed);

/// Checkpoint grid steps nearest to T/3, 2T/3 and exactly T.
std::vector<int> default_checkpoints(int steps);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    int points = 0;
};

/// Least-squares fit of log2(err) against log2(dt). Non-positive errors are skipped.
SlopeFit fit_log2_slope(const std::vector<double>& dt, const std::vector<double>& err);

struct KiwLevel {
    double dt = 0.0;
    double mean_abs_residual = 0.0;
    double rms_residual = 0.0;
    double max_abs_residual = 0.0;
    int n_paths = 0;
    int n_excluded = 0;
};

struct KiwReport {
    Convention convention = Convention::ito;
    int dim = 0;
    int degree = 0;
    int n_seeds = 0;
    int n_test_sets = 0;
    std::vector<double> checkpoint_times;
    std::vector<KiwLevel> levels;
    SlopeFit fit;
    /// Finest level: per path, terminal residuals ordered [seed][test set]. Empty for excluded paths.
    std::vector<std::vector<double>> terminal_residuals;

    [[nodiscard]] double max_residual() const;
    [[nodiscard]] nlohmann::json to_json() const;
    /// Columns: dt, mean_abs_residual, rms_residual, n_excluded.
    [[nodiscard]] std::string to_csv() const;
};

struct KiwOptions {
    int levels = 4;
    std::vector<std::vector<Vec>> test_sets;  // empty: default_test_sets(n, k, 3, seed)
    int workers = 1;
    BlowUpPolicy policy{};
};

/// Residual statistics over `levels` coupled refinements of the base driver. Residuals at
/// all checkpoints enter the statistics. Throws NumericalError if > 1% of paths are excluded
/// at any level and ConfigError if levels < 2.
KiwReport kiw_residual(const SemimartingaleForm& sm, const FlowModel& model, const BrownianDriver& base,
                       const std::vector<Vec>& seeds, const KiwOptions& options = {});

}  // namespace kiw
