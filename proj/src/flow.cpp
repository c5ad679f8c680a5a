/// @file flow.cpp
/// @brief Stochastic flow integration with Jacobians, inverse flow and blow-up exclusion.
#include "kiw/flow.hpp"

#include "kiw/parallel.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace kiw {

Scheme scheme_from_string(const std::string& s) {
    if (s == "stratonovich_heun" || s == "heun" || s == "stratonovich") return Scheme::stratonovich_heun;
    if (s == "ito_euler_corrected" || s == "ito_euler" || s == "ito") return Scheme::ito_euler_corrected;
    throw ConfigError("unknown flow scheme '" + s + "'");
}

std::string to_string(Scheme s) {
    return s == Scheme::stratonovich_heun ? "stratonovich_heun" : "ito_euler_corrected";
}

InverseMethod inverse_method_from_string(const std::string& s) {
    if (s == "newton_exact" || s == "newton") return InverseMethod::newton_exact;
    if (s == "reversed_heun") return InverseMethod::reversed_heun;
    throw ConfigError("unknown inverse method '" + s + "'");
}

void FlowModel::validate(int n_channels) const {
    if (!drift.valid() || drift.kind() != FieldKind::vector) throw ConfigError("flow drift must be a vector field");
    const int n = drift.dim();
    if (n < 1 || n > kMaxDim) throw ConfigError("flow dimension must be 1, 2 or 3");
    for (const auto& xi : noise) {
        if (!xi.field.valid() || xi.field.kind() != FieldKind::vector || xi.field.dim() != n)
            throw ConfigError("noise fields must be vector fields of the flow dimension");
        if (xi.channel < 0 || xi.channel >= n_channels)
            throw ConfigError("noise channel " + std::to_string(xi.channel) + " outside the driver");
    }
}

namespace {

/// Value and Jacobian of a vector field.
struct VecJet {
    Vec v;
    Mat D;
};

VecJet vec_jet(const FieldJet& f, double t, const Vec& x, int order) {
    const int n = static_cast<int>(x.size());
    JetSample s;
    f.sample(t, x, order, s);
    VecJet out{Vec(n), Mat(n, n)};
    for (int i = 0; i < n; ++i) {
        out.v(i) = s.value[static_cast<std::size_t>(i)];
        for (int l = 0; l < n; ++l) out.D(i, l) = order >= 1 ? s.d1[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] : 0.0;
    }
    return out;
}

/// Ito-corrected drift and (optionally) its Jacobian.
VecJet corrected_drift(const FlowModel& model, double t, const Vec& x, bool with_jacobian) {
    const int n = static_cast<int>(x.size());
    VecJet out = vec_jet(model.drift, t, x, with_jacobian ? 1 : 0);
    JetSample s;
    for (const auto& nf : model.noise) {
        nf.field.sample(t, x, with_jacobian ? 2 : 1, s);
        for (int i = 0; i < n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            double acc = 0.0;
            for (int l = 0; l < n; ++l) acc += s.value[static_cast<std::size_t>(l)] * s.d1[iu][static_cast<std::size_t>(l)];
            out.v(i) += 0.5 * acc;
            if (!with_jacobian) continue;
            for (int m = 0; m < n; ++m) {
                const auto mu = static_cast<std::size_t>(m);
                double dm = 0.0;
                for (int l = 0; l < n; ++l) {
                    const auto lu = static_cast<std::size_t>(l);
                    dm += s.d1[lu][mu] * s.d1[iu][lu] + s.value[lu] * s.d2[iu][lu][mu];
                }
                out.D(i, m) += 0.5 * dm;
            }
        }
    }
    return out;
}

/// Increment b dt + sum xi_j dB_j and its Jacobian at (t, x).
VecJet heun_stage(const FlowModel& model, double t, double dt, std::span<const double> dB, const Vec& x,
                  bool with_jacobian) {
    const int order = with_jacobian ? 1 : 0;
    VecJet b = vec_jet(model.drift, t, x, order);
    VecJet out{b.v * dt, b.D * dt};
    for (std::size_t j = 0; j < model.noise.size(); ++j) {
        VecJet xi = vec_jet(model.noise[j].field, t, x, order);
        out.v += xi.v * dB[j];
        if (with_jacobian) out.D += xi.D * dB[j];
    }
    return out;
}

void check_finite(const Vec& x) {
    if (!x.allFinite()) throw NumericalError("flow step produced a non-finite state");
}

}  // namespace

Vec ito_drift_correction(const FieldJet& b, const std::vector<FieldJet>& xis, double t, const Vec& x) {
    FlowModel m;
    m.drift = b;
    for (const auto& xi : xis) m.noise.push_back({xi, 0});
    return corrected_drift(m, t, x, false).v;
}

StepResult flow_step(const FlowModel& model, double t, double dt, std::span<const double> dB, const Vec& x,
                     bool want_jacobian) {
    const int n = static_cast<int>(x.size());
    const Mat I = Mat::Identity(n, n);
    if (model.scheme == Scheme::stratonovich_heun) {
        const VecJet s0 = heun_stage(model, t, dt, dB, x, want_jacobian);
        const Vec pred = x + s0.v;
        const VecJet s1 = heun_stage(model, t + dt, dt, dB, pred, want_jacobian);
        StepResult r{x + 0.5 * (s0.v + s1.v), Mat()};
        if (want_jacobian) r.M = I + 0.5 * s0.D + 0.5 * s1.D * (I + s0.D);
        return r;
    }
    const VecJet bh = corrected_drift(model, t, x, want_jacobian);
    StepResult r{x + bh.v * dt, Mat()};
    if (want_jacobian) r.M = I + bh.D * dt;
    for (std::size_t j = 0; j < model.noise.size(); ++j) {
        const VecJet xi = vec_jet(model.noise[j].field, t, x, want_jacobian ? 1 : 0);
        r.x += xi.v * dB[j];
        if (want_jacobian) r.M += xi.D * dB[j];
    }
    return r;
}

StepResult propagate_jacobian(const FlowModel& model, double t, double dt, std::span<const double> dB,
                              const Vec& x, Mat& J) {
    StepResult r = flow_step(model, t, dt, dB, x, true);
    J = r.M * J;
    return r;
}

// ---------------------------------------------------------------------------------------
// FlowSample

FlowSample::FlowSample(int dim, int path_begin, int path_count, int n_seeds, int steps, double dt, bool has_inverse)
    : n_(dim), path_begin_(path_begin), path_count_(path_count), n_seeds_(n_seeds), steps_(steps), dt_(dt),
      has_inverse_(has_inverse) {
    data_.assign(static_cast<std::size_t>(path_count) * n_seeds * (steps + 1) * record_size(), 0.0);
    excluded_.assign(static_cast<std::size_t>(path_count), 0);
}

std::size_t FlowSample::offset(int path, int seed, int step) const {
    const int p = path - path_begin_;
    if (p < 0 || p >= path_count_ || seed < 0 || seed >= n_seeds_ || step < 0 || step > steps_)
        throw ConfigError("FlowSample index out of range");
    return ((static_cast<std::size_t>(p) * n_seeds_ + seed) * (steps_ + 1) + step) * record_size();
}

Vec FlowSample::point(int path, int seed, int step) const {
    const double* r = data_.data() + offset(path, seed, step);
    Vec x(n_);
    for (int i = 0; i < n_; ++i) x(i) = r[i];
    return x;
}

Mat FlowSample::jacobian(int path, int seed, int step) const {
    const double* r = data_.data() + offset(path, seed, step) + n_;
    Mat J(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) J(i, j) = r[i * n_ + j];
    return J;
}

Mat FlowSample::inverse_jacobian(int path, int seed, int step) const {
    if (!has_inverse_) throw ConfigError("FlowSample was integrated without the inverse Jacobian");
    const double* r = data_.data() + offset(path, seed, step) + n_ + n_ * n_;
    Mat J(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) J(i, j) = r[i * n_ + j];
    return J;
}

int FlowSample::n_excluded() const {
    int c = 0;
    for (auto e : excluded_) c += e != 0;
    return c;
}

void FlowSample::set(int path, int seed, int step, const Vec& x, const Mat& J, const Mat* Jinv) {
    double* r = data_.data() + offset(path, seed, step);
    for (int i = 0; i < n_; ++i) r[i] = x(i);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) r[n_ + i * n_ + j] = J(i, j);
    if (has_inverse_ && Jinv != nullptr)
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) r[n_ + n_ * n_ + i * n_ + j] = (*Jinv)(i, j);
}

// ---------------------------------------------------------------------------------------
// Integration

FlowSample integrate_flow(const FlowModel& model, const BrownianDriver& driver, const std::vector<Vec>& seeds,
                          const FlowOptions& options) {
    model.validate(driver.n_channels());
    const int n = model.dim();
    for (const auto& s : seeds)
        if (s.size() != n) throw ConfigError("seed point dimension does not match the flow");
    const int begin = options.path_begin;
    const int count = options.path_count < 0 ? driver.n_paths() - begin : options.path_count;
    if (begin < 0 || count < 0 || begin + count > driver.n_paths()) throw ConfigError("path range outside the driver");

    const int L = driver.steps();
    const double dt = driver.dt();
    FlowSample out(n, begin, count, static_cast<int>(seeds.size()), L, dt, options.want_inverse);
    const BlowUpPolicy& pol = options.policy;
    const Mat I = Mat::Identity(n, n);

    parallel_for(count, options.workers, [&](int local) {
        const int path = begin + local;
        std::vector<double> dB(model.noise.size());
        bool bad = false;
        for (int si = 0; si < static_cast<int>(seeds.size()); ++si) {
            Vec x = seeds[static_cast<std::size_t>(si)];
            Mat J = I;
            Mat Jinv = I;
            out.set(path, si, 0, x, J, &Jinv);
            bool alive = !bad;
            for (int k = 0; k < L; ++k) {
                if (alive) {
                    for (std::size_t j = 0; j < model.noise.size(); ++j)
                        dB[j] = driver.increment(path, model.noise[j].channel, k);
                    StepResult r;
                    try {
                        r = flow_step(model, driver.time(k), dt, dB, x, true);
                    } catch (const NumericalError&) {
                        alive = false;
                    }
                    if (alive) {
                        const Mat Jn = r.M * J;
                        const double det = Jn.determinant();
                        if (!r.x.allFinite() || r.x.norm() > pol.max_state_norm || !std::isfinite(det) ||
                            std::abs(det) < pol.min_abs_det || std::abs(det) > pol.max_abs_det) {
                            alive = false;
                        } else {
                            x = r.x;
                            J = Jn;
                            if (options.want_inverse) {
                                Eigen::PartialPivLU<Mat> lu(r.M);
                                Jinv = Jinv * lu.inverse();
                            }
                        }
                    }
                    if (!alive) bad = true;
                }
                out.set(path, si, k + 1, x, J, &Jinv);
            }
        }
        if (bad) out.mark_excluded(path);
    });
    return out;
}

void check_exclusions(const FlowSample& sample, const BlowUpPolicy& policy) {
    const int ex = sample.n_excluded();
    if (sample.path_count() > 0 &&
        static_cast<double>(ex) > policy.max_excluded_fraction * static_cast<double>(sample.path_count()))
        throw NumericalError("flow blow-up: " + std::to_string(ex) + " of " + std::to_string(sample.path_count()) +
                             " paths excluded");
}

// ---------------------------------------------------------------------------------------
// Inverse flow

namespace {

/// Solve step(X) = y for X by Newton iteration from the initial guess. M_at_solution is the
/// step Jacobian at the final iterate's predecessor, which differs from the converged point
/// by less than the last (tiny) Newton update.
Vec invert_step(const FlowModel& model, double t, double dt, std::span<const double> dB, const Vec& y, Vec X,
                Mat& M_at_solution) {
    for (int it = 0; it < 50; ++it) {
        const StepResult r = flow_step(model, t, dt, dB, X, true);
        Eigen::PartialPivLU<Mat> lu(r.M);
        const Vec delta = lu.solve(r.x - y);
        X -= delta;
        check_finite(X);
        if (delta.norm() <= 1e-11 * (1.0 + X.norm())) {
            M_at_solution = r.M;
            return X;
        }
    }
    throw NumericalError("inverse flow: Newton iteration did not converge");
}

}  // namespace

InverseFlow inverse_flow(const FlowModel& model, const BrownianDriver& driver, int path, int step, const Vec& y,
                         InverseMethod method) {
    model.validate(driver.n_channels());
    const int n = model.dim();
    if (y.size() != n) throw ConfigError("inverse_flow: point dimension mismatch");
    if (step < 0 || step > driver.steps()) throw ConfigError("inverse_flow: step outside the grid");
    if (path < 0 || path >= driver.n_paths()) throw ConfigError("inverse_flow: path outside the driver");
    const double dt = driver.dt();
    std::vector<double> dB(model.noise.size());
    Vec x = y;
    Mat G = Mat::Identity(n, n);

    if (method == InverseMethod::reversed_heun) {
        if (model.scheme != Scheme::stratonovich_heun)
            throw ConfigError("reversed_heun inverse requires the Stratonovich Heun scheme");
        // Time-reversed flow: dX = -b ds - xi o dB on the reversed increments.
        const Mat I = Mat::Identity(n, n);
        for (int k = step - 1; k >= 0; --k) {
            for (std::size_t j = 0; j < model.noise.size(); ++j)
                dB[j] = -driver.increment(path, model.noise[j].channel, k);
            const double t1 = driver.time(k + 1);
            const VecJet s0 = heun_stage(model, t1, -dt, dB, x, true);
            const Vec pred = x + s0.v;
            const VecJet s1 = heun_stage(model, t1 - dt, -dt, dB, pred, true);
            const Mat M = I + 0.5 * s0.D + 0.5 * s1.D * (I + s0.D);
            x = x + 0.5 * (s0.v + s1.v);
            check_finite(x);
            G = M * G;
        }
        return {x, G};
    }

    for (int k = step - 1; k >= 0; --k) {
        for (std::size_t j = 0; j < model.noise.size(); ++j) dB[j] = driver.increment(path, model.noise[j].channel, k);
        const double t = driver.time(k);
        // initial guess: one explicit backward stage
        Vec guess = x;
        {
            const VecJet s = heun_stage(model, t, dt, dB, x, false);
            guess = x - s.v;
        }
        Mat M;
        x = invert_step(model, t, dt, dB, x, guess, M);
        Eigen::PartialPivLU<Mat> lu(M);
        G = lu.inverse() * G;
    }
    return {x, G};
}

// ---------------------------------------------------------------------------------------
// Binary dump

namespace {

constexpr char kMagic[8] = {'K', 'I', 'W', 'F', 'L', 'O', 'W', '1'};

void put_u64(std::ofstream& f, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ofstream& f, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(f, v);
}

std::uint64_t get_u64(std::ifstream& f) {
    unsigned char b[8];
    if (!f.read(reinterpret_cast<char*>(b), 8)) throw IoError("flow dump truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::ifstream& f) {
    const std::uint64_t v = get_u64(f);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace

void write_flow_sample(const std::string& file, const FlowSample& sample, std::uint64_t seed) {
    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + file + "' for writing");
    f.write(kMagic, 8);
    put_u64(f, static_cast<std::uint64_t>(sample.dim()));
    put_u64(f, static_cast<std::uint64_t>(sample.steps()));
    put_u64(f, static_cast<std::uint64_t>(sample.path_count()));
    put_u64(f, static_cast<std::uint64_t>(sample.n_seeds()));
    put_u64(f, seed);
    put_u64(f, sample.has_inverse() ? 1 : 0);
    put_u64(f, static_cast<std::uint64_t>(sample.path_begin()));
    put_f64(f, sample.dt());
    for (int p = 0; p < sample.path_count(); ++p) put_u64(f, sample.excluded(sample.path_begin() + p) ? 1 : 0);
    for (double d : sample.raw()) put_f64(f, d);
    if (!f) throw IoError("write failed for '" + file + "'");
}

FlowSample read_flow_sample(const std::string& file, std::uint64_t* seed) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw IoError("cannot open '" + file + "'");
    char magic[8];
    if (!f.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw IoError("'" + file + "' is not a flow dump");
    const auto n = static_cast<int>(get_u64(f));
    const auto L = static_cast<int>(get_u64(f));
    const auto P = static_cast<int>(get_u64(f));
    const auto S = static_cast<int>(get_u64(f));
    const std::uint64_t sd = get_u64(f);
    const bool inv = get_u64(f) != 0;
    const auto begin = static_cast<int>(get_u64(f));
    const double dt = get_f64(f);
    if (n < 1 || n > kMaxDim) throw IoError("flow dump has an invalid dimension");
    if (seed != nullptr) *seed = sd;
    FlowSample out(n, begin, P, S, L, dt, inv);
    for (int p = 0; p < P; ++p)
        if (get_u64(f) != 0) out.mark_excluded(begin + p);
    Vec x(n);
    Mat J(n, n), Ji(n, n);
    for (int p = 0; p < P; ++p)
        for (int s = 0; s < S; ++s)
            for (int k = 0; k <= L; ++k) {
                for (int i = 0; i < n; ++i) x(i) = get_f64(f);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) J(i, j) = get_f64(f);
                if (inv)
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) Ji(i, j) = get_f64(f);
                out.set(begin + p, s, k, x, J, &Ji);
            }
    return out;
}

}  // namespace kiw
