#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "ehmi/error.hpp"

namespace ehmi {

/// Kernel hyperparameters of one objective, in standardized target units.
struct GPHyperparams {
    Eigen::VectorXd lengthscales;
    double signal_variance = 1.0;
    double noise_variance = 1e-4;
};

struct HyperBounds {
    double lengthscale_lo = 1e-3, lengthscale_hi = 1e3;
    double signal_lo = 1e-4, signal_hi = 1e2;
    double noise_lo = 1e-6, noise_hi = 1e1;
};

struct FitOptions {
    int restarts = 8;
    int max_iterations = 200;
    std::uint64_t seed = 0;
    HyperBounds bounds{};
};

namespace kernel {

inline constexpr double kSqrt5 = 2.2360679774997896964;

/// Matérn 5/2 with per-dimension lengthscales.
inline double matern52(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                       const Eigen::Ref<const Eigen::RowVectorXd>& b, const GPHyperparams& hp) {
    const double r = ((a - b).array() / hp.lengthscales.transpose().array()).matrix().norm();
    return hp.signal_variance * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r);
}

inline Eigen::MatrixXd cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const GPHyperparams& hp) {
    Eigen::MatrixXd K(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j) K(i, j) = matern52(A.row(i), B.row(j), hp);
    return K;
}

} // namespace kernel

/// Log-parameter layout: [log l_1 .. log l_d, log signal_variance, log noise_variance].
inline Eigen::VectorXd to_log_params(const GPHyperparams& hp) {
    const Eigen::Index d = hp.lengthscales.size();
    Eigen::VectorXd theta(d + 2);
    theta.head(d) = hp.lengthscales.array().log();
    theta(d) = std::log(hp.signal_variance);
    theta(d + 1) = std::log(hp.noise_variance);
    return theta;
}

inline GPHyperparams from_log_params(const Eigen::VectorXd& theta) {
    const Eigen::Index d = theta.size() - 2;
    GPHyperparams hp;
    hp.lengthscales = theta.head(d).array().exp();
    hp.signal_variance = std::exp(theta(d));
    hp.noise_variance = std::exp(theta(d + 1));
    return hp;
}

namespace detail {

inline constexpr double kMaxJitter = 1e-4;

// Cholesky of K + jitter*I, escalating jitter 0, 1e-8, ..., 1e-4.
inline std::optional<Eigen::LLT<Eigen::MatrixXd>> robust_cholesky(const Eigen::MatrixXd& K, double* used = nullptr) {
    const Eigen::Index n = K.rows();
    double jitter = 0.0;
    while (true) {
        Eigen::LLT<Eigen::MatrixXd> llt(K + jitter * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            if (used) *used = jitter;
            return llt;
        }
        if (jitter >= kMaxJitter) return std::nullopt;
        jitter = jitter == 0.0 ? 1e-8 : jitter * 10.0;
    }
}

} // namespace detail

/// Per-dimension squared input differences, reused across likelihood evaluations.
struct SquaredDiffs {
    std::vector<Eigen::MatrixXd> per_dim;

    explicit SquaredDiffs(const Eigen::MatrixXd& X) {
        for (Eigen::Index k = 0; k < X.cols(); ++k) {
            const Eigen::VectorXd c = X.col(k);
            per_dim.push_back((c.replicate(1, X.rows()) - c.transpose().replicate(X.rows(), 1)).array().square().matrix());
        }
    }
};

inline double log_marginal_likelihood(const SquaredDiffs& diffs, const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                                      Eigen::VectorXd* grad = nullptr) {
    const Eigen::Index n = y.size(), d = Eigen::Index(diffs.per_dim.size());
    const GPHyperparams hp = from_log_params(theta);

    std::vector<Eigen::ArrayXXd> scaled(static_cast<std::size_t>(d));
    Eigen::ArrayXXd r2 = Eigen::ArrayXXd::Zero(n, n);
    for (Eigen::Index k = 0; k < d; ++k) {
        scaled[std::size_t(k)] = diffs.per_dim[std::size_t(k)].array() / (hp.lengthscales(k) * hp.lengthscales(k));
        r2 += scaled[std::size_t(k)];
    }
    const Eigen::ArrayXXd r = r2.sqrt();
    const Eigen::ArrayXXd decay = (-kernel::kSqrt5 * r).exp();
    const Eigen::MatrixXd Kf = (hp.signal_variance * (1.0 + kernel::kSqrt5 * r + 5.0 / 3.0 * r2) * decay).matrix();
    Eigen::MatrixXd K = Kf;
    K.diagonal().array() += hp.noise_variance;
    auto llt = detail::robust_cholesky(K);
    if (!llt) return -std::numeric_limits<double>::infinity();

    const Eigen::VectorXd alpha = llt->solve(y);
    const Eigen::MatrixXd L = llt->matrixL();
    const double logdet_half = L.diagonal().array().log().sum();
    const double lml = -0.5 * y.dot(alpha) - logdet_half - 0.5 * double(n) * std::log(2.0 * std::numbers::pi);

    if (grad) {
        // d lml / d theta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta), with
        // dK/dlog l_k = s2 (5/3)(1 + sqrt5 r) exp(-sqrt5 r) (dx_k / l_k)^2.
        const Eigen::ArrayXXd W =
            (alpha * alpha.transpose() - llt->solve(Eigen::MatrixXd::Identity(n, n))).array();
        const Eigen::ArrayXXd common = hp.signal_variance * (5.0 / 3.0) * (1.0 + kernel::kSqrt5 * r) * decay * W;
        grad->resize(d + 2);
        for (Eigen::Index k = 0; k < d; ++k) (*grad)(k) = 0.5 * (common * scaled[std::size_t(k)]).sum();
        (*grad)(d) = 0.5 * (W * Kf.array()).sum();
        (*grad)(d + 1) = 0.5 * W.matrix().trace() * hp.noise_variance;
    }
    return lml;
}

/// Log marginal likelihood of zero-mean GP targets `y` at inputs `X`, and
/// optionally its gradient with respect to the log-parameters.
/// Returns -inf when the kernel matrix cannot be factorized.
inline double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& theta, Eigen::VectorXd* grad = nullptr) {
    return log_marginal_likelihood(SquaredDiffs(X), y, theta, grad);
}

struct Posterior {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
    Eigen::MatrixXd covariance; // empty when only marginals were requested
};

/// Single-output GP with zero prior mean on standardized targets.
class GaussianProcess {
public:
    GaussianProcess() = default;

    /// Builds the model at fixed hyperparameters (no fitting).
    static GaussianProcess with_hyperparams(Eigen::MatrixXd X, const Eigen::VectorXd& y, GPHyperparams hp) {
        GaussianProcess gp;
        gp.set_data(std::move(X), y);
        gp.hp_ = std::move(hp);
        gp.factorize();
        return gp;
    }

    /// Maximizes the log marginal likelihood by projected gradient ascent in
    /// log-parameter space from `restarts` log-uniform starting points.
    static GaussianProcess fit(Eigen::MatrixXd X, const Eigen::VectorXd& y, const FitOptions& opt = {}) {
        if (X.rows() < 2) throw Error(ErrorCode::InsufficientData, "GP fit needs at least 2 observations");
        GaussianProcess gp;
        gp.set_data(std::move(X), y);

        const Eigen::Index d = gp.X_.cols();
        const auto& b = opt.bounds;
        Eigen::VectorXd lo(d + 2), hi(d + 2);
        lo.head(d).setConstant(std::log(b.lengthscale_lo));
        hi.head(d).setConstant(std::log(b.lengthscale_hi));
        lo(d) = std::log(b.signal_lo);
        hi(d) = std::log(b.signal_hi);
        lo(d + 1) = std::log(b.noise_lo);
        hi(d + 1) = std::log(b.noise_hi);

        const SquaredDiffs diffs(gp.X_);
        std::mt19937_64 rng(opt.seed);
        auto log_uniform = [&rng](double a, double z) {
            return std::uniform_real_distribution<double>(std::log(a), std::log(z))(rng);
        };

        double best = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_theta;
        for (int r = 0; r < std::max(1, opt.restarts); ++r) {
            Eigen::VectorXd theta(d + 2);
            for (Eigen::Index k = 0; k < d; ++k) theta(k) = log_uniform(0.05, 5.0);
            theta(d) = log_uniform(0.1, 10.0);
            theta(d + 1) = log_uniform(1e-4, 1e-1);
            theta = theta.cwiseMax(lo).cwiseMin(hi);
            const double value = ascend(diffs, gp.y_, theta, lo, hi, opt.max_iterations);
            if (value > best) {
                best = value;
                best_theta = theta;
            }
        }
        if (!std::isfinite(best)) throw Error(ErrorCode::NumericalFailure, "no restart produced a factorizable kernel");
        gp.hp_ = from_log_params(best_theta);
        gp.factorize();
        return gp;
    }

    const GPHyperparams& hyperparams() const noexcept { return hp_; }
    double target_mean() const noexcept { return y_mean_; }
    double target_scale() const noexcept { return y_std_; }
    double jitter() const noexcept { return jitter_; }
    const Eigen::MatrixXd& inputs() const noexcept { return X_; }

    /// Log marginal likelihood of the standardized targets at the fitted hyperparameters.
    double log_marginal_likelihood() const { return ehmi::log_marginal_likelihood(X_, y_, to_log_params(hp_)); }

    Posterior predict(const Eigen::MatrixXd& Xq, bool full_covariance = true) const {
        const Eigen::MatrixXd Ks = kernel::cross(X_, Xq, hp_);
        Posterior post;
        post.mean = (Ks.transpose() * alpha_).array() * y_std_ + y_mean_;
        const Eigen::MatrixXd V = llt_.matrixL().solve(Ks);
        const double scale2 = y_std_ * y_std_;
        if (full_covariance) {
            Eigen::MatrixXd cov = kernel::cross(Xq, Xq, hp_) - V.transpose() * V;
            const Eigen::MatrixXd sym = 0.5 * scale2 * (cov + cov.transpose()); // no aliasing through transpose
            cov = sym;
            post.variance = cov.diagonal().cwiseMax(0.0);
            post.covariance = std::move(cov);
        } else {
            post.variance = ((hp_.signal_variance - V.colwise().squaredNorm().array()) * scale2).max(0.0).matrix();
        }
        return post;
    }

private:
    void set_data(Eigen::MatrixXd X, const Eigen::VectorXd& y) {
        if (X.rows() != y.size()) throw Error(ErrorCode::InsufficientData, "inputs and targets misaligned");
        if (X.rows() < 1) throw Error(ErrorCode::InsufficientData, "GP needs data");
        X_ = std::move(X);
        y_mean_ = y.mean();
        const double var = y.size() > 1 ? (y.array() - y_mean_).square().sum() / double(y.size() - 1) : 0.0;
        y_std_ = std::max(std::sqrt(var), 1e-6);
        y_ = (y.array() - y_mean_) / y_std_;
    }

    void factorize() {
        Eigen::MatrixXd K = kernel::cross(X_, X_, hp_);
        K.diagonal().array() += hp_.noise_variance;
        auto llt = detail::robust_cholesky(K, &jitter_);
        if (!llt) throw Error(ErrorCode::NumericalFailure, "kernel matrix not positive definite at max jitter");
        llt_ = std::move(*llt);
        alpha_ = llt_.solve(y_);
    }

    static double ascend(const SquaredDiffs& X, const Eigen::VectorXd& y, Eigen::VectorXd& theta,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int max_iterations) {
        Eigen::VectorXd grad;
        double value = ehmi::log_marginal_likelihood(X, y, theta, &grad);
        if (!std::isfinite(value)) return value;
        double step = 0.1;
        for (int it = 0; it < max_iterations; ++it) {
            bool accepted = false;
            for (int halving = 0; halving < 40; ++halving) {
                const Eigen::VectorXd trial = (theta + step * grad).cwiseMax(lo).cwiseMin(hi);
                const Eigen::VectorXd moved = trial - theta;
                if (moved.norm() < 1e-12) break;
                Eigen::VectorXd trial_grad;
                const double trial_value = ehmi::log_marginal_likelihood(X, y, trial, &trial_grad);
                if (std::isfinite(trial_value) && trial_value >= value + 1e-4 * grad.dot(moved)) {
                    const double gain = trial_value - value;
                    theta = trial;
                    value = trial_value;
                    grad = std::move(trial_grad);
                    accepted = true;
                    step *= 2.0;
                    if (gain < 1e-9) return value;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
        return value;
    }

    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    double y_mean_ = 0.0;
    double y_std_ = 1.0;
    GPHyperparams hp_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
};

struct MultiPosterior {
    Eigen::MatrixXd mean;                 // m x k
    Eigen::MatrixXd variance;             // m x k
    std::vector<Eigen::MatrixXd> covariance; // k entries of m x m (empty for marginal queries)
};

/// Independent GPs, one per objective column, over a shared input matrix.
class SurrogateModel {
public:
    SurrogateModel() = default;

    static SurrogateModel fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const FitOptions& opt = {}) {
        if (X.rows() < 2) throw Error(ErrorCode::InsufficientData, "surrogate needs at least 2 observations");
        if (X.rows() != Y.rows()) throw Error(ErrorCode::InsufficientData, "inputs and targets misaligned");
        SurrogateModel m;
        for (Eigen::Index o = 0; o < Y.cols(); ++o) {
            FitOptions per = opt;
            per.seed = opt.seed * 0x9E3779B97F4A7C15ull + std::uint64_t(o) + 1;
            m.gps_.push_back(GaussianProcess::fit(X, Y.col(o), per));
        }
        return m;
    }

    static SurrogateModel from_models(std::vector<GaussianProcess> gps) {
        SurrogateModel m;
        m.gps_ = std::move(gps);
        return m;
    }

    std::size_t num_outputs() const noexcept { return gps_.size(); }
    const GaussianProcess& output(std::size_t i) const { return gps_.at(i); }

    MultiPosterior posterior(const Eigen::MatrixXd& Xq, bool full_covariance = true) const {
        MultiPosterior out;
        const Eigen::Index k = Eigen::Index(gps_.size());
        out.mean.resize(Xq.rows(), k);
        out.variance.resize(Xq.rows(), k);
        for (Eigen::Index o = 0; o < k; ++o) {
            Posterior p = gps_[std::size_t(o)].predict(Xq, full_covariance);
            out.mean.col(o) = p.mean;
            out.variance.col(o) = p.variance;
            if (full_covariance) out.covariance.push_back(std::move(p.covariance));
        }
        return out;
    }

private:
    std::vector<GaussianProcess> gps_;
};

namespace detail {

// Symmetric square root via eigendecomposition; exact (zero) for degenerate covariances.
inline Eigen::MatrixXd psd_root(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "covariance eigendecomposition failed");
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

} // namespace detail

/// Joint posterior draws: result[s] is an m x k matrix for sample s.
inline std::vector<Eigen::MatrixXd> sample_posterior(const SurrogateModel& model, const Eigen::MatrixXd& Xq,
                                                     int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw Error(ErrorCode::ConfigInvalid, "n_samples must be >= 1");
    const MultiPosterior post = model.posterior(Xq, true);
    const Eigen::Index m = Xq.rows(), k = post.mean.cols();
    std::vector<Eigen::MatrixXd> roots;
    for (const auto& c : post.covariance) roots.push_back(detail::psd_root(c));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<Eigen::MatrixXd> draws(std::size_t(n_samples), Eigen::MatrixXd(m, k));
    Eigen::VectorXd z(m);
    for (auto& draw : draws) {
        for (Eigen::Index o = 0; o < k; ++o) {
            for (Eigen::Index i = 0; i < m; ++i) z(i) = normal(rng);
            draw.col(o) = post.mean.col(o) + roots[std::size_t(o)] * z;
        }
    }
    return draws;
}

} // namespace ehmi
