#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "qdmeta/feature_map.hpp" // Box
#include "qdmeta/rng.hpp"

namespace qdmeta {

/// (mu/mu_W, lambda)-CMA-ES maximising a fitness over a box-constrained real
/// vector: weighted recombination of the mean, active rank-mu plus rank-one
/// covariance adaptation, and cumulative step-size control. Candidates are
/// clamped into the box for evaluation; updates use the raw samples.
class CmaEs {
public:
    CmaEs(int dim, Box box, int lambda = 5)
        : n_(dim), box_(box), lambda_(lambda), mu_(lambda / 2) {
        if (dim < 1) throw std::invalid_argument("CmaEs: dim must be >= 1");
        if (lambda < 2) throw std::invalid_argument("CmaEs: lambda must be >= 2");
        if (box.width() <= 0.0) throw std::invalid_argument("CmaEs: empty box");

        mean_ = Eigen::VectorXd::Constant(n_, box.midpoint());
        sigma_ = box.width() / 3.0;
        cov_ = Eigen::MatrixXd::Identity(n_, n_);
        path_c_ = Eigen::VectorXd::Zero(n_);
        path_sigma_ = Eigen::VectorXd::Zero(n_);
        init_weights();
        decompose();
    }

    int dim() const { return n_; }
    int lambda() const { return lambda_; }
    int mu() const { return mu_; }
    int generation() const { return generation_; }
    double sigma() const { return sigma_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const Eigen::VectorXd& path_c() const { return path_c_; }
    const Eigen::VectorXd& path_sigma() const { return path_sigma_; }
    const std::vector<double>& weights() const { return weights_; }

    std::vector<double> mean_std() const {
        return {mean_.data(), mean_.data() + mean_.size()};
    }

    /// Samples lambda candidates w_i = m + sigma * s_i with s_i ~ N(0, C),
    /// clamped into the box for evaluation. Raw samples are retained for tell().
    std::vector<std::vector<double>> ask(Rng& rng) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        raw_samples_.resize(lambda_);
        std::vector<std::vector<double>> candidates(lambda_);
        for (int i = 0; i < lambda_; ++i) {
            Eigen::VectorXd z(n_);
            for (int j = 0; j < n_; ++j) z[j] = gauss(rng);
            raw_samples_[i] = basis_ * (scales_.asDiagonal() * z);
            Eigen::VectorXd w = mean_ + sigma_ * raw_samples_[i];
            candidates[i].resize(n_);
            for (int j = 0; j < n_; ++j) candidates[i][j] = box_.clamp(w[j]);
        }
        asked_ = true;
        return candidates;
    }

    const std::vector<Eigen::VectorXd>& last_raw_samples() const { return raw_samples_; }

    /// Rank-based update from the fitnesses of the last ask() batch
    /// (maximisation). Non-finite fitnesses rank worst.
    void tell(const std::vector<double>& fitnesses) {
        if (!asked_) throw std::logic_error("tell: no pending ask batch");
        if (static_cast<int>(fitnesses.size()) != lambda_)
            throw std::invalid_argument("tell: fitness vector length != lambda");
        asked_ = false;

        std::vector<int> order(lambda_);
        std::iota(order.begin(), order.end(), 0);
        auto key = [&](int i) {
            return std::isfinite(fitnesses[i]) ? fitnesses[i]
                                               : -std::numeric_limits<double>::infinity();
        };
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return key(a) > key(b); });

        Eigen::VectorXd step = Eigen::VectorXd::Zero(n_);
        for (int i = 0; i < mu_; ++i) step += weights_[i] * raw_samples_[order[i]];

        mean_ += c_m_ * sigma_ * step;

        // C^{-1/2} via the cached eigendecomposition
        const Eigen::MatrixXd inv_sqrt =
            basis_ * scales_.cwiseInverse().asDiagonal() * basis_.transpose();

        path_sigma_ = (1.0 - c_sigma_) * path_sigma_ +
                      std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * (inv_sqrt * step);

        const double expected_norm = expected_normal_norm(n_);
        const double ps_norm = path_sigma_.norm();
        const double normaliser =
            std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * (generation_ + 1)));
        const bool h_sigma =
            ps_norm / normaliser < (1.4 + 2.0 / (n_ + 1.0)) * expected_norm;

        path_c_ = (1.0 - c_c_) * path_c_;
        if (h_sigma)
            path_c_ += std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) * step;

        double weight_sum = 0.0;
        for (double w : weights_) weight_sum += w;
        const double hs_correction = (h_sigma ? 0.0 : 1.0) * c_c_ * (2.0 - c_c_);

        cov_ *= 1.0 + c_1_ * hs_correction - c_1_ - c_mu_ * weight_sum;
        cov_ += c_1_ * (path_c_ * path_c_.transpose());
        for (int i = 0; i < lambda_; ++i) {
            const Eigen::VectorXd& s = raw_samples_[order[i]];
            double w = weights_[i];
            if (w < 0.0) {
                const double scaled = (inv_sqrt * s).squaredNorm();
                w *= n_ / std::max(scaled, 1e-12); // keeps C positive-definite
            }
            cov_ += c_mu_ * w * (s * s.transpose());
        }
        cov_ = 0.5 * (cov_ + cov_.transpose().eval());

        double exponent = (c_sigma_ / d_sigma_) * (ps_norm / expected_norm - 1.0);
        exponent = std::clamp(exponent, -1.0, 1.0);
        sigma_ *= std::exp(exponent);

        ++generation_;
        decompose();
    }

    static double expected_normal_norm(int n) {
        return std::sqrt(static_cast<double>(n)) *
               (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
    }

    // Strategy constants, exposed for tests and snapshots.
    double c_m() const { return c_m_; }
    double c_sigma() const { return c_sigma_; }
    double d_sigma() const { return d_sigma_; }
    double c_c() const { return c_c_; }
    double c_1() const { return c_1_; }
    double c_mu() const { return c_mu_; }
    double mu_eff() const { return mu_eff_; }
    const Box& box() const { return box_; }

    void restore(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double sigma,
                 const Eigen::VectorXd& path_c, const Eigen::VectorXd& path_sigma,
                 int generation) {
        if (mean.size() != n_ || cov.rows() != n_ || cov.cols() != n_ ||
            path_c.size() != n_ || path_sigma.size() != n_)
            throw std::invalid_argument("restore: dimension mismatch");
        mean_ = mean;
        cov_ = cov;
        sigma_ = sigma;
        path_c_ = path_c;
        path_sigma_ = path_sigma;
        generation_ = generation;
        decompose();
    }

private:
    void init_weights() {
        // log-rank weights: positive for the best mu, negative for the rest,
        // scaled per the standard active-CMA defaults
        std::vector<double> raw(lambda_);
        for (int i = 0; i < lambda_; ++i)
            raw[i] = std::log((lambda_ + 1) / 2.0) - std::log(i + 1.0);

        double pos_sum = 0.0, pos_sq = 0.0, neg_sum = 0.0, neg_sq = 0.0;
        for (int i = 0; i < mu_; ++i) {
            pos_sum += raw[i];
            pos_sq += raw[i] * raw[i];
        }
        for (int i = mu_; i < lambda_; ++i) {
            neg_sum += raw[i];
            neg_sq += raw[i] * raw[i];
        }
        mu_eff_ = pos_sum * pos_sum / pos_sq;
        const double mu_eff_neg = neg_sum == 0.0 ? 0.0 : neg_sum * neg_sum / neg_sq;

        c_m_ = 1.0;
        c_sigma_ = (mu_eff_ + 2.0) / (n_ + mu_eff_ + 5.0);
        d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (n_ + 1.0)) - 1.0) +
                   c_sigma_;
        c_c_ = (4.0 + mu_eff_ / n_) / (n_ + 4.0 + 2.0 * mu_eff_ / n_);
        c_1_ = 2.0 / ((n_ + 1.3) * (n_ + 1.3) + mu_eff_);
        c_mu_ = std::min(1.0 - c_1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) /
                                         ((n_ + 2.0) * (n_ + 2.0) + mu_eff_));

        const double alpha_mu = 1.0 + c_1_ / c_mu_;
        const double alpha_mueff = 1.0 + 2.0 * mu_eff_neg / (mu_eff_ + 2.0);
        const double alpha_posdef = (1.0 - c_1_ - c_mu_) / (n_ * c_mu_);
        const double neg_scale =
            std::min({alpha_mu, alpha_mueff, alpha_posdef}) / std::abs(neg_sum);

        weights_.resize(lambda_);
        for (int i = 0; i < mu_; ++i) weights_[i] = raw[i] / pos_sum;
        for (int i = mu_; i < lambda_; ++i) weights_[i] = raw[i] * neg_scale;
    }

    void decompose() {
        for (int attempt = 0; attempt < 2; ++attempt) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_);
            if (solver.info() == Eigen::Success) {
                Eigen::VectorXd eigs = solver.eigenvalues();
                const double max_eig = eigs.maxCoeff();
                if (eigs.minCoeff() > 1e-12 * max_eig) {
                    basis_ = solver.eigenvectors();
                    scales_ = eigs.cwiseSqrt();
                    return;
                }
            }
            // covariance repair: lift degenerate eigenvalues
            cov_ += 1e-10 * Eigen::MatrixXd::Identity(n_, n_);
        }
        throw std::runtime_error("CmaEs: covariance decomposition failed after repair");
    }

    int n_;
    Box box_;
    int lambda_;
    int mu_;

    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    double sigma_ = 1.0;
    Eigen::VectorXd path_c_;
    Eigen::VectorXd path_sigma_;
    int generation_ = 0;

    std::vector<double> weights_;
    double mu_eff_ = 0.0;
    double c_m_ = 1.0, c_sigma_ = 0.0, d_sigma_ = 1.0, c_c_ = 0.0, c_1_ = 0.0, c_mu_ = 0.0;

    Eigen::MatrixXd basis_;  // eigenvectors of C
    Eigen::VectorXd scales_; // sqrt eigenvalues
    std::vector<Eigen::VectorXd> raw_samples_;
    bool asked_ = false;
};

} // namespace qdmeta
