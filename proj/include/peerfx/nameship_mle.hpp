#pragma once

#include "peerfx/core_model.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace peerfx {

// Coefficients of the two per-person naming logistic models. theta1 acts on
// AnalysisFrame::x1 (intercept, alter covariates, z) and drives R1; theta2
// acts on x2 (intercept, ego covariates) and drives R2.
struct NameshipParams {
    Eigen::VectorXd theta1;
    Eigen::VectorXd theta2;

    static NameshipParams zeros(const FrameLayout& layout);
    static NameshipParams from_stacked(const Eigen::VectorXd& stacked, Eigen::Index n_theta1);

    Eigen::VectorXd stacked() const;
    Eigen::Index size() const { return theta1.size() + theta2.size(); }
};

// "theta1[(Intercept)]", "theta1[age1]", ..., then the theta2 names.
std::vector<std::string> nameship_coordinate_names(const FrameLayout& layout);

// Pr(R1 = r1, R2 = r2 | A, C, Z; theta) under independent logistic naming.
double joint_prob(const NameshipParams& theta, const AnalysisFrame& frame, int r1, int r2);

// Untruncated Pr(S = s | A, C, Z; theta) for s = 0..3.
std::array<double, 4> category_probs(const NameshipParams& theta, const AnalysisFrame& frame);

// Pr(S = frame.s | S >= 1, A, C, Z; theta).
double truncated_prob(const NameshipParams& theta, const AnalysisFrame& frame);

double log_likelihood(const NameshipParams& theta, std::span<const AnalysisFrame> frames);

// Per-dyad gradient of the truncated log-likelihood, stacked (theta1, theta2).
Eigen::VectorXd score_contribution(const NameshipParams& theta, const AnalysisFrame& frame);
Eigen::VectorXd score(const NameshipParams& theta, std::span<const AnalysisFrame> frames);

// Analytic Hessian of the truncated log-likelihood. Its negative is the sum of
// per-dyad covariances of (R1 x1, R2 x2) under the truncated law, hence NSD.
Eigen::MatrixXd hessian(const NameshipParams& theta, std::span<const AnalysisFrame> frames);

struct MleOptions {
    double tol = 1e-8;  // on the max-norm of the score
    int max_iter = 100;
    double separation_bound = 15.0;
    std::vector<std::string> coordinate_names;  // used in divergence messages
};

struct MleReport {
    NameshipParams theta_hat;
    double loglik = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    Eigen::MatrixXd hessian;
    std::vector<double> loglik_trace;  // l(theta) after each accepted step, starting at init

    // Standard errors from the inverse observed information.
    Eigen::VectorXd standard_errors() const;
};

// Newton ascent with step halving, falling back to a gradient step whenever
// the curvature is not negative definite. Throws divergence when a
// coefficient exceeds the separation bound (likelihood unbounded).
MleReport fit_nameship(std::span<const AnalysisFrame> frames, const NameshipParams& init,
                       const MleOptions& options = {});

}  // namespace peerfx
