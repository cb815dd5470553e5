#pragma once

#include "peerfx/core_model.hpp"
#include "peerfx/nameship_mle.hpp"
#include "peerfx/outcome_fit.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace peerfx {

// Stacked estimating equations G(O; rho) for the two-step estimator:
// rho = (theta1, theta2, beta_block_1, beta_block_2, ...). Each beta block is
// one stage-2 regression; its equations are 1(dyad in block) x(theta) (Y - mu).
// With include_theta false, theta is held at fixed_theta and only the beta
// equations are stacked (the "theta known" sub-case).
struct StackedModel {
    Eigen::Index n_theta1 = 0;
    Eigen::Index n_theta2 = 0;
    bool include_theta = true;
    NameshipParams fixed_theta;
    std::vector<DesignSpec> blocks;
    std::vector<std::string> theta_names;

    Eigen::Index theta_dim() const { return include_theta ? n_theta1 + n_theta2 : 0; }
    Eigen::Index dim() const;
    Eigen::Index block_offset(std::size_t block) const;
    std::vector<std::string> coordinate_names() const;
    NameshipParams theta_at(const Eigen::VectorXd& rho) const;
};

// Model and point estimate stacked from a nameship fit and stage-2 fits.
struct StackedEstimate {
    StackedModel model;
    Eigen::VectorXd rho_hat;
};

StackedEstimate stack_estimates(const MleReport& nameship, std::span<const OutcomeFit> fits,
                                const FrameLayout& layout);
// Beta-only stack (theta fixed at the fits' plug-in value, if any).
StackedEstimate stack_beta_only(std::span<const OutcomeFit> fits,
                                const NameshipParams* fixed_theta);

// G(O_i; rho) for one dyad.
Eigen::VectorXd estimating_function(const StackedModel& model, const Eigen::VectorXd& rho,
                                    const AnalysisFrame& frame);

struct SandwichOptions {
    double relative_step = 1e-6;  // h_i = relative_step * max(1, |rho_i|)
    bool small_sample = false;    // inflate by n / (n - dim)
    // Beta columns of the bread from the exact -mu'(eta) x x^T; theta columns
    // always use finite differences. false: finite differences throughout.
    bool analytic_beta = true;
};

struct SandwichCov {
    Eigen::VectorXd rho_hat;
    std::vector<std::string> names;
    Eigen::MatrixXd sigma;  // covariance of sqrt(n) (rho_hat - rho)
    Eigen::MatrixXd bread;  // U = -n^-1 sum dG/drho^T
    Eigen::MatrixXd meat;   // V = n^-1 sum G G^T
    std::size_t n = 0;
    double root_residual = 0.0;  // max |n^-1 sum G(rho_hat)|

    Eigen::MatrixXd covariance() const { return sigma / static_cast<double>(n); }
    Eigen::VectorXd standard_errors() const;
    Eigen::Index index_of(const std::string& name) const;
    double se(const std::string& name) const;
};

// Sandwich covariance U^-1 V U^-T. Per-dyad Jacobians come from central
// differences; the reduction runs in dyad-id order so the result does not
// depend on the order of `frames`.
SandwichCov sandwich_cov(std::span<const AnalysisFrame> frames, const StackedModel& model,
                         const Eigen::VectorXd& rho_hat, const SandwichOptions& options = {});

// Analytic n^-1 sum dG_beta/dbeta^T for one block at rho, negated (the
// block's diagonal bread). Cross-check for the finite-difference path.
Eigen::MatrixXd analytic_beta_bread(std::span<const AnalysisFrame> frames, const StackedModel& model,
                                    const Eigen::VectorXd& rho, std::size_t block);

using VectorFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Central-difference Jacobian with per-coordinate step step * max(1, |x_i|).
Eigen::MatrixXd jacobian_fd(const VectorFunction& f, const Eigen::VectorXd& x, double step);

}  // namespace peerfx
