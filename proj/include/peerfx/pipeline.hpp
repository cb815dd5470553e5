#pragma once

#include "peerfx/core_model.hpp"
#include "peerfx/nameship_mle.hpp"
#include "peerfx/outcome_fit.hpp"
#include "peerfx/sandwich.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace peerfx {

struct TwoStepOptions {
    std::vector<int> strata{1, 2, 3};
    MleOptions mle;
    OutcomeOptions outcome;
    SandwichOptions sandwich;
    std::optional<NameshipParams> init;  // defaults to zeros
};

// Nameship MLE, one adjusted stage-2 fit per requested stratum, the joint
// sandwich over (theta, every beta block) and the homophily Wald tests.
struct TwoStepResult {
    MleReport nameship;
    std::vector<OutcomeFit> fits;
    StackedEstimate stacked;
    SandwichCov cov;
    WaldResult global_wald;
    std::vector<WaldResult> stratum_wald;
};

// Throws non_convergence when either stage fails to converge.
TwoStepResult fit_two_step(const FrameSet& frames, const ModelConfig& config,
                           const TwoStepOptions& options = {});

// Stage-2 fits only, at a given theta. No inference.
std::vector<OutcomeFit> fit_adjusted(const FrameSet& frames, const NameshipParams& theta,
                                     const ModelConfig& config, const std::vector<int>& strata,
                                     const OutcomeOptions& options = {});

// Naive fits (pooled or per stratum) with heteroskedasticity-robust SEs.
struct NaiveResult {
    std::vector<OutcomeFit> fits;
    SandwichCov cov;
};
NaiveResult fit_naive_inference(const FrameSet& frames, const ModelConfig& config, bool stratified,
                                const OutcomeOptions& options = {});

// Nonparametric dyad bootstrap of the two-step estimator. Replicates whose
// refit throws are skipped and counted.
struct BootstrapResult {
    std::vector<std::string> names;
    Eigen::MatrixXd draws;  // one row per successful replicate
    Eigen::VectorXd se;
    int failed = 0;
};
BootstrapResult bootstrap_two_step(const FrameSet& frames, const ModelConfig& config,
                                   const TwoStepResult& fitted, int replicates, std::uint64_t seed,
                                   const TwoStepOptions& options = {});

}  // namespace peerfx
