#pragma once

#include "peerfx/core_model.hpp"
#include "peerfx/nameship_mle.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace peerfx {

struct SandwichCov;

// Column layout of one stage-2 regression. Rows are
//   [1, A, C..., A*C_k (exposure interactions)..., Pr(S = t) for t != s...]
// where each probability regressor may also be multiplied by selected C
// columns (interact-with-C homophily form). Probabilities are untruncated.
struct DesignSpec {
    std::optional<NameshipType> stratum;  // nullopt: all observed dyads pooled
    Link link = Link::additive;
    bool homophily = true;
    std::vector<std::string> c_names;
    std::vector<Eigen::Index> exposure_interact;  // indices into C
    std::vector<Eigen::Index> homophily_interact;  // indices into C

    static DesignSpec adjusted(const FrameLayout& layout, const ModelConfig& config, NameshipType s);
    static DesignSpec naive(const FrameLayout& layout, const ModelConfig& config,
                            std::optional<NameshipType> s);

    bool includes(const AnalysisFrame& frame) const {
        return !stratum || frame.s == *stratum;
    }
    std::vector<int> other_categories() const;
    std::vector<std::string> column_names() const;
    Eigen::Index columns() const;
    std::string label() const;  // "s1", "s2", "s3" or "pooled"
};

// Writes the design row of `frame` into `row` (size spec.columns()). theta may
// be null only for specs without probability regressors.
void design_row(const DesignSpec& spec, const AnalysisFrame& frame, const NameshipParams* theta,
                Eigen::Ref<Eigen::VectorXd> row);

struct Stage2Design {
    DesignSpec spec;
    std::vector<std::string> names;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::size_t> rows;  // indices of the frames used
};

// Builds the stratum design and rejects rank deficiency: columns are scaled to
// unit norm and a reciprocal condition number below 1e-10 is a collinearity
// error listing the involved columns.
Stage2Design stage2_design(const FrameSet& frames, const NameshipParams& theta_hat, NameshipType s,
                           const ModelConfig& config);
Stage2Design build_design(std::span<const AnalysisFrame> frames, const DesignSpec& spec,
                          const NameshipParams* theta);
void check_full_rank(const Stage2Design& design, double rcond_threshold = 1e-10);

struct OutcomeFit {
    DesignSpec spec;
    std::vector<std::string> names;
    Eigen::VectorXd coef;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    std::optional<NameshipParams> theta_used;
    std::size_t n_used = 0;
    bool converged = true;
    int iterations = 0;

    std::optional<NameshipType> stratum() const { return spec.stratum; }
    Link link() const { return spec.link; }
    Eigen::Index index_of(const std::string& name) const;
    double beta0() const { return coef[0]; }
    double beta_a() const { return coef[1]; }
    Eigen::VectorXd beta_c() const;
    // One entry per other category (ascending), empty for naive fits.
    Eigen::VectorXd beta_hom() const;
};

struct OutcomeOptions {
    double tol = 1e-10;  // multiplicative fit: max-norm of the moment condition / n
    int max_iter = 100;
    std::optional<Eigen::VectorXd> start;  // multiplicative fit start, default log-mean intercept
};

OutcomeFit fit_additive(const FrameSet& frames, const NameshipParams& theta_hat, NameshipType s,
                        const ModelConfig& config);
OutcomeFit fit_multiplicative(const FrameSet& frames, const NameshipParams& theta_hat,
                              NameshipType s, const ModelConfig& config,
                              const OutcomeOptions& options = {});

// Link-dispatching fit of an arbitrary design.
OutcomeFit fit_design(const Stage2Design& design, const OutcomeOptions& options = {});

// Pooled fit of Y on [1, A, C], or one fit per observed stratum 1..3.
std::vector<OutcomeFit> fit_naive(const FrameSet& frames, const ModelConfig& config, bool stratified,
                                  const OutcomeOptions& options = {});

// beta_a on the additive scale, exp(beta_a) on the multiplicative scale.
double contagion_effect(const OutcomeFit& fit);

struct WaldResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    std::string hypothesis;
};

// Generic Wald test of est = 0 with covariance cov.
WaldResult wald_test(const Eigen::VectorXd& est, const Eigen::MatrixXd& cov,
                     const std::string& hypothesis);

// Tests beta^{s t} = 0 over every homophily coefficient of the given fits,
// using the matching block of the stacked sandwich covariance. One fit gives
// the per-stratum test, all fits the global one.
WaldResult homophily_wald_test(std::span<const OutcomeFit> fits, const SandwichCov& cov);

double chi_square_upper_tail(double statistic, int df);
double normal_two_sided_p(double z);

}  // namespace peerfx
