#include "peerfx/pipeline.hpp"

#include "peerfx/error.hpp"
#include "peerfx/random.hpp"

#include <sstream>

namespace peerfx {

std::vector<OutcomeFit> fit_adjusted(const FrameSet& frames, const NameshipParams& theta,
                                     const ModelConfig& config, const std::vector<int>& strata,
                                     const OutcomeOptions& options) {
    if (strata.empty()) fail(ErrorKind::invalid_argument, "no strata requested");
    std::vector<OutcomeFit> fits;
    for (int code : strata) {
        if (code == 0) fail(ErrorKind::invalid_argument, "stratum 0 is never observed");
        const auto s = NameshipType::from_code(code);
        OutcomeFit fit = config.link == Link::additive
                             ? fit_additive(frames, theta, s, config)
                             : fit_multiplicative(frames, theta, s, config, options);
        if (!fit.converged) {
            fail(ErrorKind::non_convergence, "stage-2 fit for stratum " + fit.spec.label() +
                                                 " did not converge in " +
                                                 std::to_string(fit.iterations) + " iterations");
        }
        fits.push_back(std::move(fit));
    }
    return fits;
}

TwoStepResult fit_two_step(const FrameSet& frames, const ModelConfig& config,
                           const TwoStepOptions& options) {
    config.validate();
    TwoStepResult out;
    MleOptions mle = options.mle;
    if (mle.coordinate_names.empty()) mle.coordinate_names = nameship_coordinate_names(frames.layout);
    const NameshipParams init = options.init ? *options.init : NameshipParams::zeros(frames.layout);
    out.nameship = fit_nameship(frames.frames, init, mle);
    if (!out.nameship.converged) {
        std::ostringstream msg;
        msg << "nameship MLE did not converge after " << out.nameship.iterations
            << " iterations (score max-norm " << out.nameship.gradient_norm << ", tolerance "
            << mle.tol << ")";
        fail(ErrorKind::non_convergence, msg.str());
    }
    out.fits = fit_adjusted(frames, out.nameship.theta_hat, config, options.strata, options.outcome);
    out.stacked = stack_estimates(out.nameship, out.fits, frames.layout);
    out.cov = sandwich_cov(frames.frames, out.stacked.model, out.stacked.rho_hat, options.sandwich);
    out.global_wald = homophily_wald_test(out.fits, out.cov);
    for (const auto& fit : out.fits) {
        out.stratum_wald.push_back(homophily_wald_test(std::span(&fit, 1), out.cov));
    }
    return out;
}

NaiveResult fit_naive_inference(const FrameSet& frames, const ModelConfig& config, bool stratified,
                                const OutcomeOptions& options) {
    NaiveResult out;
    out.fits = fit_naive(frames, config, stratified, options);
    for (const auto& f : out.fits) {
        if (!f.converged) {
            fail(ErrorKind::non_convergence, "naive fit for " + f.spec.label() + " did not converge");
        }
    }
    const auto stacked = stack_beta_only(out.fits, nullptr);
    out.cov = sandwich_cov(frames.frames, stacked.model, stacked.rho_hat);
    return out;
}

BootstrapResult bootstrap_two_step(const FrameSet& frames, const ModelConfig& config,
                                   const TwoStepResult& fitted, int replicates, std::uint64_t seed,
                                   const TwoStepOptions& options) {
    if (replicates < 2) fail(ErrorKind::invalid_argument, "bootstrap needs at least 2 replicates");
    BootstrapResult out;
    out.names = fitted.cov.names;
    const auto n = frames.frames.size();
    const Eigen::Index dim = fitted.stacked.rho_hat.size();
    std::vector<Eigen::VectorXd> draws;

    MleOptions mle = options.mle;
    mle.coordinate_names = nameship_coordinate_names(frames.layout);
    std::vector<int> strata;
    for (const auto& f : fitted.fits) strata.push_back(f.spec.stratum->code());

    FrameSet sample;
    sample.layout = frames.layout;
    sample.frames.resize(n);
    for (int b = 0; b < replicates; ++b) {
        SplitMix64 rng = substream(seed, static_cast<std::uint64_t>(b));
        for (std::size_t i = 0; i < n; ++i) {
            sample.frames[i] = frames.frames[static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(n))];
        }
        try {
            const auto mle_fit = fit_nameship(sample.frames, fitted.nameship.theta_hat, mle);
            if (!mle_fit.converged) {
                ++out.failed;
                continue;
            }
            const auto fits = fit_adjusted(sample, mle_fit.theta_hat, config, strata, options.outcome);
            const auto stacked = stack_estimates(mle_fit, fits, frames.layout);
            if (stacked.rho_hat.size() != dim) fail(ErrorKind::numeric, "bootstrap dimension changed");
            draws.push_back(stacked.rho_hat);
        } catch (const Error&) {
            ++out.failed;
        }
    }
    if (draws.size() < 2) fail(ErrorKind::insufficient_data, "fewer than two bootstrap refits succeeded");
    out.draws.resize(static_cast<Eigen::Index>(draws.size()), dim);
    for (std::size_t r = 0; r < draws.size(); ++r) out.draws.row(static_cast<Eigen::Index>(r)) = draws[r].transpose();
    const Eigen::RowVectorXd mean = out.draws.colwise().mean();
    const Eigen::MatrixXd centered = out.draws.rowwise() - mean;
    out.se = (centered.colwise().squaredNorm() / static_cast<double>(draws.size() - 1)).cwiseSqrt().transpose();
    return out;
}

}  // namespace peerfx
