#include "peerfx/nameship_mle.hpp"

#include "peerfx/error.hpp"

#include <algorithm>
#include <cmath>

namespace peerfx {

NameshipParams NameshipParams::zeros(const FrameLayout& layout) {
    NameshipParams p;
    p.theta1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.alter.size() + 1));
    p.theta2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.ego.size() + 1));
    return p;
}

NameshipParams NameshipParams::from_stacked(const Eigen::VectorXd& stacked, Eigen::Index n_theta1) {
    if (n_theta1 < 1 || n_theta1 >= stacked.size()) {
        fail(ErrorKind::invalid_argument, "stacked nameship vector too short for its split");
    }
    NameshipParams p;
    p.theta1 = stacked.head(n_theta1);
    p.theta2 = stacked.tail(stacked.size() - n_theta1);
    return p;
}

Eigen::VectorXd NameshipParams::stacked() const {
    Eigen::VectorXd out(size());
    out << theta1, theta2;
    return out;
}

std::vector<std::string> nameship_coordinate_names(const FrameLayout& layout) {
    std::vector<std::string> names;
    names.push_back("theta1[(Intercept)]");
    for (const auto& c : layout.alter) names.push_back("theta1[" + c + "]");
    names.push_back("theta2[(Intercept)]");
    for (const auto& c : layout.ego) names.push_back("theta2[" + c + "]");
    return names;
}

namespace {

struct LinearPredictors {
    double e1;
    double e2;
};

LinearPredictors predictors(const NameshipParams& theta, const AnalysisFrame& frame) {
    if (theta.theta1.size() != frame.x1.size() || theta.theta2.size() != frame.x2.size()) {
        fail(ErrorKind::invalid_argument,
             "nameship parameter dimensions (" + std::to_string(theta.theta1.size()) + "," +
                 std::to_string(theta.theta2.size()) + ") do not match the frame layout (" +
                 std::to_string(frame.x1.size()) + "," + std::to_string(frame.x2.size()) + ")");
    }
    return {theta.theta1.dot(frame.x1), theta.theta2.dot(frame.x2)};
}

// logistic(x) without overflow for large |x|
double expit(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Probabilities of s = 1, 2, 3 given S >= 1, i.e. a softmax over the logits
// (e2, e1, e1 + e2), plus the log normaliser.
struct Truncated {
    double w1, w2, w3;
    double log_norm;
};

Truncated truncated_law(const LinearPredictors& lp) {
    const double l1 = lp.e2;
    const double l2 = lp.e1;
    const double l3 = lp.e1 + lp.e2;
    const double m = std::max({l1, l2, l3});
    const double x1 = std::exp(l1 - m);
    const double x2 = std::exp(l2 - m);
    const double x3 = std::exp(l3 - m);
    const double sum = x1 + x2 + x3;
    return {x1 / sum, x2 / sum, x3 / sum, m + std::log(sum)};
}

void require_observed(const AnalysisFrame& frame) {
    if (frame.s.code() == 0) {
        fail(ErrorKind::invalid_argument,
             "dyad " + frame.id + " has nameship type 0, which is never observed");
    }
}

}  // namespace

double joint_prob(const NameshipParams& theta, const AnalysisFrame& frame, int r1, int r2) {
    const NameshipType s = classify_nameship(r1, r2);
    const auto lp = predictors(theta, frame);
    const double p1 = s.r1() == 1 ? expit(lp.e1) : expit(-lp.e1);
    const double p2 = s.r2() == 1 ? expit(lp.e2) : expit(-lp.e2);
    return p1 * p2;
}

std::array<double, 4> category_probs(const NameshipParams& theta, const AnalysisFrame& frame) {
    const auto lp = predictors(theta, frame);
    const double a1 = expit(lp.e1);
    const double n1 = expit(-lp.e1);
    const double a2 = expit(lp.e2);
    const double n2 = expit(-lp.e2);
    return {n1 * n2, n1 * a2, a1 * n2, a1 * a2};
}

double truncated_prob(const NameshipParams& theta, const AnalysisFrame& frame) {
    require_observed(frame);
    const auto law = truncated_law(predictors(theta, frame));
    switch (frame.s.code()) {
        case 1: return law.w1;
        case 2: return law.w2;
        default: return law.w3;
    }
}

double log_likelihood(const NameshipParams& theta, std::span<const AnalysisFrame> frames) {
    double total = 0.0;
    for (const auto& f : frames) {
        require_observed(f);
        const auto lp = predictors(theta, f);
        const auto law = truncated_law(lp);
        total += f.s.r1() * lp.e1 + f.s.r2() * lp.e2 - law.log_norm;
    }
    return total;
}

Eigen::VectorXd score_contribution(const NameshipParams& theta, const AnalysisFrame& frame) {
    require_observed(frame);
    const auto law = truncated_law(predictors(theta, frame));
    const double q1 = law.w2 + law.w3;
    const double q2 = law.w1 + law.w3;
    Eigen::VectorXd g(theta.size());
    g.head(theta.theta1.size()) = (frame.s.r1() - q1) * frame.x1;
    g.tail(theta.theta2.size()) = (frame.s.r2() - q2) * frame.x2;
    return g;
}

Eigen::VectorXd score(const NameshipParams& theta, std::span<const AnalysisFrame> frames) {
    const Eigen::Index n1 = theta.theta1.size();
    const Eigen::Index n2 = theta.theta2.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n1 + n2);
    for (const auto& f : frames) {
        require_observed(f);
        const auto law = truncated_law(predictors(theta, f));
        g.head(n1) += (f.s.r1() - (law.w2 + law.w3)) * f.x1;
        g.tail(n2) += (f.s.r2() - (law.w1 + law.w3)) * f.x2;
    }
    return g;
}

Eigen::MatrixXd hessian(const NameshipParams& theta, std::span<const AnalysisFrame> frames) {
    const Eigen::Index n1 = theta.theta1.size();
    const Eigen::Index n2 = theta.theta2.size();
    Eigen::MatrixXd h11 = Eigen::MatrixXd::Zero(n1, n1);
    Eigen::MatrixXd h12 = Eigen::MatrixXd::Zero(n1, n2);
    Eigen::MatrixXd h22 = Eigen::MatrixXd::Zero(n2, n2);
    for (const auto& f : frames) {
        require_observed(f);
        const auto law = truncated_law(predictors(theta, f));
        const double q1 = law.w2 + law.w3;
        const double q2 = law.w1 + law.w3;
        const double v11 = q1 * (1.0 - q1);
        const double v22 = q2 * (1.0 - q2);
        const double v12 = law.w3 - q1 * q2;
        h11.noalias() -= v11 * f.x1 * f.x1.transpose();
        h12.noalias() -= v12 * f.x1 * f.x2.transpose();
        h22.noalias() -= v22 * f.x2 * f.x2.transpose();
    }
    Eigen::MatrixXd h(n1 + n2, n1 + n2);
    h.topLeftCorner(n1, n1) = h11;
    h.topRightCorner(n1, n2) = h12;
    h.bottomLeftCorner(n2, n1) = h12.transpose();
    h.bottomRightCorner(n2, n2) = h22;
    return h;
}

Eigen::VectorXd MleReport::standard_errors() const {
    const Eigen::MatrixXd info = -hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        fail(ErrorKind::singular_covariance, "observed information is not positive definite");
    }
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
    return cov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

MleReport fit_nameship(std::span<const AnalysisFrame> frames, const NameshipParams& init,
                       const MleOptions& options) {
    if (!(options.tol > 0.0)) fail(ErrorKind::invalid_argument, "tolerance must be positive");
    if (options.max_iter < 0) fail(ErrorKind::invalid_argument, "max_iter must be non-negative");
    if (frames.empty()) fail(ErrorKind::invalid_argument, "no frames to fit the nameship model");

    const Eigen::Index n1 = init.theta1.size();
    Eigen::VectorXd theta = init.stacked();
    if (!theta.allFinite()) fail(ErrorKind::invalid_argument, "initial nameship parameters not finite");

    auto params = [&](const Eigen::VectorXd& v) { return NameshipParams::from_stacked(v, n1); };

    MleReport report;
    double ll = log_likelihood(params(theta), frames);
    report.loglik_trace.push_back(ll);
    Eigen::VectorXd g = score(params(theta), frames);
    Eigen::MatrixXd h = hessian(params(theta), frames);

    int iter = 0;
    while (g.lpNorm<Eigen::Infinity>() > options.tol && iter < options.max_iter) {
        Eigen::VectorXd direction;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-h);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
            ldlt.vectorD().minCoeff() > 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
            direction = ldlt.solve(g);
        } else {
            direction = g / std::max(1.0, g.norm());
        }

        // Rounding slack lets the final quadratic-convergence steps through,
        // where the true gain is below double resolution of l.
        const double slack = 1e-12 * (1.0 + std::abs(ll));
        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd candidate;
        double candidate_ll = 0.0;
        for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
            candidate = theta + step * direction;
            candidate_ll = log_likelihood(params(candidate), frames);
            if (std::isfinite(candidate_ll) && candidate_ll >= ll - slack) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;

        theta = candidate;
        ll = candidate_ll;
        ++iter;
        report.loglik_trace.push_back(ll);
        g = score(params(theta), frames);
        h = hessian(params(theta), frames);
        if (!g.allFinite() || !h.allFinite()) {
            fail(ErrorKind::numeric, "non-finite score or Hessian during nameship fit");
        }
    }

    report.theta_hat = params(theta);
    report.loglik = ll;
    report.gradient_norm = g.lpNorm<Eigen::Infinity>();
    report.iterations = iter;
    report.converged = report.gradient_norm <= options.tol;
    report.hessian = 0.5 * (h + h.transpose());

    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        if (std::abs(theta[i]) > options.separation_bound) {
            const auto idx = static_cast<std::size_t>(i);
            const std::string name = idx < options.coordinate_names.size()
                                         ? options.coordinate_names[idx]
                                         : "theta[" + std::to_string(i) + "]";
            fail(ErrorKind::divergence,
                 "nameship likelihood appears unbounded (perfect separation) along " + name +
                     ": |estimate| = " + std::to_string(std::abs(theta[i])) + " exceeds " +
                     std::to_string(options.separation_bound));
        }
    }
    return report;
}

}  // namespace peerfx
