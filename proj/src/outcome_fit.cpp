#include "peerfx/outcome_fit.hpp"

#include "peerfx/error.hpp"
#include "peerfx/sandwich.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace peerfx {

namespace {

std::vector<Eigen::Index> indices_in(const std::vector<std::string>& wanted,
                                     const std::vector<std::string>& c_names) {
    std::vector<Eigen::Index> idx;
    for (const auto& w : wanted) {
        auto it = std::find(c_names.begin(), c_names.end(), w);
        if (it == c_names.end()) {
            fail(ErrorKind::invalid_argument, "column '" + w + "' is not among the C columns");
        }
        idx.push_back(static_cast<Eigen::Index>(it - c_names.begin()));
    }
    return idx;
}

}  // namespace

DesignSpec DesignSpec::adjusted(const FrameLayout& layout, const ModelConfig& config,
                                NameshipType s) {
    if (s.code() == 0) fail(ErrorKind::invalid_argument, "stratum must be one of 1, 2, 3");
    DesignSpec spec;
    spec.stratum = s;
    spec.link = config.link;
    spec.homophily = true;
    spec.c_names = layout.c;
    spec.exposure_interact = indices_in(config.exposure_interact, layout.c);
    if (config.homophily_form == HomophilyForm::interact_with_c) {
        spec.homophily_interact = indices_in(config.homophily_interact, layout.c);
    }
    return spec;
}

DesignSpec DesignSpec::naive(const FrameLayout& layout, const ModelConfig& config,
                             std::optional<NameshipType> s) {
    if (s && s->code() == 0) fail(ErrorKind::invalid_argument, "stratum must be one of 1, 2, 3");
    DesignSpec spec;
    spec.stratum = s;
    spec.link = config.link;
    spec.homophily = false;
    spec.c_names = layout.c;
    spec.exposure_interact = indices_in(config.exposure_interact, layout.c);
    return spec;
}

std::vector<int> DesignSpec::other_categories() const {
    std::vector<int> out;
    if (!homophily || !stratum) return out;
    for (int t = 0; t < 4; ++t) {
        if (t != stratum->code()) out.push_back(t);
    }
    return out;
}

std::vector<std::string> DesignSpec::column_names() const {
    std::vector<std::string> names{"(Intercept)", "a"};
    for (const auto& c : c_names) names.push_back(c);
    for (auto k : exposure_interact) names.push_back("a:" + c_names[static_cast<std::size_t>(k)]);
    const auto others = other_categories();
    for (int t : others) {
        for (auto k : homophily_interact) {
            names.push_back("pr_s" + std::to_string(t) + ":" + c_names[static_cast<std::size_t>(k)]);
        }
    }
    for (int t : others) names.push_back("pr_s" + std::to_string(t));
    return names;
}

Eigen::Index DesignSpec::columns() const {
    const auto n_other = static_cast<Eigen::Index>(other_categories().size());
    return 2 + static_cast<Eigen::Index>(c_names.size() + exposure_interact.size()) +
           n_other * (1 + static_cast<Eigen::Index>(homophily_interact.size()));
}

std::string DesignSpec::label() const {
    return stratum ? "s" + std::to_string(stratum->code()) : "pooled";
}

void design_row(const DesignSpec& spec, const AnalysisFrame& frame, const NameshipParams* theta,
                Eigen::Ref<Eigen::VectorXd> row) {
    const Eigen::Index nc = static_cast<Eigen::Index>(spec.c_names.size());
    if (frame.c.size() != nc) {
        fail(ErrorKind::invalid_argument, "frame covariate dimension does not match the design");
    }
    Eigen::Index k = 0;
    row[k++] = 1.0;
    row[k++] = frame.a;
    row.segment(k, nc) = frame.c;
    k += nc;
    for (auto j : spec.exposure_interact) row[k++] = frame.a * frame.c[j];
    const auto others = spec.other_categories();
    if (!others.empty()) {
        if (theta == nullptr) {
            fail(ErrorKind::invalid_argument, "probability regressors need nameship parameters");
        }
        const auto probs = category_probs(*theta, frame);
        for (int t : others) {
            for (auto j : spec.homophily_interact) row[k++] = probs[static_cast<std::size_t>(t)] * frame.c[j];
        }
        for (int t : others) row[k++] = probs[static_cast<std::size_t>(t)];
    }
}

Stage2Design build_design(std::span<const AnalysisFrame> frames, const DesignSpec& spec,
                          const NameshipParams* theta) {
    Stage2Design d;
    d.spec = spec;
    d.names = spec.column_names();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (spec.includes(frames[i])) d.rows.push_back(i);
    }
    if (d.rows.empty()) {
        fail(ErrorKind::empty_stratum, "no observed dyads in stratum " + spec.label());
    }
    const auto n = static_cast<Eigen::Index>(d.rows.size());
    const Eigen::Index p = spec.columns();
    d.x.resize(n, p);
    d.y.resize(n);
    Eigen::VectorXd row(p);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& f = frames[d.rows[static_cast<std::size_t>(r)]];
        design_row(spec, f, theta, row);
        d.x.row(r) = row.transpose();
        d.y[r] = f.y;
    }
    if (n <= p) {
        fail(ErrorKind::insufficient_data, "stratum " + spec.label() + " has " + std::to_string(n) +
                                               " dyads for " + std::to_string(p) +
                                               " coefficients");
    }
    return d;
}

void check_full_rank(const Stage2Design& design, double rcond_threshold) {
    const Eigen::Index p = design.x.cols();
    Eigen::MatrixXd scaled = design.x;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double norm = scaled.col(j).norm();
        if (norm == 0.0) {
            fail(ErrorKind::collinearity, "design for stratum " + design.spec.label() +
                                              " is rank deficient: column " +
                                              design.names[static_cast<std::size_t>(j)] +
                                              " is identically zero");
        }
        scaled.col(j) /= norm;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(scaled);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double rcond = sv.maxCoeff() > 0 ? sv.minCoeff() / sv.maxCoeff() : 0.0;
    if (rcond >= rcond_threshold) return;

    std::vector<std::string> involved;
    for (Eigen::Index k = 0; k < p; ++k) {
        if (sv[k] >= rcond_threshold * sv.maxCoeff()) continue;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (std::abs(svd.matrixV()(j, k)) > 0.05) {
                const auto& name = design.names[static_cast<std::size_t>(j)];
                if (std::find(involved.begin(), involved.end(), name) == involved.end()) {
                    involved.push_back(name);
                }
            }
        }
    }
    std::ostringstream msg;
    msg << "design for stratum " << design.spec.label()
        << " is rank deficient (reciprocal condition number " << rcond << "); collinear columns:";
    for (const auto& name : involved) msg << ' ' << name;
    fail(ErrorKind::collinearity, msg.str());
}

Stage2Design stage2_design(const FrameSet& frames, const NameshipParams& theta_hat, NameshipType s,
                           const ModelConfig& config) {
    const auto spec = DesignSpec::adjusted(frames.layout, config, s);
    auto design = build_design(frames.frames, spec, &theta_hat);
    check_full_rank(design);
    return design;
}

Eigen::Index OutcomeFit::index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) fail(ErrorKind::invalid_argument, "no coefficient named '" + name + "'");
    return static_cast<Eigen::Index>(it - names.begin());
}

Eigen::VectorXd OutcomeFit::beta_c() const {
    return coef.segment(2, static_cast<Eigen::Index>(spec.c_names.size()));
}

Eigen::VectorXd OutcomeFit::beta_hom() const {
    const auto n = static_cast<Eigen::Index>(spec.other_categories().size());
    return coef.tail(n);
}

namespace {

OutcomeFit fit_least_squares(const Stage2Design& d) {
    OutcomeFit fit;
    fit.spec = d.spec;
    fit.names = d.names;
    fit.coef = d.x.colPivHouseholderQr().solve(d.y);
    fit.fitted = d.x * fit.coef;
    fit.residuals = d.y - fit.fitted;
    fit.n_used = d.rows.size();
    if (!fit.coef.allFinite()) fail(ErrorKind::numeric, "non-finite least-squares coefficients");
    return fit;
}

double quasi_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double q = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) q += y[i] * eta[i] - std::exp(eta[i]);
    return q;
}

OutcomeFit fit_log_link(const Stage2Design& d, const OutcomeOptions& options) {
    if ((d.y.array() < 0.0).any()) {
        fail(ErrorKind::invalid_argument,
             "multiplicative model needs a non-negative outcome in stratum " + d.spec.label());
    }
    if ((d.y.array() == 0.0).all()) {
        fail(ErrorKind::degenerate_response, "all outcomes are zero in stratum " + d.spec.label());
    }
    const Eigen::Index p = d.x.cols();
    const double n = static_cast<double>(d.y.size());

    Eigen::VectorXd beta;
    if (options.start) {
        if (options.start->size() != p) fail(ErrorKind::invalid_argument, "start vector has wrong size");
        beta = *options.start;
    } else {
        beta = Eigen::VectorXd::Zero(p);
        beta[0] = std::log(d.y.mean());
    }

    OutcomeFit fit;
    fit.spec = d.spec;
    fit.names = d.names;
    fit.n_used = d.rows.size();

    double q = quasi_loglik(d.x, d.y, beta);
    int iter = 0;
    Eigen::VectorXd moment;
    for (;;) {
        const Eigen::VectorXd mu = (d.x * beta).array().exp();
        moment = d.x.transpose() * (d.y - mu);
        if (!moment.allFinite()) fail(ErrorKind::numeric, "overflow in the log-link fit");
        if (moment.lpNorm<Eigen::Infinity>() <= options.tol * n || iter >= options.max_iter) break;

        const Eigen::MatrixXd info = d.x.transpose() * mu.asDiagonal() * d.x;
        Eigen::LLT<Eigen::MatrixXd> llt(info);
        const Eigen::VectorXd direction = llt.info() == Eigen::Success
                                              ? Eigen::VectorXd(llt.solve(moment))
                                              : Eigen::VectorXd(moment / std::max(1.0, moment.norm()));
        const double slack = 1e-12 * (1.0 + std::abs(q));
        double step = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
            const Eigen::VectorXd candidate = beta + step * direction;
            const double cq = quasi_loglik(d.x, d.y, candidate);
            if (std::isfinite(cq) && cq >= q - slack) {
                beta = candidate;
                q = cq;
                accepted = true;
                break;
            }
        }
        ++iter;
        if (!accepted) break;
    }

    fit.coef = beta;
    fit.fitted = (d.x * beta).array().exp();
    fit.residuals = d.y - fit.fitted;
    fit.iterations = iter;
    fit.converged = moment.lpNorm<Eigen::Infinity>() <= options.tol * n;
    return fit;
}

}  // namespace

OutcomeFit fit_design(const Stage2Design& design, const OutcomeOptions& options) {
    return design.spec.link == Link::additive ? fit_least_squares(design)
                                              : fit_log_link(design, options);
}

OutcomeFit fit_additive(const FrameSet& frames, const NameshipParams& theta_hat, NameshipType s,
                        const ModelConfig& config) {
    ModelConfig additive = config;
    additive.link = Link::additive;
    const auto design = stage2_design(frames, theta_hat, s, additive);
    OutcomeFit fit = fit_least_squares(design);
    fit.theta_used = theta_hat;
    return fit;
}

OutcomeFit fit_multiplicative(const FrameSet& frames, const NameshipParams& theta_hat,
                              NameshipType s, const ModelConfig& config,
                              const OutcomeOptions& options) {
    ModelConfig multiplicative = config;
    multiplicative.link = Link::multiplicative;
    const auto design = stage2_design(frames, theta_hat, s, multiplicative);
    OutcomeFit fit = fit_log_link(design, options);
    fit.theta_used = theta_hat;
    return fit;
}

std::vector<OutcomeFit> fit_naive(const FrameSet& frames, const ModelConfig& config, bool stratified,
                                  const OutcomeOptions& options) {
    std::vector<std::optional<NameshipType>> strata;
    if (stratified) {
        for (int s = 1; s <= 3; ++s) strata.emplace_back(NameshipType::from_code(s));
    } else {
        strata.emplace_back(std::nullopt);
    }
    std::vector<OutcomeFit> fits;
    for (const auto& s : strata) {
        const auto spec = DesignSpec::naive(frames.layout, config, s);
        const auto design = build_design(frames.frames, spec, nullptr);
        check_full_rank(design);
        fits.push_back(fit_design(design, options));
    }
    return fits;
}

double contagion_effect(const OutcomeFit& fit) {
    if (!fit.spec.exposure_interact.empty()) {
        fail(ErrorKind::unsupported_form,
             "contagion effect needs the linear exposure form b(A,C) = beta_a * A; this fit has "
             "exposure-by-covariate interactions");
    }
    return fit.link() == Link::additive ? fit.beta_a() : std::exp(fit.beta_a());
}

double chi_square_upper_tail(double statistic, int df) {
    if (df < 1) fail(ErrorKind::invalid_argument, "chi-square degrees of freedom must be positive");
    if (!(statistic >= 0.0)) fail(ErrorKind::invalid_argument, "Wald statistic must be non-negative");
    if (statistic == 0.0) return 1.0;
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, statistic));
}

double normal_two_sided_p(double z) {
    if (!std::isfinite(z)) return std::isnan(z) ? std::nan("") : 0.0;
    boost::math::normal dist;
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(z)));
}

WaldResult wald_test(const Eigen::VectorXd& est, const Eigen::MatrixXd& cov,
                     const std::string& hypothesis) {
    if (est.size() == 0 || cov.rows() != est.size() || cov.cols() != est.size()) {
        fail(ErrorKind::invalid_argument, "Wald test dimensions do not match");
    }
    const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sym);
    const auto& sv = svd.singularValues();
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    if (llt.info() != Eigen::Success || sv.maxCoeff() <= 0.0 ||
        sv.minCoeff() < 1e-13 * sv.maxCoeff()) {
        fail(ErrorKind::singular_covariance,
             "covariance block for '" + hypothesis + "' is singular or not positive definite");
    }
    WaldResult r;
    r.statistic = est.dot(llt.solve(est));
    r.df = static_cast<int>(est.size());
    r.p_value = chi_square_upper_tail(std::max(0.0, r.statistic), r.df);
    r.hypothesis = hypothesis;
    return r;
}

WaldResult homophily_wald_test(std::span<const OutcomeFit> fits, const SandwichCov& cov) {
    std::vector<Eigen::Index> idx;
    std::string label = "beta_hom = 0 in";
    for (const auto& fit : fits) {
        if (!fit.spec.homophily) {
            fail(ErrorKind::invalid_argument, "naive fits carry no homophily coefficients");
        }
        label += " " + fit.spec.label();
        const auto names = fit.spec.column_names();
        const auto n_hom = fit.beta_hom().size();
        for (std::size_t j = names.size() - static_cast<std::size_t>(n_hom); j < names.size(); ++j) {
            idx.push_back(cov.index_of(fit.spec.label() + ":" + names[j]));
        }
    }
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::VectorXd est(k);
    Eigen::MatrixXd block(k, k);
    const Eigen::MatrixXd full = cov.covariance();
    for (Eigen::Index i = 0; i < k; ++i) {
        est[i] = cov.rho_hat[idx[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < k; ++j) {
            block(i, j) = full(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
    }
    return wald_test(est, block, label);
}

}  // namespace peerfx
