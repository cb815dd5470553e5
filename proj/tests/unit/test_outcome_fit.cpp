#include "helpers.hpp"

#include "peerfx/error.hpp"
#include "peerfx/outcome_fit.hpp"
#include "peerfx/sandwich.hpp"
#include "peerfx/sim_dgp.hpp"

#include <doctest.h>

#include <cmath>

using namespace peerfx;
using doctest::Approx;

namespace {

const SimOutput& sample() {
    static const SimOutput sim = [] {
        SimConfig cfg;
        cfg.seed = 21;
        cfg.n_candidate = 3000;
        return simulate(cfg);
    }();
    return sim;
}

NameshipParams plug_in() {
    NameshipParams t;
    t.theta1 = Eigen::VectorXd(5);
    t.theta1 << -0.8, 0.3, 0.2, -0.02, 0.1;
    t.theta2 = Eigen::VectorXd(4);
    t.theta2 << -0.4, 0.05, 0.2, -0.02;
    return t;
}

// Coefficients scaled by column spread so the linear predictor stays moderate.
Eigen::VectorXd moderate_beta(const Eigen::MatrixXd& x, double intercept) {
    Eigen::VectorXd beta(x.cols());
    beta[0] = intercept;
    for (Eigen::Index j = 1; j < x.cols(); ++j) {
        const auto col = x.col(j).array();
        const double sd = std::sqrt((col - col.mean()).square().mean());
        beta[j] = (0.1 * static_cast<double>((j * 3) % 5) - 0.2) / std::max(sd, 1e-3);
    }
    return beta;
}

FrameSet with_response(const FrameSet& base, const Stage2Design& d, const Eigen::VectorXd& y) {
    FrameSet out = base;
    for (std::size_t r = 0; r < d.rows.size(); ++r) out.frames[d.rows[r]].y = y[static_cast<Eigen::Index>(r)];
    return out;
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::numeric;
}

}  // namespace

TEST_SUITE("outcome_fit") {

TEST_CASE("design layout and probability columns") {
    const auto& fs = sample().frames;
    const auto d = stage2_design(fs, plug_in(), NameshipType::from_code(2), ModelConfig{});
    REQUIRE(d.names.size() == static_cast<std::size_t>(d.x.cols()));
    CHECK(d.names[0] == "(Intercept)");
    CHECK(d.names[1] == "a");
    CHECK(d.names[d.names.size() - 3] == "pr_s0");
    CHECK(d.names[d.names.size() - 2] == "pr_s1");
    CHECK(d.names[d.names.size() - 1] == "pr_s3");
    for (std::size_t r = 0; r < d.rows.size(); ++r) {
        const auto& f = fs.frames[d.rows[r]];
        CHECK(f.s.code() == 2);
        const auto probs = category_probs(plug_in(), f);
        const auto row = d.x.row(static_cast<Eigen::Index>(r));
        const double sum = row.tail(3).sum() + probs[2];
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("probability regressors are untruncated") {
    auto f = sample().frames.frames.front();
    f.s = NameshipType::from_code(3);
    const auto spec = DesignSpec::adjusted(sample().frames.layout, ModelConfig{}, f.s);
    Eigen::VectorXd row(spec.columns());
    const auto theta = testing::intercepts(std::log(2.0), 0);
    design_row(spec, f, &theta, row);
    CHECK(row[row.size() - 3] == Approx(1.0 / 6).epsilon(1e-14));
    CHECK(row[row.size() - 2] == Approx(1.0 / 6).epsilon(1e-14));
    CHECK(row[row.size() - 1] == Approx(2.0 / 6).epsilon(1e-14));
}

TEST_CASE("uniform nameship probabilities are collinear with the intercept") {
    CHECK(kind_of([] {
              stage2_design(sample().frames, testing::intercepts(0, 0), NameshipType::from_code(1), ModelConfig{});
          }) == ErrorKind::collinearity);
}

TEST_CASE("identical dyads leave the homophily columns unidentified") {
    FrameSet fs = sample().frames;
    const auto first = fs.frames.front();
    for (auto& f : fs.frames) {
        const auto s = f.s;
        const double y = f.y;
        f = first;
        f.s = s;
        f.y = y;
    }
    CHECK(kind_of([&] { fit_additive(fs, plug_in(), NameshipType::from_code(3), ModelConfig{}); }) ==
          ErrorKind::collinearity);
}

TEST_CASE("zero-noise responses are recovered exactly") {
    const auto& fs = sample().frames;
    for (int s = 1; s <= 3; ++s) {
        const auto stratum = NameshipType::from_code(s);
        const auto d = stage2_design(fs, plug_in(), stratum, ModelConfig{});
        const Eigen::VectorXd beta = moderate_beta(d.x, 1.0);
        const Eigen::VectorXd eta = d.x * beta;

        const auto add = fit_additive(with_response(fs, d, eta), plug_in(), stratum, ModelConfig{});
        CHECK((add.coef - beta).lpNorm<Eigen::Infinity>() <= 1e-10);
        CHECK(add.residuals.lpNorm<Eigen::Infinity>() <= 1e-9);

        const auto mult = fit_multiplicative(with_response(fs, d, eta.array().exp().matrix()), plug_in(), stratum,
                                             ModelConfig{});
        CHECK(mult.converged);
        CHECK((mult.coef - beta).lpNorm<Eigen::Infinity>() <= 1e-8);
    }

    // Naive pooled fit on a response linear in (1, A, C).
    FrameSet naive = fs;
    for (auto& f : naive.frames) f.y = 2.0 - 0.5 * f.a + f.c.sum() * 0.25;
    const auto pooled = fit_naive(naive, ModelConfig{}, false);
    REQUIRE(pooled.size() == 1);
    CHECK(pooled[0].coef[0] == Approx(2.0).epsilon(1e-12));
    CHECK(pooled[0].coef[1] == Approx(-0.5).epsilon(1e-12));
    for (Eigen::Index j = 2; j < pooled[0].coef.size(); ++j) CHECK(std::abs(pooled[0].coef[j] - 0.25) <= 1e-10);
    CHECK(fit_naive(naive, ModelConfig{}, true).size() == 3);
}

TEST_CASE("rescaling a covariate rescales only its coefficient") {
    const auto& fs = sample().frames;
    const auto stratum = NameshipType::from_code(1);
    const auto base = fit_additive(fs, plug_in(), stratum, ModelConfig{});
    for (Eigen::Index j = 0; j < fs.frames.front().c.size(); ++j) {
        FrameSet scaled = fs;
        const double k = 3.7;
        for (auto& f : scaled.frames) f.c[j] *= k;
        const auto fit = fit_additive(scaled, plug_in(), stratum, ModelConfig{});
        CHECK(std::abs(fit.coef[2 + j] * k - base.coef[2 + j]) <= 1e-10 * std::max(1.0, std::abs(base.coef[2 + j])));
        CHECK(std::abs(fit.beta_a() - base.beta_a()) <= 1e-10);
        CHECK((fit.fitted - base.fitted).lpNorm<Eigen::Infinity>() <= 1e-10 * base.fitted.lpNorm<Eigen::Infinity>());
    }
}

TEST_CASE("theta only reaches the probability columns") {
    const auto& fs = sample().frames;
    auto other = plug_in();
    other.theta1[0] += 0.3;
    other.theta2[2] -= 0.2;
    const auto stratum = NameshipType::from_code(3);
    const auto a = stage2_design(fs, plug_in(), stratum, ModelConfig{});
    const auto b = stage2_design(fs, other, stratum, ModelConfig{});
    const auto keep = a.x.cols() - 3;
    CHECK(a.x.leftCols(keep) == b.x.leftCols(keep));
    CHECK(a.x.rightCols(3) != b.x.rightCols(3));
    const auto f1 = fit_additive(fs, plug_in(), stratum, ModelConfig{});
    const auto f2 = fit_additive(fs, plug_in(), stratum, ModelConfig{});
    CHECK(f1.coef == f2.coef);
}

TEST_CASE("log-link moment condition at convergence") {
    SimConfig cfg;
    cfg.seed = 8;
    cfg.n_candidate = 4000;
    cfg.link = Link::multiplicative;
    cfg.model.link = Link::multiplicative;
    cfg.family = OutcomeFamily::bernoulli;
    cfg.sigma2 = 0.5;
    cfg.beta0 = -2.5;
    cfg.beta_a = {0, 0.4, 0.4, 0.4};
    cfg.beta_c = LinearForm{.sex1 = 0.05, .age1 = 0.05, .sex2 = 0.05, .age2 = -0.05, .y2_b = 0.1};
    const auto sim = simulate(cfg);
    for (int s = 1; s <= 3; ++s) {
        const auto stratum = NameshipType::from_code(s);
        const auto fit = fit_multiplicative(sim.frames, plug_in(), stratum, cfg.model);
        CHECK(fit.converged);
        const auto d = stage2_design(sim.frames, plug_in(), stratum, cfg.model);
        const Eigen::VectorXd mu = (d.x * fit.coef).array().exp();
        const double n = static_cast<double>(d.rows.size());
        CHECK((d.x.transpose() * (d.y - mu)).lpNorm<Eigen::Infinity>() <= 1e-8 * n);
    }
}

TEST_CASE("all-zero outcomes are rejected on the log link") {
    FrameSet fs = sample().frames;
    for (auto& f : fs.frames) f.y = 0.0;
    CHECK(kind_of([&] { fit_multiplicative(fs, plug_in(), NameshipType::from_code(1), ModelConfig{}); }) ==
          ErrorKind::degenerate_response);
}

TEST_CASE("contagion effect scale") {
    OutcomeFit fit;
    fit.coef = Eigen::VectorXd::Zero(2);
    fit.coef[1] = 0.33;
    CHECK(contagion_effect(fit) == 0.33);
    fit.spec.link = Link::multiplicative;
    fit.coef[1] = 0.0;
    CHECK(contagion_effect(fit) == 1.0);
    fit.coef[1] = std::log(2.0);
    CHECK(contagion_effect(fit) == Approx(2.0).epsilon(1e-15));
    fit.spec.exposure_interact = {0};
    CHECK(kind_of([&] { contagion_effect(fit); }) == ErrorKind::unsupported_form);
}

TEST_CASE("Wald test and tail probabilities") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    const auto null = wald_test(zero, eye, "null");
    CHECK(null.statistic == 0.0);
    CHECK(null.p_value == 1.0);
    CHECK(null.df == 2);

    Eigen::VectorXd est(1);
    est[0] = 1.96 * 0.3;
    Eigen::MatrixXd var(1, 1);
    var(0, 0) = 0.09;
    CHECK(std::abs(wald_test(est, var, "scalar").p_value - 0.05) <= 1e-3);
    CHECK(chi_square_upper_tail(3.8416, 1) == Approx(0.05).epsilon(1e-4));
    CHECK(normal_two_sided_p(1.959963984540054) == Approx(0.05).epsilon(1e-12));
    CHECK(normal_two_sided_p(0.0) == 1.0);

    Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(2, 2);
    CHECK(kind_of([&] { wald_test(Eigen::VectorXd::Ones(2), singular, "s"); }) == ErrorKind::singular_covariance);
    CHECK(kind_of([&] { wald_test(Eigen::VectorXd::Ones(3), eye, "s"); }) == ErrorKind::invalid_argument);
}

TEST_CASE("interaction forms extend the design") {
    ModelConfig config;
    config.homophily_form = HomophilyForm::interact_with_c;
    config.homophily_interact = {"sex2"};
    config.exposure_interact = {"age2"};
    const auto d = stage2_design(sample().frames, plug_in(), NameshipType::from_code(3), config);
    const auto& n = d.names;
    CHECK(std::find(n.begin(), n.end(), "a:age2") != n.end());
    CHECK(std::find(n.begin(), n.end(), "pr_s0:sex2") != n.end());
    CHECK(n.back() == "pr_s2");

    config.homophily_interact = {"bogus"};
    CHECK(kind_of([&] { stage2_design(sample().frames, plug_in(), NameshipType::from_code(3), config); }) ==
          ErrorKind::invalid_argument);
}

}  // TEST_SUITE
