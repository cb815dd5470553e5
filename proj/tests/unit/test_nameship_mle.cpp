#include "helpers.hpp"
#include "oracles.hpp"

#include "peerfx/error.hpp"
#include "peerfx/nameship_mle.hpp"
#include "peerfx/sandwich.hpp"

#include <doctest.h>

#include <cmath>

using namespace peerfx;
using doctest::Approx;

TEST_SUITE("nameship_mle") {

TEST_CASE("joint probabilities at hand-computed points") {
    SplitMix64 rng(1);
    const auto f = testing::random_frame(rng);
    CHECK(joint_prob(testing::intercepts(0, 0), f, 1, 0) == Approx(0.25).epsilon(1e-15));
    CHECK(joint_prob(testing::intercepts(std::log(3.0), 0), f, 1, 1) == Approx(0.375).epsilon(1e-15));

    for (int rep = 0; rep < 20; ++rep) {
        const auto t = testing::random_theta(rng);
        const auto g = testing::random_frame(rng);
        double total = 0;
        for (int r1 = 0; r1 < 2; ++r1)
            for (int r2 = 0; r2 < 2; ++r2) total += joint_prob(t, g, r1, r2);
        CHECK(total == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("category and truncated probabilities") {
    SplitMix64 rng(2);
    auto f = testing::random_frame(rng, 1);
    const auto uniform = category_probs(testing::intercepts(0, 0), f);
    for (double p : uniform) CHECK(p == Approx(0.25).epsilon(1e-15));
    CHECK(truncated_prob(testing::intercepts(0, 0), f) == Approx(1.0 / 3).epsilon(1e-15));

    const auto t = testing::intercepts(std::log(2.0), 0);
    const auto p = category_probs(t, f);
    CHECK(p[0] == Approx(1.0 / 6).epsilon(1e-14));
    CHECK(p[1] == Approx(1.0 / 6).epsilon(1e-14));
    CHECK(p[2] == Approx(2.0 / 6).epsilon(1e-14));
    CHECK(p[3] == Approx(2.0 / 6).epsilon(1e-14));
    const double expect[] = {0, 0.2, 0.4, 0.4};
    for (int s = 1; s < 4; ++s) {
        f.s = NameshipType::from_code(s);
        CHECK(truncated_prob(t, f) == Approx(expect[s]).epsilon(1e-14));
    }
}

TEST_CASE("closed forms agree with enumeration on random draws") {
    SplitMix64 rng(3);
    for (int rep = 0; rep < 100; ++rep) {
        const auto t = testing::random_theta(rng);
        auto f = testing::random_frame(rng, 1 + static_cast<int>(rng() % 3));
        const auto got = category_probs(t, f);
        const auto ref = oracle::categories(t.theta1, t.theta2, f);
        double sum = 0, trunc_sum = 0;
        for (int s = 0; s < 4; ++s) {
            CHECK(std::abs(got[s] - static_cast<double>(ref[s])) <= 1e-12);
            const auto dec = NameshipType::from_code(s);
            CHECK(got[s] == joint_prob(t, f, dec.r1(), dec.r2()));
            sum += got[s];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        CHECK(std::abs(truncated_prob(t, f) - static_cast<double>(oracle::truncated(t.theta1, t.theta2, f))) <= 1e-12);
        CHECK(std::abs(truncated_prob(t, f) - got[f.s.code()] / (1.0 - got[0])) <= 1e-12);
        for (int s = 1; s < 4; ++s) {
            f.s = NameshipType::from_code(s);
            trunc_sum += truncated_prob(t, f);
        }
        CHECK(std::abs(trunc_sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("log-likelihood") {
    SplitMix64 rng(4);
    std::vector<AnalysisFrame> one{testing::random_frame(rng, 2)};
    CHECK(log_likelihood(testing::intercepts(0, 0), one) == Approx(std::log(1.0 / 3)).epsilon(1e-15));
    std::vector<AnalysisFrame> many(7, one[0]);
    CHECK(log_likelihood(testing::intercepts(0, 0), many) == Approx(7 * std::log(1.0 / 3)).epsilon(1e-14));

    for (int rep = 0; rep < 50; ++rep) {
        const auto t = testing::random_theta(rng);
        std::vector<AnalysisFrame> frames{testing::random_frame(rng, 1 + static_cast<int>(rng() % 3))};
        const double ref = static_cast<double>(oracle::loglik(t.theta1, t.theta2, frames));
        CHECK(std::abs(log_likelihood(t, frames) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("score matches central differences") {
    SplitMix64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const auto t = testing::random_theta(rng, 0.5);
        std::vector<AnalysisFrame> frames;
        for (int i = 0; i < 30; ++i) frames.push_back(testing::random_frame(rng, 1 + static_cast<int>(rng() % 3)));
        const Eigen::VectorXd g = score(t, frames);
        const auto fd = jacobian_fd(
            [&](const Eigen::VectorXd& x) {
                Eigen::VectorXd v(1);
                v[0] = log_likelihood(NameshipParams::from_stacked(x, 5), frames);
                return v;
            },
            t.stacked(), 1e-5);
        const double rel = (fd.row(0).transpose() - g).norm() / std::max(1e-8, g.norm());
        CHECK(rel <= 1e-6);
    }
}

TEST_CASE("score of one intercept-only dyad by enumeration") {
    // Truncated cells: s=1 weight e^{t2}, s=2 e^{t1}, s=3 e^{t1+t2}. For an
    // observed mutual dyad d/dt1 log p3 = 1 - (e^{t1} + e^{t1+t2}) / D.
    SplitMix64 rng(6);
    auto f = testing::random_frame(rng, 3);
    const double t1 = 0.3, t2 = -0.7;
    const auto t = testing::intercepts(t1, t2);
    const double w1 = std::exp(t2), w2 = std::exp(t1), w3 = std::exp(t1 + t2), d = w1 + w2 + w3;
    const Eigen::VectorXd g = score_contribution(t, f);
    CHECK(g[0] == Approx(1.0 - (w2 + w3) / d).epsilon(1e-13));
    CHECK(g[5] == Approx(1.0 - (w1 + w3) / d).epsilon(1e-13));
    for (int k = 1; k < 5; ++k) CHECK(g[k] == Approx(g[0] * f.x1[k]).epsilon(1e-13));
}

TEST_CASE("MLE recovers the generating parameters") {
    Eigen::VectorXd t1(5), t2(4);
    t1 << -0.3, 0.4, 0.2, -0.3, 0.6;
    t2 << -0.2, 0.3, -0.2, 0.25;
    const auto frames = oracle::nameship_sample(t1, t2, 20000, 17);
    const auto fit = fit_nameship(frames, NameshipParams{Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(4)});
    REQUIRE(fit.converged);
    CHECK(fit.gradient_norm <= 1e-8);
    const Eigen::VectorXd se = fit.standard_errors();
    Eigen::VectorXd truth(9);
    truth << t1, t2;
    const Eigen::VectorXd z = (fit.theta_hat.stacked() - truth).cwiseQuotient(se);
    CHECK(z.cwiseAbs().maxCoeff() <= 4.0);

    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
        CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-9);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.hessian);
    CHECK(eig.eigenvalues().maxCoeff() <= 1e-8);
    CHECK(score(fit.theta_hat, frames).lpNorm<Eigen::Infinity>() <= 1e-8);

    const auto warm = fit_nameship(frames, fit.theta_hat);
    CHECK(warm.converged);
    CHECK(warm.iterations <= 2);
}

TEST_CASE("all-mutual data diverge") {
    SplitMix64 rng(7);
    std::vector<AnalysisFrame> frames;
    for (int i = 0; i < 50; ++i) {
        auto f = testing::random_frame(rng, 3);
        f.x1 = Eigen::VectorXd::Ones(1);
        f.x2 = Eigen::VectorXd::Ones(1);
        frames.push_back(f);
    }
    NameshipParams init{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    try {
        fit_nameship(frames, init);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::divergence);
    }
}

TEST_CASE("option validation") {
    SplitMix64 rng(8);
    std::vector<AnalysisFrame> frames{testing::random_frame(rng, 1)};
    MleOptions bad;
    bad.tol = 0;
    CHECK_THROWS_AS(fit_nameship(frames, testing::intercepts(0, 0), bad), Error);
    CHECK_THROWS_AS(fit_nameship({}, testing::intercepts(0, 0)), Error);
}

}  // TEST_SUITE
