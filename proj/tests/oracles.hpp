#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library's likelihood or regression code.

#include "peerfx/core_model.hpp"
#include "peerfx/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// Pr(R1 = r1, R2 = r2) enumerated from the two independent logistic naming
// models, in long double.
inline long double cell(const Eigen::VectorXd& t1, const Eigen::VectorXd& t2,
                        const peerfx::AnalysisFrame& f, int r1, int r2) {
    long double e1 = 0, e2 = 0;
    for (Eigen::Index k = 0; k < t1.size(); ++k) e1 += static_cast<long double>(t1[k]) * f.x1[k];
    for (Eigen::Index k = 0; k < t2.size(); ++k) e2 += static_cast<long double>(t2[k]) * f.x2[k];
    const long double num = std::exp(e1 * r1 + e2 * r2);
    return num / ((1.0L + std::exp(e1)) * (1.0L + std::exp(e2)));
}

// Category s = 2 r1 + r2.
inline std::array<long double, 4> categories(const Eigen::VectorXd& t1, const Eigen::VectorXd& t2,
                                             const peerfx::AnalysisFrame& f) {
    return {cell(t1, t2, f, 0, 0), cell(t1, t2, f, 0, 1), cell(t1, t2, f, 1, 0), cell(t1, t2, f, 1, 1)};
}

inline long double truncated(const Eigen::VectorXd& t1, const Eigen::VectorXd& t2,
                             const peerfx::AnalysisFrame& f) {
    const auto p = categories(t1, t2, f);
    return p[static_cast<std::size_t>(f.s.code())] / (p[1] + p[2] + p[3]);
}

inline long double loglik(const Eigen::VectorXd& t1, const Eigen::VectorXd& t2,
                          const std::vector<peerfx::AnalysisFrame>& frames) {
    long double total = 0;
    for (const auto& f : frames) total += std::log(truncated(t1, t2, f));
    return total;
}

// Heteroskedasticity-robust (HC0) OLS covariance (X'X)^-1 X' diag(e^2) X (X'X)^-1.
struct RobustOls {
    Eigen::VectorXd coef;
    Eigen::MatrixXd cov;
};

inline RobustOls robust_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::MatrixXd xtx = x.transpose() * x;
    const Eigen::MatrixXd inv = xtx.inverse();
    RobustOls r;
    r.coef = inv * (x.transpose() * y);
    const Eigen::VectorXd e = y - x * r.coef;
    const Eigen::MatrixXd meat = x.transpose() * e.array().square().matrix().asDiagonal() * x;
    r.cov = inv * meat * inv;
    return r;
}

// Dyads drawn directly from the truncated nameship law at a known theta.
// x1 = (1, a, sex1, age1, z), x2 = (1, y2_b, sex2, age2).
inline std::vector<peerfx::AnalysisFrame> nameship_sample(const Eigen::VectorXd& t1,
                                                          const Eigen::VectorXd& t2, int n,
                                                          std::uint64_t seed) {
    std::vector<peerfx::AnalysisFrame> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto rng = peerfx::substream(seed, static_cast<std::uint64_t>(i));
        std::normal_distribution<double> normal;
        std::bernoulli_distribution coin(0.5);
        std::bernoulli_distribution exposed(0.4);
        peerfx::AnalysisFrame f;
        f.id = "n" + std::to_string(i);
        f.x1.resize(5);
        f.x1 << 1.0, exposed(rng) ? 1.0 : 0.0, coin(rng) ? 1.0 : 0.0, normal(rng), normal(rng);
        f.x2.resize(4);
        f.x2 << 1.0, normal(rng), coin(rng) ? 1.0 : 0.0, normal(rng);
        f.a = f.x1[1];
        f.z = f.x1[4];
        f.c = Eigen::VectorXd::Zero(1);
        const double e1 = t1.dot(f.x1);
        const double e2 = t2.dot(f.x2);
        // Truncated law over s = 1, 2, 3 with logits e2, e1, e1 + e2.
        const double w1 = std::exp(e2), w2 = std::exp(e1), w3 = std::exp(e1 + e2);
        const double u = peerfx::uniform_open(rng) * (w1 + w2 + w3);
        const int s = u < w1 ? 1 : (u < w1 + w2 ? 2 : 3);
        f.s = peerfx::NameshipType::from_code(s);
        out.push_back(std::move(f));
    }
    return out;
}

struct Summary {
    double mean = 0.0;
    double sd = 0.0;
    double mcse = 0.0;  // sd / sqrt(n)
    std::size_t n = 0;
};

inline Summary summarize(const std::vector<double>& v) {
    Summary s;
    s.n = v.size();
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    s.mcse = s.sd / std::sqrt(static_cast<double>(v.size()));
    return s;
}

}  // namespace oracle
