#pragma once

#include "peerfx/core_model.hpp"
#include "peerfx/random.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace peerfx {

// Base covariates of one candidate dyad on the scale the latent model uses:
// sexes are 0/1, ages and the ego baseline trait are standardized.
struct BaseCovariates {
    double sex1 = 0.0;
    double age1 = 0.0;
    double sex2 = 0.0;
    double age2 = 0.0;
    double y2_b = 0.0;
};

// intercept + a*A + z*Z + sum coef*covariate.
struct LinearForm {
    double intercept = 0.0;
    double a = 0.0;
    double z = 0.0;
    double sex1 = 0.0;
    double age1 = 0.0;
    double sex2 = 0.0;
    double age2 = 0.0;
    double y2_b = 0.0;

    double operator()(double a_value, const BaseCovariates& c, double z_value) const;
};

enum class OutcomeFamily { gaussian, bernoulli, poisson };
const char* to_string(OutcomeFamily family);
OutcomeFamily parse_outcome_family(const std::string& text);

struct SimConfig {
    long n_candidate = 6950;
    std::uint64_t seed = 1;

    // Display scale of the synthesized CSV columns.
    double age_mean = 40.0;
    double age_sd = 10.0;
    double y2_b_mean = 27.0;
    double y2_b_sd = 4.0;
    double sex_p = 0.5;

    // U2 ~ Normal(eta(C), sigma2); the a and z slots of eta must stay zero.
    LinearForm eta{.age2 = 0.2, .y2_b = 0.3};
    double sigma2 = 1.0;

    // Alter side: U1 ~ Normal(0, u1_sd^2); A = 1(logit-scale index + logistic
    // noise >= 0); Z = lambda U1 + Normal(0, z_noise_sd^2).
    double u1_sd = 1.0;
    LinearForm exposure{.intercept = -0.5, .age1 = 0.3};
    double exposure_u1 = 1.5;
    double y1_b_scale = 3.0;  // y1_b = threshold + scale * (index + noise)
    double lambda = 1.0;
    double z_noise_sd = 0.5;
    double y1_f_mean = 28.0;  // y1_f = mean + scale * Z
    double y1_f_scale = 4.0;

    // Log-odds of S = s against S = 0 are alpha[s] U2 + gamma[s](A, C, Z).
    std::array<double, 4> alpha{0.0, 0.5, 0.8, 1.2};
    std::array<LinearForm, 4> gamma{
        LinearForm{},
        LinearForm{.intercept = -0.2, .sex2 = 0.3, .age2 = -0.3, .y2_b = 0.2},
        LinearForm{.intercept = -0.2, .z = 1.5, .sex1 = 0.2, .age1 = -0.3},
        LinearForm{.intercept = -0.4, .z = 1.5, .sex1 = 0.2, .age1 = -0.3, .sex2 = 0.3,
                   .age2 = -0.3, .y2_b = 0.2}};

    // Outcome: mean U2 + beta0 + beta_a[s] A + beta_c(C) on the additive link,
    // exp of the same on the multiplicative link. beta_c's a and z slots must
    // stay zero (and its intercept is ignored; beta0 carries it).
    Link link = Link::additive;
    OutcomeFamily family = OutcomeFamily::gaussian;
    double beta0 = 27.5;
    std::array<double, 4> beta_a{0.0, 0.0, 0.0, 0.0};  // entry 0 unused
    LinearForm beta_c{.sex1 = 0.1, .age1 = 0.2, .sex2 = 0.3, .age2 = -0.2, .y2_b = 3.6};
    double noise_sd = 1.0;

    ModelConfig model;

    // Throws invalid_argument naming the offending field.
    void validate() const;
};

struct SimOutput {
    DyadTable table;          // retained dyads in the CSV schema
    FrameSet frames;          // build_frames(table, truth.model)
    SimConfig truth;
    long n_truncated = 0;     // candidates discarded with S = 0
    std::vector<double> u2;   // latent U2 of each retained dyad
    std::vector<int> s;       // nameship type of each retained dyad
};

SimOutput simulate(const SimConfig& config);

// Category probabilities of S given U2 = u, softmax with max subtraction.
std::array<double, 4> latent_category_probs(const SimConfig& config, double u, double a,
                                            const BaseCovariates& c, double z);

// Draws (U2, S) for a fixed (A, C, Z) from the simulated joint.
std::pair<double, int> draw_latent(const SimConfig& config, double a, const BaseCovariates& c,
                                   double z, SplitMix64& rng);

// Gauss-Hermite rule for weight exp(-x^2), by Golub-Welsch.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussHermite& gauss_hermite(int n);

// E(U2 | A, C, Z, S = s) by quadrature over U2. Compares 64 and 128 nodes and
// throws precision when they differ by more than 1e-8.
double oracle_latent_mean(const SimConfig& config, double a, const BaseCovariates& c, double z,
                          int s);
// E(Y | A, C, Z, S = s) on the additive link.
double oracle_conditional_mean(const SimConfig& config, double a, const BaseCovariates& c, double z,
                               int s);

// Importance-weighted estimate of E(U e^{aU}) / E(e^{aU}) for U ~ N(0, sigma2),
// whose closed form is sigma2 * alpha.
struct TiltedMean {
    double estimate = 0.0;
    double se = 0.0;  // delta-method Monte Carlo standard error
};
TiltedMean tilted_normal_check(double alpha, double sigma2, long n_draws, std::uint64_t seed);

// Sidecar JSON describing a SimConfig.
std::string truth_json(const SimConfig& config);

}  // namespace peerfx
