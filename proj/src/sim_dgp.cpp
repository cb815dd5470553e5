#include "peerfx/sim_dgp.hpp"

#include "peerfx/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <random>

namespace peerfx {

double LinearForm::operator()(double a_value, const BaseCovariates& c, double z_value) const {
    return intercept + a * a_value + z * z_value + sex1 * c.sex1 + age1 * c.age1 + sex2 * c.sex2 +
           age2 * c.age2 + y2_b * c.y2_b;
}

const char* to_string(OutcomeFamily family) {
    switch (family) {
        case OutcomeFamily::gaussian: return "gaussian";
        case OutcomeFamily::bernoulli: return "bernoulli";
        case OutcomeFamily::poisson: return "poisson";
    }
    return "?";
}

OutcomeFamily parse_outcome_family(const std::string& text) {
    if (text == "gaussian") return OutcomeFamily::gaussian;
    if (text == "bernoulli") return OutcomeFamily::bernoulli;
    if (text == "poisson") return OutcomeFamily::poisson;
    fail(ErrorKind::invalid_argument,
         "unknown outcome family '" + text + "' (expected gaussian, bernoulli or poisson)");
}

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) fail(ErrorKind::invalid_argument, "invalid simulation setting " + field + ": " + what);
}

bool finite_form(const LinearForm& f) {
    return std::isfinite(f.intercept) && std::isfinite(f.a) && std::isfinite(f.z) &&
           std::isfinite(f.sex1) && std::isfinite(f.age1) && std::isfinite(f.sex2) &&
           std::isfinite(f.age2) && std::isfinite(f.y2_b);
}

}  // namespace

void SimConfig::validate() const {
    require(n_candidate >= 1, "n_candidate", "must be at least 1");
    require(std::isfinite(sigma2) && sigma2 > 0.0, "sigma2", "must be positive");
    require(alpha[0] == 0.0, "alpha0", "the reference category must have alpha = 0");
    for (int s = 0; s < 4; ++s) {
        require(std::isfinite(alpha[static_cast<std::size_t>(s)]), "alpha" + std::to_string(s),
                "must be finite");
        require(finite_form(gamma[static_cast<std::size_t>(s)]), "gamma" + std::to_string(s),
                "must be finite");
        require(std::isfinite(beta_a[static_cast<std::size_t>(s)]), "beta_a" + std::to_string(s),
                "must be finite");
    }
    require(std::isfinite(noise_sd) && noise_sd >= 0.0, "noise_sd", "must be non-negative");
    require(std::isfinite(u1_sd) && u1_sd > 0.0, "u1_sd", "must be positive");
    require(std::isfinite(z_noise_sd) && z_noise_sd >= 0.0, "z_noise_sd", "must be non-negative");
    require(sex_p >= 0.0 && sex_p <= 1.0, "sex_p", "must lie in [0, 1]");
    require(std::isfinite(age_sd) && age_sd > 0.0, "age_sd", "must be positive");
    require(std::isfinite(y2_b_sd) && y2_b_sd > 0.0, "y2_b_sd", "must be positive");
    require(std::isfinite(y1_b_scale) && y1_b_scale > 0.0, "y1_b_scale", "must be positive");
    require(std::isfinite(y1_f_scale) && y1_f_scale > 0.0, "y1_f_scale", "must be positive");
    require(std::isfinite(age_mean) && std::isfinite(y2_b_mean) && std::isfinite(y1_f_mean),
            "display means", "must be finite");
    require(std::isfinite(lambda) && std::isfinite(exposure_u1) && std::isfinite(beta0),
            "lambda/exposure_u1/beta0", "must be finite");
    require(finite_form(eta) && eta.a == 0.0 && eta.z == 0.0, "eta",
            "must be finite with zero a and z coefficients (U2 depends on C only)");
    require(finite_form(exposure) && exposure.a == 0.0 && exposure.z == 0.0, "exposure",
            "must be finite with zero a and z coefficients");
    require(finite_form(beta_c) && beta_c.a == 0.0 && beta_c.z == 0.0, "beta_c",
            "must be finite with zero a and z coefficients");
    require(family == OutcomeFamily::gaussian || link == Link::multiplicative, "family",
            std::string(to_string(family)) + " outcomes need the multiplicative link");
    model.validate();
}

std::array<double, 4> latent_category_probs(const SimConfig& config, double u, double a,
                                            const BaseCovariates& c, double z) {
    std::array<double, 4> logit{};
    for (std::size_t s = 0; s < 4; ++s) logit[s] = config.alpha[s] * u + config.gamma[s](a, c, z);
    const double m = *std::max_element(logit.begin(), logit.end());
    double sum = 0.0;
    for (auto& l : logit) {
        l = std::exp(l - m);
        sum += l;
    }
    for (auto& l : logit) l /= sum;
    return logit;
}

namespace {

int draw_category(const std::array<double, 4>& p, double u) {
    double cum = 0.0;
    for (int s = 0; s < 3; ++s) {
        cum += p[static_cast<std::size_t>(s)];
        if (u < cum) return s;
    }
    return 3;
}

std::string dyad_name(long index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "d%07ld", index + 1);
    return buf;
}

}  // namespace

std::pair<double, int> draw_latent(const SimConfig& config, double a, const BaseCovariates& c,
                                   double z, SplitMix64& rng) {
    std::normal_distribution<double> normal;
    const double u2 = config.eta(0.0, c, 0.0) + std::sqrt(config.sigma2) * normal(rng);
    const auto p = latent_category_probs(config, u2, a, c, z);
    return {u2, draw_category(p, uniform_open(rng))};
}

SimOutput simulate(const SimConfig& config) {
    config.validate();
    SimOutput out;
    out.truth = config;
    const double sigma = std::sqrt(config.sigma2);
    const double threshold = config.model.obesity_threshold;

    for (long i = 0; i < config.n_candidate; ++i) {
        SplitMix64 rng = substream(config.seed, static_cast<std::uint64_t>(i));
        std::normal_distribution<double> normal;
        std::bernoulli_distribution sex(config.sex_p);

        BaseCovariates c;
        c.sex1 = sex(rng) ? 1.0 : 0.0;
        c.age1 = normal(rng);
        c.sex2 = sex(rng) ? 1.0 : 0.0;
        c.age2 = normal(rng);
        c.y2_b = normal(rng);
        const double u1 = config.u1_sd * normal(rng);
        const double u2 = config.eta(0.0, c, 0.0) + sigma * normal(rng);

        const double v = uniform_open(rng);
        const double index = config.exposure(0.0, c, 0.0) + config.exposure_u1 * u1 + std::log(v / (1.0 - v));
        const double a = index >= 0.0 ? 1.0 : 0.0;
        const double z = config.lambda * u1 + config.z_noise_sd * normal(rng);

        const auto p = latent_category_probs(config, u2, a, c, z);
        const int s = draw_category(p, uniform_open(rng));

        const double mean = u2 + config.beta0 + config.beta_a[static_cast<std::size_t>(s)] * a +
                            config.beta_c(0.0, c, 0.0);
        double y = 0.0;
        if (config.link == Link::additive) {
            y = mean + config.noise_sd * normal(rng);
        } else {
            const double mu = std::exp(mean);
            switch (config.family) {
                case OutcomeFamily::gaussian:
                    y = mu * std::exp(config.noise_sd * normal(rng) - 0.5 * config.noise_sd * config.noise_sd);
                    break;
                case OutcomeFamily::bernoulli:
                    y = uniform_open(rng) < std::min(1.0, mu) ? 1.0 : 0.0;
                    break;
                case OutcomeFamily::poisson:
                    y = static_cast<double>(std::poisson_distribution<long>(mu)(rng));
                    break;
            }
        }
        if (s == 0) {
            ++out.n_truncated;
            continue;
        }

        DyadRecord r;
        r.dyad_id = dyad_name(i);
        // index >= 0 exactly when y1_b >= threshold.
        r.y1_b = threshold + config.y1_b_scale * index;
        if (a == 1.0 && r.y1_b < threshold) r.y1_b = threshold;
        if (a == 0.0 && r.y1_b >= threshold) r.y1_b = std::nextafter(threshold, -INFINITY);
        r.y1_f = config.y1_f_mean + config.y1_f_scale * z;
        r.y2_b = config.y2_b_mean + config.y2_b_sd * c.y2_b;
        r.y2_f = y;
        r.r1 = NameshipType::from_code(s).r1();
        r.r2 = NameshipType::from_code(s).r2();
        r.x1 = {c.sex1, config.age_mean + config.age_sd * c.age1};
        r.x2 = {c.sex2, config.age_mean + config.age_sd * c.age2};
        out.table.records.push_back(std::move(r));
        out.u2.push_back(u2);
        out.s.push_back(s);
    }
    if (out.table.records.empty()) {
        fail(ErrorKind::insufficient_data, "every simulated dyad had nameship type 0");
    }
    out.frames = build_frames(out.table, config.model);
    return out;
}

const GaussHermite& gauss_hermite(int n) {
    if (n < 1) fail(ErrorKind::invalid_argument, "Gauss-Hermite rule needs at least one node");
    static std::mutex mutex;
    static std::map<int, GaussHermite> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        jacobi(k - 1, k) = jacobi(k, k - 1) = std::sqrt(0.5 * k);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    GaussHermite rule;
    for (int k = 0; k < n; ++k) {
        rule.nodes.push_back(eig.eigenvalues()[k]);
        const double v0 = eig.eigenvectors()(0, k);
        rule.weights.push_back(std::sqrt(std::numbers::pi) * v0 * v0);
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

namespace {

double latent_mean_with(const GaussHermite& rule, const SimConfig& config, double a,
                        const BaseCovariates& c, double z, int s) {
    const double m = config.eta(0.0, c, 0.0);
    const double scale = std::sqrt(2.0 * config.sigma2);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double u = m + scale * rule.nodes[k];
        const double w = rule.weights[k] * latent_category_probs(config, u, a, c, z)[static_cast<std::size_t>(s)];
        num += w * u;
        den += w;
    }
    if (!(den > 0.0)) fail(ErrorKind::precision, "category has zero probability at this point");
    return num / den;
}

}  // namespace

double oracle_latent_mean(const SimConfig& config, double a, const BaseCovariates& c, double z,
                          int s) {
    if (s < 0 || s > 3) fail(ErrorKind::invalid_argument, "nameship type must be in 0..3");
    const double coarse = latent_mean_with(gauss_hermite(64), config, a, c, z, s);
    const double fine = latent_mean_with(gauss_hermite(128), config, a, c, z, s);
    if (!(std::abs(fine - coarse) <= 1e-8)) {
        fail(ErrorKind::precision, "quadrature did not settle: 64 and 128 nodes differ by " +
                                       std::to_string(std::abs(fine - coarse)));
    }
    return fine;
}

double oracle_conditional_mean(const SimConfig& config, double a, const BaseCovariates& c, double z,
                               int s) {
    if (config.link != Link::additive) {
        fail(ErrorKind::invalid_argument, "the conditional-mean oracle covers the additive link");
    }
    return oracle_latent_mean(config, a, c, z, s) + config.beta0 +
           config.beta_a[static_cast<std::size_t>(s)] * a + config.beta_c(0.0, c, 0.0);
}

TiltedMean tilted_normal_check(double alpha, double sigma2, long n_draws, std::uint64_t seed) {
    if (!(sigma2 > 0.0)) fail(ErrorKind::invalid_argument, "sigma2 must be positive");
    if (n_draws < 100000) fail(ErrorKind::invalid_argument, "tilted mean check needs >= 1e5 draws");
    SplitMix64 rng = substream(seed, 0);
    std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
    std::vector<double> u(static_cast<std::size_t>(n_draws));
    for (auto& x : u) x = normal(rng);
    const double top = alpha * *std::max_element(u.begin(), u.end(), [&](double l, double r) {
        return alpha * l < alpha * r;
    });
    double sw = 0.0;
    double swu = 0.0;
    std::vector<double> w(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        w[i] = std::exp(alpha * u[i] - top);
        sw += w[i];
        swu += w[i] * u[i];
    }
    TiltedMean r;
    r.estimate = swu / sw;
    double sq = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = w[i] * (u[i] - r.estimate);
        sq += d * d;
    }
    r.se = std::sqrt(sq) / sw;
    return r;
}

namespace {

nlohmann::ordered_json form_json(const LinearForm& f) {
    return {{"intercept", f.intercept}, {"a", f.a}, {"z", f.z},       {"sex1", f.sex1},
            {"age1", f.age1},           {"sex2", f.sex2}, {"age2", f.age2}, {"y2_b", f.y2_b}};
}

}  // namespace

std::string truth_json(const SimConfig& config) {
    nlohmann::ordered_json j;
    j["n_candidate"] = config.n_candidate;
    j["seed"] = config.seed;
    j["sigma2"] = config.sigma2;
    j["alpha"] = config.alpha;
    j["eta"] = form_json(config.eta);
    for (int s = 0; s < 4; ++s) j["gamma"].push_back(form_json(config.gamma[static_cast<std::size_t>(s)]));
    j["link"] = to_string(config.link);
    j["family"] = to_string(config.family);
    j["beta0"] = config.beta0;
    j["beta_a"] = {{"s1", config.beta_a[1]}, {"s2", config.beta_a[2]}, {"s3", config.beta_a[3]}};
    j["beta_c"] = form_json(config.beta_c);
    j["noise_sd"] = config.noise_sd;
    j["u1_sd"] = config.u1_sd;
    j["exposure"] = form_json(config.exposure);
    j["exposure_u1"] = config.exposure_u1;
    j["lambda"] = config.lambda;
    j["z_noise_sd"] = config.z_noise_sd;
    j["scale"] = {{"age_mean", config.age_mean},   {"age_sd", config.age_sd},
                  {"y2_b_mean", config.y2_b_mean}, {"y2_b_sd", config.y2_b_sd},
                  {"sex_p", config.sex_p},         {"y1_b_scale", config.y1_b_scale},
                  {"y1_f_mean", config.y1_f_mean}, {"y1_f_scale", config.y1_f_scale}};
    j["obesity_threshold"] = config.model.obesity_threshold;
    return j.dump(2) + "\n";
}

}  // namespace peerfx
