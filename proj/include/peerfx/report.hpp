#pragma once

#include "peerfx/core_model.hpp"
#include "peerfx/outcome_fit.hpp"
#include "peerfx/pipeline.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace peerfx {

struct CoefRow {
    std::string name;
    double est = 0.0;
    double se = 0.0;
    double p = 1.0;
};

struct CoefTable {
    std::string label;  // "s1", "pooled", "theta1", ...
    std::size_t n = 0;
    std::vector<CoefRow> rows;
};

// Everything `fit` produces, in a form that serializes losslessly and renders
// without refitting.
struct FitReport {
    std::string link;
    std::size_t n_dyads = 0;
    std::map<std::string, double> centers;

    std::optional<CoefTable> naive_pooled;
    std::vector<CoefTable> naive_stratified;

    bool has_nameship = false;
    CoefTable theta1;
    CoefTable theta2;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;

    std::vector<CoefTable> adjusted;
    std::vector<WaldResult> wald;  // global first, then one per stratum

    // Optional full sandwich covariance of the stacked estimate.
    std::vector<std::string> covariance_names;
    std::vector<double> covariance;  // row-major
};

CoefTable coef_table(const OutcomeFit& fit, const SandwichCov& cov);

FitReport make_report(const FrameSet& frames, const ModelConfig& config,
                      const std::optional<TwoStepResult>& adjusted,
                      const std::optional<NaiveResult>& naive_pooled,
                      const std::optional<NaiveResult>& naive_stratified, bool dump_covariance);

nlohmann::ordered_json to_json(const CoefTable& table);
nlohmann::ordered_json to_json(const WaldResult& wald);
nlohmann::ordered_json to_json(const FitReport& report);
FitReport fit_report_from_json(const nlohmann::json& j);

// nameship.json, fit_s{k}.json and wald.json bodies.
nlohmann::ordered_json nameship_json(const FitReport& report);
nlohmann::ordered_json stratum_json(const FitReport& report, const CoefTable& table);
nlohmann::ordered_json wald_json(const FitReport& report);

// Text tables: naive pooled, naive stratified, nameship mechanism, adjusted.
std::string render_tables(const FitReport& report);

}  // namespace peerfx
