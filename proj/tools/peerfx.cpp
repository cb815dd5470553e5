// Command-line front end: simulate, fit, report.

#include "peerfx/error.hpp"
#include "peerfx/pipeline.hpp"
#include "peerfx/report.hpp"
#include "peerfx/settings.hpp"
#include "peerfx/sim_dgp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

namespace fs = std::filesystem;
using namespace peerfx;

namespace {

enum Exit { kOk = 0, kUsage = 2, kIngestion = 3, kNonConvergence = 4, kNumeric = 5 };

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument:
        case ErrorKind::unsupported_form:
            return kUsage;
        case ErrorKind::ingestion:
        case ErrorKind::schema:
        case ErrorKind::truncation_violation:
            return kIngestion;
        case ErrorKind::divergence:
        case ErrorKind::non_convergence:
            return kNonConvergence;
        default:
            return kNumeric;
    }
}

// Files are staged in memory and only written once the whole command has
// succeeded, each through a temporary name and a rename.
class Outputs {
public:
    void add(std::string name, std::string body) { files_.emplace_back(std::move(name), std::move(body)); }

    void commit(const fs::path& dir) const {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) fail(ErrorKind::ingestion, "cannot create output directory " + dir.string() + ": " + ec.message());
        std::vector<std::pair<fs::path, fs::path>> staged;
        for (const auto& [name, body] : files_) {
            const fs::path final_path = dir / name;
            fs::path tmp = final_path;
            tmp += ".tmp";
            std::ofstream out(tmp, std::ios::binary);
            out << body;
            out.close();
            if (!out) {
                for (const auto& s : staged) fs::remove(s.first, ec);
                fs::remove(tmp, ec);
                fail(ErrorKind::ingestion, "cannot write " + tmp.string());
            }
            staged.emplace_back(tmp, final_path);
        }
        for (const auto& [tmp, final_path] : staged) fs::rename(tmp, final_path);
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

struct Common {
    std::string config;
    std::vector<std::string> sets;
};

RunSettings load(const Common& common, std::vector<Setting> cli) {
    RunSettings run;
    std::vector<Setting> all;
    if (!common.config.empty()) all = read_settings(common.config);
    for (const auto& s : common.sets) all.push_back(parse_assignment(s, "--set"));
    for (auto& s : cli) all.push_back(std::move(s));
    apply_settings(run, all);
    return run;
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

int cmd_simulate(const Common& common, const std::string& out_dir) {
    const RunSettings run = load(common, {});
    const SimOutput sim = simulate(run.sim);
    std::ostringstream csv;
    write_csv(csv, sim.table);
    Outputs outputs;
    outputs.add("data.csv", csv.str());
    outputs.add("truth.json", truth_json(run.sim));
    outputs.commit(out_dir);
    std::cout << "simulated " << run.sim.n_candidate << " candidate dyads, kept "
              << sim.table.records.size() << ", discarded " << sim.n_truncated << " with S = 0\n";
    return kOk;
}

struct FitArgs {
    std::string input;
    std::string out;
    std::string link;
    std::string strata;
    bool naive_pooled = false;
    bool naive_stratified = false;
    bool no_adjusted = false;
    bool covariance = false;
    int bootstrap = -1;
    long long randomize_roles = -1;
};

int cmd_fit(const Common& common, const FitArgs& args) {
    std::vector<Setting> cli;
    if (!args.link.empty()) cli.push_back({"link", args.link, "--link"});
    if (!args.strata.empty()) cli.push_back({"strata", args.strata, "--strata"});
    if (args.naive_pooled) cli.push_back({"naive_pooled", "true", "--naive-pooled"});
    if (args.naive_stratified) cli.push_back({"naive_stratified", "true", "--naive-stratified"});
    if (args.no_adjusted) cli.push_back({"adjusted", "false", "--no-adjusted"});
    if (args.covariance) cli.push_back({"covariance", "true", "--covariance"});
    if (args.bootstrap >= 0) cli.push_back({"bootstrap", std::to_string(args.bootstrap), "--bootstrap"});
    if (args.randomize_roles >= 0) {
        cli.push_back({"randomize_roles", std::to_string(args.randomize_roles), "--randomize-roles"});
    }
    RunSettings run = load(common, std::move(cli));
    run.model.validate();
    const auto& fit = run.fit;
    if (!fit.adjusted && !fit.naive_pooled && !fit.naive_stratified) {
        fail(ErrorKind::invalid_argument, "nothing to fit: adjusted fit disabled and no naive fit requested");
    }

    DyadTable table = read_csv(args.input, run.model);
    if (fit.randomize_roles) table = randomize_roles(table, *fit.randomize_roles);
    const FrameSet frames = build_frames(table, run.model);

    std::optional<TwoStepResult> adjusted;
    std::optional<NaiveResult> pooled;
    std::optional<NaiveResult> stratified;
    TwoStepOptions options = fit.two_step;
    options.strata = fit.strata;
    if (fit.adjusted) adjusted = fit_two_step(frames, run.model, options);
    if (fit.naive_pooled) pooled = fit_naive_inference(frames, run.model, false, options.outcome);
    if (fit.naive_stratified) stratified = fit_naive_inference(frames, run.model, true, options.outcome);

    const FitReport report = make_report(frames, run.model, adjusted, pooled, stratified, fit.covariance);
    Outputs outputs;
    outputs.add("fit.json", dump(to_json(report)));
    outputs.add("tables.txt", render_tables(report));
    if (adjusted) {
        outputs.add("nameship.json", dump(nameship_json(report)));
        for (const auto& t : report.adjusted) {
            outputs.add("fit_" + t.label + ".json", dump(stratum_json(report, t)));
        }
        outputs.add("wald.json", dump(wald_json(report)));
        if (fit.bootstrap > 0) {
            const auto boot = bootstrap_two_step(frames, run.model, *adjusted, fit.bootstrap,
                                                 fit.bootstrap_seed, options);
            nlohmann::ordered_json j;
            j["replicates"] = fit.bootstrap;
            j["failed"] = boot.failed;
            for (std::size_t i = 0; i < boot.names.size(); ++i) {
                const auto k = static_cast<Eigen::Index>(i);
                j["se"][boot.names[i]] = {{"bootstrap", boot.se[k]}, {"sandwich", adjusted->cov.standard_errors()[k]}};
            }
            outputs.add("bootstrap.json", dump(j));
        }
    } else if (fit.bootstrap > 0) {
        fail(ErrorKind::invalid_argument, "--bootstrap needs the adjusted fit");
    }
    outputs.commit(args.out);
    std::cout << render_tables(report);
    return kOk;
}

int cmd_report(const std::string& fit_path, const std::string& json_out) {
    std::ifstream in(fit_path);
    if (!in) fail(ErrorKind::ingestion, "cannot open fit report " + fit_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ingestion, "fit report " + fit_path + " is not valid JSON: " + e.what());
    }
    const FitReport report = fit_report_from_json(j);
    if (!json_out.empty()) {
        std::ofstream out(json_out, std::ios::binary);
        out << dump(to_json(report));
        if (!out) fail(ErrorKind::ingestion, "cannot write " + json_out);
    }
    std::cout << render_tables(report);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contagion effects under homophily with a negative control exposure"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&common](CLI::App* sub) {
        sub->add_option("--config", common.config, "key = value settings file")->check(CLI::ExistingFile);
        sub->add_option("--set", common.sets, "override one setting, key=value (repeatable)");
    };

    std::string sim_out;
    auto* simulate_cmd = app.add_subcommand("simulate", "simulate dyads and write data.csv + truth.json");
    add_common(simulate_cmd);
    simulate_cmd->add_option("--out", sim_out, "output directory")->required();

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "two-step homophily-adjusted fit of a dyad CSV");
    add_common(fit_cmd);
    fit_cmd->add_option("--input", fit_args.input, "dyad CSV")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--out", fit_args.out, "output directory")->required();
    fit_cmd->add_option("--link", fit_args.link, "additive or multiplicative")
        ->check(CLI::IsMember({"additive", "multiplicative"}));
    fit_cmd->add_option("--strata", fit_args.strata, "comma list of nameship types, e.g. 1,2,3");
    fit_cmd->add_flag("--naive-pooled", fit_args.naive_pooled, "also fit the naive pooled model");
    fit_cmd->add_flag("--naive-stratified", fit_args.naive_stratified, "also fit naive models by nameship");
    fit_cmd->add_flag("--no-adjusted", fit_args.no_adjusted, "skip the homophily-adjusted fit");
    fit_cmd->add_flag("--covariance", fit_args.covariance, "dump the full sandwich covariance");
    fit_cmd->add_option("--bootstrap", fit_args.bootstrap, "dyad bootstrap replicates")->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--randomize-roles", fit_args.randomize_roles, "seed for random ego/alter assignment")
        ->check(CLI::NonNegativeNumber);

    std::string report_fit;
    std::string report_json;
    auto* report_cmd = app.add_subcommand("report", "render tables from a fit.json");
    report_cmd->add_option("--fit", report_fit, "fit.json written by fit")->required();
    report_cmd->add_option("--json", report_json, "also re-emit the report as JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*simulate_cmd) return cmd_simulate(common, sim_out);
        if (*fit_cmd) return cmd_fit(common, fit_args);
        return cmd_report(report_fit, report_json);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error (io): " << e.what() << '\n';
        return kIngestion;
    }
}
