#include "peerfx/settings.hpp"

#include "peerfx/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

namespace peerfx {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : text) {
        if (ch == ',') {
            out.push_back(trim(item));
            item.clear();
        } else {
            item += ch;
        }
    }
    if (!trim(item).empty() || !out.empty()) out.push_back(trim(item));
    return out;
}

[[noreturn]] void bad_value(const Setting& s, const std::string& expected) {
    fail(ErrorKind::invalid_argument, "setting '" + s.key + "' (" + s.origin + "): cannot read '" +
                                          s.value + "' as " + expected);
}

double to_double(const Setting& s, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || text.empty()) bad_value(s, "a number");
    return v;
}

long to_long(const Setting& s, const std::string& text) {
    long v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || text.empty()) bad_value(s, "an integer");
    return v;
}

std::uint64_t to_u64(const Setting& s, const std::string& text) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || text.empty()) bad_value(s, "a non-negative integer");
    return v;
}

bool to_bool(const Setting& s) {
    if (s.value == "true" || s.value == "1" || s.value == "yes") return true;
    if (s.value == "false" || s.value == "0" || s.value == "no") return false;
    bad_value(s, "true or false");
}

std::vector<double> to_doubles(const Setting& s, std::size_t count) {
    const auto items = split_list(s.value);
    if (items.size() != count) bad_value(s, std::to_string(count) + " comma-separated numbers");
    std::vector<double> out;
    for (const auto& item : items) out.push_back(to_double(s, item));
    return out;
}

double* form_slot(LinearForm& f, const std::string& slot) {
    if (slot == "intercept") return &f.intercept;
    if (slot == "a") return &f.a;
    if (slot == "z") return &f.z;
    if (slot == "sex1") return &f.sex1;
    if (slot == "age1") return &f.age1;
    if (slot == "sex2") return &f.sex2;
    if (slot == "age2") return &f.age2;
    if (slot == "y2_b") return &f.y2_b;
    return nullptr;
}

LinearForm* named_form(SimConfig& sim, const std::string& name) {
    if (name == "eta") return &sim.eta;
    if (name == "exposure") return &sim.exposure;
    if (name == "beta_c") return &sim.beta_c;
    if (name.size() == 6 && name.rfind("gamma", 0) == 0 && name[5] >= '0' && name[5] <= '3') {
        return &sim.gamma[static_cast<std::size_t>(name[5] - '0')];
    }
    return nullptr;
}

using Handler = std::function<void(RunSettings&, const Setting&)>;

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> table = [] {
        std::map<std::string, Handler> h;
        auto num = [&h](const std::string& key, double SimConfig::*field) {
            h[key] = [field](RunSettings& r, const Setting& s) { r.sim.*field = to_double(s, s.value); };
        };
        // model
        h["obesity_threshold"] = [](RunSettings& r, const Setting& s) {
            r.model.obesity_threshold = to_double(s, s.value);
        };
        h["exposure_kind"] = [](RunSettings& r, const Setting& s) { r.model.exposure_kind = parse_exposure_kind(s.value); };
        h["center_ages"] = [](RunSettings& r, const Setting& s) { r.model.center_ages = to_bool(s); };
        h["c_columns"] = [](RunSettings& r, const Setting& s) { r.model.c_columns = split_list(s.value); };
        h["alter_columns"] = [](RunSettings& r, const Setting& s) { r.model.alter_columns = split_list(s.value); };
        h["ego_columns"] = [](RunSettings& r, const Setting& s) { r.model.ego_columns = split_list(s.value); };
        h["homophily_form"] = [](RunSettings& r, const Setting& s) {
            r.model.homophily_form = parse_homophily_form(s.value);
        };
        h["homophily_interact"] = [](RunSettings& r, const Setting& s) {
            r.model.homophily_interact = split_list(s.value);
        };
        h["exposure_interact"] = [](RunSettings& r, const Setting& s) {
            r.model.exposure_interact = split_list(s.value);
        };
        // "link" drives both the fitted model and the simulated outcome.
        h["link"] = [](RunSettings& r, const Setting& s) {
            r.model.link = parse_link(s.value);
            r.sim.link = r.model.link;
        };
        // simulation
        h["n_candidate"] = [](RunSettings& r, const Setting& s) { r.sim.n_candidate = to_long(s, s.value); };
        h["seed"] = [](RunSettings& r, const Setting& s) { r.sim.seed = to_u64(s, s.value); };
        num("age_mean", &SimConfig::age_mean);
        num("age_sd", &SimConfig::age_sd);
        num("y2_b_mean", &SimConfig::y2_b_mean);
        num("y2_b_sd", &SimConfig::y2_b_sd);
        num("sex_p", &SimConfig::sex_p);
        num("sigma2", &SimConfig::sigma2);
        num("u1_sd", &SimConfig::u1_sd);
        num("exposure_u1", &SimConfig::exposure_u1);
        num("y1_b_scale", &SimConfig::y1_b_scale);
        num("lambda", &SimConfig::lambda);
        num("z_noise_sd", &SimConfig::z_noise_sd);
        num("y1_f_mean", &SimConfig::y1_f_mean);
        num("y1_f_scale", &SimConfig::y1_f_scale);
        num("beta0", &SimConfig::beta0);
        num("noise_sd", &SimConfig::noise_sd);
        h["family"] = [](RunSettings& r, const Setting& s) { r.sim.family = parse_outcome_family(s.value); };
        h["alpha"] = [](RunSettings& r, const Setting& s) {
            const auto v = to_doubles(s, 4);
            for (std::size_t k = 0; k < 4; ++k) r.sim.alpha[k] = v[k];
        };
        h["beta_a"] = [](RunSettings& r, const Setting& s) {
            const auto items = split_list(s.value);
            const auto v = to_doubles(s, items.size() == 1 ? 1 : 3);
            for (std::size_t k = 1; k < 4; ++k) r.sim.beta_a[k] = v.size() == 1 ? v[0] : v[k - 1];
        };
        for (int k = 0; k < 4; ++k) {
            h["alpha" + std::to_string(k)] = [k](RunSettings& r, const Setting& s) {
                r.sim.alpha[static_cast<std::size_t>(k)] = to_double(s, s.value);
            };
        }
        for (int k = 1; k < 4; ++k) {
            h["beta_a" + std::to_string(k)] = [k](RunSettings& r, const Setting& s) {
                r.sim.beta_a[static_cast<std::size_t>(k)] = to_double(s, s.value);
            };
        }
        // fit
        h["strata"] = [](RunSettings& r, const Setting& s) { r.fit.strata = parse_strata(s.value); };
        h["adjusted"] = [](RunSettings& r, const Setting& s) { r.fit.adjusted = to_bool(s); };
        h["naive_pooled"] = [](RunSettings& r, const Setting& s) { r.fit.naive_pooled = to_bool(s); };
        h["naive_stratified"] = [](RunSettings& r, const Setting& s) { r.fit.naive_stratified = to_bool(s); };
        h["bootstrap"] = [](RunSettings& r, const Setting& s) {
            r.fit.bootstrap = static_cast<int>(to_long(s, s.value));
        };
        h["bootstrap_seed"] = [](RunSettings& r, const Setting& s) { r.fit.bootstrap_seed = to_u64(s, s.value); };
        h["randomize_roles"] = [](RunSettings& r, const Setting& s) { r.fit.randomize_roles = to_u64(s, s.value); };
        h["covariance"] = [](RunSettings& r, const Setting& s) { r.fit.covariance = to_bool(s); };
        h["mle_tol"] = [](RunSettings& r, const Setting& s) { r.fit.two_step.mle.tol = to_double(s, s.value); };
        h["mle_max_iter"] = [](RunSettings& r, const Setting& s) {
            r.fit.two_step.mle.max_iter = static_cast<int>(to_long(s, s.value));
        };
        h["separation_bound"] = [](RunSettings& r, const Setting& s) {
            r.fit.two_step.mle.separation_bound = to_double(s, s.value);
        };
        h["outcome_tol"] = [](RunSettings& r, const Setting& s) {
            r.fit.two_step.outcome.tol = to_double(s, s.value);
        };
        h["outcome_max_iter"] = [](RunSettings& r, const Setting& s) {
            r.fit.two_step.outcome.max_iter = static_cast<int>(to_long(s, s.value));
        };
        h["fd_step"] = [](RunSettings& r, const Setting& s) {
            r.fit.two_step.sandwich.relative_step = to_double(s, s.value);
        };
        h["analytic_beta"] = [](RunSettings& r, const Setting& s) {
            r.fit.two_step.sandwich.analytic_beta = to_bool(s);
        };
        h["small_sample"] = [](RunSettings& r, const Setting& s) {
            r.fit.two_step.sandwich.small_sample = to_bool(s);
        };
        return h;
    }();
    return table;
}

}  // namespace

Setting parse_assignment(const std::string& text, const std::string& origin) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
        fail(ErrorKind::invalid_argument, origin + ": expected key = value, got '" + text + "'");
    }
    Setting s{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), origin};
    if (s.key.empty()) fail(ErrorKind::invalid_argument, origin + ": empty key");
    return s;
}

std::vector<Setting> parse_settings(std::istream& in, const std::string& origin) {
    std::vector<Setting> out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        out.push_back(parse_assignment(line, origin + " line " + std::to_string(number)));
    }
    return out;
}

std::vector<Setting> read_settings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ingestion, "cannot open config file " + path.string());
    return parse_settings(in, path.string());
}

void apply_settings(RunSettings& run, const std::vector<Setting>& settings) {
    const auto& table = handlers();
    for (const auto& s : settings) {
        auto it = table.find(s.key);
        if (it != table.end()) {
            it->second(run, s);
            continue;
        }
        const auto dot = s.key.find('.');
        if (dot != std::string::npos) {
            LinearForm* form = named_form(run.sim, s.key.substr(0, dot));
            double* slot = form ? form_slot(*form, s.key.substr(dot + 1)) : nullptr;
            if (slot) {
                *slot = to_double(s, s.value);
                continue;
            }
        }
        fail(ErrorKind::invalid_argument, "unknown setting '" + s.key + "' (" + s.origin + ")");
    }
    run.sim.model = run.model;
}

std::vector<int> parse_strata(const std::string& text) {
    std::vector<int> out;
    for (const auto& item : split_list(text)) {
        if (item != "1" && item != "2" && item != "3") {
            fail(ErrorKind::invalid_argument, "strata must be a comma list drawn from 1,2,3; got '" + text + "'");
        }
        const int s = item[0] - '0';
        for (int seen : out) {
            if (seen == s) fail(ErrorKind::invalid_argument, "stratum " + item + " listed twice");
        }
        out.push_back(s);
    }
    if (out.empty()) fail(ErrorKind::invalid_argument, "no strata given");
    return out;
}

}  // namespace peerfx
