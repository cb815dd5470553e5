#include "peerfx/report.hpp"

#include "peerfx/error.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace peerfx {

CoefTable coef_table(const OutcomeFit& fit, const SandwichCov& cov) {
    CoefTable t;
    t.label = fit.spec.label();
    t.n = fit.n_used;
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        CoefRow row;
        row.name = fit.names[j];
        row.est = fit.coef[static_cast<Eigen::Index>(j)];
        row.se = cov.se(t.label + ":" + row.name);
        row.p = normal_two_sided_p(row.est / row.se);
        t.rows.push_back(row);
    }
    return t;
}

namespace {

CoefTable theta_table(const std::string& label, const std::vector<std::string>& columns,
                      const Eigen::VectorXd& est, const Eigen::VectorXd& se, std::size_t n) {
    CoefTable t;
    t.label = label;
    t.n = n;
    std::vector<std::string> names{"(Intercept)"};
    names.insert(names.end(), columns.begin(), columns.end());
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto k = static_cast<Eigen::Index>(j);
        t.rows.push_back({names[j], est[k], se[k], normal_two_sided_p(est[k] / se[k])});
    }
    return t;
}

}  // namespace

FitReport make_report(const FrameSet& frames, const ModelConfig& config,
                      const std::optional<TwoStepResult>& adjusted,
                      const std::optional<NaiveResult>& naive_pooled,
                      const std::optional<NaiveResult>& naive_stratified, bool dump_covariance) {
    FitReport r;
    r.link = to_string(config.link);
    r.n_dyads = frames.frames.size();
    r.centers = frames.layout.centers;
    if (naive_pooled) r.naive_pooled = coef_table(naive_pooled->fits.front(), naive_pooled->cov);
    if (naive_stratified) {
        for (const auto& f : naive_stratified->fits) r.naive_stratified.push_back(coef_table(f, naive_stratified->cov));
    }
    if (adjusted) {
        const auto& mle = adjusted->nameship;
        const Eigen::VectorXd se = mle.standard_errors();
        const auto n1 = mle.theta_hat.theta1.size();
        const auto n2 = mle.theta_hat.theta2.size();
        r.has_nameship = true;
        r.theta1 = theta_table("theta1", frames.layout.alter, mle.theta_hat.theta1, se.head(n1), r.n_dyads);
        r.theta2 = theta_table("theta2", frames.layout.ego, mle.theta_hat.theta2, se.tail(n2), r.n_dyads);
        r.loglik = mle.loglik;
        r.converged = mle.converged;
        r.iterations = mle.iterations;
        for (const auto& f : adjusted->fits) r.adjusted.push_back(coef_table(f, adjusted->cov));
        r.wald.push_back(adjusted->global_wald);
        for (const auto& w : adjusted->stratum_wald) r.wald.push_back(w);
        if (dump_covariance) {
            r.covariance_names = adjusted->cov.names;
            const Eigen::MatrixXd c = adjusted->cov.covariance();
            for (Eigen::Index i = 0; i < c.rows(); ++i) {
                for (Eigen::Index j = 0; j < c.cols(); ++j) r.covariance.push_back(c(i, j));
            }
        }
    }
    return r;
}

nlohmann::ordered_json to_json(const CoefTable& table) {
    nlohmann::ordered_json j;
    j["label"] = table.label;
    j["n"] = table.n;
    j["coefficients"] = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        j["coefficients"].push_back({{"name", row.name}, {"est", row.est}, {"se", row.se}, {"p", row.p}});
    }
    return j;
}

nlohmann::ordered_json to_json(const WaldResult& wald) {
    return {{"hypothesis", wald.hypothesis},
            {"statistic", wald.statistic},
            {"df", wald.df},
            {"p_value", wald.p_value}};
}

nlohmann::ordered_json to_json(const FitReport& report) {
    nlohmann::ordered_json j;
    j["link"] = report.link;
    j["n_dyads"] = report.n_dyads;
    j["centers"] = report.centers;
    if (report.naive_pooled) j["naive_pooled"] = to_json(*report.naive_pooled);
    if (!report.naive_stratified.empty()) {
        for (const auto& t : report.naive_stratified) j["naive_stratified"].push_back(to_json(t));
    }
    if (report.has_nameship) {
        j["nameship"] = {{"theta1", to_json(report.theta1)},
                         {"theta2", to_json(report.theta2)},
                         {"loglik", report.loglik},
                         {"converged", report.converged},
                         {"iterations", report.iterations}};
        for (const auto& t : report.adjusted) j["adjusted"].push_back(to_json(t));
        for (const auto& w : report.wald) j["wald"].push_back(to_json(w));
    }
    if (!report.covariance_names.empty()) {
        j["covariance"] = {{"names", report.covariance_names}, {"values", report.covariance}};
    }
    return j;
}

namespace {

double number(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nan("");
    return v.get<double>();
}

CoefTable table_from_json(const nlohmann::json& j) {
    CoefTable t;
    t.label = j.at("label").get<std::string>();
    t.n = j.at("n").get<std::size_t>();
    for (const auto& c : j.at("coefficients")) {
        t.rows.push_back({c.at("name").get<std::string>(), number(c, "est"), number(c, "se"), number(c, "p")});
    }
    return t;
}

WaldResult wald_from_json(const nlohmann::json& j) {
    WaldResult w;
    w.hypothesis = j.at("hypothesis").get<std::string>();
    w.statistic = number(j, "statistic");
    w.df = j.at("df").get<int>();
    w.p_value = number(j, "p_value");
    return w;
}

}  // namespace

FitReport fit_report_from_json(const nlohmann::json& j) {
    try {
        FitReport r;
        r.link = j.at("link").get<std::string>();
        r.n_dyads = j.at("n_dyads").get<std::size_t>();
        r.centers = j.at("centers").get<std::map<std::string, double>>();
        if (j.contains("naive_pooled")) r.naive_pooled = table_from_json(j.at("naive_pooled"));
        if (j.contains("naive_stratified")) {
            for (const auto& t : j.at("naive_stratified")) r.naive_stratified.push_back(table_from_json(t));
        }
        if (j.contains("nameship")) {
            const auto& m = j.at("nameship");
            r.has_nameship = true;
            r.theta1 = table_from_json(m.at("theta1"));
            r.theta2 = table_from_json(m.at("theta2"));
            r.loglik = number(m, "loglik");
            r.converged = m.at("converged").get<bool>();
            r.iterations = m.at("iterations").get<int>();
            for (const auto& t : j.at("adjusted")) r.adjusted.push_back(table_from_json(t));
            for (const auto& w : j.at("wald")) r.wald.push_back(wald_from_json(w));
        }
        if (j.contains("covariance")) {
            r.covariance_names = j.at("covariance").at("names").get<std::vector<std::string>>();
            r.covariance = j.at("covariance").at("values").get<std::vector<double>>();
            if (r.covariance.size() != r.covariance_names.size() * r.covariance_names.size()) {
                fail(ErrorKind::ingestion, "covariance dump has the wrong number of values");
            }
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ingestion, std::string("malformed fit report: ") + e.what());
    }
}

nlohmann::ordered_json nameship_json(const FitReport& report) {
    nlohmann::ordered_json j;
    auto values = [](const CoefTable& t, bool se) {
        nlohmann::ordered_json o = nlohmann::ordered_json::object();
        for (const auto& row : t.rows) o[row.name] = se ? row.se : row.est;
        return o;
    };
    j["theta1"] = values(report.theta1, false);
    j["theta2"] = values(report.theta2, false);
    j["loglik"] = report.loglik;
    j["converged"] = report.converged;
    j["iterations"] = report.iterations;
    j["se"] = {{"theta1", values(report.theta1, true)}, {"theta2", values(report.theta2, true)}};
    j["centers"] = report.centers;
    return j;
}

nlohmann::ordered_json stratum_json(const FitReport& report, const CoefTable& table) {
    nlohmann::ordered_json j;
    j["stratum"] = table.label;
    j["link"] = report.link;
    j["n_used"] = table.n;
    j["coefficients"] = nlohmann::ordered_json::object();
    for (const auto& row : table.rows) {
        j["coefficients"][row.name] = {{"est", row.est}, {"se", row.se}, {"p", row.p}};
    }
    for (const auto& w : report.wald) {
        if (w.hypothesis == "beta_hom = 0 in " + table.label) j["homophily_wald"] = to_json(w);
    }
    return j;
}

nlohmann::ordered_json wald_json(const FitReport& report) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& w : report.wald) j.push_back(to_json(w));
    return j;
}

namespace {

std::string display_name(const std::string& name) {
    static const std::map<std::string, std::string> labels{
        {"a", "alter exposure"}, {"y2_b", "ego baseline trait"}, {"sex2", "ego sex"},
        {"age2", "ego age"},     {"sex1", "alter sex"},          {"age1", "alter age"},
        {"z", "Z"},              {"age1:age2", "alter age:ego age"}};
    auto it = labels.find(name);
    return it == labels.end() ? name : it->second;
}

bool is_probability(const std::string& name) { return name.rfind("pr_s", 0) == 0; }

// Row labels of a stage-2 table; probability rows are labelled by their
// position among the other categories, which is how the strata line up.
std::vector<std::string> row_labels(const CoefTable& t) {
    std::vector<std::string> out;
    std::map<std::string, int> slot;
    for (const auto& row : t.rows) {
        if (!is_probability(row.name)) {
            out.push_back(display_name(row.name));
            continue;
        }
        const auto colon = row.name.find(':');
        const std::string base = row.name.substr(0, colon);
        if (!slot.count(base)) {
            const int k = static_cast<int>(slot.size()) + 1;
            slot[base] = k;
        }
        std::string label = "beta^{s,s" + std::to_string(slot[base]) + "}";
        if (colon != std::string::npos) label += ":" + display_name(row.name.substr(colon + 1));
        out.push_back(label);
    }
    return out;
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string pvalue(double p) {
    if (std::isnan(p)) return "nan";
    return p < 0.001 ? "<0.001" : fmt("%.3f", p);
}

std::string pad(const std::string& s, std::size_t width, bool right) {
    if (s.size() >= width) return s;
    const std::string fill(width - s.size(), ' ');
    return right ? fill + s : s + fill;
}

constexpr std::size_t kLabelWidth = 24;
constexpr std::size_t kNumWidth = 9;

void block_header(std::ostringstream& out, const std::vector<std::string>& titles) {
    out << pad("", kLabelWidth, false);
    for (const auto& t : titles) out << "  " << pad(t, 3 * kNumWidth, false);
    out << '\n' << pad("", kLabelWidth, false);
    for (std::size_t b = 0; b < titles.size(); ++b) {
        out << "  " << pad("Est", kNumWidth, true) << pad("SE", kNumWidth, true) << pad("p", kNumWidth, true);
    }
    out << '\n';
}

// Side-by-side coefficient blocks; intercepts are left to the JSON report.
void render_blocks(std::ostringstream& out, const std::vector<CoefTable>& tables,
                   const std::vector<std::string>& titles, bool stage2_labels) {
    block_header(out, titles);
    const auto& first = tables.front();
    const auto labels = stage2_labels ? row_labels(first) : std::vector<std::string>{};
    for (std::size_t r = 0; r < first.rows.size(); ++r) {
        if (first.rows[r].name == "(Intercept)") continue;
        out << pad(stage2_labels ? labels[r] : display_name(first.rows[r].name), kLabelWidth, false);
        for (const auto& t : tables) {
            if (r >= t.rows.size()) {
                out << "  " << pad("", 3 * kNumWidth, false);
                continue;
            }
            const auto& row = t.rows[r];
            out << "  " << pad(fmt("%.3f", row.est), kNumWidth, true)
                << pad(fmt("%.3f", row.se), kNumWidth, true) << pad(pvalue(row.p), kNumWidth, true);
        }
        out << '\n';
    }
}

std::string stratum_title(const CoefTable& t) {
    return "S=" + t.label.substr(1) + " (n=" + std::to_string(t.n) + ")";
}

std::vector<std::string> stratum_titles(const std::vector<CoefTable>& tables) {
    std::vector<std::string> titles;
    for (const auto& t : tables) titles.push_back(stratum_title(t));
    return titles;
}

}  // namespace

std::string render_tables(const FitReport& report) {
    std::ostringstream out;
    out << "link: " << report.link << ", observed dyads: " << report.n_dyads << '\n';
    if (report.naive_pooled) {
        out << "\nTable 1. Naive fit, all nameships pooled (robust SE)\n";
        render_blocks(out, {*report.naive_pooled}, {"pooled (n=" + std::to_string(report.naive_pooled->n) + ")"}, false);
    }
    if (!report.naive_stratified.empty()) {
        out << "\nTable 2. Naive fit by nameship type (robust SE)\n";
        render_blocks(out, report.naive_stratified, stratum_titles(report.naive_stratified), false);
    }
    if (report.has_nameship) {
        out << "\nTable 3. Nameship mechanism (SE from observed information)\n";
        out << "loglik " << fmt("%.4f", report.loglik) << ", iterations " << report.iterations
            << (report.converged ? ", converged" : ", NOT converged") << '\n';
        out << "\nEgo names alter (R2)\n";
        render_blocks(out, {report.theta2}, {"theta2"}, false);
        out << "\nAlter names ego (R1)\n";
        render_blocks(out, {report.theta1}, {"theta1"}, false);

        out << "\nTable 4. Homophily-adjusted fit by nameship type (sandwich SE)\n";
        render_blocks(out, report.adjusted, stratum_titles(report.adjusted), true);
        out << "beta^{s,sk}: coefficient of Pr(S=t) for the k-th category t != s, ascending";
        for (const auto& t : report.adjusted) {
            const int s = std::stoi(t.label.substr(1));
            out << "; S=" << s << ":";
            for (int c = 0; c < 4; ++c) {
                if (c != s) out << ' ' << c;
            }
        }
        out << '\n';
        out << "\nHomophily Wald tests\n";
        for (const auto& w : report.wald) {
            out << pad(w.hypothesis, 32, false) << "  chi2 = " << fmt("%.3f", w.statistic)
                << ", df = " << w.df << ", p = " << pvalue(w.p_value) << '\n';
        }
    }
    return out.str();
}

}  // namespace peerfx
