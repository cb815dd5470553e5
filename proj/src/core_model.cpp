#include "peerfx/core_model.hpp"

#include "peerfx/error.hpp"
#include "peerfx/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace peerfx {

NameshipType NameshipType::from_code(int s) {
    if (s < 0 || s > 3) {
        fail(ErrorKind::invalid_argument,
             "nameship type must be in {0,1,2,3}, got " + std::to_string(s));
    }
    return NameshipType(s);
}

NameshipType classify_nameship(int r1, int r2) {
    if ((r1 != 0 && r1 != 1) || (r2 != 0 && r2 != 1)) {
        fail(ErrorKind::invalid_argument, "naming indicators must be 0 or 1, got (" +
                                              std::to_string(r1) + "," + std::to_string(r2) + ")");
    }
    return NameshipType::from_code(2 * r1 + r2);
}

const char* to_string(ExposureKind kind) {
    return kind == ExposureKind::binary_indicator ? "binary-indicator" : "raw-continuous";
}

const char* to_string(Link link) {
    return link == Link::additive ? "additive" : "multiplicative";
}

const char* to_string(HomophilyForm form) {
    return form == HomophilyForm::constant ? "constant" : "interact-with-C";
}

ExposureKind parse_exposure_kind(const std::string& text) {
    if (text == "binary-indicator") return ExposureKind::binary_indicator;
    if (text == "raw-continuous") return ExposureKind::raw_continuous;
    fail(ErrorKind::invalid_argument, "unknown exposure kind '" + text + "'");
}

Link parse_link(const std::string& text) {
    if (text == "additive") return Link::additive;
    if (text == "multiplicative") return Link::multiplicative;
    fail(ErrorKind::invalid_argument, "unknown link '" + text + "'");
}

HomophilyForm parse_homophily_form(const std::string& text) {
    if (text == "constant") return HomophilyForm::constant;
    if (text == "interact-with-C" || text == "interact-with-c") return HomophilyForm::interact_with_c;
    fail(ErrorKind::invalid_argument, "unknown homophily coefficient form '" + text + "'");
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string current;
    std::istringstream in(text);
    while (std::getline(in, current, sep)) parts.push_back(current);
    if (!text.empty() && text.back() == sep) parts.emplace_back();
    return parts;
}

bool mentions(const std::vector<std::string>& columns, const std::string& name) {
    for (const auto& col : columns) {
        for (const auto& factor : split(col, ':')) {
            if (factor == name) return true;
        }
    }
    return false;
}

}  // namespace

void ModelConfig::validate() const {
    if (!std::isfinite(obesity_threshold)) {
        fail(ErrorKind::invalid_argument, "obesity_threshold must be finite");
    }
    if (!mentions(alter_columns, "z") && !mentions(alter_columns, "y1_f")) {
        fail(ErrorKind::invalid_argument,
             "alter naming columns must include z (the negative control enters the alter model)");
    }
    for (const char* banned : {"z", "y1_f"}) {
        if (mentions(ego_columns, banned)) {
            fail(ErrorKind::invalid_argument,
                 std::string("ego naming columns must not include ") + banned);
        }
        if (mentions(c_columns, banned)) {
            fail(ErrorKind::invalid_argument,
                 std::string("outcome covariates C must not include ") + banned);
        }
    }
    for (const char* banned : {"a", "y1_b"}) {
        if (mentions(c_columns, banned)) {
            fail(ErrorKind::invalid_argument,
                 std::string("outcome covariates C must not include the exposure column ") + banned);
        }
    }
    for (const auto* list : {&c_columns, &alter_columns, &ego_columns}) {
        if (mentions(*list, "y2_f")) {
            fail(ErrorKind::invalid_argument, "the outcome y2_f cannot be used as a covariate");
        }
        std::set<std::string> seen;
        for (const auto& col : *list) {
            if (col.empty()) fail(ErrorKind::invalid_argument, "empty column name in covariate list");
            if (!seen.insert(col).second) {
                fail(ErrorKind::invalid_argument, "duplicate column '" + col + "'");
            }
        }
    }
    for (const auto& col : homophily_interact) {
        if (std::find(c_columns.begin(), c_columns.end(), col) == c_columns.end()) {
            fail(ErrorKind::invalid_argument,
                 "homophily interaction column '" + col + "' is not among the C columns");
        }
    }
    for (const auto& col : exposure_interact) {
        if (std::find(c_columns.begin(), c_columns.end(), col) == c_columns.end()) {
            fail(ErrorKind::invalid_argument,
                 "exposure interaction column '" + col + "' is not among the C columns");
        }
    }
}

namespace {

// Per-record source values, in a fixed order, from which every named column
// is built as a single source or a product of two.
struct SourceIndex {
    std::vector<std::string> names;

    int find(const std::string& name) const {
        auto it = std::find(names.begin(), names.end(), name);
        return it == names.end() ? -1 : static_cast<int>(it - names.begin());
    }
};

struct ColumnPlan {
    std::vector<std::vector<int>> factors;
};

ColumnPlan plan_columns(const std::vector<std::string>& columns, const SourceIndex& sources) {
    ColumnPlan plan;
    for (const auto& col : columns) {
        std::vector<int> idx;
        for (const auto& factor : split(col, ':')) {
            const int i = sources.find(factor);
            if (i < 0) fail(ErrorKind::schema, "unknown column '" + factor + "' in '" + col + "'");
            idx.push_back(i);
        }
        plan.factors.push_back(std::move(idx));
    }
    return plan;
}

double evaluate(const std::vector<int>& factors, const std::vector<double>& src) {
    double v = 1.0;
    for (int i : factors) v *= src[static_cast<std::size_t>(i)];
    return v;
}

void check_finite(double v, std::size_t row, const std::string& id, const std::string& column) {
    if (!std::isfinite(v)) {
        fail(ErrorKind::ingestion, "record " + std::to_string(row + 1) + " (dyad " + id +
                                       "): missing or non-finite value in column " + column);
    }
}

}  // namespace

FrameSet build_frames(const DyadTable& table, const ModelConfig& config) {
    config.validate();
    if (table.records.empty()) fail(ErrorKind::invalid_argument, "no dyad records to analyse");

    SourceIndex sources;
    sources.names = {"a", "z", "y1_b", "y1_f", "y2_b"};
    for (const auto& n : table.alter_names) sources.names.push_back(n);
    for (const auto& n : table.ego_names) sources.names.push_back(n);
    for (const auto& n : table.extra_names) sources.names.push_back(n);

    const std::size_t n_src = sources.names.size();
    std::vector<std::vector<double>> values(table.records.size(), std::vector<double>(n_src));

    for (std::size_t i = 0; i < table.records.size(); ++i) {
        const DyadRecord& rec = table.records[i];
        if (rec.x1.size() != table.alter_names.size() || rec.x2.size() != table.ego_names.size() ||
            rec.extra.size() != table.extra_names.size()) {
            fail(ErrorKind::ingestion, "record " + std::to_string(i + 1) + " (dyad " + rec.dyad_id +
                                           "): covariate dimension differs from the declared layout");
        }
        if ((rec.r1 != 0 && rec.r1 != 1) || (rec.r2 != 0 && rec.r2 != 1)) {
            fail(ErrorKind::ingestion, "record " + std::to_string(i + 1) + " (dyad " + rec.dyad_id +
                                           "): r1 and r2 must be 0 or 1");
        }
        if (rec.r1 == 0 && rec.r2 == 0) {
            fail(ErrorKind::truncation_violation,
                 "record " + std::to_string(i + 1) + " (dyad " + rec.dyad_id +
                     "): r1 = r2 = 0, but observed dyads require at least one naming");
        }
        check_finite(rec.y1_b, i, rec.dyad_id, "y1_b");
        check_finite(rec.y1_f, i, rec.dyad_id, "y1_f");
        check_finite(rec.y2_b, i, rec.dyad_id, "y2_b");
        check_finite(rec.y2_f, i, rec.dyad_id, "y2_f");

        auto& v = values[i];
        v[0] = config.exposure_kind == ExposureKind::binary_indicator
                   ? (rec.y1_b >= config.obesity_threshold ? 1.0 : 0.0)
                   : rec.y1_b;
        v[1] = rec.y1_f;
        v[2] = rec.y1_b;
        v[3] = rec.y1_f;
        v[4] = rec.y2_b;
        std::size_t k = 5;
        for (std::size_t j = 0; j < rec.x1.size(); ++j, ++k) {
            check_finite(rec.x1[j], i, rec.dyad_id, table.alter_names[j]);
            v[k] = rec.x1[j];
        }
        for (std::size_t j = 0; j < rec.x2.size(); ++j, ++k) {
            check_finite(rec.x2[j], i, rec.dyad_id, table.ego_names[j]);
            v[k] = rec.x2[j];
        }
        for (std::size_t j = 0; j < rec.extra.size(); ++j, ++k) {
            check_finite(rec.extra[j], i, rec.dyad_id, table.extra_names[j]);
            v[k] = rec.extra[j];
        }
    }

    FrameSet out;
    out.layout.c = config.c_columns;
    out.layout.alter = config.alter_columns;
    out.layout.ego = config.ego_columns;

    if (config.center_ages) {
        for (const char* age : {"age1", "age2"}) {
            const int idx = sources.find(age);
            if (idx < 0) continue;
            double sum = 0.0;
            for (const auto& v : values) sum += v[static_cast<std::size_t>(idx)];
            const double mean = sum / static_cast<double>(values.size());
            for (auto& v : values) v[static_cast<std::size_t>(idx)] -= mean;
            out.layout.centers[age] = mean;
        }
    }

    const ColumnPlan c_plan = plan_columns(config.c_columns, sources);
    const ColumnPlan alter_plan = plan_columns(config.alter_columns, sources);
    const ColumnPlan ego_plan = plan_columns(config.ego_columns, sources);

    out.frames.reserve(table.records.size());
    for (std::size_t i = 0; i < table.records.size(); ++i) {
        const DyadRecord& rec = table.records[i];
        const auto& v = values[i];
        AnalysisFrame f;
        f.id = rec.dyad_id;
        f.a = v[0];
        f.z = rec.y1_f;
        f.y = rec.y2_f;
        f.s = classify_nameship(rec.r1, rec.r2);
        f.c.resize(static_cast<Eigen::Index>(c_plan.factors.size()));
        for (std::size_t j = 0; j < c_plan.factors.size(); ++j) {
            f.c[static_cast<Eigen::Index>(j)] = evaluate(c_plan.factors[j], v);
        }
        f.x1.resize(static_cast<Eigen::Index>(alter_plan.factors.size() + 1));
        f.x1[0] = 1.0;
        for (std::size_t j = 0; j < alter_plan.factors.size(); ++j) {
            f.x1[static_cast<Eigen::Index>(j + 1)] = evaluate(alter_plan.factors[j], v);
        }
        f.x2.resize(static_cast<Eigen::Index>(ego_plan.factors.size() + 1));
        f.x2[0] = 1.0;
        for (std::size_t j = 0; j < ego_plan.factors.size(); ++j) {
            f.x2[static_cast<Eigen::Index>(j + 1)] = evaluate(ego_plan.factors[j], v);
        }
        out.frames.push_back(std::move(f));
    }
    return out;
}

namespace {

const std::vector<std::string>& required_columns() {
    static const std::vector<std::string> cols = [] {
        return split(std::string(kCsvHeader), ',');
    }();
    return cols;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

double parse_number(const std::string& raw, std::size_t line, const std::string& column) {
    const std::string text = trim(raw);
    if (text.empty()) {
        fail(ErrorKind::ingestion,
             "line " + std::to_string(line) + ": missing value in column " + column);
    }
    double value = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        fail(ErrorKind::ingestion, "line " + std::to_string(line) + ": cannot parse '" + text +
                                       "' as a number in column " + column);
    }
    if (!std::isfinite(value)) {
        fail(ErrorKind::ingestion,
             "line " + std::to_string(line) + ": non-finite value in column " + column);
    }
    return value;
}

int parse_indicator(const std::string& raw, std::size_t line, const std::string& column) {
    const std::string text = trim(raw);
    if (text == "0") return 0;
    if (text == "1") return 1;
    fail(ErrorKind::ingestion, "line " + std::to_string(line) + ": column " + column +
                                   " must be literal 0 or 1, got '" + text + "'");
}

std::set<std::string> referenced_columns(const ModelConfig& config) {
    std::set<std::string> names;
    for (const auto* list : {&config.c_columns, &config.alter_columns, &config.ego_columns}) {
        for (const auto& col : *list) {
            for (const auto& factor : split(col, ':')) names.insert(factor);
        }
    }
    return names;
}

}  // namespace

DyadTable parse_csv(std::istream& in, const ModelConfig& config) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::schema, "empty input: header row required");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM

    std::vector<std::string> header;
    for (const auto& h : split(trim(line), ',')) header.push_back(unquote(trim(h)));

    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!position.emplace(header[i], i).second) {
            fail(ErrorKind::schema, "duplicate header column '" + header[i] + "'");
        }
    }
    for (const auto& req : required_columns()) {
        if (!position.count(req)) fail(ErrorKind::schema, "missing required column '" + req + "'");
    }

    DyadTable table;
    const auto wanted = referenced_columns(config);
    const std::set<std::string> required(required_columns().begin(), required_columns().end());
    std::vector<std::size_t> extra_pos;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!required.count(header[i]) && wanted.count(header[i])) {
            table.extra_names.push_back(header[i]);
            extra_pos.push_back(i);
        }
    }

    std::unordered_set<std::string> seen_ids;
    std::map<std::string, std::size_t> first_line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != header.size()) {
            fail(ErrorKind::schema, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields, found " +
                                        std::to_string(fields.size()));
        }
        auto field = [&](const std::string& name) -> const std::string& {
            return fields[position.at(name)];
        };

        DyadRecord rec;
        rec.dyad_id = unquote(trim(field("dyad_id")));
        if (rec.dyad_id.empty()) {
            fail(ErrorKind::ingestion, "line " + std::to_string(line_no) + ": empty dyad_id");
        }
        if (!seen_ids.insert(rec.dyad_id).second) {
            fail(ErrorKind::ingestion, "line " + std::to_string(line_no) + ": duplicate dyad_id '" +
                                           rec.dyad_id + "' (first seen on line " +
                                           std::to_string(first_line[rec.dyad_id]) + ")");
        }
        first_line[rec.dyad_id] = line_no;
        rec.y1_b = parse_number(field("y1_b"), line_no, "y1_b");
        rec.y1_f = parse_number(field("y1_f"), line_no, "y1_f");
        rec.y2_b = parse_number(field("y2_b"), line_no, "y2_b");
        rec.y2_f = parse_number(field("y2_f"), line_no, "y2_f");
        rec.r1 = parse_indicator(field("r1"), line_no, "r1");
        rec.r2 = parse_indicator(field("r2"), line_no, "r2");
        for (const auto& n : table.alter_names) rec.x1.push_back(parse_number(field(n), line_no, n));
        for (const auto& n : table.ego_names) rec.x2.push_back(parse_number(field(n), line_no, n));
        for (std::size_t j = 0; j < extra_pos.size(); ++j) {
            rec.extra.push_back(parse_number(fields[extra_pos[j]], line_no, table.extra_names[j]));
        }
        table.records.push_back(std::move(rec));
    }
    return table;
}

DyadTable read_csv(const std::filesystem::path& path, const ModelConfig& config) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ingestion, "cannot open input file " + path.string());
    return parse_csv(in, config);
}

namespace {

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

void write_csv(std::ostream& out, const DyadTable& table) {
    if (table.alter_names != std::vector<std::string>{"sex1", "age1"} ||
        table.ego_names != std::vector<std::string>{"sex2", "age2"}) {
        fail(ErrorKind::invalid_argument, "write_csv expects the fixed sex/age covariate layout");
    }
    out << kCsvHeader;
    for (const auto& n : table.extra_names) out << ',' << n;
    out << '\n';
    for (const auto& r : table.records) {
        out << r.dyad_id << ',' << format_number(r.y1_b) << ',' << format_number(r.y1_f) << ','
            << format_number(r.y2_b) << ',' << format_number(r.y2_f) << ',' << r.r1 << ',' << r.r2
            << ',' << format_number(r.x1[0]) << ',' << format_number(r.x1[1]) << ','
            << format_number(r.x2[0]) << ',' << format_number(r.x2[1]);
        for (double e : r.extra) out << ',' << format_number(e);
        out << '\n';
    }
}

DyadTable randomize_roles(const DyadTable& table, unsigned long long seed) {
    if (table.alter_names.size() != table.ego_names.size()) {
        fail(ErrorKind::invalid_argument, "role swapping needs alter and ego covariates of equal width");
    }
    DyadTable out = table;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        auto rng = substream(seed, i);
        if ((rng() >> 63) == 0) continue;
        DyadRecord& r = out.records[i];
        std::swap(r.y1_b, r.y2_b);
        std::swap(r.y1_f, r.y2_f);
        std::swap(r.r1, r.r2);
        std::swap(r.x1, r.x2);
    }
    return out;
}

}  // namespace peerfx
