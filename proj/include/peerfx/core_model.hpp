#pragma once

#include <Eigen/Dense>

#include <compare>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace peerfx {

// Nameship type of a dyad, encoded from the two naming indicators:
//   0 null (0,0), 1 active (0,1), 2 passive (1,0), 3 mutual (1,1)
// where the pair is (alter names ego, ego names alter).
class NameshipType {
public:
    static NameshipType from_code(int s);

    int code() const noexcept { return code_; }
    int r1() const noexcept { return code_ >= 2 ? 1 : 0; }
    int r2() const noexcept { return code_ % 2; }

    friend auto operator<=>(NameshipType, NameshipType) = default;

private:
    explicit NameshipType(int s) : code_(s) {}
    int code_;
};

NameshipType classify_nameship(int r1, int r2);

enum class ExposureKind { binary_indicator, raw_continuous };
enum class Link { additive, multiplicative };
enum class HomophilyForm { constant, interact_with_c };

const char* to_string(ExposureKind kind);
const char* to_string(Link link);
const char* to_string(HomophilyForm form);
ExposureKind parse_exposure_kind(const std::string& text);
Link parse_link(const std::string& text);
HomophilyForm parse_homophily_form(const std::string& text);

// Column names understood by the frame builder:
//   a          exposure (indicator of y1_b >= threshold, or raw y1_b)
//   z          negative control exposure, always y1_f
//   <column>   any raw numeric CSV column other than the outcome y2_f
//   p:q        elementwise product of two of the above
struct ModelConfig {
    double obesity_threshold = 30.0;
    ExposureKind exposure_kind = ExposureKind::binary_indicator;
    bool center_ages = true;
    std::vector<std::string> c_columns{"y2_b", "sex2", "age2", "sex1", "age1", "age1:age2"};
    std::vector<std::string> alter_columns{"a", "sex1", "age1", "z"};
    std::vector<std::string> ego_columns{"y2_b", "sex2", "age2"};
    Link link = Link::additive;
    HomophilyForm homophily_form = HomophilyForm::constant;
    // C columns multiplying each probability regressor when homophily_form is
    // interact_with_c.
    std::vector<std::string> homophily_interact;
    // Extra A x C product columns in the outcome model. A non-empty list makes
    // the exposure effect covariate dependent.
    std::vector<std::string> exposure_interact;

    // Throws invalid_argument when the column roles break the negative
    // control requirements (z in the alter naming model only, never in C).
    void validate() const;
};

struct DyadRecord {
    std::string dyad_id;
    double y1_b = 0.0;
    double y1_f = 0.0;
    double y2_b = 0.0;
    double y2_f = 0.0;
    int r1 = 0;
    int r2 = 0;
    std::vector<double> x1;     // alter covariates, names in DyadTable::alter_names
    std::vector<double> x2;     // ego covariates, names in DyadTable::ego_names
    std::vector<double> extra;  // extra CSV columns, names in DyadTable::extra_names
};

struct DyadTable {
    std::vector<std::string> alter_names{"sex1", "age1"};
    std::vector<std::string> ego_names{"sex2", "age2"};
    std::vector<std::string> extra_names;
    std::vector<DyadRecord> records;
};

struct AnalysisFrame {
    std::string id;
    double a = 0.0;
    double z = 0.0;
    double y = 0.0;
    NameshipType s = NameshipType::from_code(3);
    Eigen::VectorXd c;   // outcome covariates C in FrameLayout::c order
    Eigen::VectorXd x1;  // 1 followed by the alter naming columns
    Eigen::VectorXd x2;  // 1 followed by the ego naming columns
};

struct FrameLayout {
    std::vector<std::string> c;
    std::vector<std::string> alter;
    std::vector<std::string> ego;
    std::map<std::string, double> centers;  // column -> subtracted sample mean
};

struct FrameSet {
    FrameLayout layout;
    std::vector<AnalysisFrame> frames;
};

FrameSet build_frames(const DyadTable& table, const ModelConfig& config);

// Fixed CSV header prefix; extra numeric columns may follow.
inline constexpr std::string_view kCsvHeader =
    "dyad_id,y1_b,y1_f,y2_b,y2_f,r1,r2,sex1,age1,sex2,age2";

DyadTable read_csv(const std::filesystem::path& path, const ModelConfig& config);
DyadTable parse_csv(std::istream& in, const ModelConfig& config);
void write_csv(std::ostream& out, const DyadTable& table);

// Swaps ego and alter roles dyad by dyad with probability 1/2. Alter/ego
// covariates are exchanged positionally, so both sides must have equal width.
DyadTable randomize_roles(const DyadTable& table, unsigned long long seed);

}  // namespace peerfx
