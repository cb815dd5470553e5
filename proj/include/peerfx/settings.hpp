#pragma once

#include "peerfx/core_model.hpp"
#include "peerfx/pipeline.hpp"
#include "peerfx/sim_dgp.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace peerfx {

// One "key = value" assignment and where it came from (for messages).
struct Setting {
    std::string key;
    std::string value;
    std::string origin;
};

// Flat key-value text: one assignment per line, '#' starts a comment.
std::vector<Setting> parse_settings(std::istream& in, const std::string& origin);
std::vector<Setting> read_settings(const std::filesystem::path& path);
Setting parse_assignment(const std::string& text, const std::string& origin);

struct FitSettings {
    std::vector<int> strata{1, 2, 3};
    bool adjusted = true;
    bool naive_pooled = false;
    bool naive_stratified = false;
    int bootstrap = 0;
    std::uint64_t bootstrap_seed = 1;
    std::optional<std::uint64_t> randomize_roles;  // seed
    bool covariance = false;
    TwoStepOptions two_step;
};

struct RunSettings {
    ModelConfig model;
    SimConfig sim;
    FitSettings fit;
};

// Applies assignments in order, so later ones win. Unknown keys and
// unparseable values throw invalid_argument naming the key and its origin.
void apply_settings(RunSettings& run, const std::vector<Setting>& settings);

std::vector<int> parse_strata(const std::string& text);

}  // namespace peerfx
