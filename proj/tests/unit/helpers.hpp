#pragma once

#include "peerfx/core_model.hpp"
#include "peerfx/nameship_mle.hpp"
#include "peerfx/random.hpp"

#include <Eigen/Dense>

#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

inline const char* kHeader = "dyad_id,y1_b,y1_f,y2_b,y2_f,r1,r2,sex1,age1,sex2,age2\n";

inline peerfx::DyadTable table_from(const std::string& body, const peerfx::ModelConfig& config = {}) {
    std::istringstream in(std::string(kHeader) + body);
    return peerfx::parse_csv(in, config);
}

// Frame with the default layout: x1 = (1, a, sex1, age1, z), x2 = (1, y2_b, sex2, age2).
inline peerfx::AnalysisFrame random_frame(peerfx::SplitMix64& rng, int s = 3) {
    std::normal_distribution<double> normal;
    peerfx::AnalysisFrame f;
    f.id = "f";
    f.a = static_cast<double>(rng() % 2);
    f.z = normal(rng);
    f.y = normal(rng);
    f.s = peerfx::NameshipType::from_code(s);
    f.x1.resize(5);
    f.x1 << 1.0, f.a, static_cast<double>(rng() % 2), normal(rng), f.z;
    f.x2.resize(4);
    f.x2 << 1.0, normal(rng), static_cast<double>(rng() % 2), normal(rng);
    f.c = Eigen::VectorXd::Zero(1);
    return f;
}

inline peerfx::NameshipParams random_theta(peerfx::SplitMix64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    peerfx::NameshipParams t;
    t.theta1 = Eigen::VectorXd(5);
    t.theta2 = Eigen::VectorXd(4);
    for (auto& v : t.theta1) v = normal(rng);
    for (auto& v : t.theta2) v = normal(rng);
    return t;
}

inline peerfx::NameshipParams intercepts(double t1, double t2) {
    peerfx::NameshipParams t;
    t.theta1 = Eigen::VectorXd::Zero(5);
    t.theta2 = Eigen::VectorXd::Zero(4);
    t.theta1[0] = t1;
    t.theta2[0] = t2;
    return t;
}

}  // namespace testing
