#include "peerfx/error.hpp"
#include "peerfx/report.hpp"
#include "peerfx/settings.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace peerfx;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "peerfx_unit" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = std::string(PEERFX_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    out << body;
}

std::size_t data_rows(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n - 1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate is deterministic per seed") {
    const auto a = scratch("sim_a"), b = scratch("sim_b");
    REQUIRE(run("simulate --set seed=7 --set n_candidate=800 --out " + a.string()) == 0);
    REQUIRE(run("simulate --set seed=7 --set n_candidate=800 --out " + b.string()) == 0);
    CHECK(slurp(a / "data.csv") == slurp(b / "data.csv"));
    CHECK(slurp(a / "truth.json") == slurp(b / "truth.json"));
    const auto c = scratch("sim_c");
    REQUIRE(run("simulate --set seed=8 --set n_candidate=800 --out " + c.string()) == 0);
    CHECK(slurp(a / "data.csv") != slurp(c / "data.csv"));
}

TEST_CASE("symmetric selection retains about three quarters") {
    const auto dir = scratch("sim_sym");
    std::string cfg = "n_candidate = 1000\nseed = 12\nalpha = 0, 0, 0, 0\n";
    for (int s = 1; s <= 3; ++s) {
        for (const char* slot : {"intercept", "z", "sex1", "age1", "sex2", "age2", "y2_b"}) {
            cfg += "gamma" + std::to_string(s) + "." + slot + " = 0\n";
        }
    }
    write(dir / "sym.cfg", cfg);
    REQUIRE(run("simulate --config " + (dir / "sym.cfg").string() + " --out " + dir.string()) == 0);
    const double kept = static_cast<double>(data_rows(dir / "data.csv"));
    CHECK(std::abs(kept - 750.0) <= 3 * std::sqrt(1000 * 0.75 * 0.25));
}

TEST_CASE("simulate, fit and report end to end") {
    const auto dir = scratch("e2e");
    REQUIRE(run("simulate --set seed=3 --set n_candidate=2500 --set beta_a=0.5 --out " + dir.string()) == 0);
    const auto out = dir / "fit";
    REQUIRE(run("fit --input " + (dir / "data.csv").string() + " --naive-pooled --naive-stratified --out " +
                out.string()) == 0);
    for (const char* f : {"fit.json", "tables.txt", "nameship.json", "fit_s1.json", "fit_s2.json", "fit_s3.json",
                          "wald.json"}) {
        CHECK_MESSAGE(fs::exists(out / f), f);
    }
    const auto nameship = nlohmann::json::parse(slurp(out / "nameship.json"));
    CHECK(nameship["converged"].get<bool>());
    CHECK(nameship["theta1"].contains("z"));
    CHECK(nameship["theta2"].contains("y2_b"));

    // Table 1 row set.
    const auto tables = slurp(out / "tables.txt");
    const auto t1 = tables.substr(tables.find("Table 1"), tables.find("Table 2") - tables.find("Table 1"));
    for (const char* row : {"alter exposure", "ego baseline trait", "ego sex", "ego age", "alter sex", "alter age",
                            "alter age:ego age"}) {
        CHECK_MESSAGE(t1.find(row) != std::string::npos, row);
    }
    CHECK(t1.find("Est       SE        p") != std::string::npos);

    // Homophily rows close each stratum block of Table 4.
    const auto t4 = tables.substr(tables.find("Table 4"));
    const auto last_cov = t4.find("alter age:ego age");
    CHECK(last_cov < t4.find("beta^{s,s1}"));
    CHECK(t4.find("beta^{s,s1}") < t4.find("beta^{s,s2}"));
    CHECK(t4.find("beta^{s,s2}") < t4.find("beta^{s,s3}"));

    // report re-renders the same tables and re-emits the same JSON.
    const auto again = dir / "again.json";
    REQUIRE(run("report --fit " + (out / "fit.json").string() + " --json " + again.string()) == 0);
    const auto before = nlohmann::json::parse(slurp(out / "fit.json"));
    const auto after = nlohmann::json::parse(slurp(again));
    CHECK(before == after);
    CHECK(render_tables(fit_report_from_json(after)) == tables);
}

TEST_CASE("failed fits leave no output") {
    const auto dir = scratch("bad");
    write(dir / "broken.csv", "dyad_id,y1_b,y1_f,y2_b,y2_f,r1,r2,sex1,age1,sex2,age2\nd1,25,26,27\n");
    CHECK(run("fit --input " + (dir / "broken.csv").string() + " --out " + (dir / "out").string()) == 3);
    CHECK(!fs::exists(dir / "out" / "fit.json"));
    CHECK(!fs::exists(dir / "out" / "tables.txt"));

    write(dir / "nullrow.csv",
          "dyad_id,y1_b,y1_f,y2_b,y2_f,r1,r2,sex1,age1,sex2,age2\nd1,25,26,27,28,0,0,0,40,1,41\n");
    CHECK(run("fit --input " + (dir / "nullrow.csv").string() + " --out " + (dir / "out2").string()) == 3);
    CHECK(!fs::exists(dir / "out2"));
}

TEST_CASE("usage errors exit with 2") {
    const auto dir = scratch("usage");
    REQUIRE(run("simulate --set n_candidate=300 --out " + dir.string()) == 0);
    const auto csv = (dir / "data.csv").string();
    CHECK(run("") == 2);
    CHECK(run("fit --input " + csv) == 2);
    CHECK(run("fit --input " + csv + " --out " + (dir / "o").string() + " --set no_such_key=1") == 2);
    CHECK(run("fit --input " + csv + " --out " + (dir / "o").string() + " --set alter_columns=a,sex1,age1") == 2);
    CHECK(run("fit --input " + csv + " --out " + (dir / "o").string() + " --strata 1,4") == 2);
    CHECK(run("fit --input " + csv + " --out " + (dir / "o").string() + " --link logit") == 2);
    CHECK(run("report --fit " + csv) == 3);
    CHECK(!fs::exists(dir / "o"));
}

TEST_CASE("settings precedence and parsing") {
    std::istringstream file("# comment\nlink = multiplicative\nseed = 4\nalpha = 0, 0.1, 0.2, 0.3\n"
                            "gamma2.z = 2.5\nbeta_a = 0.1, 0.2, 0.3\nstrata = 3,1\n");
    auto settings = parse_settings(file, "test.cfg");
    settings.push_back(parse_assignment("seed=9", "--set"));
    settings.push_back({"link", "additive", "--link"});
    RunSettings run;
    apply_settings(run, settings);
    CHECK(run.sim.seed == 9);
    CHECK(run.model.link == Link::additive);
    CHECK(run.sim.link == Link::additive);
    CHECK(run.sim.alpha[3] == 0.3);
    CHECK(run.sim.gamma[2].z == 2.5);
    CHECK(run.sim.beta_a[2] == 0.2);
    CHECK(run.fit.strata == std::vector<int>{3, 1});

    RunSettings bad;
    CHECK_THROWS_AS(apply_settings(bad, {{"seed", "x", "t"}}), Error);
    CHECK_THROWS_AS(apply_settings(bad, {{"alpha", "1,2", "t"}}), Error);
    CHECK_THROWS_AS(apply_settings(bad, {{"gamma4.z", "1", "t"}}), Error);
    CHECK_THROWS_AS(parse_strata("2,2"), Error);
    CHECK_THROWS_AS(parse_assignment("novalue", "t"), Error);
}

}  // TEST_SUITE
