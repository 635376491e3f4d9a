#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "qgraph/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "qgraph");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = qgraph::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("qgraph_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
    fs::path dir;
};

}  // namespace

TEST_F(Cli, ConstructStar) {
    const auto r = run({"construct", "star", "--s", "3", "--eps", "0.03125", "-o", path("g.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto v = run({"validate", path("g.json")});
    EXPECT_EQ(v.code, 0);
    EXPECT_EQ(nlohmann::json::parse(v.out)["n_boundary"], 4);
}

TEST_F(Cli, VerifyBoundsOnInterval) {
    ASSERT_EQ(run({"construct", "interval", "-o", path("g.json")}).code, 0);
    const auto r = run({"verify-bounds", path("g.json"), "--combo", "2:1,5:0.7"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["lower"], 1);
    EXPECT_EQ(j["upper"], 4);
    EXPECT_GE(j["measured"].get<int>(), 1);
    EXPECT_LE(j["measured"].get<int>(), 4);
    EXPECT_EQ(j["verdict"], "pass");
}

TEST_F(Cli, HeatflowWritesArtifacts) {
    ASSERT_EQ(run({"construct", "interval", "-o", path("g.json")}).code, 0);
    const auto r = run({"--out", dir.string(), "heatflow", path("g.json"), "--combo", "1:1,3:1", "--adaptive"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"heatflow_trace.csv", "heatflow_events.csv", "heatflow_audit.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
        EXPECT_FALSE(fs::exists(dir / (std::string(f) + ".tmp"))) << f;
    }
    std::ifstream events(dir / "heatflow_events.csv");
    std::string header;
    std::getline(events, header);
    EXPECT_EQ(header, "y,kind,site,delta");
    std::ifstream audit(dir / "heatflow_audit.json");
    EXPECT_TRUE(nlohmann::json::parse(audit)["passed"].get<bool>());
}

TEST_F(Cli, DeterministicOutput) {
    const std::vector<std::string> args{"--seed", "5", "saturate", "--s", "2", "--L", "2"};
    const auto a = run(args);
    const auto b = run(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    const auto j = nlohmann::ordered_json::parse(a.out);
    EXPECT_EQ(j.begin().key(), "s");
    EXPECT_EQ(j["measured"], 2);
}

TEST_F(Cli, FindB) {
    const auto r = run({"find-b", "--m", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["n_combination"], 1);
    EXPECT_EQ(j["n_f2"], 2);
    EXPECT_EQ(j["n_f3"], 2);
}

TEST_F(Cli, CsvSpectrum) {
    ASSERT_EQ(run({"construct", "interval", "-o", path("g.json")}).code, 0);
    const auto r = run({"--format", "csv", "spectrum", path("g.json"), "--count", "3"});
    ASSERT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "index,lambda,multiplicity,min_inner_vertex_ratio");
    std::getline(in, line);
    EXPECT_EQ(line.substr(0, 8), "1,9.8696");
}

TEST_F(Cli, GlobalFlagsAfterSubcommand) {
    ASSERT_EQ(run({"construct", "interval", "-o", path("g.json")}).code, 0);
    const auto r = run({"topology", path("g.json"), "--tol-scale", "10", "--format", "json"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(nlohmann::json::parse(r.out)["identity_holds"].get<bool>());
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"spectrum"}).code, 2);
    const auto r = run({"spectrum", "g.json", "--bogus"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run({"--format", "xml", "select-eps", "--s", "2", "--M", "2"}).code, 2);
}

TEST_F(Cli, DomainErrorsAreStructured) {
    std::ofstream(path("bad.json")) << R"({"vertices":[{"id":"a"},{"id":"b"}],"edges":[{"id":"e","from":"a","to":"b","length":-1}]})";
    const auto v = run({"spectrum", path("bad.json"), "--count", "2"});
    EXPECT_EQ(v.code, 1);
    EXPECT_EQ(nlohmann::json::parse(v.out)["error"]["kind"], "invalid_graph");
    ASSERT_EQ(run({"construct", "interval", "-o", path("g.json")}).code, 0);
    const auto c = run({"nodal", path("g.json"), "--combo", "2:1,1:1"});
    EXPECT_EQ(c.code, 1);
    EXPECT_EQ(nlohmann::json::parse(c.out)["error"]["kind"], "invalid_argument");
    EXPECT_EQ(run({"validate", path("missing.json")}).code, 1);
}
