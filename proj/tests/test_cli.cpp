#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#include "moody/cli.hpp"

using namespace moody;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "moody");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("moody_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenerateMineScoreAgree) {
    auto g = run_cli({"generate", "--seed", "3", "--events", "300", "--out", path("log.csv"), "--out-gt",
                      path("gt.json"), "--out-test", path("test.csv")});
    ASSERT_EQ(g.code, 0) << g.err;
    ASSERT_TRUE(fs::exists(path("test.csv")));

    auto m = run_cli({"mine", "-i", path("log.csv"), "-o", path("model.json"), "--trace-scores", path("trace.csv")});
    ASSERT_EQ(m.code, 0) << m.err;
    auto s = run_cli({"score", "-i", path("log.csv"), "-m", path("model.json")});
    ASSERT_EQ(s.code, 0) << s.err;
    const auto mj = json::parse(m.out), sj = json::parse(s.out);
    EXPECT_DOUBLE_EQ(mj["total"].get<double>(), sj["total"].get<double>());
    EXPECT_EQ(mj["rules"], sj["rules"]);

    auto gts = run_cli({"score", "-i", path("log.csv"), "-m", path("gt.json")});
    EXPECT_EQ(gts.code, 0) << gts.err;

    auto e = run_cli({"evaluate", "-m", path("model.json"), "--test", path("test.csv"), "--train", path("log.csv"),
                      "--per-rule", path("rules.csv")});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto rep = json::parse(e.out);
    EXPECT_TRUE(rep.contains("f1"));
    EXPECT_FALSE(rep.contains("runtime_seconds"));
    EXPECT_TRUE(fs::exists(path("rules.csv")));
}

TEST_F(CliTest, NoiseKeepsShape) {
    ASSERT_EQ(run_cli({"generate", "--seed", "1", "--events", "100", "--out", path("a.csv")}).code, 0);
    ASSERT_EQ(run_cli({"noise", "-i", path("a.csv"), "--q", "0.3", "--seed", "2", "-o", path("b.csv")}).code, 0);
    auto a = read_log(path("a.csv")), b = read_log(path("b.csv"));
    EXPECT_EQ(a.event_count(), b.event_count());
}

TEST(Cli, CountDags) {
    auto r = run_cli({"count-dags", "--nodes", "3", "--edges", "6"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "25\n");
}

TEST(Cli, Version) {
    auto r = run_cli({"--version"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("epsilon 0.5"), std::string::npos);
    EXPECT_NE(r.out.find("universal_constant 2.86506"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run_cli({"mine"}).code, 1);
    EXPECT_EQ(run_cli({"bogus"}).code, 1);
    EXPECT_EQ(run_cli({"generate", "--ops", "=,~", "--out", "/dev/null"}).code, 1);
    EXPECT_EQ(run_cli({"score", "-i", "/nonexistent/log.csv"}).code, 2);
}

TEST_F(CliTest, MalformedModelIsDataError) {
    ASSERT_EQ(run_cli({"generate", "--seed", "1", "--events", "50", "--out", path("a.csv")}).code, 0);
    write_file(path("bad.json"), "{\"rules\":[{\"condition\":{\"variable\":\"activity\",\"op\":\"?\"}}]}");
    auto r = run_cli({"score", "-i", path("a.csv"), "-m", path("bad.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, ConfigFileSuppliesFlags) {
    write_file(path("cfg.toml"), "[generate]\nseed = 9\nevents = 60\nrules = 1\n");
    ASSERT_EQ(run_cli({"--config", path("cfg.toml"), "generate", "--out", path("a.csv"), "--out-gt", path("gt.json")}).code, 0);
    ASSERT_EQ(run_cli({"generate", "--seed", "9", "--events", "60", "--rules", "1", "--out", path("b.csv")}).code, 0);
    EXPECT_EQ(read_file(path("a.csv")), read_file(path("b.csv")));
    EXPECT_EQ(read_model(path("gt.json")).size(), 1u);
}

TEST(Cli, BinaryExitStatus) {
    const std::string bin = MOODY_CLI_PATH;
    const int ok = std::system((bin + " count-dags --nodes 2 --edges 1 > /dev/null").c_str());
    EXPECT_EQ(WEXITSTATUS(ok), 0);
    const int usage = std::system((bin + " mine > /dev/null 2>&1").c_str());
    EXPECT_EQ(WEXITSTATUS(usage), 1);
}
