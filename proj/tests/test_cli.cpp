#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fairrank_cli.hpp"

namespace fs = std::filesystem;
using namespace fairrank;

namespace {

class Cli : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("fairrank_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        write("items.csv",
              "query_id,doc_id,merit,feature\n"
              "q1,a,0.9,1\nq1,b,0.7,1.1\nq1,c,0.5,0.9\nq1,d,0.4,1.2\nq1,e,0.2,50\nq1,f,0.1,1\n"
              "q2,r,1,3\nq2,s,0.9,2\nq2,t,0.8,1\nq2,u,0.7,1\nq2,v,0.6,2\nq2,w,0.5,3\nq2,x,0.4,1\nq2,y,0.3,2\n");
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name), std::ios::binary) << text;
    }

    std::string read(const std::string& name) const {
        std::ifstream in(path(name), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    int run(std::initializer_list<std::string> args) {
        std::vector<std::string> owned{"fairrank"};
        owned.insert(owned.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : owned) argv.push_back(a.c_str());
        out_.str("");
        err_.str("");
        return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
    }

    fs::path dir_;
    std::ostringstream out_;
    std::ostringstream err_;
};

}  // namespace

TEST_F(Cli, FullPipeline) {
    ASSERT_EQ(run({"solve", "--input", path("items.csv"), "--k", "3", "--out", path("mrp.json")}), cli::ok)
        << err_.str();
    const auto mrp = Json::parse(read("mrp.json"));
    ASSERT_TRUE(mrp.is_array());
    EXPECT_EQ(mrp[0]["query_id"], "q1");
    EXPECT_EQ(mrp[0]["k"], 3);
    EXPECT_EQ(mrp[1]["n"], 8);

    ASSERT_EQ(run({"decompose", "--input", path("mrp.json"), "--out", path("vanilla.json")}), cli::ok) << err_.str();
    ASSERT_EQ(run({"felix", "--input", path("items.csv"), "--mrp", path("mrp.json"), "--k", "3", "--iterations",
                   "10", "--out", path("felix.json")}),
              cli::ok)
        << err_.str();
    const auto fel = Json::parse(read("felix.json"));
    EXPECT_EQ(fel[0]["iterations"], 10);
    EXPECT_EQ(fel[0]["unknown_mass_trace"].size(), 10u);

    ASSERT_EQ(run({"eval", "--policy", path("felix.json"), "--items", path("items.csv"), "--out",
                   path("metrics.csv")}),
              cli::ok)
        << err_.str();
    const auto metrics = read("metrics.csv");
    EXPECT_EQ(metrics.rfind("query_id,ee_l,ndcg_5,ndcg_10,p_unknown,outlierness,utility\nq1,", 0), 0u);
    EXPECT_NE(metrics.find("\nMEAN,"), std::string::npos);

    ASSERT_EQ(run({"sample", "--policy", path("felix.json"), "--items", path("items.csv"), "--count", "4",
                   "--out", path("samples.csv")}),
              cli::ok)
        << err_.str();
    const auto samples = read("samples.csv");
    EXPECT_EQ(samples.rfind("query_id,sample,ranking\nq1,0,", 0), 0u);
    EXPECT_EQ(std::count(samples.begin(), samples.end(), '\n'), 9);
}

TEST_F(Cli, FelixWithoutMrpSolvesFirst) {
    ASSERT_EQ(run({"solve", "--input", path("items.csv"), "--k", "3", "--out", path("mrp.json")}), cli::ok);
    ASSERT_EQ(run({"felix", "--input", path("items.csv"), "--mrp", path("mrp.json"), "--k", "3", "--out",
                   path("a.json")}),
              cli::ok);
    ASSERT_EQ(run({"felix", "--input", path("items.csv"), "--k", "3", "--out", path("b.json")}), cli::ok);
    EXPECT_EQ(read("a.json"), read("b.json"));
}

TEST_F(Cli, ByteIdenticalReruns) {
    for (const char* out : {"one.json", "two.json"}) {
        ASSERT_EQ(run({"felix", "--input", path("items.csv"), "--k", "3", "--seed", "9", "--out", path(out)}),
                  cli::ok);
    }
    EXPECT_EQ(read("one.json"), read("two.json"));
    auto second = read("two.json.manifest.json");
    second.replace(second.find("two.json"), 8, "one.json");
    EXPECT_EQ(read("one.json.manifest.json"), second);
    ASSERT_EQ(run({"felix", "--input", path("items.csv"), "--k", "3", "--seed", "9", "--threads", "4", "--out",
                   path("three.json")}),
              cli::ok);
    EXPECT_EQ(read("one.json"), read("three.json"));
}

TEST_F(Cli, ManifestContents) {
    ASSERT_EQ(run({"solve", "--input", path("items.csv"), "--k", "3", "--out", path("mrp.json"), "--manifest",
                   path("run.json")}),
              cli::ok);
    const auto m = Json::parse(read("run.json"));
    EXPECT_EQ(m["tool"], "fairrank");
    EXPECT_EQ(m["subcommand"], "solve");
    EXPECT_EQ(m["config"]["k"], 3);
    EXPECT_EQ(m["config"]["seed"], 42);
    EXPECT_EQ(m["inputs"][0], path("items.csv"));
    EXPECT_EQ(m["outputs"][0], path("mrp.json"));
    const auto text = read("run.json");
    EXPECT_EQ(text.find("time"), std::string::npos);
    EXPECT_EQ(text.find("date"), std::string::npos);
}

TEST_F(Cli, InfeasibleNamesQuery) {
    write("skewed.csv", "query_id,doc_id,merit,feature\nhard,a,1,0\nhard,b,0.5,0\n");
    EXPECT_EQ(run({"solve", "--input", path("skewed.csv"), "--raw-merits", "--k", "2", "--out", path("m.json")}),
              cli::infeasible);
    EXPECT_NE(err_.str().find("infeasible"), std::string::npos);
    EXPECT_NE(err_.str().find("'hard'"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("m.json")));

    ASSERT_EQ(run({"solve", "--input", path("skewed.csv"), "--raw-merits", "--k", "2", "--mode", "slack", "--out",
                   path("m.json")}),
              cli::ok)
        << err_.str();
    EXPECT_NEAR(Json::parse(read("m.json"))["fairness_residual"].get<double>(), 2 * 0.63092975357145743 - 1,
                1e-9);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run({}), cli::usage);
    EXPECT_EQ(run({"frobnicate"}), cli::usage);
    EXPECT_EQ(run({"solve", "--out", path("m.json")}), cli::usage);
    EXPECT_EQ(run({"solve", "--input", path("items.csv"), "--out", path("m.json"), "--mode", "loose"}), cli::usage);
    EXPECT_EQ(run({"solve", "--input", path("items.csv"), "--out", path("m.json"), "--k", "0"}), cli::usage);
    EXPECT_EQ(run({"--help"}), cli::ok);
    EXPECT_EQ(run({"simulate", "--distributions", "cauchy", "--out", path("s.csv")}), cli::usage);
}

TEST_F(Cli, PathsCheckedBeforeWork) {
    EXPECT_EQ(run({"solve", "--input", path("missing.csv"), "--out", path("m.json")}), cli::usage);
    EXPECT_NE(err_.str().find("missing.csv"), std::string::npos);
    EXPECT_EQ(run({"solve", "--input", path("items.csv"), "--out", path("nodir/m.json")}), cli::usage);
    EXPECT_NE(err_.str().find("nodir"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("nodir")));
}

TEST_F(Cli, MalformedInputs) {
    write("bad.csv", "query_id,doc_id,merit,feature\nq,a,1,0\nq,b,x,0\n");
    EXPECT_EQ(run({"solve", "--input", path("bad.csv"), "--out", path("m.json")}), cli::usage);
    EXPECT_NE(err_.str().find(":3:"), std::string::npos);
    write("bad.json", "{ not json");
    EXPECT_EQ(run({"decompose", "--input", path("bad.json"), "--out", path("p.json")}), cli::usage);
    write("notmrp.json", R"({"query_id":"q","n":2,"k":1,"entries":[[0.7],[0.7]]})");
    EXPECT_EQ(run({"decompose", "--input", path("notmrp.json"), "--out", path("p.json")}), cli::usage);
}

TEST_F(Cli, DimensionMismatchNamesBothFiles) {
    ASSERT_EQ(run({"solve", "--input", path("items.csv"), "--k", "2", "--out", path("mrp.json")}), cli::ok);
    write("fewer.csv", "query_id,doc_id,merit,feature\nq1,a,0.9,1\nq1,b,0.7,1\nq1,c,0.5,1\n"
                       "q2,x,1,3\nq2,y,0.8,2\nq2,z,0.6,1\n");
    EXPECT_EQ(run({"felix", "--input", path("fewer.csv"), "--mrp", path("mrp.json"), "--out", path("f.json")}),
              cli::usage);
    EXPECT_NE(err_.str().find("fewer.csv"), std::string::npos);
    EXPECT_NE(err_.str().find("mrp.json"), std::string::npos);

    ASSERT_EQ(run({"decompose", "--input", path("mrp.json"), "--out", path("pol.json")}), cli::ok);
    EXPECT_EQ(run({"eval", "--policy", path("pol.json"), "--items", path("fewer.csv"), "--out", path("m.csv")}),
              cli::usage);
    EXPECT_NE(err_.str().find("fewer.csv"), std::string::npos);
    EXPECT_NE(err_.str().find("pol.json"), std::string::npos);
}

TEST_F(Cli, SingleQueryIsAnObject) {
    write("one.csv", "query_id,doc_id,merit,feature\nsolo,a,1,0\nsolo,b,0.9,0\nsolo,c,0.8,0\nsolo,d,0.7,0\nsolo,e,0.6,0\n");
    ASSERT_EQ(run({"solve", "--input", path("one.csv"), "--k", "2", "--out", path("m.json")}), cli::ok);
    const auto j = Json::parse(read("m.json"));
    ASSERT_TRUE(j.is_object());
    EXPECT_EQ(j["query_id"], "solo");
}

TEST_F(Cli, SampleWithoutItemsPrintsIndices) {
    write("pol.json", R"({"query_id":"q","n":3,"k":2,"entries":[{"prob":1.0,"doc_indices":[2,0]}]})");
    ASSERT_EQ(run({"sample", "--policy", path("pol.json"), "--count", "2", "--out", path("s.csv")}), cli::ok);
    EXPECT_EQ(read("s.csv"), "query_id,sample,ranking\nq,0,2 0\nq,1,2 0\n");
}

TEST_F(Cli, SimulateSmall) {
    ASSERT_EQ(run({"simulate", "--sweep", "iterations", "--distributions", "powerlaw", "--values", "1,3", "--n",
                   "20", "--queries", "3", "--out", path("s.csv")}),
              cli::ok)
        << err_.str();
    const auto text = read("s.csv");
    EXPECT_EQ(text.rfind("distribution,x,relative_reduction_pct,queries_used,queries_skipped\npowerlaw,1,", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}
