#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kkl/cli.hpp"

namespace fs = std::filesystem;
using kkl::cli::json;

namespace {

struct Invocation {
    int status = -1;
    std::string out;
    std::string err;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("kkl_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream(p, std::ios::binary) << text;
        return p;
    }
    fs::path write(const std::string& name, const json& doc) { return write(name, doc.dump(2)); }

    Invocation run(const fs::path& cfg, const std::string& out_name = "out",
            std::optional<std::string> formats = std::nullopt) {
        std::ostringstream o, e;
        Invocation r;
        r.status = kkl::cli::run(cfg, (dir_ / out_name).string(), formats, o, e);
        r.out = o.str();
        r.err = e.str();
        return r;
    }

    json report(const std::string& command, const std::string& out_name = "out") {
        std::ifstream in(dir_ / out_name / (command + ".json"));
        return json::parse(in);
    }
    std::string bytes(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

json classify_line(double p) {
    return {{"command", "classify"},
            {"kernel", {{"kind", "gaussian"}, {"d", 1}}},
            {"measure", {{"kind", "lebesgue"}, {"d", 1}}},
            {"parameters", {{"p", p}, {"t_grid", kkl::log_grid(1e-4, 1e-1, 7)}}}};
}

json small_sim(std::uint64_t seed, int replicas) {
    return {{"d", 1},
            {"p", 2},
            {"starts", {{0.0}, {0.0}}},
            {"h", 0.01},
            {"T", 1.0},
            {"epsilon", 0.05},
            {"grid", {{"lower", {-3.0}}, {"upper", {3.0}}, {"shape", {240}}}},
            {"seed", seed},
            {"replicas", replicas}};
}

bool any_fail(const std::string& out) { return out.find(" FAIL") != std::string::npos; }

}  // namespace

TEST_F(CliTest, ClassifyLineReportsThreeQuarters) {
    const auto r = run(write("c.json", classify_line(2)));
    ASSERT_EQ(r.status, 0) << r.err;
    const json rep = report("classify");
    EXPECT_EQ(rep["schema_version"], 1);
    EXPECT_NEAR(rep["result"]["delta_fit"]["delta"].get<double>(), 0.75, 0.05);
    EXPECT_TRUE(rep["result"]["verdict_Dp"].get<bool>());
    // Defaults are materialized.
    EXPECT_TRUE(rep["config"]["parameters"].contains("alpha_grid"));
    EXPECT_TRUE(rep["config"]["parameters"].contains("quadrature"));
    EXPECT_TRUE(rep["config"]["parameters"]["thresholds"].contains("min_r_squared"));
    EXPECT_NE(r.out.find("STATUS PASS"), std::string::npos);
}

TEST_F(CliTest, FractionalPBelowOneNamesTheField) {
    const auto r = run(write("c.json", classify_line(0.5)));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("p must be ≥ 1"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("parameters.p"), std::string::npos) << r.err;
}

TEST_F(CliTest, BoundaryDivergenceRunsWithNegativeVerdict) {
    json cfg = classify_line(3);
    cfg["kernel"]["d"] = 3;
    cfg["measure"]["d"] = 3;
    const auto r = run(write("c.json", cfg));
    ASSERT_EQ(r.status, 0) << r.err;
    const json rep = report("classify");
    EXPECT_FALSE(rep["result"]["verdict_Dp"].get<bool>());
    EXPECT_EQ(rep["result"]["gamma_curve"][0]["value"], "Infinity");
}

TEST_F(CliTest, FailedExpectationExitsTwo) {
    json cfg = classify_line(2);
    cfg["parameters"]["expect"] = {{"delta", 0.5}};
    const auto r = run(write("c.json", cfg));
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.out.find("CHECK delta FAIL"), std::string::npos) << r.out;
}

TEST_F(CliTest, ParseErrorReportsLineAndColumn) {
    const auto p = write("bad.json", std::string("{\n  \"command\": \"classify\",\n  \"kernel\": {,}\n}\n"));
    const auto r = run(p);
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("bad.json:3:14"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownFieldsAndCommandsRejected) {
    json cfg = classify_line(2);
    cfg["parameters"]["tgrid"] = {1, 2};
    auto r = run(write("c.json", cfg));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("parameters.tgrid: unknown field"), std::string::npos) << r.err;
    cfg = classify_line(2);
    cfg["command"] = "plot";
    r = run(write("c.json", cfg));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("command"), std::string::npos);
}

TEST_F(CliTest, MissingReferencedFileRejected) {
    json cfg = classify_line(2);
    cfg["measure"] = {{"kind", "grid"}, {"csv", "nowhere.csv"}};
    const auto r = run(write("c.json", cfg));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("measure.csv"), std::string::npos) << r.err;
}

TEST_F(CliTest, GridDensityFileResolvesNextToConfig) {
    write("density.csv", std::string("# lattice d=1 lower=-1 upper=1 shape=4\nx0,value\n-0.75,1\n-0.25,2\n0.25,2\n0.75,1\n"));
    json cfg = classify_line(1);
    cfg["measure"] = {{"kind", "grid"}, {"csv", "density.csv"}};
    const auto r = run(write("c.json", cfg));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_TRUE(report("classify")["result"]["verdict_Dp"].get<bool>());
}

TEST_F(CliTest, UnwritableOutputExitsOne) {
    write("blocker", std::string("x"));
    const auto r = run(write("c.json", classify_line(2)), "blocker/sub");
    EXPECT_EQ(r.status, 1);
}

TEST_F(CliTest, CurveCsvIsTwoColumnTable) {
    const auto r = run(write("c.json", classify_line(2)));
    ASSERT_EQ(r.status, 0) << r.err;
    std::ifstream in(dir_ / "out" / "eta_curve.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,eta");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const auto comma = line.find(',');
        ASSERT_NE(comma, std::string::npos);
        EXPECT_EQ(line.find(',', comma + 1), std::string::npos);
        std::size_t used = 0;
        std::stod(line.substr(0, comma), &used);
        EXPECT_EQ(used, comma);
        EXPECT_NO_THROW(std::stod(line.substr(comma + 1)));
    }
    EXPECT_EQ(rows, 7);
}

TEST_F(CliTest, EmissionIsByteStableAndRoundTrips) {
    const auto cfg = write("c.json", classify_line(2));
    ASSERT_EQ(run(cfg, "a").status, 0);
    ASSERT_EQ(run(cfg, "b").status, 0);
    EXPECT_EQ(bytes(dir_ / "a" / "classify.json"), bytes(dir_ / "b" / "classify.json"));
    EXPECT_EQ(bytes(dir_ / "a" / "eta_curve.csv"), bytes(dir_ / "b" / "eta_curve.csv"));
    const std::string text = bytes(dir_ / "a" / "classify.json");
    const json parsed = json::parse(text);
    EXPECT_EQ(parsed.dump(2) + "\n", text);
    // Doubles survive the trip bit for bit.
    const auto& eta = parsed["result"]["eta_curve"];
    std::ifstream csv(dir_ / "a" / "eta_curve.csv");
    std::string line;
    std::getline(csv, line);
    for (const auto& e : eta) {
        std::getline(csv, line);
        EXPECT_EQ(std::stod(line.substr(line.find(',') + 1)), e["value"].get<double>());
    }
}

TEST_F(CliTest, FormatFlagSelectsOutputs) {
    const auto r = run(write("c.json", classify_line(2)), "out", "csv");
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_FALSE(fs::exists(dir_ / "out" / "classify.json"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "eta_curve.csv"));
    EXPECT_EQ(run(write("c.json", classify_line(2)), "out", "xml").status, 1);
}

TEST_F(CliTest, ValidateKernel) {
    const json cfg = {{"command", "validate-kernel"}, {"kernel", {{"kind", "gaussian"}, {"d", 2}}}};
    const auto r = run(write("c.json", cfg));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_NE(r.out.find("CHECK chapman_kolmogorov PASS"), std::string::npos);
    const json env = {{"command", "validate-kernel"},
                      {"kernel", {{"kind", "jump"}, {"d_f", 2}, {"d_w", 1.5}}}};
    EXPECT_EQ(run(write("e.json", env)).status, 1);
}

TEST_F(CliTest, Equivalences) {
    json cfg = classify_line(2);
    cfg["command"] = "equivalences";
    cfg["parameters"] = {{"p", 2}};
    const auto r = run(write("c.json", cfg));
    ASSERT_EQ(r.status, 0) << r.err;
    const json rep = report("equivalences");
    EXPECT_EQ(rep["result"]["results"].size(), 12u);
    EXPECT_TRUE(rep["result"]["all_hold"].get<bool>());
}

TEST_F(CliTest, SobolevEmbeddingAndInterpolation) {
    json cfg = classify_line(2);
    cfg["command"] = "sobolev-verify";
    cfg["parameters"] = {{"p", 2},
                         {"alphas", {1.0}},
                         {"battery", {{{"kind", "gaussian"}, {"sigma", 0.5}}, {{"kind", "cosine"}, {"radius", 2.0}}}},
                         {"interpolation", {{"theta", 0.95}, {"constant_theta", 0.75}, {"expect", "violated"}}}};
    auto r = run(write("c.json", cfg));
    ASSERT_EQ(r.status, 0) << r.err << r.out;
    cfg["parameters"]["interpolation"]["expect"] = "holds";
    r = run(write("c.json", cfg));
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.out.find("interpolation.theta0.94999999999999996 FAIL"), std::string::npos) << r.out;
}

TEST_F(CliTest, IntersectSimReportsAndExitMatchesChecks) {
    const json cfg = {{"command", "intersect-sim"},
                      {"parameters",
                       {{"simulation", small_sim(3, 100)},
                        {"t", {1.0, 1.0}},
                        {"epsilons", {0.2, 0.1}}}}};
    const auto r = run(write("c.json", cfg));
    ASSERT_NE(r.status, 1) << r.err;
    EXPECT_EQ(r.status == 2, any_fail(r.out));
    const json rep = report("intersect-sim");
    EXPECT_EQ(rep["result"]["rows"].size(), 2u);
    EXPECT_EQ(rep["config"]["parameters"]["f"]["lower"][0], -2.0);
    std::ifstream in(dir_ / "out" / "replicas.csv");
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 200);
}

TEST_F(CliTest, IntersectSimRejectsCoarseGridAndBadK) {
    json sim = small_sim(3, 10);
    sim["grid"]["shape"] = {100};
    json cfg = {{"command", "intersect-sim"}, {"parameters", {{"simulation", sim}}}};
    auto r = run(write("c.json", cfg));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("parameters.simulation"), std::string::npos) << r.err;
    cfg = {{"command", "intersect-sim"}, {"parameters", {{"simulation", small_sim(3, 10)}, {"k", 3}}}};
    r = run(write("c.json", cfg));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("parameters.k"), std::string::npos) << r.err;
}

TEST_F(CliTest, IntersectSimBytesIndependentOfWorkers) {
    const json cfg = {{"command", "intersect-sim"},
                      {"parameters", {{"simulation", small_sim(77, 64)}, {"epsilons", {0.1, 0.05}}}}};
    const auto p = write("c.json", cfg);
    setenv("KKL_THREADS", "1", 1);
    run(p, "one");
    setenv("KKL_THREADS", "4", 1);
    run(p, "four");
    unsetenv("KKL_THREADS");
    EXPECT_EQ(bytes(dir_ / "one" / "replicas.csv"), bytes(dir_ / "four" / "replicas.csv"));
    EXPECT_EQ(bytes(dir_ / "one" / "intersect-sim.json"), bytes(dir_ / "four" / "intersect-sim.json"));
}

TEST_F(CliTest, HolderChecksEveryGap) {
    const json cfg = {{"command", "holder"},
                      {"parameters", {{"simulation", small_sim(5, 60)}, {"bootstrap_resamples", 20}}}};
    const auto r = run(write("c.json", cfg));
    ASSERT_NE(r.status, 1) << r.err;
    EXPECT_EQ(r.status == 2, any_fail(r.out));
    for (int j = 0; j < 6; ++j)
        EXPECT_NE(r.out.find("CHECK holder.bound.gap" + std::to_string(j) + " "), std::string::npos);
    const json rep = report("holder");
    EXPECT_EQ(rep["result"]["gaps"].size(), 6u);
    EXPECT_EQ(rep["config"]["parameters"]["times"].size(), 7u);
}

TEST_F(CliTest, SampleConfigsParse) {
    for (const auto& e : fs::directory_iterator(fs::path(KKL_SOURCE_DIR) / "configs")) {
        if (e.path().extension() != ".json") continue;
        SCOPED_TRACE(e.path().string());
        EXPECT_NO_THROW(kkl::cli::load_config(e.path()));
    }
}
