#include <betakde/cli.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace betakde;

namespace {

struct Run
{
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args)
{
  args.insert(args.begin(), "betakde");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return { code, out.str(), err.str() };
}

std::filesystem::path scratch(const std::string& name)
{
  const auto dir = std::filesystem::temp_directory_path() / "betakde_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

} // namespace

TEST(Cli, KernelEvalPrintsOnePointFive)
{
  const auto r = run({ "kernel-eval", "--t", "0.5", "--b", "0.5", "--x", "0.5" });
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1.5\n");
}

TEST(Cli, KernelEvalSeveralPoints)
{
  const auto r = run({ "kernel-eval", "--t", "0.5", "--b", "0.5", "--x", "0", "0.5", "1" });
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0\n1.5\n0\n");
}

TEST(Cli, UsageErrorsExitTwo)
{
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({ "frobnicate" }).code, 2);
  EXPECT_EQ(run({ "kernel-eval", "--t", "0.5" }).code, 2);
  EXPECT_EQ(run({ "kernel-eval", "--t", "2", "--b", "0.5", "--x", "0.5" }).code, 2);
  EXPECT_EQ(run({ "risk", "--density", "gaussian", "--b", "0.1", "--n", "10" }).code, 2);
  EXPECT_EQ(run({ "estimate", "--input", "/nonexistent/sample", "--b", "0.1" }).code, 2);
  EXPECT_EQ(run({ "experiment", "rate", "--config", "/nonexistent.json", "--out", "x" }).code,
            2);
}

TEST(Cli, HelpAndVersionExitZero)
{
  const auto h = run({ "--help" });
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("kernel-eval"), std::string::npos);
  const auto v = run({ "--version" });
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, std::string(version) + "\n");
}

TEST(Cli, EstimateIsDeterministic)
{
  const auto sample = scratch("sample.txt");
  {
    std::ofstream s(sample);
    s << "0.1\n0.25\n\n0.5\n0.9\n";
  }
  const auto a = scratch("est_a.csv");
  const auto b = scratch("est_b.csv");
  EXPECT_EQ(run({ "estimate", "--input", sample.string(), "--b", "0.05", "--grid", "11", "--out",
                  a.string() })
              .code,
            0);
  EXPECT_EQ(run({ "estimate", "--input", sample.string(), "--b", "0.05", "--grid", "11", "--out",
                  b.string() })
              .code,
            0);
  const auto text = slurp(a);
  EXPECT_EQ(text, slurp(b));
  EXPECT_NE(text.find("# config_hash: "), std::string::npos);
  EXPECT_NE(text.find("\nt,estimate\n0,"), std::string::npos);
  std::ifstream in(a);
  const auto table = read_csv(in);
  EXPECT_EQ(table.rows.size(), 11u);
  const double expected =
    (evaluate(BetaKernel(0.5, 0.05), 0.1) + evaluate(BetaKernel(0.5, 0.05), 0.25) +
     evaluate(BetaKernel(0.5, 0.05), 0.5) + evaluate(BetaKernel(0.5, 0.05), 0.9)) /
    4.0;
  EXPECT_NEAR(table.rows[5][1], expected, 1e-14 * expected);
}

TEST(Cli, EstimateRejectsOutOfRangeSample)
{
  const auto sample = scratch("bad_sample.txt");
  {
    std::ofstream s(sample);
    s << "0.1\n1.5\n";
  }
  EXPECT_EQ(run({ "estimate", "--input", sample.string(), "--b", "0.05" }).code, 2);
}

TEST(Cli, RiskIsDeterministic)
{
  const std::vector<std::string> args{ "risk", "--density", "cosine:a=0.1", "--b", "0.05",
                                       "--n", "200", "--reps", "3", "--seed", "4", "--nodes",
                                       "101" };
  const auto a = run(args);
  const auto b = run(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("# seed: 4\n"), std::string::npos);
  EXPECT_NE(a.out.find("risk,stderr,reps,p,mean_loss,loss_stderr\n"), std::string::npos);
}

TEST(Cli, ExperimentWritesReportAndPlot)
{
  const auto config = scratch("bias.json");
  {
    std::ofstream c(config);
    c << R"({"experiment":"bias-floor","density":"linear","p":2,"b_grid":[0.0001,0.001,0.01],
             "checks":[{"kind":"slope","target":1,"tolerance":0.02}]})";
  }
  const auto dir = scratch("out");
  const auto r = run({ "experiment", "bias-floor", "--config", config.string(), "--out",
                       dir.string() });
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("pass slope"), std::string::npos);
  EXPECT_NE(r.out.find("pass quadrature gate"), std::string::npos);
  const auto csv = dir / "bias-floor.csv";
  ASSERT_TRUE(std::filesystem::exists(csv));

  const auto svg = scratch("bias.svg");
  EXPECT_EQ(run({ "plot", "--in", csv.string(), "--out", svg.string(), "--x", "b", "--y",
                  "integrated_bias" })
              .code,
            0);
  const auto text = slurp(svg);
  EXPECT_EQ(text.rfind("<svg", 0), 0u);
  EXPECT_NE(text.find("</svg>"), std::string::npos);
  EXPECT_EQ(run({ "plot", "--in", csv.string(), "--out", svg.string(), "--y", "nope" }).code, 2);
}

TEST(Cli, ExperimentTagMustMatchConfig)
{
  const auto config = scratch("mismatch.json");
  {
    std::ofstream c(config);
    c << R"({"experiment":"bias-floor","density":"linear","b_grid":[0.01]})";
  }
  EXPECT_EQ(run({ "experiment", "rate", "--config", config.string(), "--out",
                  scratch("out2").string() })
              .code,
            2);
}

TEST(Cli, FailedGateExitsOne)
{
  const auto config = scratch("gate.json");
  {
    std::ofstream c(config);
    c << R"({"experiment":"sawtooth-bias","density":"sawtooth:beta=0.5,L=1","p":1,
             "b_grid":[0.001],"quadrature_nodes":3,"gate_tolerance":1e-15})";
  }
  const auto r = run({ "experiment", "sawtooth-bias", "--config", config.string(), "--out",
                       scratch("out3").string() });
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL quadrature gate"), std::string::npos);
}
