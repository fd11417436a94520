#include "weaklab/study.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace weaklab;

namespace {
const char* kGbmDet = R"({"study": "weak-rate", "model": {"name": "gbm", "mu": 0.1, "sigma": 0.2},
  "function": {"name": "identity"}, "n_ladder": [8, 16, 32, 64], "mode": "deterministic", "x": 1.0})";

std::string with(const std::string& base, const std::string& extra) {
  return base.substr(0, base.rfind('}')) + ", " + extra + "}";
}

int lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST(Config, ParsesDefaults) {
  const StudyConfig c = parse_config(kGbmDet);
  EXPECT_EQ(c.study, "weak-rate");
  EXPECT_EQ(c.model.name, "gbm");
  EXPECT_EQ(c.n_ladder, (std::vector<int>{8, 16, 32, 64}));
  EXPECT_EQ(c.times, std::vector<double>{1.0});
  EXPECT_FALSE(c.monte_carlo());
  EXPECT_TRUE(c.deterministic());
}

TEST(Config, RejectsMalformedDocuments) {
  const std::string base = kGbmDet;
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_THROW(parse_config(with(base, R"("samples": 10)")), ConfigError);
  EXPECT_THROW(parse_config(with(base, R"("tolerances": {"wobble": 1})")), ConfigError);
  EXPECT_THROW(parse_config(with(base, R"("t": 1.5)")), ConfigError);
  EXPECT_THROW(parse_config(R"({"study": "weak-rate", "model": {"name": "ou"}, "function": {"name": "identity"},
    "n_ladder": [8, 4, 16], "x": 0})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"study": "nope", "model": {"name": "ou"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"study": "weak-rate", "model": {"name": "ou"}, "n_ladder": [4, 8], "x": 0})"),
               ConfigError);
  const char* degenerate = R"({"study": "moments", "model": {"name": "bounded_vol", "a0": 0, "b0": 0.5, "c0": 0},
    "n_ladder": [2, 4], "N": 100, "x": 0})";
  EXPECT_EQ(execute_config(degenerate, false).exit_code, kExitConfig);
}

TEST(Config, CatalogListsEveryStudy) {
  std::vector<std::string> names;
  for (const auto& [n, d] : study_catalog()) names.push_back(n);
  for (const char* s : {"weak-rate", "romberg", "bias-limit", "density", "tailbound", "greeks", "moments"})
    EXPECT_NE(std::find(names.begin(), names.end(), s), names.end()) << s;
}

TEST(ExitCodes, PassGateConfigNumerical) {
  EXPECT_EQ(execute_config(kGbmDet, false).exit_code, kExitPass);
  EXPECT_EQ(execute_config(with(kGbmDet, R"("tolerances": {"slope": -2.0})"), false).exit_code, kExitGate);
  EXPECT_EQ(execute_config(with(kGbmDet, R"("bogus": true)"), false).exit_code, kExitConfig);
  const char* blowup = R"({"study": "weak-rate", "model": {"name": "gbm", "mu": 1e300, "sigma": 0.2},
    "function": {"name": "identity"}, "n_ladder": [2, 4, 8, 16], "N": 1000, "mode": "monte-carlo", "x": 1.0})";
  EXPECT_EQ(execute_config(blowup, false).exit_code, kExitNumerical);
}

TEST(Csv, HeaderAndRows) {
  const std::string header = render_csv({});
  EXPECT_EQ(lines(header), 1);
  EXPECT_EQ(header, "study,model,f,t,x,n,N,estimate,truth,bias,ci_halfwidth,oracle\n");
  StudyRow r;
  r.study = "weak-rate";
  r.model = "ou";
  r.f = "power(2)";
  r.x = "1;2";
  r.oracle = "say \"hi\", twice";
  const std::string one = render_csv({r});
  EXPECT_EQ(lines(one), 2);
  EXPECT_NE(one.find("\"say \"\"hi\"\", twice\""), std::string::npos);
}

TEST(Studies, ConstantModelIsExactScheme) {
  const StudyOutcome o = execute_config(R"({"study": "weak-rate",
    "model": {"name": "constant", "drift": 0.3, "diffusion": 1.0}, "function": {"name": "power", "q": 2},
    "n_ladder": [8, 16, 32, 64], "N": 20000, "seed": 4, "x": 0.5})", false);
  ASSERT_EQ(o.exit_code, kExitPass) << o.message;
  EXPECT_EQ(o.report->status, "exact-scheme");
}

TEST(Studies, GbmDeterministicRatePasses) {
  const StudyReport r = run_study(parse_config(kGbmDet));
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.status, "pass");
  EXPECT_TRUE(r.failed_gates().empty());
  for (const auto& row : r.rows) EXPECT_TRUE(row.truth.has_value());
}

TEST(Studies, ReportsAreByteIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "weaklab_study_test";
  std::filesystem::create_directories(dir);
  const std::string cfg = std::string(R"({"study": "weak-rate", "model": {"name": "ou", "theta": 1.0, "sigma": 1.0},
    "function": {"name": "power", "q": 2}, "n_ladder": [4, 8, 16, 32], "N": 50000, "seed": 2, "x": 1.0,
    "output": {"csv": ")") + (dir / "a.csv").string() + R"(", "json": ")" + (dir / "a.json").string() + R"("}})";
  execute_config(cfg);
  const std::string csv1 = slurp(dir / "a.csv"), json1 = slurp(dir / "a.json");
  execute_config(cfg);
  EXPECT_FALSE(csv1.empty());
  EXPECT_EQ(csv1, slurp(dir / "a.csv"));
  EXPECT_EQ(json1, slurp(dir / "a.json"));
  std::filesystem::remove_all(dir);
}
