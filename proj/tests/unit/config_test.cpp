#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "ofspc/config.hpp"
#include "ofspc/errors.hpp"

namespace ofspc {
namespace {

using nlohmann::json;

json scalar_doc() {
  return json{{"A", {{1.0}}},       {"B", {{1.0}}},       {"C", {{1.0}}}, {"Sigma_x0", {{1.0}}},
              {"Sigma_w", {{0.5}}}, {"Sigma_v", {{0.2}}}, {"Q", {{2.0}}}, {"Q_N", {{3.0}}},
              {"R", {{0.1}}},       {"N", 3},             {"u_max", 1.5}};
}

TEST(ConfigTest, ParsesMinimalDocumentWithDefaults) {
  const auto cfg = parse_config(scalar_doc());
  const auto& s = cfg.sim.spec;
  EXPECT_EQ(s.N, 3);
  EXPECT_EQ(s.Sigma_w(0, 0), 0.5);
  ASSERT_EQ(s.Q.size(), 3u);
  ASSERT_EQ(s.R.size(), 3u);
  for (const auto& Q : s.Q) EXPECT_EQ(Q(0, 0), 2.0);
  EXPECT_EQ(s.Q_N(0, 0), 3.0);
  EXPECT_EQ(s.u_max, 1.5);
  EXPECT_EQ(cfg.sim.u_max_sweep, std::vector<double>{1.5});
  EXPECT_EQ(cfg.sim.N_r, 0);
  EXPECT_EQ(cfg.sim.r, 1.0);
  EXPECT_EQ(cfg.sim.epsilon, 0.1);
  EXPECT_EQ(cfg.sim.zeta_fraction, 0.9);
  EXPECT_EQ(cfg.sim.psi.kind, PsiSpec::Kind::Sigmoid);
  EXPECT_EQ(cfg.sim.steps, 90);
  EXPECT_EQ(cfg.sim.paths, 100);
  EXPECT_EQ(cfg.moment_seed, cfg.sim.seed);
}

TEST(ConfigTest, PerStageWeights) {
  auto doc = scalar_doc();
  doc["Q"] = json::array({json{{1.0}}, json{{2.0}}, json{{3.0}}});
  const auto cfg = parse_config(doc);
  EXPECT_EQ(cfg.sim.spec.Q[2](0, 0), 3.0);
  doc["Q"] = json::array({json{{1.0}}, json{{2.0}}});
  EXPECT_THROW(parse_config(doc), ConfigError);
}

TEST(ConfigTest, SweepListAndOptionalFields) {
  auto doc = scalar_doc();
  doc["u_max"] = {0.1, 2.0};
  doc["N_r"] = nullptr;
  doc["psi"] = "saturation";
  doc["psi_max"] = 0.5;
  doc["seed"] = 99;
  doc["moment_seed"] = 4;
  const auto cfg = parse_config(doc);
  EXPECT_EQ(cfg.sim.u_max_sweep, (std::vector<double>{0.1, 2.0}));
  EXPECT_EQ(cfg.sim.N_r, 0);
  EXPECT_EQ(cfg.sim.psi.kind, PsiSpec::Kind::Saturation);
  EXPECT_EQ(cfg.sim.psi.psi_max, 0.5);
  EXPECT_EQ(cfg.sim.seed, 99u);
  EXPECT_EQ(cfg.moment_seed, 4u);
}

TEST(ConfigTest, MissingFieldNamed) {
  auto doc = scalar_doc();
  doc.erase("Sigma_w");
  try {
    parse_config(doc);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("Sigma_w"), std::string::npos);
  }
}

TEST(ConfigTest, MalformedInputs) {
  auto doc = scalar_doc();
  doc["A"] = {{1.0, 2.0}, {3.0}};
  EXPECT_THROW(parse_config(doc), ConfigError);
  doc = scalar_doc();
  doc["psi"] = "tanh";
  EXPECT_THROW(parse_config(doc), ConfigError);
  doc = scalar_doc();
  doc["N"] = "five";
  EXPECT_THROW(parse_config(doc), ConfigError);
  doc = scalar_doc();
  doc["B"] = {{1.0}, {2.0}};
  EXPECT_THROW(parse_config(doc), ConfigError);
  EXPECT_THROW(parse_config_text("{\"A\": [[1]"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/ofspc.json"), ConfigError);
}

TEST(ConfigTest, ExampleConfigFile) {
  const auto cfg = load_config(std::filesystem::path(OFSPC_SOURCE_DIR) / "configs" / "example.json");
  const auto ref = testing::example_spec();
  EXPECT_EQ(cfg.sim.spec.A, ref.A);
  EXPECT_EQ(cfg.sim.spec.B, ref.B);
  EXPECT_EQ(cfg.sim.spec.N, 5);
  EXPECT_EQ(cfg.sim.u_max_sweep.size(), 9u);
  EXPECT_EQ(cfg.sim.paths, 100);
  EXPECT_EQ(cfg.sim.steps, 90);
}

TEST(ConfigTest, ManifestRecordsResolvedValues) {
  const auto cfg = parse_config(scalar_doc());
  const auto m = make_manifest("validate", cfg, nullptr);
  const json j = m.to_json();
  EXPECT_EQ(j.at("command"), "validate");
  EXPECT_EQ(j.at("N"), 3);
  EXPECT_EQ(j.at("artifact_version"), version_string());
  EXPECT_EQ(j.at("zeta_fraction"), 0.9);
  EXPECT_TRUE(j.contains("ms_statistic"));
}

}  // namespace
}  // namespace ofspc
