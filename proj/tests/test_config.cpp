#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stgc/config.hpp"

using namespace stgc;

TEST_CASE("defaults are valid and match the reported setup") {
  TrainConfig cfg;
  cfg.validate();
  CHECK(cfg.lr == doctest::Approx(0.001));
  CHECK(cfg.hidden_dim == 80);
  CHECK(cfg.layers == 2);
  CHECK(cfg.heads == 4);
  CHECK(cfg.batch_size == 15);
  CHECK(cfg.max_seq_len == 25);
  CHECK(cfg.max_epochs == 25);
  CHECK(cfg.aug.ratio[0] == doctest::Approx(0.5));
  CHECK(cfg.factor_mode == FactorMode::Factorized);
  CHECK_FALSE(cfg.include_positive_in_denominator);
}

TEST_CASE("unknown keys are rejected by name") {
  TrainConfig cfg;
  CHECK_THROWS_WITH_AS(cfg.set("lern_rate", "0.1"), doctest::Contains("lern_rate"),
                       std::invalid_argument);
}

TEST_CASE("out-of-domain values name the key") {
  TrainConfig cfg;
  cfg.set("contrastive.tau", "-1");
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("contrastive.tau"), std::invalid_argument);

  TrainConfig cfg2;
  cfg2.set("aug.node_drop", "1.5");
  CHECK_THROWS_WITH_AS(cfg2.validate(), doctest::Contains("aug.node_drop"), std::invalid_argument);

  TrainConfig cfg3;
  cfg3.set("hidden_dim", "81");  // not divisible by 4 heads
  CHECK_THROWS_WITH_AS(cfg3.validate(), doctest::Contains("hidden_dim"), std::invalid_argument);

  TrainConfig cfg4;
  CHECK_THROWS_WITH_AS(cfg4.set("factor_mode", "banana"), doctest::Contains("factor_mode"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(cfg4.set("lr", "fast"), doctest::Contains("lr"), std::invalid_argument);
}

TEST_CASE("kv round trip preserves every field") {
  TrainConfig cfg;
  cfg.seed = 17;
  cfg.hidden_dim = 16;
  cfg.heads = 4;
  cfg.lr = 0.00325;
  cfg.tau = 0.07;
  cfg.factor_mode = FactorMode::MeanReadout;
  cfg.z_cross_links = false;
  cfg.include_positive_in_denominator = true;
  cfg.aug.ratio = {0.1, 0.2, 0.3, 0.4};
  cfg.aug.enabled = {true, false, true, false};
  cfg.finetune_mode = FinetuneMode::SupervisedScratch;
  cfg.graph_scope = GraphScope::VideoLevel;
  cfg.probe_dropout = 0.25;

  TrainConfig back = TrainConfig::from_kv(cfg.to_kv());
  CHECK(back.seed == cfg.seed);
  CHECK(back.hidden_dim == cfg.hidden_dim);
  CHECK(back.lr == cfg.lr);
  CHECK(back.tau == cfg.tau);
  CHECK(back.factor_mode == cfg.factor_mode);
  CHECK(back.z_cross_links == cfg.z_cross_links);
  CHECK(back.include_positive_in_denominator == cfg.include_positive_in_denominator);
  CHECK(back.aug.ratio == cfg.aug.ratio);
  CHECK(back.aug.enabled == cfg.aug.enabled);
  CHECK(back.finetune_mode == cfg.finetune_mode);
  CHECK(back.graph_scope == cfg.graph_scope);
  CHECK(back.probe_dropout == cfg.probe_dropout);
  CHECK(back.to_kv() == cfg.to_kv());
}

TEST_CASE("config file parsing with comments") {
  std::string path = (std::filesystem::temp_directory_path() / "stgc_cfg_test.cfg").string();
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "hidden_dim = 16\n";
    out << "heads=4\n";
    out << "\n";
    out << "aug.enabled = node_drop, node_mask\n";
    out << "contrastive.tau = 0.25\n";
  }
  TrainConfig cfg = load_config_file(path);
  CHECK(cfg.hidden_dim == 16);
  CHECK(cfg.heads == 4);
  CHECK(cfg.tau == doctest::Approx(0.25));
  CHECK(cfg.aug.enabled == std::array<bool, 4>{true, false, true, false});
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_config_file("/nonexistent/stgc.cfg"), std::runtime_error);
}

TEST_CASE("bad config line reports its line number") {
  TrainConfig cfg;
  CHECK_THROWS_WITH_AS(apply_kv(cfg, "hidden_dim = 8\nnot a kv line\n"), doctest::Contains("line 2"),
                       std::invalid_argument);
}
