#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "crossq/experiment/aggregate.hpp"
#include "crossq/experiment/config.hpp"
#include "crossq/experiment/plot.hpp"
#include "crossq/experiment/runner.hpp"
#include "crossq/experiment/selfcheck.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace crossq::experiment;
using testing_helpers::scratch_dir;

namespace {

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c;
  c.agent = {{"critic_hidden", {16, 16}}, {"actor_hidden", {8}}, {"batch_size", 16}, {"warmup", 50},
             {"buffer_capacity", 1000}};
  c.env_overrides = {{"horizon", 50}};
  c.total_env_steps = 400;
  c.eval_every = 100;
  c.eval_episodes = 1;
  c.snapshot_every = 100;
  c.seeds = {0, 1};
  c.output_dir = out.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t count_scalar(const fs::path& metrics, const std::string& scalar) {
  std::size_t n = 0;
  for (const auto& r : read_metrics(metrics)) n += r.scalar == scalar;
  return n;
}

LoadedRun synthetic_run(const std::string& series, const std::string& task, std::vector<double> returns,
                        std::int64_t step = 100) {
  LoadedRun run;
  run.series = series;
  run.task = task;
  run.return_lower = -2.0;
  run.return_upper = 0.0;
  for (std::size_t s = 0; s < returns.size(); ++s) {
    run.seeds[s] = {{"id", s, step, "eval_return", returns[s]}};
  }
  return run;
}

}  // namespace

TEST(ExperimentConfig, VariantPresets) {
  const auto sac = variant_preset(Variant::sac);
  EXPECT_FALSE(sac.use_batch_norm);
  EXPECT_TRUE(sac.use_target_net);
  EXPECT_FALSE(sac.use_wn);
  const auto cq = variant_preset(Variant::crossq);
  EXPECT_TRUE(cq.use_batch_norm);
  EXPECT_FALSE(cq.use_target_net);
  EXPECT_FALSE(cq.use_wn);
  EXPECT_EQ(cq.weight_decay_unconstrained, 0.0);
  EXPECT_EQ(cq.policy_delay, 3);
  const auto wn = variant_preset(Variant::crossq_wn);
  EXPECT_TRUE(wn.use_wn);
  EXPECT_EQ(wn.weight_decay_unconstrained, 1e-2);
  EXPECT_EQ(parse_variant("crossq_wn"), Variant::crossq_wn);
  EXPECT_THROW(parse_variant("td3"), crossq::ConfigError);
}

TEST(ExperimentConfig, RejectsBadSettings) {
  const nlohmann::json base = {{"env", "pendulum"}};
  EXPECT_NO_THROW(config_from_json(base));
  EXPECT_THROW(config_from_json({{"env", "pendulum"}, {"utd", 5}}), crossq::ConfigError);
  EXPECT_THROW(config_from_json({{"env", "atari"}}), crossq::ConfigError);
  EXPECT_THROW(config_from_json({{"agent", {{"utd", 0}}}}), crossq::ConfigError);
  EXPECT_THROW(config_from_json({{"agent", {{"lr", 1e-3}}}}), crossq::ConfigError);
  EXPECT_THROW(config_from_json({{"eval_every", 0}}), crossq::ConfigError);
  EXPECT_THROW(config_from_json({{"total_env_steps", "many"}}), crossq::ConfigError);
  EXPECT_THROW(config_from_json({{"seeds", nlohmann::json::array()}}), crossq::ConfigError);
  EXPECT_THROW(config_from_json({{"env_overrides", {{"gravity", "high"}}}}), crossq::ConfigError);
  EXPECT_THROW(config_from_json({{"agent", {{"action_repeat", 2}}}, {"env_overrides", {{"action_repeat", 3}}}}),
               crossq::ConfigError);
  EXPECT_THROW(config_from_json({{"enable_resets", true}, {"agent", {{"reset_steps", {10}}}}}),
               crossq::ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), crossq::ConfigError);
}

TEST(ExperimentConfig, SeedsAndResets) {
  const auto c = config_from_json({{"seeds", 3}, {"enable_resets", true}, {"total_env_steps", 250000}});
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(c.resolved_agent().reset_steps, (std::vector<std::int64_t>{80000, 160000, 240000}));
  EXPECT_EQ(c.series(), "crossq_wn_utd1");
  EXPECT_EQ(config_from_json({{"agent", {{"utd", 5}}}}).series(), "crossq_wn_utd5");
  EXPECT_EQ(config_from_json({{"label", "mine"}}).series(), "mine");
}

TEST(Runner, VacuousRun) {
  auto cfg = tiny(scratch_dir());
  cfg.total_env_steps = 0;
  const auto summary = run(cfg);
  EXPECT_FALSE(summary.any_fault());
  EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / "manifest.json"));
  for (auto seed : cfg.seeds) {
    EXPECT_EQ(slurp(seed_dir(cfg.output_dir, seed) / "metrics.csv"), std::string(kMetricsHeader) + "\n");
  }
}

TEST(Runner, EvaluationSchedule) {
  auto cfg = tiny(scratch_dir());
  cfg.seeds = {3};
  run(cfg);
  const auto metrics = seed_dir(cfg.output_dir, 3) / "metrics.csv";
  EXPECT_EQ(count_scalar(metrics, "eval_return"), 4u);
  EXPECT_EQ(count_scalar(metrics, "critic_norm_sum"), 4u);
  EXPECT_EQ(count_scalar(metrics, "train_return"), 8u);
  cfg.eval_at_start = true;
  run(cfg);
  EXPECT_EQ(count_scalar(metrics, "eval_return"), 5u);
}

TEST(Runner, ByteIdenticalMetrics) {
  const auto root = scratch_dir();
  auto a = tiny(root / "a");
  auto b = tiny(root / "b");
  run(a, 2);
  run(b, 1);
  for (auto seed : a.seeds) {
    const auto ma = slurp(seed_dir(a.output_dir, seed) / "metrics.csv");
    EXPECT_GT(ma.size(), 1000u);
    EXPECT_EQ(ma, slurp(seed_dir(b.output_dir, seed) / "metrics.csv"));
  }
  EXPECT_NE(slurp(seed_dir(a.output_dir, 0) / "metrics.csv"), slurp(seed_dir(a.output_dir, 1) / "metrics.csv"));
}

TEST(Runner, ManifestRelaunchesTheRun) {
  const auto root = scratch_dir();
  auto cfg = tiny(root / "first");
  cfg.seeds = {4};
  run(cfg);
  std::ifstream in(root / "first" / "manifest.json");
  nlohmann::json manifest;
  in >> manifest;
  EXPECT_EQ(manifest.at("seeds").at(0).at("status"), "completed");
  EXPECT_EQ(manifest.at("resolved").at("agent").at("critic_hidden"), nlohmann::json({16, 16}));
  EXPECT_EQ(manifest.at("resolved").at("agent").at("lr_critic"), 3e-4);
  auto again = load_config((root / "first" / "manifest.json").string());
  EXPECT_EQ(nlohmann::json(again), nlohmann::json(cfg));
  again.output_dir = (root / "second").string();
  run(again);
  EXPECT_EQ(slurp(seed_dir(root / "first", 4) / "metrics.csv"), slurp(seed_dir(root / "second", 4) / "metrics.csv"));
  EXPECT_TRUE(fs::exists(seed_dir(root / "second", 4) / "checkpoint.cbor"));
}

TEST(Runner, WeightNormDiagnosticsAreLogged) {
  auto cfg = tiny(scratch_dir());
  cfg.seeds = {0};
  run(cfg);
  double worst = -1.0;
  for (const auto& r : read_metrics(seed_dir(cfg.output_dir, 0) / "metrics.csv")) {
    if (r.scalar == "max_projection_deviation") worst = std::max(worst, r.value);
    if (r.scalar == "constrained_norm_sum") {
      EXPECT_NEAR(r.value, 8.0, 1e-5);
    }
  }
  EXPECT_GE(worst, 0.0);
  EXPECT_LT(worst, 1e-6);
}

TEST(Aggregate, ConstantScores) {
  const auto rows = aggregate({synthetic_run("s", "pendulum", {-1, -1, -1})}, 100);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].iqm, 0.5);
  EXPECT_EQ(rows[0].ci_low, 0.5);
  EXPECT_EQ(rows[0].ci_high, 0.5);
}

TEST(Aggregate, BestReturnNormalizesToOne) {
  const auto rows = aggregate({synthetic_run("s", "pendulum", {0, 0})}, std::nullopt);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].iqm, 1.0);
}

TEST(Aggregate, AgreesWithDirectStatistics) {
  const std::vector<double> a{-1.9, -0.3, -1.2, -0.8, -0.1};
  const std::vector<double> b{-0.5, -1.5, -0.25};
  const auto rows = aggregate({synthetic_run("s", "pendulum", a), synthetic_run("s", "reacher", b)}, 100, 7);
  crossq::stats::RunMatrix m;
  m.tasks = {"pendulum", "reacher"};
  m.scores.resize(2);
  for (double v : a) m.scores[0].push_back((v + 2.0) / 2.0);
  for (double v : b) m.scores[1].push_back((v + 2.0) / 2.0);
  const auto ci = crossq::stats::stratified_bootstrap_ci(m, 0.9, 2000, 7);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].iqm, crossq::stats::point_estimate(m));
  EXPECT_EQ(rows[0].ci_low, ci.low);
  EXPECT_EQ(rows[0].ci_high, ci.high);
}

TEST(Aggregate, MissingCellsAreListed) {
  auto run = synthetic_run("s", "pendulum", {-1, -1, -1});
  run.seeds[1].clear();
  run.seeds[2][0].env_step = 200;
  try {
    aggregate({run}, 100);
    FAIL() << "expected MissingData";
  } catch (const crossq::MissingData& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(pendulum, 1)"), std::string::npos);
    EXPECT_NE(msg.find("(pendulum, 2)"), std::string::npos);
    EXPECT_EQ(msg.find("(pendulum, 0)"), std::string::npos);
  }
  EXPECT_THROW(aggregate({synthetic_run("s", "pendulum", {-1})}, 100), crossq::ConfigError);
  EXPECT_THROW(aggregate({synthetic_run("s", "pendulum", {-1, -1}), synthetic_run("s", "pendulum", {-1, -1})}, 100),
               crossq::ConfigError);
  EXPECT_THROW(load_run(scratch_dir()), crossq::MissingData);
}

TEST(Aggregate, UtdSweepGivesOneSeriesPerRatio) {
  const auto root = scratch_dir();
  std::vector<fs::path> dirs;
  for (int utd : {1, 2}) {
    auto cfg = tiny(root / ("utd" + std::to_string(utd)));
    cfg.agent["utd"] = utd;
    cfg.total_env_steps = 200;
    run(cfg);
    dirs.push_back(cfg.output_dir);
  }
  const auto rows = aggregate_dirs(dirs, std::nullopt);
  std::set<std::string> series;
  std::set<std::string> figures;
  for (const auto& r : rows) {
    series.insert(r.series);
    figures.insert(r.figure);
  }
  EXPECT_EQ(series, (std::set<std::string>{"crossq_wn_utd1", "crossq_wn_utd2"}));
  EXPECT_EQ(figures, (std::set<std::string>{"return", "weight_norm", "elr", "dead_fraction"}));

  const auto csv = root / "aggregate.csv";
  write_aggregate(rows, csv);
  EXPECT_EQ(read_aggregate(csv), rows);
  EXPECT_THROW(aggregate_dirs(dirs, 150), crossq::MissingData);
}

TEST(Plot, EmptyAggregateWritesNothing) {
  const auto dir = scratch_dir() / "plots";
  EXPECT_TRUE(emit_plot_data({}, dir).empty());
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Plot, CsvRoundTripsTheAggregate) {
  const auto dir = scratch_dir();
  const std::vector<AggregateRow> rows = {{"return", "a", 100, 0.25, 0.125, 0.375},
                                          {"return", "a", 200, 0.1 + 0.2, 0.2, 1.0 / 3.0},
                                          {"return", "b", 100, 0.5, 0.5, 0.5},
                                          {"elr", "a", 100, 7.5e-5, 7.5e-5, 7.5e-5}};
  const auto files = emit_plot_data(rows, dir);
  EXPECT_EQ(files.size(), 4u);
  std::ifstream in(dir / "return.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kPlotHeader);
  std::vector<AggregateRow> back;
  while (std::getline(in, line)) {
    const auto f = split_csv_line(line);
    back.push_back({"return", std::string(f[0]), parse_integer<std::int64_t>(f[1]), parse_number(f[2]),
                    parse_number(f[3]), parse_number(f[4])});
  }
  EXPECT_EQ(back, std::vector<AggregateRow>(rows.begin(), rows.begin() + 3));
  EXPECT_NE(slurp(dir / "return.svg").find("<svg"), std::string::npos);
}

TEST(Metrics, StepsMustNotGoBackwards) {
  const auto path = scratch_dir() / "m.csv";
  MetricsWriter w(path, "run", 0);
  w.write(5, "x", 1.0);
  w.write(5, "y", 2.0);
  EXPECT_THROW(w.write(4, "x", 1.0), crossq::UsageError);
  w.flush();
  const auto recs = read_metrics(path);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].scalar, "y");
  EXPECT_EQ(parse_number(format_number(0.1 + 0.2)), 0.1 + 0.2);
  EXPECT_THROW(parse_number("1.5x"), crossq::MissingData);
}

TEST(Selfcheck, SmallSuitePasses) {
  SelfcheckOptions opt;
  opt.seeds = 3;
  const auto r = run_selfcheck(opt);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.fixtures, 6);
}
