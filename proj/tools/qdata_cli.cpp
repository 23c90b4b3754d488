// qdata: run scenarios, train models, summarize metrics.

#include "qdata/qdata.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

struct CsvSummary
{
  double mean_f = 0;
  double mean_packet_in_rate = 0;
  long scheme_changes = 0;
  std::size_t rows = 0;
};

std::vector<std::string> split_csv(const std::string& line)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');)
    out.push_back(cell);
  return out;
}

CsvSummary summarize(const std::string& path, qdata::Millis period)
{
  std::ifstream in(path);
  if (!in) throw qdata::ConfigError("csv", "cannot open " + path);
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw qdata::ConfigError("csv", path + " lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cf = col("f"), cp = col("packet_in"), cs = col("scheme_changes");
  CsvSummary s;
  double f = 0, pin = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw qdata::ConfigError("csv", "ragged row in " + path);
    f += std::stod(cells[cf]);
    pin += std::stod(cells[cp]);
    s.scheme_changes += std::stol(cells[cs]);
    ++s.rows;
  }
  if (s.rows) {
    s.mean_f = f / s.rows;
    s.mean_packet_in_rate = pin / s.rows / (static_cast<double>(period) / 1000.0);
  }
  return s;
}

qdata::ScenarioConfig load(const std::string& path, const std::optional<std::uint64_t>& seed)
{
  auto cfg = qdata::load_config(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

std::string with_suffix(const std::string& path, const std::string& suffix)
{
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Adaptive flow-matching simulator"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "override the scenario seed");

  std::string config, out, csv;
  std::vector<std::string> csvs;
  bool write_directives = false;

  auto* run = app.add_subcommand("run", "run a scenario and write its metrics CSV");
  run->add_option("config", config)->required();
  run->add_option("-o,--out", out, "metrics CSV (default: stdout)");
  run->add_flag("--directives", write_directives, "also write <out>_directives.csv and <out>_detection.csv");
  run->add_option("--seed", seed, "override the scenario seed");
  std::string strategy;
  run->add_option("--strategy", strategy, "override the strategy: mmos | fms | data | qdata");

  int episodes = 400, steps = 50;
  double epsilon = 0.8;
  std::string curve;
  auto* train_q = app.add_subcommand("train-q", "train a Q-table on randomized mixtures");
  train_q->add_option("config", config)->required();
  train_q->add_option("--out", out)->required();
  train_q->add_option("--episodes", episodes)->check(CLI::PositiveNumber);
  train_q->add_option("--steps", steps)->check(CLI::PositiveNumber);
  train_q->add_option("--epsilon", epsilon)->check(CLI::Range(0.0, 1.0));
  train_q->add_option("--curve", curve, "training curve CSV");
  train_q->add_option("--seed", seed, "override the training seed");

  int runs = 40, horizon = 2, epochs = 200;
  double c = 1.0;
  auto* train_svm = app.add_subcommand("train-svm", "train the degradation predictor");
  train_svm->add_option("config", config)->required();
  train_svm->add_option("--out", out)->required();
  train_svm->add_option("--runs", runs)->check(CLI::PositiveNumber);
  train_svm->add_option("--horizon", horizon)->check(CLI::NonNegativeNumber);
  train_svm->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
  train_svm->add_option("-C", c)->check(CLI::PositiveNumber);
  train_svm->add_option("--seed", seed, "override the training seed");

  auto* fit = app.add_subcommand("fitness", "weighted detection score of a detection CSV");
  fit->add_option("csv", csv)->required();

  double period_s = 10.0;
  auto* report = app.add_subcommand("report", "one summary row per metrics CSV");
  report->add_option("csv", csvs)->required();
  report->add_option("--period", period_s, "observation period in seconds")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      auto cfg = load(config, seed);
      if (!strategy.empty()) cfg.strategy = qdata::detail::parse_strategy(strategy);
      const auto res = qdata::run_scenario(cfg);
      if (out.empty()) {
        qdata::write_metrics_csv(std::cout, res.rows);
      } else {
        const auto dir = std::filesystem::path(out).parent_path();
        std::error_code ec;
        if (!dir.empty()) std::filesystem::create_directories(dir, ec);
        std::ofstream os(out);
        if (!os) throw qdata::ConfigError("out", "cannot write " + out);
        qdata::write_metrics_csv(os, res.rows);
      }
      if (write_directives && !out.empty()) {
        std::ofstream d(with_suffix(out, "_directives.csv"));
        qdata::write_directive_csv(d, res.directives);
        std::ofstream det(with_suffix(out, "_detection.csv"));
        qdata::write_detection_csv(det, res.detection, res.detector_threshold);
      }
      std::cerr << "strategy " << qdata::strategy_name(cfg.strategy) << ", seed " << cfg.seed << ", alpha "
                << cfg.alpha << ", gamma " << cfg.gamma << '\n';
      std::cerr << "fitness " << std::fixed << std::setprecision(6) << qdata::fitness(res.detection) << " (Dr "
                << res.detection.dr << ", Ac " << res.detection.ac << ", Fa " << res.detection.fa << ")\n";
    } else if (*train_q) {
      const auto cfg = load(config, std::nullopt);
      std::optional<qdata::SvmModel> svm;
      if (cfg.svm_model_path) svm = qdata::SvmModel::load_file(*cfg.svm_model_path);
      qdata::TrainOptions opt{episodes, steps, epsilon, seed.value_or(cfg.seed)};
      const auto res = qdata::train_q(cfg, svm, opt);
      res.q.save_file(out);
      if (!curve.empty()) {
        std::ofstream os(curve);
        qdata::write_training_curve(os, res.episode_reward);
      }
    } else if (*train_svm) {
      const auto cfg = load(config, std::nullopt);
      qdata::SvmOptions opt;
      opt.c = c;
      opt.epochs = epochs;
      opt.seed = seed.value_or(cfg.seed);
      qdata::train_svm_from_mixtures(cfg, runs, horizon, opt).save_file(out);
    } else if (*fit) {
      std::ifstream in(csv);
      if (!in) throw qdata::ConfigError("csv", "cannot open " + csv);
      std::string header, line;
      std::getline(in, header);
      std::getline(in, line);
      const auto cells = split_csv(line);
      if (cells.size() < 3) throw qdata::ConfigError("csv", "expected Dr,Ac,Fa columns");
      qdata::DetectionOutcome d{std::stod(cells[0]), std::stod(cells[1]), std::stod(cells[2])};
      std::cout << std::fixed << std::setprecision(6) << qdata::fitness(d) << '\n';
    } else if (*report) {
      const auto period = static_cast<qdata::Millis>(period_s * 1000.0);
      std::cout << "csv,mean_f,mean_packet_in_per_s,scheme_changes\n" << std::fixed << std::setprecision(3);
      for (const auto& path : csvs) {
        const auto s = summarize(path, period);
        std::cout << path << ',' << s.mean_f << ',' << s.mean_packet_in_rate << ',' << s.scheme_changes << '\n';
      }
    }
  } catch (const qdata::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const qdata::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
