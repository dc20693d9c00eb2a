#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "safeq/checkpoint.hpp"
#include "safeq/harness.hpp"
#include "safeq/metrics.hpp"
#include "safeq/oracle.hpp"
#include "safeq/svg.hpp"

namespace safeq {

namespace {

const std::vector<std::string> kSeriesColors = {
    "#1f6fb2", "#d1495b", "#66a182", "#edae49", "#6f5a7e", "#2e4057"};

// "label:file1,file2" -> (label, files)
std::pair<std::string, std::vector<std::string>> parse_series(
    const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw std::runtime_error("series must look like label:file1,file2");
  }
  std::pair<std::string, std::vector<std::string>> out;
  out.first = spec.substr(0, colon);
  std::stringstream files(spec.substr(colon + 1));
  std::string file;
  while (std::getline(files, file, ',')) {
    if (!file.empty()) out.second.push_back(file);
  }
  if (out.second.empty()) throw std::runtime_error("series has no files");
  return out;
}

double metrics_column(const MetricsRecord& r, const std::string& column) {
  if (column == "ep_return") return r.ep_return;
  if (column == "success") return static_cast<double>(r.success);
  if (column == "max_abs_angle_deg") return r.max_abs_angle_deg;
  if (column == "risk_severity_deg") return r.risk_severity_deg;
  if (column == "unsafe_episode") return static_cast<double>(r.unsafe_episode);
  if (column == "unsafe_visits") return static_cast<double>(r.unsafe_visits);
  if (column == "q_at_start") return r.q_at_start;
  if (column == "greedy_return") return r.greedy_return;
  throw std::runtime_error("unknown metrics column: " + column);
}

int cmd_train(const std::string& config_path, std::int64_t seed_offset,
              bool force) {
  ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
  cfg.apply_seed_overrides(seed_offset);
  const ExperimentResult result = run_experiment(cfg, force, &std::cout);
  std::cout << "wrote " << result.seeds.size() << " seed runs and "
            << result.aggregate_csv << '\n';
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, int episodes, double gamma,
             std::uint64_t seed) {
  const CheckpointMeta meta = peek_checkpoint(checkpoint_path);
  RngStream rng(seed, streams::kEval);
  oracle::RolloutStats stats;

  if (meta.kind == "qtable") {
    const QTable q = load_qtable_checkpoint(checkpoint_path);
    const auto greedy = [&q](int s, RngStream&) { return greedy_action(q.row(s)); };
    stats = oracle::aggregate(
        oracle::rollout_frozenlake(greedy, episodes, gamma, 100, rng));
  } else if (meta.kind == "policy-table") {
    const auto policy = load_policy_table(checkpoint_path);
    const auto act = [&policy](int s, RngStream& r) {
      return sample_discrete(policy.at(s), r);
    };
    stats = oracle::aggregate(
        oracle::rollout_frozenlake(act, episodes, gamma, 100, rng));
  } else if (meta.kind == "qnet") {
    const DenseNet net = load_net_checkpoint(checkpoint_path);
    if (net.input_dim() == 4) {  // discrete-action Q-network
      const auto greedy = [&net](const cartpole::State& s, RngStream&) {
        return static_cast<double>(
            greedy_action(net.forward(cartpole::normalize_state(s))));
      };
      stats = oracle::aggregate(
          oracle::rollout_cartpole(greedy, true, episodes, gamma, rng));
    } else {
      const auto greedy = [&net](const cartpole::State& s, RngStream&) {
        return continuous_greedy_action(net, s, 21);
      };
      stats = oracle::aggregate(
          oracle::rollout_cartpole(greedy, false, episodes, gamma, rng));
    }
  } else if (meta.kind == "policy-net") {
    const DenseNet net = load_net_checkpoint(checkpoint_path);
    const auto act = [&net](const cartpole::State& s, RngStream&) {
      return net.forward(cartpole::normalize_state(s))[0];
    };
    stats = oracle::aggregate(
        oracle::rollout_cartpole(act, false, episodes, gamma, rng));
  } else {
    std::cerr << "unknown checkpoint kind: " << meta.kind << '\n';
    return 1;
  }

  std::cout << "episodes " << episodes << "\n"
            << "mean_undiscounted_return " << format_float(stats.mean_undiscounted)
            << "\nmean_discounted_return " << format_float(stats.mean_discounted)
            << "\nsuccess_rate " << format_float(stats.success_rate)
            << "\nunsafe_episode_rate " << format_float(stats.unsafe_episode_rate)
            << "\nmean_max_angle_deg " << format_float(stats.mean_max_angle_deg)
            << "\nmean_risk_severity_deg "
            << format_float(stats.mean_risk_severity_deg) << '\n';
  return 0;
}

int cmd_plot(const std::vector<std::string>& series_specs,
             const std::string& kind, const std::string& out,
             const std::string& column, int bins) {
  if (kind == "curve") {
    std::vector<CurveSeries> series;
    for (std::size_t i = 0; i < series_specs.size(); ++i) {
      const auto [label, files] = parse_series(series_specs[i]);
      std::vector<std::vector<MetricsRecord>> per_seed;
      std::size_t rows = std::string::npos;
      for (const std::string& f : files) {
        per_seed.push_back(read_metrics_csv(f));
        rows = std::min(rows, per_seed.back().size());
      }
      CurveSeries cs;
      cs.label = label;
      cs.color = kSeriesColors[i % kSeriesColors.size()];
      for (std::size_t row = 0; row < rows; ++row) {
        double mean = 0.0;
        for (const auto& seed_rows : per_seed) {
          mean += metrics_column(seed_rows[row], column);
        }
        mean /= per_seed.size();
        double var = 0.0;
        for (const auto& seed_rows : per_seed) {
          const double d = metrics_column(seed_rows[row], column) - mean;
          var += d * d;
        }
        cs.x.push_back(per_seed.front()[row].episode);
        cs.mean.push_back(mean);
        cs.std.push_back(std::sqrt(var / per_seed.size()));
      }
      series.push_back(std::move(cs));
    }
    write_curve_svg(out, series, "episode", column);
  } else if (kind == "calibration") {
    std::vector<ScatterSeries> series;
    for (std::size_t i = 0; i < series_specs.size(); ++i) {
      const auto [label, files] = parse_series(series_specs[i]);
      ScatterSeries ss;
      ss.label = label;
      ss.color = kSeriesColors[i % kSeriesColors.size()];
      for (const std::string& f : files) {
        for (const auto& [q, ret] : calibration_points(read_eval_csv(f))) {
          ss.points.emplace_back(q, ret);
        }
      }
      series.push_back(std::move(ss));
    }
    write_calibration_svg(out, series, "max_a Q(s0,a)", "MC return");
  } else if (kind == "binned") {
    int metric = 0;
    if (column == "risk_severity_deg") metric = 1;
    else if (column == "unsafe_rate") metric = 2;
    else if (column != "max_angle_deg") {
      throw std::runtime_error(
          "binned plots support max_angle_deg, risk_severity_deg, unsafe_rate");
    }
    std::vector<BinnedSeries> series;
    for (std::size_t i = 0; i < series_specs.size(); ++i) {
      const auto [label, files] = parse_series(series_specs[i]);
      std::vector<BinRecord> records;
      for (const std::string& f : files) {
        for (const EvalSnapshot& s : read_eval_csv(f)) {
          records.push_back({s.undiscounted_return, s.max_angle_deg,
                             s.risk_severity_deg, s.unsafe_rate});
        }
      }
      BinnedSeries bs;
      bs.label = label;
      bs.color = kSeriesColors[i % kSeriesColors.size()];
      bs.metric = metric;
      bs.bins = bin_by_return(records, bins);
      series.push_back(std::move(bs));
    }
    write_binned_svg(out, series, "return", column);
  } else {
    std::cerr << "unknown plot kind: " << kind << '\n';
    return 1;
  }
  std::cout << "wrote " << out << '\n';
  return 0;
}

int cmd_make_dataset(const std::string& env, int episodes, int transitions,
                     const std::string& out, std::uint64_t seed) {
  RngStream rng(seed, streams::kBehavior);
  if (env == "frozenlake") {
    const auto dataset =
        collect_frozenlake_dataset(hc_frozenlake_policy(), transitions, 100, rng);
    dataset.save(out);
    std::cout << "wrote " << dataset.size() << " transitions to " << out << '\n';
  } else if (env == "cartpole-discrete") {
    const auto dataset = collect_cartpole_discrete_dataset(
        PidController{}, kHcCartSharpness, episodes, rng);
    dataset.save(out);
    std::cout << "wrote " << dataset.size() << " transitions to " << out << '\n';
  } else if (env == "cartpole-continuous") {
    const auto dataset =
        collect_cartpole_pid_dataset(PidController{}, 0.05, episodes, rng);
    dataset.save(out);
    std::cout << "wrote " << dataset.size() << " transitions to " << out << '\n';
  } else {
    std::cerr << "unknown dataset environment: " << env << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"safe-support Q-learning harness"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run a configured experiment");
  std::string config_path;
  std::int64_t seed_offset = 0;
  bool force = false;
  train->add_option("--config", config_path, "JSON config path")->required();
  train->add_option("--seed-offset", seed_offset, "offset added to every seed");
  train->add_flag("--force", force, "re-run seeds whose artifacts exist");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint_path;
  int eval_episodes = 20;
  double eval_gamma = 0.99;
  std::uint64_t eval_seed = 1;
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval->add_option("--gamma", eval_gamma, "discount for reported returns");
  eval->add_option("--seed", eval_seed, "evaluation seed");

  auto* oracle_check = app.add_subcommand("oracle-check", "run the oracle suite");

  auto* plot = app.add_subcommand("plot", "render CSVs to SVG");
  std::vector<std::string> series_specs;
  std::string plot_kind = "curve";
  std::string plot_out;
  std::string plot_column = "ep_return";
  int plot_bins = 10;
  plot->add_option("--series", series_specs,
                   "label:file1,file2 (metrics CSVs for curve, eval CSVs otherwise)")
      ->required();
  plot->add_option("--kind", plot_kind, "curve | calibration | binned");
  plot->add_option("--out", plot_out, "output SVG path")->required();
  plot->add_option("--column", plot_column, "metric column");
  plot->add_option("--bins", plot_bins, "bin count for binned plots");

  auto* make_dataset = app.add_subcommand("make-dataset", "collect a safe dataset");
  std::string ds_env = "cartpole-continuous";
  int ds_episodes = 200;
  int ds_transitions = 5000;
  std::string ds_out;
  std::uint64_t ds_seed = 1;
  make_dataset->add_option("--env", ds_env,
                           "frozenlake | cartpole-discrete | cartpole-continuous");
  make_dataset->add_option("--episodes", ds_episodes, "episodes to roll");
  make_dataset->add_option("--transitions", ds_transitions,
                           "transitions to collect (frozenlake)");
  make_dataset->add_option("--out", ds_out, "output path")->required();
  make_dataset->add_option("--seed", ds_seed, "collection seed");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(config_path, seed_offset, force);
    if (eval->parsed()) {
      return cmd_eval(checkpoint_path, eval_episodes, eval_gamma, eval_seed);
    }
    if (oracle_check->parsed()) {
      return run_oracle_suite(std::cout) == 0 ? 0 : 1;
    }
    if (plot->parsed()) {
      return cmd_plot(series_specs, plot_kind, plot_out, plot_column, plot_bins);
    }
    if (make_dataset->parsed()) {
      return cmd_make_dataset(ds_env, ds_episodes, ds_transitions, ds_out, ds_seed);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace safeq
