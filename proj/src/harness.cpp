#include "safeq/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "safeq/checkpoint.hpp"
#include "safeq/metrics.hpp"
#include "safeq/oracle.hpp"

namespace safeq {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

// Offset separating training-time evaluation substreams from the final
// evaluation passes.
constexpr std::uint64_t kFinalEvalOffset = 1000000;

template <typename T>
void read_key(const json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw std::runtime_error("config must be a JSON object");

  static const std::vector<std::string> known = {
      "case", "environment", "method", "lambda", "eta", "alpha", "alpha_q",
      "gamma", "target_sync_period", "mc_samples", "batch_size",
      "buffer_capacity", "episode_horizon", "min_buffer", "episodes",
      "offline_steps", "dataset_transitions", "dataset_episodes", "dither_std",
      "epsilon", "collect", "sigma_m", "sigma_b_floor", "sigma_smooth",
      "behavior_train_steps", "behavior_alpha", "sigma_1", "sigma_2",
      "p_states", "q_noises", "alpha_pi", "extract_steps", "state_samples",
      "hidden", "eval_period", "eval_episodes", "final_eval_episodes", "seeds",
      "out_dir"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw std::runtime_error("unknown config key: " + it.key());
    }
  }

  ExperimentConfig cfg;
  read_key(j, "case", cfg.case_id);
  read_key(j, "environment", cfg.environment);
  read_key(j, "method", cfg.method);
  read_key(j, "lambda", cfg.lambda);
  read_key(j, "eta", cfg.eta);
  read_key(j, "alpha", cfg.alpha);
  read_key(j, "alpha_q", cfg.alpha_q);
  read_key(j, "gamma", cfg.gamma);
  read_key(j, "target_sync_period", cfg.target_sync_period);
  read_key(j, "mc_samples", cfg.mc_samples);
  read_key(j, "batch_size", cfg.batch_size);
  read_key(j, "buffer_capacity", cfg.buffer_capacity);
  read_key(j, "episode_horizon", cfg.episode_horizon);
  read_key(j, "min_buffer", cfg.min_buffer);
  read_key(j, "episodes", cfg.episodes);
  read_key(j, "offline_steps", cfg.offline_steps);
  read_key(j, "dataset_transitions", cfg.dataset_transitions);
  read_key(j, "dataset_episodes", cfg.dataset_episodes);
  read_key(j, "dither_std", cfg.dither_std);
  read_key(j, "epsilon", cfg.epsilon);
  read_key(j, "collect", cfg.collect);
  read_key(j, "sigma_m", cfg.sigma_m);
  read_key(j, "sigma_b_floor", cfg.sigma_b_floor);
  read_key(j, "sigma_smooth", cfg.sigma_smooth);
  read_key(j, "behavior_train_steps", cfg.behavior_train_steps);
  read_key(j, "behavior_alpha", cfg.behavior_alpha);
  read_key(j, "sigma_1", cfg.sigma_1);
  read_key(j, "sigma_2", cfg.sigma_2);
  read_key(j, "p_states", cfg.p_states);
  read_key(j, "q_noises", cfg.q_noises);
  read_key(j, "alpha_pi", cfg.alpha_pi);
  read_key(j, "extract_steps", cfg.extract_steps);
  read_key(j, "state_samples", cfg.state_samples);
  read_key(j, "hidden", cfg.hidden);
  read_key(j, "eval_period", cfg.eval_period);
  read_key(j, "eval_episodes", cfg.eval_episodes);
  read_key(j, "final_eval_episodes", cfg.final_eval_episodes);
  read_key(j, "seeds", cfg.seeds);
  read_key(j, "out_dir", cfg.out_dir);
  cfg.validate();
  return cfg;
}

void ExperimentConfig::apply_seed_overrides(std::int64_t seed_offset) {
  if (const char* env = std::getenv("SAFEQ_MASTER_SEED")) {
    const std::uint64_t base = std::stoull(env);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      seeds[i] = base + i;
    }
  }
  for (auto& s : seeds) s += static_cast<std::uint64_t>(seed_offset);
}

void ExperimentConfig::validate() const {
  if (case_id < 1 || case_id > 6) throw std::runtime_error("case must be 1..6");
  if (environment != "frozenlake" && environment != "cartpole") {
    throw std::runtime_error("environment must be frozenlake or cartpole");
  }
  if (environment == "frozenlake" && case_id > 2) {
    throw std::runtime_error("frozenlake supports discrete cases 1 and 2 only");
  }
  if (method != "safe" && method != "standard" && method != "soft") {
    throw std::runtime_error("method must be safe, standard, or soft");
  }
  if (method != "safe" && case_id > 2) {
    throw std::runtime_error("baseline methods apply to discrete cases only");
  }
  if (collect != "behavior" && collect != "eps_greedy") {
    throw std::runtime_error("collect must be behavior or eps_greedy");
  }
  if (state_samples != "gaussian" && state_samples != "buffer") {
    throw std::runtime_error("state_samples must be gaussian or buffer");
  }
  if (seeds.empty()) throw std::runtime_error("need at least one seed");
  if (episodes < 1 || offline_steps < 1) {
    throw std::runtime_error("episode/step budgets must be positive");
  }
  if (eval_period < 1 || eval_episodes < 1 || final_eval_episodes < 1) {
    throw std::runtime_error("evaluation settings must be positive");
  }
  if (dataset_transitions < 1 || dataset_episodes < 1) {
    throw std::runtime_error("dataset sizes must be positive");
  }
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw std::runtime_error("epsilon must be in [0,1]");
  }
  hyper().validate();
  if (is_continuous_case()) extraction().validate();
}

SafeQHyperparams ExperimentConfig::hyper() const {
  SafeQHyperparams h;
  h.lambda = lambda;
  h.eta = eta;
  h.alpha = alpha;
  h.gamma = gamma;
  h.target_sync_period = target_sync_period;
  h.mc_samples = mc_samples;
  h.batch_size = batch_size;
  h.buffer_capacity = buffer_capacity;
  h.episode_horizon = episode_horizon;
  return h;
}

ExtractionHyperparams ExperimentConfig::extraction() const {
  ExtractionHyperparams e;
  e.lambda = lambda;
  e.sigma_1 = sigma_1;
  e.sigma_2 = sigma_2;
  e.p_states = p_states;
  e.q_noises = q_noises;
  e.alpha_pi = alpha_pi;
  e.steps = extract_steps;
  e.hidden = hidden;
  return e;
}

// ---------------------------------------------------------------------------
// Per-seed execution
// ---------------------------------------------------------------------------

namespace {

TargetKind target_kind(const ExperimentConfig& cfg) {
  if (cfg.method == "standard") return TargetKind::kStandard;
  if (cfg.method == "soft") return TargetKind::kSoft;
  return TargetKind::kSafe;
}

std::string seed_file(const ExperimentConfig& cfg, std::uint64_t seed,
                      const std::string& name, const std::string& ext) {
  std::ostringstream ss;
  ss << cfg.out_dir << '/' << name << "_seed" << seed << ext;
  return ss.str();
}

BehaviorTrainConfig behavior_train_config(const ExperimentConfig& cfg) {
  BehaviorTrainConfig btc;
  btc.steps = cfg.behavior_train_steps;
  btc.batch_size = cfg.batch_size;
  btc.alpha = cfg.behavior_alpha;
  btc.sigma_m = cfg.sigma_m;
  btc.sigma_floor = cfg.sigma_b_floor;
  btc.hidden = cfg.hidden;
  return btc;
}

// Paired final evaluation: per-episode rollout records plus the greedy
// value probe at each episode's initial state. Deterministic policies draw
// nothing during steps, so both passes see the same initial states.
struct FinalEval {
  std::vector<oracle::EpisodeRecord> episodes;
  Vec q_at_init;
  double calibration_median_rel_error = 0.0;
};

double median(Vec values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

FinalEval final_eval_cartpole(
    const std::function<double(const cartpole::State&, RngStream&)>& policy,
    bool discrete, const std::function<double(const cartpole::State&)>& value_at,
    int episodes, double gamma, const RngStream& rng) {
  FinalEval fe;
  RngStream rollout_rng = rng;
  fe.episodes = oracle::rollout_cartpole(policy, discrete, episodes, gamma, rollout_rng);
  RngStream probe_rng = rng;
  CartPoleEnv env;
  Vec rel_errors;
  for (int ep = 0; ep < episodes; ++ep) {
    const double q0 = value_at(env.reset(probe_rng));
    fe.q_at_init.push_back(q0);
    const double ret = fe.episodes[ep].discounted;
    rel_errors.push_back(std::abs(q0 - ret) / std::max(1.0, ret));
  }
  fe.calibration_median_rel_error = median(rel_errors);
  return fe;
}

FinalEval final_eval_frozenlake(const QTable& q, int episodes, double gamma,
                                int horizon, const RngStream& rng) {
  FinalEval fe;
  RngStream rollout_rng = rng;
  const auto greedy = [&q](int s, RngStream&) { return greedy_action(q.row(s)); };
  fe.episodes = oracle::rollout_frozenlake(greedy, episodes, gamma, horizon, rollout_rng);
  Vec rel_errors;
  const double q0 = q.row(frozenlake::kStart)[greedy_action(q.row(frozenlake::kStart))];
  for (int ep = 0; ep < episodes; ++ep) {
    fe.q_at_init.push_back(q0);
    const double ret = fe.episodes[ep].discounted;
    rel_errors.push_back(std::abs(q0 - ret) / std::max(1.0, ret));
  }
  fe.calibration_median_rel_error = median(rel_errors);
  return fe;
}

json stats_to_json(const oracle::RolloutStats& stats) {
  return json{{"mean_undiscounted_return", stats.mean_undiscounted},
              {"mean_discounted_return", stats.mean_discounted},
              {"success_rate", stats.success_rate},
              {"unsafe_episode_rate", stats.unsafe_episode_rate},
              {"mean_max_angle_deg", stats.mean_max_angle_deg},
              {"mean_risk_severity_deg", stats.mean_risk_severity_deg}};
}

void write_summary(const std::string& path, const json& summary) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << summary.dump(2) << '\n';
}

struct SeedOutcome {
  std::vector<MetricsRecord> metrics;
  std::vector<EvalSnapshot> evals;
  json summary;
};

SeedOutcome run_frozenlake_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                SeedArtifacts& artifacts) {
  FrozenLakeRunConfig rc;
  rc.target = target_kind(cfg);
  rc.hyper = cfg.hyper();
  rc.episodes = cfg.episodes;
  rc.offline_steps = cfg.offline_steps;
  rc.eval_period = cfg.eval_period;
  rc.eval_episodes = cfg.eval_episodes;
  rc.eval_horizon = cfg.episode_horizon;
  rc.collect_eps_greedy = cfg.collect == "eps_greedy";
  rc.epsilon = cfg.epsilon;
  rc.seed = seed;

  FrozenLakeRunResult result;
  TabularBehaviorPolicy behavior;
  if (cfg.case_id == 1) {
    behavior = hc_frozenlake_policy();
    result = train_frozenlake_online(rc);
  } else {
    const TabularBehaviorPolicy collector = hc_frozenlake_policy();
    RngStream collect_rng(seed, streams::kBehavior);
    const TabularSafeDataset dataset = collect_frozenlake_dataset(
        collector, cfg.dataset_transitions, cfg.episode_horizon, collect_rng);
    artifacts.dataset_file = seed_file(cfg, seed, "dataset", ".txt");
    dataset.save(artifacts.dataset_file);
    behavior = estimate_tabular_behavior(dataset.transitions(),
                                         frozenlake::kNumStates,
                                         frozenlake::kNumActions);
    result = train_frozenlake_offline(dataset, behavior, rc);
  }

  const CheckpointMeta meta{"qtable", "frozenlake", cfg.case_id};
  save_qtable_checkpoint(artifacts.q_checkpoint, meta, result.q);

  const SmoothedDiscretePolicy smoothed(behavior, cfg.eta);
  const auto extracted = discrete_optimal_policy(result.q, smoothed, cfg.lambda);
  artifacts.policy_checkpoint = seed_file(cfg, seed, "policy", ".ckpt");
  save_policy_table(artifacts.policy_checkpoint, meta, extracted);

  const FinalEval fe = final_eval_frozenlake(
      result.q, cfg.final_eval_episodes, cfg.gamma, cfg.episode_horizon,
      RngStream(seed, streams::kEval).substream(kFinalEvalOffset));
  const oracle::RolloutStats final_stats = oracle::aggregate(fe.episodes);

  RngStream behavior_eval_rng =
      RngStream(seed, streams::kEval).substream(kFinalEvalOffset + 1);
  const auto behavior_records = oracle::rollout_frozenlake(
      [&behavior](int s, RngStream& r) { return behavior.sample(s, r); },
      cfg.final_eval_episodes, cfg.gamma, cfg.episode_horizon, behavior_eval_rng);

  SeedOutcome outcome;
  outcome.metrics = result.metrics;
  outcome.evals = result.evals;
  outcome.summary = json{
      {"seed", seed},
      {"case", cfg.case_id},
      {"environment", cfg.environment},
      {"method", cfg.method},
      {"final", stats_to_json(final_stats)},
      {"behavior", stats_to_json(oracle::aggregate(behavior_records))},
      {"calibration_median_rel_error", fe.calibration_median_rel_error},
      {"training",
       json{{"total_unsafe_visits", result.total_unsafe_visits},
            {"episodes_to_success", result.episodes_to_success}}}};
  return outcome;
}

SeedOutcome run_cartpole_discrete_seed(const ExperimentConfig& cfg,
                                       std::uint64_t seed,
                                       SeedArtifacts& artifacts) {
  DqnRunConfig rc;
  rc.target = target_kind(cfg);
  rc.hyper = cfg.hyper();
  rc.alpha_q = cfg.alpha_q;
  rc.episodes = cfg.episodes;
  rc.offline_steps = cfg.offline_steps;
  rc.min_buffer = cfg.min_buffer;
  rc.eval_period = cfg.eval_period;
  rc.eval_episodes = cfg.eval_episodes;
  rc.hidden = cfg.hidden;
  rc.seed = seed;

  const PidController pid{};
  const NetCheckpointHook hook = [&](int episode, const DenseNet& net) {
    std::ostringstream name;
    name << "ckpt_ep" << episode;
    save_net_checkpoint(seed_file(cfg, seed, name.str(), ".ckpt"),
                        {"qnet", "cartpole", cfg.case_id}, net);
  };

  DqnRunResult result;
  CategoricalPolicy ds_policy(DenseNet({1, 2}, {Activation::kIdentity}));
  DiscreteCartBehavior behavior;
  if (cfg.case_id == 1) {
    behavior = hc_cartpole_behavior(pid, kHcCartSharpness, cfg.eta);
    result = train_cartpole_dqn_online(behavior, rc, hook);
  } else {
    RngStream collect_rng(seed, streams::kBehavior);
    const CartSafeDataset dataset = collect_cartpole_discrete_dataset(
        pid, kHcCartSharpness, cfg.dataset_episodes, collect_rng);
    artifacts.dataset_file = seed_file(cfg, seed, "dataset", ".txt");
    dataset.save(artifacts.dataset_file);

    std::vector<Vec> states;
    std::vector<int> actions;
    states.reserve(dataset.size());
    actions.reserve(dataset.size());
    for (const CartTransition& t : dataset.transitions()) {
      states.push_back(cartpole::normalize_state(t.state));
      actions.push_back(static_cast<int>(t.action));
    }
    RngStream behavior_rng = RngStream(seed, streams::kBehavior).substream(1);
    ds_policy = train_categorical_behavior(states, actions,
                                           behavior_train_config(cfg),
                                           behavior_rng);
    behavior = ds_cartpole_behavior(ds_policy, cfg.eta);
    result = train_cartpole_dqn_offline(dataset, behavior, rc, hook);
  }

  save_net_checkpoint(artifacts.q_checkpoint, {"qnet", "cartpole", cfg.case_id},
                      result.q_net);

  const DenseNet& net = result.q_net;
  const auto greedy = [&net](const cartpole::State& s, RngStream&) {
    return static_cast<double>(greedy_action(net.forward(cartpole::normalize_state(s))));
  };
  const auto value_at = [&net](const cartpole::State& s) {
    const Vec row = net.forward(cartpole::normalize_state(s));
    return row[greedy_action(row)];
  };
  const FinalEval fe = final_eval_cartpole(
      greedy, true, value_at, cfg.final_eval_episodes, cfg.gamma,
      RngStream(seed, streams::kEval).substream(kFinalEvalOffset));

  RngStream behavior_eval_rng =
      RngStream(seed, streams::kEval).substream(kFinalEvalOffset + 1);
  const auto behavior_records = oracle::rollout_cartpole(
      [&behavior](const cartpole::State& s, RngStream& r) {
        return static_cast<double>(behavior.sample(s, r));
      },
      true, cfg.final_eval_episodes, cfg.gamma, behavior_eval_rng);

  SeedOutcome outcome;
  outcome.metrics = result.metrics;
  outcome.evals = result.evals;
  outcome.summary = json{
      {"seed", seed},
      {"case", cfg.case_id},
      {"environment", cfg.environment},
      {"method", cfg.method},
      {"final", stats_to_json(oracle::aggregate(fe.episodes))},
      {"behavior", stats_to_json(oracle::aggregate(behavior_records))},
      {"calibration_median_rel_error", fe.calibration_median_rel_error},
      {"training",
       json{{"total_unsafe_visits", result.total_unsafe_visits}}}};
  return outcome;
}

SeedOutcome run_cartpole_continuous_seed(const ExperimentConfig& cfg,
                                         std::uint64_t seed,
                                         SeedArtifacts& artifacts) {
  ContinuousRunConfig rc;
  rc.hyper = cfg.hyper();
  rc.alpha_q = cfg.alpha_q;
  rc.episodes = cfg.episodes;
  rc.offline_steps = cfg.offline_steps;
  rc.min_buffer = cfg.min_buffer;
  rc.eval_period = cfg.eval_period;
  rc.eval_episodes = cfg.eval_episodes;
  rc.hidden = cfg.hidden;
  rc.seed = seed;

  const PidController pid{};
  const bool mean_noise_case = cfg.case_id == 3 || cfg.case_id == 5;
  const bool offline = cfg.case_id == 5 || cfg.case_id == 6;

  // Behavior data: fresh controller rollouts for the hand-crafted cases;
  // a persisted dataset for the dataset-based (offline) cases.
  RngStream collect_rng(seed, streams::kBehavior);
  const CartSafeDataset dataset = collect_cartpole_pid_dataset(
      pid, cfg.dither_std, cfg.dataset_episodes, collect_rng);
  if (offline) {
    artifacts.dataset_file = seed_file(cfg, seed, "dataset", ".txt");
    dataset.save(artifacts.dataset_file);
  }
  std::vector<Vec> states, actions;
  cart_dataset_training_pairs(dataset, states, actions);

  RngStream behavior_rng = RngStream(seed, streams::kBehavior).substream(1);
  std::optional<MeanNoisePolicy> mn;
  std::optional<DistributionalPolicy> dist;
  ContinuousCartBehavior behavior;
  behavior.sigma_smooth = cfg.sigma_smooth;
  if (mean_noise_case) {
    mn = train_mean_noise_behavior(states, actions, behavior_train_config(cfg),
                                   behavior_rng);
    behavior.mean_noise = &*mn;
  } else {
    dist = train_distributional_behavior(states, actions,
                                         behavior_train_config(cfg), behavior_rng);
    behavior.distributional = &*dist;
  }

  const NetCheckpointHook hook = [&](int episode, const DenseNet& net) {
    std::ostringstream name;
    name << "ckpt_ep" << episode;
    save_net_checkpoint(seed_file(cfg, seed, name.str(), ".ckpt"),
                        {"qnet", "cartpole", cfg.case_id}, net);
  };

  const ContinuousRunResult result =
      offline ? train_cartpole_continuous_offline(dataset, behavior, rc, hook)
              : train_cartpole_continuous_online(behavior, rc, hook);
  save_net_checkpoint(artifacts.q_checkpoint, {"qnet", "cartpole", cfg.case_id},
                      result.q_net);

  // Stage 2: surrogate policy extraction against the frozen Q-network.
  ExtractionHyperparams ex = cfg.extraction();
  RngStream extract_rng(seed, streams::kExtract);
  std::vector<Vec> pool;
  if (cfg.state_samples == "buffer") pool = states;
  const ExtractionResult extraction = extract_continuous_policy(
      result.q_net, behavior.mean_noise, behavior.distributional, ex,
      extract_rng, cfg.state_samples == "buffer" ? &pool : nullptr);
  artifacts.policy_checkpoint = seed_file(cfg, seed, "policy", ".ckpt");
  save_net_checkpoint(artifacts.policy_checkpoint,
                      {"policy-net", "cartpole", cfg.case_id},
                      extraction.policy_net);

  const DenseNet& policy_net = extraction.policy_net;
  const auto extracted_policy = [&policy_net](const cartpole::State& s, RngStream&) {
    return policy_net.forward(cartpole::normalize_state(s))[0];
  };
  const DenseNet& q_net = result.q_net;
  const int grid = rc.greedy_grid;
  const auto value_at = [&q_net, grid](const cartpole::State& s) {
    const double a = continuous_greedy_action(q_net, s, grid);
    Vec input = cartpole::normalize_state(s);
    input.push_back(a);
    return q_net.forward(input)[0];
  };
  const FinalEval fe = final_eval_cartpole(
      extracted_policy, false, value_at, cfg.final_eval_episodes, cfg.gamma,
      RngStream(seed, streams::kEval).substream(kFinalEvalOffset));

  RngStream behavior_eval_rng =
      RngStream(seed, streams::kEval).substream(kFinalEvalOffset + 1);
  const auto behavior_records = oracle::rollout_cartpole(
      [&behavior](const cartpole::State& s, RngStream& r) {
        return behavior.sample_execution(s, r);
      },
      false, cfg.final_eval_episodes, cfg.gamma, behavior_eval_rng);

  // Calibration pairs the greedy policy with its own value estimate.
  const auto greedy_policy = [&q_net, grid](const cartpole::State& s, RngStream&) {
    return continuous_greedy_action(q_net, s, grid);
  };
  const FinalEval greedy_fe = final_eval_cartpole(
      greedy_policy, false, value_at, cfg.final_eval_episodes, cfg.gamma,
      RngStream(seed, streams::kEval).substream(kFinalEvalOffset + 2));

  double mean_extraction_loss = 0.0;
  if (!extraction.loss_trace.empty()) {
    for (double l : extraction.loss_trace) mean_extraction_loss += l;
    mean_extraction_loss /= static_cast<double>(extraction.loss_trace.size());
  }

  SeedOutcome outcome;
  outcome.metrics = result.metrics;
  outcome.evals = result.evals;
  outcome.summary = json{
      {"seed", seed},
      {"case", cfg.case_id},
      {"environment", cfg.environment},
      {"method", cfg.method},
      {"final", stats_to_json(oracle::aggregate(fe.episodes))},
      {"behavior", stats_to_json(oracle::aggregate(behavior_records))},
      {"greedy", stats_to_json(oracle::aggregate(greedy_fe.episodes))},
      {"calibration_median_rel_error", greedy_fe.calibration_median_rel_error},
      {"extraction_mean_loss", mean_extraction_loss},
      {"training",
       json{{"total_unsafe_visits", result.total_unsafe_visits}}}};
  return outcome;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, bool force,
                                std::ostream* log) {
  config.validate();
  fs::create_directories(config.out_dir);

  ExperimentResult result;
  std::vector<std::vector<MetricsRecord>> per_seed_metrics;

  for (const std::uint64_t seed : config.seeds) {
    SeedArtifacts artifacts;
    artifacts.seed = seed;
    artifacts.metrics_csv = seed_file(config, seed, "metrics", ".csv");
    artifacts.eval_csv = seed_file(config, seed, "eval", ".csv");
    artifacts.q_checkpoint = seed_file(config, seed, "q", ".ckpt");
    artifacts.summary_json = seed_file(config, seed, "summary", ".json");

    const bool complete = fs::exists(artifacts.metrics_csv) &&
                          fs::exists(artifacts.q_checkpoint) &&
                          fs::exists(artifacts.summary_json);
    if (complete && !force) {
      if (log) *log << "seed " << seed << ": artifacts exist, skipping\n";
      per_seed_metrics.push_back(read_metrics_csv(artifacts.metrics_csv));
      result.seeds.push_back(artifacts);
      continue;
    }

    if (log) *log << "seed " << seed << ": running case " << config.case_id
                  << " (" << config.environment << ", " << config.method << ")\n";

    SeedOutcome outcome;
    if (config.environment == "frozenlake") {
      outcome = run_frozenlake_seed(config, seed, artifacts);
    } else if (!config.is_continuous_case()) {
      outcome = run_cartpole_discrete_seed(config, seed, artifacts);
    } else {
      outcome = run_cartpole_continuous_seed(config, seed, artifacts);
    }

    write_metrics_csv(artifacts.metrics_csv, outcome.metrics);
    write_eval_csv(artifacts.eval_csv, outcome.evals);
    write_summary(artifacts.summary_json, outcome.summary);
    per_seed_metrics.push_back(std::move(outcome.metrics));
    result.seeds.push_back(artifacts);
  }

  result.aggregate_csv = config.out_dir + "/aggregate.csv";
  write_aggregate_csv(result.aggregate_csv, per_seed_metrics);
  return result;
}

}  // namespace safeq
