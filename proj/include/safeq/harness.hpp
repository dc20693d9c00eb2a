#ifndef SAFEQ_HARNESS_HPP
#define SAFEQ_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "safeq/extract.hpp"
#include "safeq/trainers.hpp"

namespace safeq {

// Flat experiment configuration, loaded from a flat key-value JSON document;
// unknown keys are rejected. Defaults below are the committed values for
// the shipped case studies; per-case config files override them.
struct ExperimentConfig {
  int case_id = 1;                   // Table of variants: 1..6
  std::string environment = "frozenlake";  // frozenlake | cartpole
  std::string method = "safe";             // safe | standard | soft

  // Q-learning hyperparameters
  double lambda = 1.0;
  double eta = 0.01;
  double alpha = 0.1;     // tabular step size
  double alpha_q = 1e-3;  // deep Q step size
  double gamma = 0.95;
  int target_sync_period = 200;
  int mc_samples = 16;
  int batch_size = 64;
  int buffer_capacity = 50000;
  int episode_horizon = 100;
  int min_buffer = 1000;

  // budgets
  int episodes = 3000;
  int offline_steps = 50000;

  // behavior construction
  int dataset_transitions = 5000;  // FrozenLake offline dataset size
  int dataset_episodes = 200;      // cart-pole dataset / imitation rollouts
  double dither_std = 0.05;
  double epsilon = 0.1;
  std::string collect = "behavior";  // behavior | eps_greedy
  double sigma_m = 0.1;
  double sigma_b_floor = 0.02;
  double sigma_smooth = 0.1;
  int behavior_train_steps = 4000;
  double behavior_alpha = 1e-3;

  // policy extraction
  double sigma_1 = 0.5;
  double sigma_2 = 0.1;
  int p_states = 64;
  int q_noises = 4;
  double alpha_pi = 3e-4;
  int extract_steps = 5000;
  std::string state_samples = "gaussian";  // gaussian | buffer

  // network size
  int hidden = 64;

  // evaluation
  int eval_period = 100;
  int eval_episodes = 1;
  int final_eval_episodes = 20;

  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out_dir = "out";

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);

  // Applies SAFEQ_MASTER_SEED (replaces the seed list by consecutive seeds
  // starting at the override) and an optional CLI seed offset.
  void apply_seed_overrides(std::int64_t seed_offset);

  // Case/environment/action-space compatibility plus range checks.
  void validate() const;

  SafeQHyperparams hyper() const;
  ExtractionHyperparams extraction() const;
  bool is_offline_case() const { return case_id == 2 || case_id == 5 || case_id == 6; }
  bool is_continuous_case() const { return case_id >= 3; }
};

// Artifacts of one seed of one experiment.
struct SeedArtifacts {
  std::uint64_t seed = 0;
  std::string metrics_csv;
  std::string eval_csv;
  std::string q_checkpoint;
  std::string policy_checkpoint;  // extracted policy (table or net)
  std::string summary_json;
  std::string dataset_file;  // offline cases
};

struct ExperimentResult {
  std::vector<SeedArtifacts> seeds;
  std::string aggregate_csv;
};

// Runs every configured seed (skipping seeds whose artifacts already exist
// unless force is set), writes per-seed CSVs, checkpoints, final-evaluation
// summaries, and the cross-seed aggregate CSV.
ExperimentResult run_experiment(const ExperimentConfig& config, bool force = false,
                                std::ostream* log = nullptr);

// Independent-verification suites behind the oracle-check subcommand and
// the first acceptance criteria; returns the number of failed checks.
int run_oracle_suite(std::ostream& out);

// CLI entry: train | eval | oracle-check | plot | make-dataset.
int run_cli(int argc, const char* const* argv);

}  // namespace safeq

#endif  // SAFEQ_HARNESS_HPP
