#pragma once

// PPO actor-critic over the rebalancing environment. The actor outputs
// logits mapped to Dirichlet concentrations; the critic regresses the
// return targets with a mean-squared-error loss.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dynalloc/optimizer.hpp"
#include "dynalloc/policy_net.hpp"
#include "dynalloc/rl_gym.hpp"

namespace dynalloc::rl {

struct PpoConfig {
  std::size_t iterations = 200;
  std::size_t episodes_per_iteration = 4;
  double clip_eps = 0.2;
  double gamma = 0.99;
  double lam = 0.95;
  std::size_t update_epochs = 4;
  std::size_t minibatch = 64;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double max_grad_norm = 0.5;
  std::vector<std::size_t> hidden = {64, 64};

  void validate() const;
};

struct Transition {
  Vector obs;
  Vector action;
  double reward = 0.0;
  double value = 0.0;
  double log_prob = 0.0;
};

struct Trajectory {
  std::vector<Transition> steps;
  bool terminal = true;
};

struct Advantages {
  Vector advantages;
  Vector returns;
};

/// GAE(gamma, lambda). `bootstrap_value` is used past the last step
/// unless the trajectory is terminal.
Advantages gae_advantages(const Vector& rewards, const Vector& values, double gamma, double lam,
                          double bootstrap_value, bool terminal);
Advantages gae_advantages(const Trajectory& traj, double gamma, double lam, double bootstrap_value);

struct PpoBatch {
  std::vector<Vector> obs;
  std::vector<Vector> actions;
  Vector old_log_prob;
  Vector advantages;
  Vector returns;

  std::size_t size() const noexcept { return obs.size(); }
  void append(const Trajectory& traj, const Advantages& adv);
};

/// Mean-zero, unit-std advantages (left unchanged for fewer than two
/// samples or zero spread).
Vector normalize_advantages(const Vector& adv);

struct PpoAgent {
  policy::MlpParams actor;
  policy::MlpParams critic;
  policy::Adam actor_opt;
  policy::Adam critic_opt;

  PpoAgent(policy::MlpParams actor, policy::MlpParams critic, const PpoConfig& cfg);
};

struct PpoLosses {
  double surrogate = 0.0;  // clipped objective, to be maximized
  double critic_mse = 0.0;
  double mean_ratio = 0.0;
};

/// Losses of the current parameters on `batch`, with advantages used as
/// given (callers normalize first when they want to).
PpoLosses evaluate_losses(const policy::MlpParams& actor, const policy::MlpParams& critic,
                          const PpoBatch& batch, double clip_eps);

/// Log-density of `action` under the actor at `obs`.
double action_log_prob(const policy::MlpParams& actor, std::span<const double> obs,
                       std::span<const double> action);
double critic_value(const policy::MlpParams& critic, std::span<const double> obs);

struct PpoDiagnostics {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  std::size_t minibatches = 0;
};

/// Clipped-surrogate and critic updates over shuffled minibatches.
PpoDiagnostics ppo_update(PpoAgent& agent, const PpoBatch& batch, const PpoConfig& cfg,
                          std::mt19937_64& rng);

struct PpoPolicy {
  policy::MlpParams actor;
  policy::MlpParams critic;
  Standardizer standardizer;
  EnvConfig env;
  bool high_low = false;

  /// Dirichlet mean at `obs`.
  WeightVector mean_action(std::span<const double> obs) const;
};

struct PpoHistoryRow {
  std::size_t iteration = 0;
  double mean_episode_reward = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
};

struct PpoTrainResult {
  PpoPolicy policy;
  std::vector<PpoHistoryRow> history;
};

PpoTrainResult train_ppo(const EnvData& data, const EnvConfig& env_cfg, const PpoConfig& cfg,
                         std::uint64_t seed);

/// Runs one episode with the deterministic (mean) policy from `start_row`.
struct Evaluation {
  double total_reward = 0.0;
  double final_wealth = 0.0;
  Vector mean_weights;
};
Evaluation evaluate_policy(const PpoPolicy& policy, const EnvData& data,
                           std::optional<std::size_t> start_row = std::nullopt);

/// `iter  mean_episode_reward  actor_loss  critic_loss` TSV.
std::string history_tsv(const std::vector<PpoHistoryRow>& history);

/// Writes actor.json and critic.json (network checkpoints) plus
/// ppo_features.json (standardizer and environment settings) into `dir`.
void save(const PpoPolicy& p, const std::filesystem::path& dir);
PpoPolicy load_ppo_policy(const std::filesystem::path& dir);

}  // namespace dynalloc::rl
