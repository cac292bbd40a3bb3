#include "dynalloc/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dynalloc/dirichlet.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/format.hpp"
#include "json.hpp"

namespace dynalloc::rl {

namespace {

std::vector<std::size_t> network_sizes(std::size_t in, const std::vector<std::size_t>& hidden,
                                       std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

// splitmix64 finalizer; derives independent sub-seeds from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("missing checkpoint: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void PpoConfig::validate() const {
  if (!(clip_eps > 0.0)) throw Error("clip_eps must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("gamma must lie in [0, 1]");
  if (!(lam >= 0.0 && lam <= 1.0)) throw Error("lambda must lie in [0, 1]");
  if (episodes_per_iteration == 0) throw Error("episodes_per_iteration must be positive");
  if (update_epochs == 0) throw Error("update_epochs must be positive");
  if (minibatch == 0) throw Error("minibatch must be positive");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw Error("learning rates must be positive");
  if (!(max_grad_norm > 0.0)) throw Error("max_grad_norm must be positive");
}

Advantages gae_advantages(const Vector& rewards, const Vector& values, double gamma, double lam,
                          double bootstrap_value, bool terminal) {
  if (rewards.size() != values.size()) throw Error("rewards and values have different lengths");
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(lam >= 0.0 && lam <= 1.0)) {
    throw Error("gamma and lambda must lie in [0, 1]");
  }
  const std::size_t T = rewards.size();
  Advantages out{Vector(T), Vector(T)};
  double next_value = terminal ? 0.0 : bootstrap_value;
  double running = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lam * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
    next_value = values[t];
  }
  return out;
}

Advantages gae_advantages(const Trajectory& traj, double gamma, double lam, double bootstrap_value) {
  Vector rewards;
  Vector values;
  for (const auto& s : traj.steps) {
    rewards.push_back(s.reward);
    values.push_back(s.value);
  }
  return gae_advantages(rewards, values, gamma, lam, bootstrap_value, traj.terminal);
}

void PpoBatch::append(const Trajectory& traj, const Advantages& adv) {
  if (adv.advantages.size() != traj.steps.size()) throw Error("advantages do not match trajectory");
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    obs.push_back(traj.steps[t].obs);
    actions.push_back(traj.steps[t].action);
    old_log_prob.push_back(traj.steps[t].log_prob);
    advantages.push_back(adv.advantages[t]);
    returns.push_back(adv.returns[t]);
  }
}

Vector normalize_advantages(const Vector& adv) {
  if (adv.size() < 2) return adv;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : adv) ss += (a - mean) * (a - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 1e-12)) return adv;
  Vector out(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) out[i] = (adv[i] - mean) / sd;
  return out;
}

PpoAgent::PpoAgent(policy::MlpParams a, policy::MlpParams c, const PpoConfig& cfg)
    : actor(std::move(a)),
      critic(std::move(c)),
      actor_opt(actor, policy::AdamConfig{.lr = cfg.actor_lr}),
      critic_opt(critic, policy::AdamConfig{.lr = cfg.critic_lr}) {}

double action_log_prob(const policy::MlpParams& actor, std::span<const double> obs,
                       std::span<const double> action) {
  const Vector logits = policy::forward_logits(actor, obs);
  return dirichlet_log_density(concentration_from_logits(logits), action);
}

double critic_value(const policy::MlpParams& critic, std::span<const double> obs) {
  return policy::forward_logits(critic, obs).front();
}

PpoLosses evaluate_losses(const policy::MlpParams& actor, const policy::MlpParams& critic,
                          const PpoBatch& batch, double clip_eps) {
  PpoLosses out;
  if (batch.size() == 0) throw Error("empty PPO batch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double ratio = std::exp(action_log_prob(actor, batch.obs[i], batch.actions[i]) -
                                  batch.old_log_prob[i]);
    const double a = batch.advantages[i];
    out.surrogate += std::min(ratio * a, std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * a);
    out.mean_ratio += ratio;
    const double diff = critic_value(critic, batch.obs[i]) - batch.returns[i];
    out.critic_mse += diff * diff;
  }
  const double n = static_cast<double>(batch.size());
  out.surrogate /= n;
  out.critic_mse /= n;
  out.mean_ratio /= n;
  return out;
}

PpoDiagnostics ppo_update(PpoAgent& agent, const PpoBatch& batch, const PpoConfig& cfg,
                          std::mt19937_64& rng) {
  cfg.validate();
  if (batch.size() == 0) throw Error("empty PPO batch");
  const Vector adv = normalize_advantages(batch.advantages);
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);

  PpoDiagnostics diag;
  for (std::size_t epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.minibatch) {
      const std::size_t end = std::min(order.size(), begin + cfg.minibatch);
      const double m = static_cast<double>(end - begin);
      policy::MlpParams actor_grad = agent.actor.zeros_like();
      policy::MlpParams critic_grad = agent.critic.zeros_like();
      double surrogate = 0.0;
      double mse = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = order[k];
        policy::ForwardCache cache;
        const Vector logits = policy::forward_logits(agent.actor, batch.obs[i], &cache);
        const Vector alpha = concentration_from_logits(logits);
        const double logp = dirichlet_log_density(alpha, batch.actions[i]);
        const double ratio = std::exp(logp - batch.old_log_prob[i]);
        if (!std::isfinite(ratio)) throw NonFiniteError("non-finite PPO probability ratio");
        const double a = adv[i];
        const double unclipped = ratio * a;
        const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a;
        surrogate += std::min(unclipped, clipped);
        const bool clipped_out = (a > 0.0 && ratio > 1.0 + cfg.clip_eps) ||
                                 (a < 0.0 && ratio < 1.0 - cfg.clip_eps);
        if (!clipped_out) {
          // d/dlogits of ratio * A / m, through the Dirichlet log-density.
          Vector g = dirichlet_log_density_grad(alpha, batch.actions[i]);
          const Vector slope = concentration_slope(logits);
          for (std::size_t j = 0; j < g.size(); ++j) g[j] *= slope[j] * ratio * a / m;
          policy::backward_logits(agent.actor, cache, g, actor_grad);
        }

        policy::ForwardCache vcache;
        const double v = policy::forward_logits(agent.critic, batch.obs[i], &vcache).front();
        const double diff = v - batch.returns[i];
        mse += diff * diff;
        const double gv = 2.0 * diff / m;
        policy::backward_logits(agent.critic, vcache, std::span<const double>(&gv, 1), critic_grad);
      }
      policy::clip_global_norm(actor_grad, cfg.max_grad_norm);
      policy::clip_global_norm(critic_grad, cfg.max_grad_norm);
      agent.actor_opt.step(agent.actor, actor_grad, policy::Direction::ascend);
      agent.critic_opt.step(agent.critic, critic_grad, policy::Direction::descend);
      diag.actor_loss += -surrogate / m;
      diag.critic_loss += mse / m;
      ++diag.minibatches;
    }
  }
  diag.actor_loss /= static_cast<double>(diag.minibatches);
  diag.critic_loss /= static_cast<double>(diag.minibatches);
  return diag;
}

WeightVector PpoPolicy::mean_action(std::span<const double> obs) const {
  const Vector logits = policy::forward_logits(actor, obs);
  return WeightVector::normalized(dirichlet_mean(concentration_from_logits(logits)));
}

PpoTrainResult train_ppo(const EnvData& data, const EnvConfig& env_cfg, const PpoConfig& cfg,
                         std::uint64_t seed) {
  env_cfg.validate();
  cfg.validate();
  if (data.rows() < env_cfg.lookback + env_cfg.episode_len) {
    throw Error("data too short for one episode");
  }
  const std::size_t N = data.assets();
  const bool hl = data.high_ratio && data.low_ratio;
  const std::size_t obs_dim = observation_size(N, env_cfg.lookback, hl);

  PpoTrainResult result;
  result.policy.standardizer = data.standardizer;
  result.policy.env = env_cfg;
  result.policy.high_low = hl;
  PpoAgent agent(policy::init_params(network_sizes(obs_dim, cfg.hidden, N), mix_seed(seed, 1)),
                 policy::init_params(network_sizes(obs_dim, cfg.hidden, 1), mix_seed(seed, 2)), cfg);
  // Start near the uniform Dirichlet mean with a small final layer.
  for (double& w : agent.actor.layers.back().weight.flat()) w *= 0.01;

  std::mt19937_64 rng(mix_seed(seed, 3));
  const std::size_t last_start = data.rows() - env_cfg.episode_len;
  std::uniform_int_distribution<std::size_t> start_dist(env_cfg.lookback, last_start);

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    PpoBatch batch;
    double reward_sum = 0.0;
    for (std::size_t ep = 0; ep < cfg.episodes_per_iteration; ++ep) {
      EnvState state = env_reset(data, env_cfg, start_dist(rng));
      Trajectory traj;
      double episode_reward = 0.0;
      while (!state.done) {
        Vector action;
        if (is_decision_step(state, env_cfg)) {
          Transition tr;
          tr.obs = observation(state, data);
          const Vector alpha = concentration_from_logits(policy::forward_logits(agent.actor, tr.obs));
          tr.action = dirichlet_sample(alpha, rng);
          tr.log_prob = dirichlet_log_density(alpha, tr.action);
          tr.value = critic_value(agent.critic, tr.obs);
          action = tr.action;
          traj.steps.push_back(std::move(tr));
        } else {
          action = state.prev_weights.values();
        }
        StepResult step = env_step(state, action, data, env_cfg);
        traj.steps.back().reward += step.reward;
        episode_reward += step.reward;
        state = std::move(step.next);
      }
      traj.terminal = true;
      batch.append(traj, gae_advantages(traj, cfg.gamma, cfg.lam, 0.0));
      reward_sum += episode_reward;
    }
    const PpoDiagnostics diag = ppo_update(agent, batch, cfg, rng);
    result.history.push_back({iter, reward_sum / static_cast<double>(cfg.episodes_per_iteration),
                              diag.actor_loss, diag.critic_loss});
  }
  result.policy.actor = std::move(agent.actor);
  result.policy.critic = std::move(agent.critic);
  return result;
}

Evaluation evaluate_policy(const PpoPolicy& policy, const EnvData& data,
                           std::optional<std::size_t> start_row) {
  EnvState state = env_reset(data, policy.env, start_row);
  Evaluation ev;
  ev.mean_weights.assign(data.assets(), 0.0);
  std::size_t steps = 0;
  while (!state.done) {
    const WeightVector action = is_decision_step(state, policy.env)
                                    ? policy.mean_action(observation(state, data))
                                    : state.prev_weights;
    for (std::size_t i = 0; i < action.size(); ++i) ev.mean_weights[i] += action[i];
    StepResult step = env_step(state, action.span(), data, policy.env);
    ev.total_reward += step.reward;
    state = std::move(step.next);
    ++steps;
  }
  for (double& w : ev.mean_weights) w /= static_cast<double>(steps);
  ev.final_wealth = state.wealth;
  return ev;
}

std::string history_tsv(const std::vector<PpoHistoryRow>& history) {
  std::ostringstream os;
  os << "iter\tmean_episode_reward\tactor_loss\tcritic_loss\n";
  for (const auto& h : history) {
    os << h.iteration << '\t' << format_double(h.mean_episode_reward) << '\t'
       << format_double(h.actor_loss) << '\t' << format_double(h.critic_loss) << '\n';
  }
  return os.str();
}

void save(const PpoPolicy& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  policy::save_checkpoint(p.actor, dir / "actor.json");
  policy::save_checkpoint(p.critic, dir / "critic.json");
  nlohmann::ordered_json j;
  j["format"] = "dynalloc.ppo_features";
  j["version"] = 1;
  j["feature_mean"] = p.standardizer.mean;
  j["feature_scale"] = p.standardizer.scale;
  j["high_low"] = p.high_low;
  j["mu_cost"] = p.env.mu_cost;
  j["lookback"] = p.env.lookback;
  j["episode_len"] = p.env.episode_len;
  j["initial_wealth"] = p.env.initial_wealth;
  j["action_interval"] = p.env.action_interval;
  std::ofstream out(dir / "ppo_features.json", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "ppo_features.json").string());
  out << j.dump(2) << '\n';
}

PpoPolicy load_ppo_policy(const std::filesystem::path& dir) {
  PpoPolicy p;
  p.actor = policy::load_checkpoint(dir / "actor.json");
  p.critic = policy::load_checkpoint(dir / "critic.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(dir / "ppo_features.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed ppo_features.json: ") + e.what());
  }
  if (j.value("format", "") != "dynalloc.ppo_features") throw Error("not a PPO feature file");
  p.standardizer.mean = j.at("feature_mean").get<Vector>();
  p.standardizer.scale = j.at("feature_scale").get<Vector>();
  p.high_low = j.at("high_low").get<bool>();
  p.env.mu_cost = j.at("mu_cost").get<double>();
  p.env.lookback = j.at("lookback").get<std::size_t>();
  p.env.episode_len = j.at("episode_len").get<std::size_t>();
  p.env.initial_wealth = j.at("initial_wealth").get<double>();
  p.env.action_interval = j.at("action_interval").get<std::size_t>();
  const std::size_t N = p.standardizer.mean.size();
  if (p.actor.input_size() != observation_size(N, p.env.lookback, p.high_low) ||
      p.actor.output_size() != N) {
    throw Error("actor checkpoint does not match the feature layout");
  }
  return p;
}

}  // namespace dynalloc::rl
