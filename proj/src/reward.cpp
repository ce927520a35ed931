#include "sidkit/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sidkit::reward {

double ranking_reward(int pre_rank, int re_rank, int n) {
  if (n < 1) throw std::invalid_argument("ranking_reward: candidate count must be positive");
  if (pre_rank < 1 || pre_rank > n)
    throw std::invalid_argument("ranking_reward: pre_rank out of range");
  if (re_rank < 1 || re_rank > n)
    throw std::invalid_argument("ranking_reward: re_rank out of range");
  return static_cast<double>(pre_rank - re_rank) / static_cast<double>(n);
}

double conditional_reward(double r_rank, int r_fmt, int pre_rank, double alpha) {
  if (r_fmt != 0 && r_fmt != 1)
    throw std::invalid_argument("conditional_reward: format reward must be 0 or 1");
  if (alpha < 0.0) throw std::invalid_argument("conditional_reward: alpha must be >= 0");
  if (r_rank > 0.0 || pre_rank == 1) return r_rank + alpha * static_cast<double>(r_fmt);
  return r_rank;
}

RewardRecord score_output(int pre_rank, int re_rank, int n, int r_fmt, double alpha) {
  RewardRecord record;
  record.pre_rank = pre_rank;
  record.re_rank = re_rank;
  record.n = n;
  record.r_rank = ranking_reward(pre_rank, re_rank, n);
  record.r_fmt = r_fmt;
  record.total = conditional_reward(record.r_rank, r_fmt, pre_rank, alpha);
  return record;
}

double sft_loss(const std::vector<double>& token_logprobs,
                const std::vector<Segment>& segments, double lambda_reasoning,
                double lambda_ranking) {
  if (token_logprobs.size() != segments.size())
    throw std::invalid_argument("sft_loss: logprob/segment length mismatch");
  if (lambda_reasoning < 0.0 || lambda_ranking < 0.0)
    throw std::invalid_argument("sft_loss: weights must be >= 0");
  double reasoning_sum = 0.0;
  double ranking_sum = 0.0;
  for (std::size_t i = 0; i < token_logprobs.size(); ++i) {
    switch (segments[i]) {
      case Segment::reasoning:
        reasoning_sum += token_logprobs[i];
        break;
      case Segment::ranking:
        ranking_sum += token_logprobs[i];
        break;
      case Segment::ignore:
        break;
    }
  }
  return -lambda_reasoning * reasoning_sum - lambda_ranking * ranking_sum;
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2)
    throw std::invalid_argument("group_advantages: need at least two outputs");
  const bool all_equal =
      std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); });
  if (all_equal)
    throw std::invalid_argument(
        "group_advantages: degenerate group, all rewards equal (filter it first)");

  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;  // population variance
  const double std_dev = std::sqrt(var);

  std::vector<double> advantages(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i)
    advantages[i] = (rewards[i] - mean) / std_dev;
  return advantages;
}

std::vector<std::size_t> dynamic_sampling_filter(
    const std::vector<std::vector<double>>& group_rewards) {
  std::vector<std::size_t> kept;
  for (std::size_t g = 0; g < group_rewards.size(); ++g) {
    const std::vector<double>& rewards = group_rewards[g];
    if (rewards.empty()) continue;
    const bool all_equal = std::all_of(rewards.begin(), rewards.end(),
                                       [&](double r) { return r == rewards.front(); });
    if (!all_equal) kept.push_back(g);
  }
  return kept;
}

double dapo_objective(const std::vector<RewardGroup>& groups, double eps_low, double eps_high) {
  if (eps_low <= 0.0 || eps_high <= 0.0)
    throw std::invalid_argument("dapo_objective: clip ranges must be positive");
  double total = 0.0;
  std::size_t token_count = 0;
  for (const RewardGroup& group : groups) {
    for (const OutputSample& output : group.outputs) {
      if (output.logprobs_old.size() != output.logprobs_new.size())
        throw std::invalid_argument("dapo_objective: logprob length mismatch");
      if (output.logprobs_old.empty())
        throw std::invalid_argument("dapo_objective: outputs must have at least one token");
      for (std::size_t t = 0; t < output.logprobs_old.size(); ++t) {
        const double ratio = std::exp(output.logprobs_new[t] - output.logprobs_old[t]);
        if (!(ratio > 0.0) || !std::isfinite(ratio))
          throw std::invalid_argument("dapo_objective: non-positive or non-finite ratio");
        const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
        total += std::min(ratio * output.advantage, clipped * output.advantage);
        ++token_count;
      }
    }
  }
  if (token_count == 0) throw std::invalid_argument("dapo_objective: no tokens");
  return total / static_cast<double>(token_count);
}

}  // namespace sidkit::reward
