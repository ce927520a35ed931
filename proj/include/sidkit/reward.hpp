#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sidkit::reward {

// (pre_rank - re_rank) / n: positive when the target item moved up.
double ranking_reward(int pre_rank, int re_rank, int n);

// The format bonus is granted only when the target was promoted or already
// sat at rank 1, so preserving the input order cannot farm it.
double conditional_reward(double r_rank, int r_fmt, int pre_rank, double alpha);

// One scored output: both rank positions, the promotion reward, the format
// flag and the gated total.
struct RewardRecord {
  int pre_rank = 0;
  int re_rank = 0;
  int n = 0;
  double r_rank = 0.0;
  int r_fmt = 0;
  double total = 0.0;
};

RewardRecord score_output(int pre_rank, int re_rank, int n, int r_fmt, double alpha);

enum class Segment : std::uint8_t { reasoning, ranking, ignore };

// Decoupled language-model loss over one assistant message:
// -lambda_reasoning * sum(reasoning logprobs) - lambda_ranking * sum(ranking logprobs).
double sft_loss(const std::vector<double>& token_logprobs,
                const std::vector<Segment>& segments, double lambda_reasoning,
                double lambda_ranking);

// Group-normalized advantages with the population standard deviation.
// Throws when every reward in the group is identical (zero signal).
std::vector<double> group_advantages(const std::vector<double>& rewards);

struct RewardConfig {
  double alpha = 0.1;      // format-reward weight
  double eps_low = 0.2;    // lower clip range
  double eps_high = 0.28;  // upper clip range
  int group_size = 8;
};

struct OutputSample {
  std::vector<double> logprobs_old;
  std::vector<double> logprobs_new;
  double reward = 0.0;
  double advantage = 0.0;
};

struct RewardGroup {
  std::vector<OutputSample> outputs;
};

// Keeps the groups that still carry signal: any group whose rewards are all
// equal is dropped.
std::vector<std::size_t> dynamic_sampling_filter(
    const std::vector<std::vector<double>>& group_rewards);

// Token-mean of min(ratio * A, clip(ratio, 1-eps_low, 1+eps_high) * A) over
// every output of every group, with ratio = exp(logprob_new - logprob_old).
double dapo_objective(const std::vector<RewardGroup>& groups, double eps_low, double eps_high);

}  // namespace sidkit::reward
