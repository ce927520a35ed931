#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sidkit/corpus.hpp"
#include "sidkit/episode.hpp"
#include "sidkit/outparse.hpp"

namespace sidkit::eval {

struct RankedList {
  std::vector<std::string> items;  // no duplicates
};

// 1 when the target sits in the first K entries, 0 otherwise. Lists shorter
// than K are evaluated on what is there.
double recall_at_k(const RankedList& ranked, const std::string& target, std::size_t k);

// 1/log2(j+1) for a target at 1-based position j <= K, 0 otherwise. The ideal
// gain under leave-one-out is 1, so no further normalization is needed.
double ndcg_at_k(const RankedList& ranked, const std::string& target, std::size_t k);

// Next-item baseline: transition counts from the most recent history items,
// backed off order-by-order and finally to global popularity. Determinism
// comes from (count desc, popularity desc, item id asc) ordering.
class MarkovRetriever {
 public:
  MarkovRetriever(const corpus::InteractionLog& train, std::size_t order = 1);

  RankedList predict(const std::vector<std::string>& history, std::size_t k) const;

  const std::map<std::string, std::map<std::string, std::size_t>>& transitions() const {
    return transitions_;
  }

 private:
  std::size_t order_;
  // context key (joined last-j items) -> successor counts, per context length
  std::vector<std::map<std::string, std::map<std::string, std::size_t>>> by_order_;
  std::map<std::string, std::map<std::string, std::size_t>> transitions_;  // order-1 view
  std::vector<std::pair<std::string, std::size_t>> popularity_;            // sorted ranking
  std::map<std::string, std::size_t> popularity_lookup_;
};

struct MethodRow {
  std::string method;
  std::map<std::size_t, double> recall;  // keyed by K
  std::map<std::size_t, double> ndcg;
};

struct EvalReport {
  std::vector<MethodRow> rows;
  std::size_t episode_count = 0;
  std::size_t parse_failures = 0;  // fell back to the pre-ranked order
  std::vector<std::size_t> truncated_ks;  // Ks longer than the candidate lists
};

// Scores the pre-ranked lists and the re-ranked lists side by side.
// outputs[i] re-ranks episodes[i]; a missing ranking keeps the pre-ranked
// order and is counted as a parse failure.
EvalReport evaluate_rerank(const std::vector<RerankEpisode>& episodes,
                           const std::vector<outparse::ParsedOutput>& outputs,
                           const std::vector<std::size_t>& ks);

std::string report_table(const EvalReport& report);
std::string report_csv(const EvalReport& report);

}  // namespace sidkit::eval
