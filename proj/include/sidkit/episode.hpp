#pragma once

#include <string>
#include <vector>

namespace sidkit {

// One re-ranking instance: what the user did, what the retriever proposed
// (already ordered), and where the true next item sits in that order.
struct RerankEpisode {
  std::string user_id;
  std::vector<std::string> history;     // chronological item ids
  std::vector<std::string> candidates;  // pre-ranked order
  std::string target;
  int pre_rank_position = 0;  // 1-based rank of target inside candidates

  void validate() const;
};

}  // namespace sidkit
