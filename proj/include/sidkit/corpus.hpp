#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sidkit/common.hpp"

namespace sidkit::corpus {

struct Event {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;
};

// Per-user interaction sequences, chronologically sorted (ties keep input
// order). Immutable after construction; safe to share across threads.
struct InteractionLog {
  std::map<std::string, std::vector<Event>> by_user;

  std::size_t user_count() const { return by_user.size(); }
  std::size_t event_count() const;
  std::map<std::string, std::size_t> item_counts() const;
};

// Normalizes a raw event list: groups by user, stable-sorts by timestamp,
// rejects duplicate (user,item,timestamp) triples.
InteractionLog log_from_events(std::vector<Event> events);

// JSON-lines input, one {user_id, item_id, timestamp} object per line.
// Malformed lines raise with the 1-based line number; an empty file raises.
InteractionLog load_interactions(const std::string& path);

// Iterated removal of users and items with fewer than min_count events,
// until a fixpoint is reached.
InteractionLog filter_min_count(const InteractionLog& log, std::size_t min_count = 5);

// Leave-one-out protocol: per user the last event is test, the second-to-last
// is validation, the rest is train.
struct SplitSet {
  InteractionLog train;
  std::map<std::string, Event> valid;
  std::map<std::string, Event> test;
};

SplitSet leave_one_out_split(const InteractionLog& log);

struct ItemMeta {
  std::string item_id;
  std::string title;
  std::vector<std::string> categories;  // root-first path
};

using MetaMap = std::map<std::string, ItemMeta>;

MetaMap load_item_meta(const std::string& path);

// Item co-occurrence within a user's history. Symmetric and irreflexive.
// The negative pool of an item is everything outside positives(i) and i itself.
class CoEngagementSet {
 public:
  CoEngagementSet(std::map<std::string, std::set<std::string>> positives,
                  std::vector<std::string> universe);

  const std::set<std::string>& positives(const std::string& item) const;
  bool has_positives(const std::string& item) const;
  const std::vector<std::string>& universe() const { return universe_; }

  // Uniform draw without replacement from the negative pool of `anchor`.
  std::vector<std::string> sample_negatives(const std::string& anchor, std::size_t count,
                                            Rng& rng) const;

 private:
  std::map<std::string, std::set<std::string>> positives_;
  std::vector<std::string> universe_;  // sorted, unique
};

// Pairs items that co-occur in one user's history. window = 0 means the whole
// history; window = w pairs events at most w positions apart.
CoEngagementSet co_engagement_pairs(const InteractionLog& log, std::size_t window = 0);

}  // namespace sidkit::corpus
