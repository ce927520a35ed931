#include "sidkit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include <json.hpp>

namespace sidkit::corpus {

using nlohmann::json;

std::size_t InteractionLog::event_count() const {
  std::size_t n = 0;
  for (const auto& [user, events] : by_user) n += events.size();
  return n;
}

std::map<std::string, std::size_t> InteractionLog::item_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& [user, events] : by_user)
    for (const Event& e : events) ++counts[e.item_id];
  return counts;
}

InteractionLog log_from_events(std::vector<Event> events) {
  InteractionLog log;
  for (Event& e : events) log.by_user[e.user_id].push_back(std::move(e));
  for (auto& [user, seq] : log.by_user) {
    std::stable_sort(seq.begin(), seq.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    std::set<std::tuple<std::string, std::int64_t>> seen;
    for (const Event& e : seq) {
      if (!seen.emplace(e.item_id, e.timestamp).second)
        throw std::runtime_error("duplicate interaction: user=" + user + " item=" + e.item_id +
                                 " timestamp=" + std::to_string(e.timestamp));
    }
  }
  return log;
}

InteractionLog load_interactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open interactions file: " + path);
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("user_id") ||
        !obj.contains("item_id") || !obj.contains("timestamp") ||
        !obj["user_id"].is_string() || !obj["item_id"].is_string() ||
        !obj["timestamp"].is_number_integer()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed interaction line");
    }
    events.push_back(Event{obj["user_id"].get<std::string>(), obj["item_id"].get<std::string>(),
                           obj["timestamp"].get<std::int64_t>()});
  }
  if (events.empty()) throw std::runtime_error("interactions file is empty: " + path);
  return log_from_events(std::move(events));
}

InteractionLog filter_min_count(const InteractionLog& log, std::size_t min_count) {
  if (min_count < 1) throw std::invalid_argument("filter_min_count: min_count must be >= 1");
  InteractionLog current = log;
  bool changed = true;
  while (changed) {
    changed = false;
    auto items = current.item_counts();
    InteractionLog next;
    for (const auto& [user, events] : current.by_user) {
      std::vector<Event> kept;
      for (const Event& e : events)
        if (items.at(e.item_id) >= min_count) kept.push_back(e);
      if (kept.size() != events.size()) changed = true;
      if (kept.size() >= min_count) {
        next.by_user.emplace(user, std::move(kept));
      } else if (!kept.empty() || !events.empty()) {
        changed = true;
      }
    }
    current = std::move(next);
  }
  return current;
}

SplitSet leave_one_out_split(const InteractionLog& log) {
  SplitSet split;
  for (const auto& [user, events] : log.by_user) {
    if (events.size() < 3)
      throw std::runtime_error("leave_one_out_split: user '" + user +
                               "' has fewer than 3 events");
    split.test.emplace(user, events.back());
    split.valid.emplace(user, events[events.size() - 2]);
    split.train.by_user.emplace(
        user, std::vector<Event>(events.begin(), events.end() - 2));
  }
  return split;
}

MetaMap load_item_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open item metadata file: " + path);
  MetaMap meta;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("item_id"))
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed item line");
    ItemMeta m;
    m.item_id = obj["item_id"].get<std::string>();
    if (obj.contains("title")) m.title = obj["title"].get<std::string>();
    if (obj.contains("categories")) {
      if (!obj["categories"].is_array() || obj["categories"].empty())
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": category path must be a non-empty array");
      for (const auto& c : obj["categories"]) m.categories.push_back(c.get<std::string>());
    }
    meta[m.item_id] = std::move(m);
  }
  return meta;
}

CoEngagementSet::CoEngagementSet(std::map<std::string, std::set<std::string>> positives,
                                 std::vector<std::string> universe)
    : positives_(std::move(positives)), universe_(std::move(universe)) {
  std::sort(universe_.begin(), universe_.end());
  universe_.erase(std::unique(universe_.begin(), universe_.end()), universe_.end());
  for (const auto& [item, pos] : positives_) {
    if (pos.count(item))
      throw std::invalid_argument("co-engagement set must be irreflexive: " + item);
    for (const auto& other : pos) {
      auto it = positives_.find(other);
      if (it == positives_.end() || !it->second.count(item))
        throw std::invalid_argument("co-engagement set must be symmetric: " + item + " / " +
                                    other);
    }
  }
}

const std::set<std::string>& CoEngagementSet::positives(const std::string& item) const {
  static const std::set<std::string> empty;
  auto it = positives_.find(item);
  return it == positives_.end() ? empty : it->second;
}

bool CoEngagementSet::has_positives(const std::string& item) const {
  auto it = positives_.find(item);
  return it != positives_.end() && !it->second.empty();
}

std::vector<std::string> CoEngagementSet::sample_negatives(const std::string& anchor,
                                                           std::size_t count, Rng& rng) const {
  const std::set<std::string>& pos = positives(anchor);
  std::vector<std::string> out;
  if (universe_.empty()) return out;
  std::size_t pool = universe_.size();
  for (const std::string& id : universe_)
    if (id == anchor || pos.count(id)) --pool;
  count = std::min(count, pool);
  if (count == 0) return out;
  out.reserve(count);
  std::set<std::size_t> drawn;
  // Rejection sampling; the pool is nearly the whole universe in practice.
  std::size_t attempts = 0;
  const std::size_t attempt_cap = 64 * count + 64;
  while (out.size() < count && attempts < attempt_cap) {
    ++attempts;
    std::size_t idx = static_cast<std::size_t>(rng.next_below(universe_.size()));
    const std::string& id = universe_[idx];
    if (id == anchor || pos.count(id) || drawn.count(idx)) continue;
    drawn.insert(idx);
    out.push_back(id);
  }
  if (out.size() < count) {
    // Dense fallback for tiny pools: partial Fisher-Yates over the explicit pool.
    std::vector<std::string> explicit_pool;
    for (const std::string& id : universe_)
      if (id != anchor && !pos.count(id) &&
          std::find(out.begin(), out.end(), id) == out.end())
        explicit_pool.push_back(id);
    while (out.size() < count && !explicit_pool.empty()) {
      std::size_t idx = static_cast<std::size_t>(rng.next_below(explicit_pool.size()));
      out.push_back(explicit_pool[idx]);
      explicit_pool.erase(explicit_pool.begin() + static_cast<std::ptrdiff_t>(idx));
    }
  }
  return out;
}

CoEngagementSet co_engagement_pairs(const InteractionLog& log, std::size_t window) {
  std::map<std::string, std::set<std::string>> positives;
  std::vector<std::string> universe;
  for (const auto& [user, events] : log.by_user) {
    for (std::size_t i = 0; i < events.size(); ++i) {
      universe.push_back(events[i].item_id);
      const std::size_t last =
          window == 0 ? events.size() : std::min(events.size(), i + window + 1);
      for (std::size_t j = i + 1; j < last; ++j) {
        const std::string& a = events[i].item_id;
        const std::string& b = events[j].item_id;
        if (a == b) continue;
        positives[a].insert(b);
        positives[b].insert(a);
      }
    }
  }
  return CoEngagementSet(std::move(positives), std::move(universe));
}

}  // namespace sidkit::corpus
