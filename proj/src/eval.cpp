#include "sidkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sidkit::eval {

double recall_at_k(const RankedList& ranked, const std::string& target, std::size_t k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: K must be >= 1");
  const std::size_t limit = std::min(k, ranked.items.size());
  for (std::size_t i = 0; i < limit; ++i)
    if (ranked.items[i] == target) return 1.0;
  return 0.0;
}

double ndcg_at_k(const RankedList& ranked, const std::string& target, std::size_t k) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: K must be >= 1");
  const std::size_t limit = std::min(k, ranked.items.size());
  for (std::size_t i = 0; i < limit; ++i)
    if (ranked.items[i] == target)
      return 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return 0.0;
}

namespace {

// Key over items[end-len .. end), '\x1f'-joined.
std::string context_key(const std::vector<std::string>& items, std::size_t end,
                        std::size_t len) {
  std::string key;
  for (std::size_t i = end - len; i < end; ++i) {
    key += items[i];
    key += '\x1f';
  }
  return key;
}

}  // namespace

MarkovRetriever::MarkovRetriever(const corpus::InteractionLog& train, std::size_t order)
    : order_(order) {
  if (order < 1) throw std::invalid_argument("MarkovRetriever: order must be >= 1");
  by_order_.resize(order_);
  std::map<std::string, std::size_t> popularity;
  for (const auto& [user, events] : train.by_user) {
    std::vector<std::string> items;
    items.reserve(events.size());
    for (const corpus::Event& e : events) items.push_back(e.item_id);
    for (const std::string& item : items) ++popularity[item];
    for (std::size_t i = 1; i < items.size(); ++i)
      for (std::size_t len = 1; len <= order_ && len <= i; ++len)
        ++by_order_[len - 1][context_key(items, i, len)][items[i]];
  }
  transitions_ = by_order_[0];
  popularity_lookup_ = popularity;
  popularity_.assign(popularity.begin(), popularity.end());
  std::sort(popularity_.begin(), popularity_.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
}

RankedList MarkovRetriever::predict(const std::vector<std::string>& history,
                                    std::size_t k) const {
  // score = (transition count at the deepest matching order, popularity, id)
  std::vector<std::pair<std::string, std::size_t>> scored;
  std::set<std::string> taken;

  for (std::size_t len = std::min(order_, history.size()); len >= 1 && !history.empty(); --len) {
    auto ctx = by_order_[len - 1].find(context_key(history, history.size(), len));
    if (ctx == by_order_[len - 1].end()) continue;
    scored.assign(ctx->second.begin(), ctx->second.end());
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      const std::size_t pa = popularity_lookup_.count(a.first) ? popularity_lookup_.at(a.first) : 0;
      const std::size_t pb = popularity_lookup_.count(b.first) ? popularity_lookup_.at(b.first) : 0;
      if (pa != pb) return pa > pb;
      return a.first < b.first;
    });
    break;
  }

  RankedList out;
  for (const auto& [item, count] : scored) {
    if (out.items.size() >= k) break;
    if (taken.insert(item).second) out.items.push_back(item);
  }
  for (const auto& [item, count] : popularity_) {
    if (out.items.size() >= k) break;
    if (taken.insert(item).second) out.items.push_back(item);
  }
  return out;
}

EvalReport evaluate_rerank(const std::vector<RerankEpisode>& episodes,
                           const std::vector<outparse::ParsedOutput>& outputs,
                           const std::vector<std::size_t>& ks) {
  if (episodes.size() != outputs.size())
    throw std::invalid_argument("evaluate_rerank: episode/output count mismatch");
  EvalReport report;
  report.episode_count = episodes.size();
  if (episodes.empty()) return report;

  std::set<std::size_t> truncated;
  for (const RerankEpisode& episode : episodes) {
    if (episode.candidates.size() < 2)
      throw std::invalid_argument("evaluate_rerank: episode needs at least two candidates");
    if (episode.pre_rank_position < 1 ||
        static_cast<std::size_t>(episode.pre_rank_position) > episode.candidates.size() ||
        episode.candidates[static_cast<std::size_t>(episode.pre_rank_position - 1)] !=
            episode.target)
      throw std::invalid_argument("evaluate_rerank: inconsistent pre-rank position for user " +
                                  episode.user_id);
    for (std::size_t k : ks)
      if (k > episode.candidates.size()) truncated.insert(k);
  }
  report.truncated_ks.assign(truncated.begin(), truncated.end());

  const std::size_t n = episodes.size();
  // Per-episode values first, summed serially afterwards, so the totals do
  // not depend on thread interleaving.
  std::vector<double> per_pre_recall(n * ks.size()), per_pre_ndcg(n * ks.size());
  std::vector<double> per_re_recall(n * ks.size()), per_re_ndcg(n * ks.size());
  std::vector<std::uint8_t> failed(n, 0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(n); ++idx) {
    const std::size_t i = static_cast<std::size_t>(idx);
    const RerankEpisode& episode = episodes[i];
    RankedList pre{episode.candidates};
    RankedList re = pre;
    if (outputs[i].ranking.has_value() &&
        outputs[i].ranking->size() == episode.candidates.size()) {
      re.items.clear();
      for (int c : *outputs[i].ranking)
        re.items.push_back(episode.candidates[static_cast<std::size_t>(c)]);
    } else {
      failed[i] = 1;
    }
    for (std::size_t kk = 0; kk < ks.size(); ++kk) {
      per_pre_recall[i * ks.size() + kk] = recall_at_k(pre, episode.target, ks[kk]);
      per_pre_ndcg[i * ks.size() + kk] = ndcg_at_k(pre, episode.target, ks[kk]);
      per_re_recall[i * ks.size() + kk] = recall_at_k(re, episode.target, ks[kk]);
      per_re_ndcg[i * ks.size() + kk] = ndcg_at_k(re, episode.target, ks[kk]);
    }
  }

  std::vector<double> pre_recall(ks.size(), 0.0), pre_ndcg(ks.size(), 0.0);
  std::vector<double> re_recall(ks.size(), 0.0), re_ndcg(ks.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t kk = 0; kk < ks.size(); ++kk) {
      pre_recall[kk] += per_pre_recall[i * ks.size() + kk];
      pre_ndcg[kk] += per_pre_ndcg[i * ks.size() + kk];
      re_recall[kk] += per_re_recall[i * ks.size() + kk];
      re_ndcg[kk] += per_re_ndcg[i * ks.size() + kk];
    }
  for (std::uint8_t f : failed) report.parse_failures += f;

  MethodRow pre_row{"pre-rank", {}, {}};
  MethodRow re_row{"re-rank", {}, {}};
  for (std::size_t kk = 0; kk < ks.size(); ++kk) {
    pre_row.recall[ks[kk]] = pre_recall[kk] / static_cast<double>(n);
    pre_row.ndcg[ks[kk]] = pre_ndcg[kk] / static_cast<double>(n);
    re_row.recall[ks[kk]] = re_recall[kk] / static_cast<double>(n);
    re_row.ndcg[ks[kk]] = re_ndcg[kk] / static_cast<double>(n);
  }
  report.rows.push_back(std::move(pre_row));
  report.rows.push_back(std::move(re_row));
  return report;
}

namespace {

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  std::vector<std::size_t> ks;
  if (!report.rows.empty())
    for (const auto& [k, v] : report.rows.front().recall) ks.push_back(k);

  out << "method        ";
  for (std::size_t k : ks) out << " recall@" << k << (k < 10 ? " " : "");
  for (std::size_t k : ks) out << " ndcg@" << k << (k < 10 ? "   " : "  ");
  out << "\n";
  for (const MethodRow& row : report.rows) {
    out << row.method;
    for (std::size_t i = row.method.size(); i < 14; ++i) out << ' ';
    for (std::size_t k : ks) out << "   " << format_metric(row.recall.at(k));
    for (std::size_t k : ks) out << "  " << format_metric(row.ndcg.at(k));
    out << "\n";
  }
  out << "episodes=" << report.episode_count << " parse_failures=" << report.parse_failures
      << "\n";
  if (!report.truncated_ks.empty()) {
    out << "note: K truncated to list length for K in {";
    for (std::size_t i = 0; i < report.truncated_ks.size(); ++i)
      out << (i ? "," : "") << report.truncated_ks[i];
    out << "}\n";
  }
  return out.str();
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  std::vector<std::size_t> ks;
  if (!report.rows.empty())
    for (const auto& [k, v] : report.rows.front().recall) ks.push_back(k);
  out << "method";
  for (std::size_t k : ks) out << ",recall@" << k;
  for (std::size_t k : ks) out << ",ndcg@" << k;
  out << "\n";
  for (const MethodRow& row : report.rows) {
    out << row.method;
    for (std::size_t k : ks) out << ',' << format_metric(row.recall.at(k));
    for (std::size_t k : ks) out << ',' << format_metric(row.ndcg.at(k));
    out << "\n";
  }
  return out.str();
}

}  // namespace sidkit::eval
