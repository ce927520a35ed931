#include "sidkit/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sidkit::ref {

std::uint32_t nearest_scan(std::span<const double> point, const rq::Codebook& level) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t j = 0; j < level.code_count; ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < level.dim; ++i) {
      const double diff = point[i] - level.centroids[j * level.dim + i];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

std::vector<std::uint32_t> quantize_scan(std::span<const double> h,
                                         const rq::CodebookStack& stack) {
  std::vector<double> residual(h.begin(), h.end());
  std::vector<std::uint32_t> codes;
  for (const rq::Codebook& level : stack.levels) {
    const std::uint32_t idx = nearest_scan(residual, level);
    codes.push_back(idx);
    for (std::size_t i = 0; i < level.dim; ++i)
      residual[i] -= level.centroids[idx * level.dim + i];
  }
  return codes;
}

std::vector<double> kmeans_serial(std::span<const double> points, std::size_t n,
                                  std::size_t dim, std::size_t clusters, Rng& rng,
                                  const rq::KmeansParams& params) {
  if (n < clusters) throw std::invalid_argument("kmeans_serial: too few points");
  auto point = [&](std::size_t i) { return points.subspan(i * dim, dim); };
  auto dist2 = [&](std::span<const double> a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return s;
  };

  std::vector<double> centroids;
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  const std::size_t first = static_cast<std::size_t>(rng.next_below(n));
  centroids.insert(centroids.end(), point(first).begin(), point(first).end());
  for (std::size_t c = 1; c < clusters; ++c) {
    const double* latest = centroids.data() + (c - 1) * dim;
    for (std::size_t i = 0; i < n; ++i)
      min_d[i] = std::min(min_d[i], dist2(point(i), latest));
    double total = 0.0;
    for (double d : min_d) total += d;
    std::size_t chosen;
    if (total > 0.0) {
      const double target = rng.next_unit() * total;
      chosen = n - 1;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_d[i];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<std::size_t>(rng.next_below(n));
    }
    centroids.insert(centroids.end(), point(chosen).begin(), point(chosen).end());
  }

  std::vector<std::uint32_t> assignment(n, 0);
  std::vector<double> dist(n, 0.0);
  double prev_sse = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < clusters; ++c) {
        const double d = dist2(point(i), centroids.data() + c * dim);
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::uint32_t>(c);
        }
      }
      assignment[i] = best;
      dist[i] = best_d;
    }
    double sse = 0.0;
    for (double d : dist) sse += d;

    std::vector<double> sums(clusters * dim, 0.0);
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assignment[i]];
      const std::span<const double> p = point(i);
      for (std::size_t k = 0; k < dim; ++k) sums[assignment[i] * dim + k] += p[k];
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t k = 0; k < dim; ++k)
        centroids[c * dim + k] = sums[c * dim + k] / static_cast<double>(counts[c]);
    }
    if (prev_sse < std::numeric_limits<double>::infinity() &&
        prev_sse - sse <= params.tolerance * std::max(1.0, prev_sse))
      break;
    prev_sse = sse;
  }
  return centroids;
}

rq::CodebookStack rq_init_serial(const embed::EmbeddingStore& store,
                                 const rq::TrainConfig& cfg) {
  const std::size_t n = store.size();
  const std::size_t dim = store.dim();
  rq::CodebookStack stack;
  stack.dim = dim;
  std::vector<double> residuals(store.data());
  for (std::size_t level = 0; level < cfg.levels; ++level) {
    Rng rng(derive_seed(cfg.seed, "rq-kmeans-level-" + std::to_string(level)));
    rq::Codebook book(dim, cfg.codes_per_level);
    book.centroids = kmeans_serial(residuals, n, dim, cfg.codes_per_level, rng, cfg.kmeans);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < cfg.codes_per_level; ++j) {
        double d = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          const double diff = residuals[i * dim + k] - book.centroids[j * dim + k];
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::uint32_t>(j);
        }
      }
      for (std::size_t k = 0; k < dim; ++k)
        residuals[i * dim + k] -= book.centroids[best * dim + k];
    }
    stack.levels.push_back(std::move(book));
  }
  return stack;
}

double contrastive_loss_direct(const embed::EmbeddingStore& store, const std::string& anchor,
                               const std::vector<std::string>& positives,
                               const std::vector<std::string>& negatives, double temperature) {
  auto unit = [&](const std::string& id) {
    std::span<const double> v = store.vec(id);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= norm;
    return out;
  };
  auto sim = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
    return d / temperature;
  };

  const std::vector<double> ua = unit(anchor);
  double loss = 0.0;
  for (const std::string& p : positives) {
    const double sp = sim(ua, unit(p));
    double denom = std::exp(sp);
    for (const std::string& ng : negatives) denom += std::exp(sim(ua, unit(ng)));
    loss += -std::log(std::exp(sp) / denom);
  }
  return loss / static_cast<double>(positives.size());
}

std::map<std::string, std::vector<double>> finite_difference_grad(
    const embed::EmbeddingStore& store, const std::string& anchor,
    const std::vector<std::string>& positives, const std::vector<std::string>& negatives,
    double temperature, double step) {
  std::vector<std::string> participants;
  participants.push_back(anchor);
  participants.insert(participants.end(), positives.begin(), positives.end());
  participants.insert(participants.end(), negatives.begin(), negatives.end());

  std::map<std::string, std::vector<double>> grads;
  for (const std::string& id : participants) {
    if (grads.count(id)) continue;
    std::vector<double> grad(store.dim(), 0.0);
    for (std::size_t i = 0; i < store.dim(); ++i) {
      embed::EmbeddingStore plus = store;
      embed::EmbeddingStore minus = store;
      std::vector<double> v(store.vec(id).begin(), store.vec(id).end());
      v[i] += step;
      plus.insert(id, v);
      v[i] -= 2.0 * step;
      minus.insert(id, v);
      const double up =
          contrastive_loss_direct(plus, anchor, positives, negatives, temperature);
      const double down =
          contrastive_loss_direct(minus, anchor, positives, negatives, temperature);
      grad[i] = (up - down) / (2.0 * step);
    }
    grads.emplace(id, std::move(grad));
  }
  return grads;
}

std::size_t collision_scan(const sid::SidRegistry& registry) {
  std::vector<const sid::SemanticId*> sids;
  std::vector<std::string> items;
  for (const auto& [item, semantic_id] : registry.forward()) {
    items.push_back(item);
    sids.push_back(&semantic_id);
  }
  std::size_t colliding = 0;
  for (std::size_t i = 0; i < sids.size(); ++i) {
    bool shared = false;
    for (std::size_t j = 0; j < sids.size() && !shared; ++j)
      if (i != j && *sids[i] == *sids[j]) shared = true;
    if (shared) ++colliding;
  }
  return colliding;
}

std::map<std::string, std::set<std::string>> co_occurrence_scan(
    const corpus::InteractionLog& log) {
  std::map<std::string, std::set<std::string>> pairs;
  for (const auto& [user, events] : log.by_user)
    for (std::size_t i = 0; i < events.size(); ++i)
      for (std::size_t j = 0; j < events.size(); ++j)
        if (i != j && events[i].item_id != events[j].item_id)
          pairs[events[i].item_id].insert(events[j].item_id);
  return pairs;
}

corpus::InteractionLog filter_fixpoint_naive(const corpus::InteractionLog& log,
                                             std::size_t min_count) {
  corpus::InteractionLog current = log;
  while (true) {
    std::map<std::string, std::size_t> item_counts;
    for (const auto& [user, events] : current.by_user)
      for (const corpus::Event& e : events) ++item_counts[e.item_id];

    corpus::InteractionLog next;
    for (const auto& [user, events] : current.by_user) {
      std::vector<corpus::Event> kept;
      for (const corpus::Event& e : events)
        if (item_counts[e.item_id] >= min_count) kept.push_back(e);
      if (kept.size() >= min_count) next.by_user.emplace(user, std::move(kept));
    }
    const bool stable = next.event_count() == current.event_count() &&
                        next.by_user.size() == current.by_user.size();
    current = std::move(next);
    if (stable) return current;
  }
}

double recall_scan(const std::vector<std::string>& ranked, const std::string& target,
                   std::size_t k) {
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
    if (ranked[i] == target) return 1.0;
  return 0.0;
}

double ndcg_scan(const std::vector<std::string>& ranked, const std::string& target,
                 std::size_t k) {
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
    if (ranked[i] == target) return 1.0 / std::log2(static_cast<double>(i + 2));
  return 0.0;
}

double diversity_direct(const std::vector<std::vector<double>>& soft_counts, double weight) {
  double total = 0.0;
  for (const std::vector<double>& level : soft_counts) {
    const double cardinality = static_cast<double>(level.size());
    for (double p : level) total += cardinality * p * p;
  }
  return weight * total;
}

}  // namespace sidkit::ref
