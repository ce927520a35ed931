#include "sidkit/rq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sidkit::rq {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest centroid for one point against a flat table; ties keep the lowest index.
std::pair<std::uint32_t, double> nearest(std::span<const double> point,
                                         const std::vector<double>& table, std::size_t codes,
                                         std::size_t dim) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < codes; ++j) {
    double s = 0.0;
    const double* row = table.data() + j * dim;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = point[i] - row[i];
      s += d * d;
    }
    if (s < best_d) {
      best_d = s;
      best = static_cast<std::uint32_t>(j);
    }
  }
  return {best, best_d};
}

}  // namespace

std::vector<double> kmeanspp_init(std::span<const double> points, std::size_t n, std::size_t dim,
                                  std::size_t clusters, Rng& rng, const KmeansParams& params) {
  if (n < clusters)
    throw std::invalid_argument("kmeanspp_init: need at least as many points as clusters (" +
                                std::to_string(n) + " < " + std::to_string(clusters) + ")");
  if (clusters == 0) throw std::invalid_argument("kmeanspp_init: clusters must be positive");

  auto point = [&](std::size_t i) { return points.subspan(i * dim, dim); };
  std::vector<double> centroids;
  centroids.reserve(clusters * dim);

  // Seeding: first center uniform, then proportional to squared distance.
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  const std::size_t first = static_cast<std::size_t>(rng.next_below(n));
  centroids.insert(centroids.end(), point(first).begin(), point(first).end());
  for (std::size_t c = 1; c < clusters; ++c) {
    const std::span<const double> latest{centroids.data() + (c - 1) * dim, dim};
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const double d = sq_dist(point(static_cast<std::size_t>(i)), latest);
      if (d < min_d[static_cast<std::size_t>(i)]) min_d[static_cast<std::size_t>(i)] = d;
    }
    double total = 0.0;
    for (double d : min_d) total += d;
    std::size_t chosen;
    if (total > 0.0) {
      double target = rng.next_unit() * total;
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

  // Lloyd refinement.
  std::vector<std::uint32_t> assignment(n, 0);
  std::vector<double> dist(n, 0.0);
  double prev_sse = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      auto [idx, d] = nearest(point(static_cast<std::size_t>(i)), centroids, clusters, dim);
      assignment[static_cast<std::size_t>(i)] = idx;
      dist[static_cast<std::size_t>(i)] = d;
    }
    double sse = 0.0;
    for (double d : dist) sse += d;

    std::vector<double> sums(clusters * dim, 0.0);
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t c = assignment[i];
      ++counts[c];
      const std::span<const double> p = point(i);
      for (std::size_t k = 0; k < dim; ++k) sums[c * dim + k] += p[k];
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
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

CodebookStack rq_kmeans_init(const embed::EmbeddingStore& store, const TrainConfig& cfg) {
  if (store.size() == 0) throw std::invalid_argument("rq_kmeans_init: empty embedding store");
  if (cfg.levels == 0) throw std::invalid_argument("rq_kmeans_init: need at least one level");
  if (cfg.codes_per_level < 2)
    throw std::invalid_argument("rq_kmeans_init: codebooks need at least 2 entries");

  const std::size_t n = store.size();
  const std::size_t dim = store.dim();
  CodebookStack stack;
  stack.dim = dim;

  std::vector<double> residuals(store.data());
  for (std::size_t level = 0; level < cfg.levels; ++level) {
    Rng rng(derive_seed(cfg.seed, "rq-kmeans-level-" + std::to_string(level)));
    Codebook book(dim, cfg.codes_per_level);
    book.centroids = kmeanspp_init(residuals, n, dim, cfg.codes_per_level, rng, cfg.kmeans);
    // Peel this level off before clustering the next one.
    std::vector<std::uint32_t> picks = assign_batch(book, residuals, n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const std::size_t row = static_cast<std::size_t>(i);
      const std::span<const double> entry = book.entry(picks[row]);
      for (std::size_t k = 0; k < dim; ++k) residuals[row * dim + k] -= entry[k];
    }
    stack.levels.push_back(std::move(book));
  }
  return stack;
}

std::uint32_t assign(std::span<const double> residual, const Codebook& level) {
  if (residual.size() != level.dim)
    throw std::invalid_argument("assign: dimension mismatch");
  return nearest(residual, level.centroids, level.code_count, level.dim).first;
}

std::vector<std::uint32_t> assign_batch(const Codebook& level, std::span<const double> points,
                                        std::size_t n) {
  std::vector<std::uint32_t> out(n, 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const std::size_t row = static_cast<std::size_t>(i);
    out[row] =
        nearest(points.subspan(row * level.dim, level.dim), level.centroids, level.code_count,
                level.dim)
            .first;
  }
  return out;
}

QuantizeResult quantize(std::span<const double> h, const CodebookStack& stack,
                        std::size_t random_last_levels, Rng& rng) {
  const std::size_t levels = stack.level_count();
  if (h.size() != stack.dim) throw std::invalid_argument("quantize: dimension mismatch");
  if (random_last_levels > levels)
    throw std::invalid_argument("quantize: more random levels than levels in the stack");

  QuantizeResult result;
  result.codes.resize(levels);
  result.residuals.assign(levels + 1, {});
  result.selected.resize(levels);
  result.residuals[0].assign(h.begin(), h.end());
  result.reconstruction.assign(stack.dim, 0.0);

  const std::size_t greedy_levels = levels - random_last_levels;
  for (std::size_t k = 0; k < levels; ++k) {
    const Codebook& book = stack.levels[k];
    const std::uint32_t idx =
        k < greedy_levels ? assign(result.residuals[k], book)
                          : static_cast<std::uint32_t>(rng.next_below(book.code_count));
    result.codes[k] = idx;
    const std::span<const double> entry = book.entry(idx);
    result.selected[k].assign(entry.begin(), entry.end());
    result.residuals[k + 1].resize(stack.dim);
    for (std::size_t i = 0; i < stack.dim; ++i) {
      result.residuals[k + 1][i] = result.residuals[k][i] - entry[i];
      result.reconstruction[i] += entry[i];
    }
  }
  return result;
}

std::vector<double> ema_update(std::span<const double> entry, std::span<const double> candidate,
                               double decay) {
  if (decay < 0.0 || decay > 1.0)
    throw std::invalid_argument("ema_update: decay must be in [0,1]");
  if (entry.size() != candidate.size())
    throw std::invalid_argument("ema_update: dimension mismatch");
  std::vector<double> out(entry.size());
  for (std::size_t i = 0; i < entry.size(); ++i)
    out[i] = decay * entry[i] + (1.0 - decay) * candidate[i];
  return out;
}

double diversity_loss(const std::vector<std::vector<double>>& soft_counts,
                      double diversity_weight) {
  double total = 0.0;
  for (const std::vector<double>& level : soft_counts) {
    double sum = 0.0;
    double sq = 0.0;
    for (double p : level) {
      if (p < 0.0) throw std::invalid_argument("diversity_loss: negative probability");
      sum += p;
      sq += p * p;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("diversity_loss: soft counts must sum to 1 per level");
    total += static_cast<double>(level.size()) * sq;
  }
  return diversity_weight * total;
}

std::vector<ResetEvent> dead_code_reset(CodebookStack& stack,
                                        const std::vector<LevelBatch>& batches,
                                        std::uint32_t threshold) {
  if (threshold < 1)
    throw std::invalid_argument("dead_code_reset: threshold must be >= 1");
  std::vector<ResetEvent> events;
  for (std::size_t level = 0; level < stack.level_count() && level < batches.size(); ++level) {
    Codebook& book = stack.levels[level];
    const LevelBatch& batch = batches[level];
    if (batch.count == 0) continue;

    std::vector<std::uint32_t> dead;
    for (std::uint32_t j = 0; j < book.code_count; ++j)
      if (book.unused_streak[j] >= threshold) dead.push_back(j);
    if (dead.empty()) continue;

    // The hard sample of this batch: largest reconstruction error under the
    // entry it was assigned to. Earliest row wins ties.
    std::size_t worst = 0;
    double worst_error = -1.0;
    for (std::size_t i = 0; i < batch.count; ++i) {
      const std::span<const double> r{batch.residuals.data() + i * batch.dim, batch.dim};
      const double err = std::sqrt(sq_dist(r, book.entry(batch.assigned[i])));
      if (err > worst_error) {
        worst_error = err;
        worst = i;
      }
    }

    for (const std::uint32_t entry : dead) {
      std::span<double> target = book.entry(entry);
      std::copy_n(batch.residuals.data() + worst * batch.dim, batch.dim, target.begin());
      book.unused_streak[entry] = 0;
      events.push_back(ResetEvent{level, entry, worst, worst_error});
    }
  }
  return events;
}

EpochStats train_epoch(const embed::EmbeddingStore& store, CodebookStack& stack,
                       const TrainConfig& cfg, std::size_t epoch_index) {
  if (store.size() == 0) throw std::invalid_argument("train_epoch: empty embedding store");
  if (stack.dim != store.dim()) throw std::invalid_argument("train_epoch: dimension mismatch");

  const std::size_t n = store.size();
  const std::size_t dim = store.dim();
  const std::size_t levels = stack.level_count();
  const std::size_t batch_size = std::max<std::size_t>(1, std::min(cfg.batch_size, n));

  EpochStats stats;
  stats.usage.assign(levels, {});
  for (std::size_t k = 0; k < levels; ++k) {
    stats.usage[k].assign(stack.levels[k].code_count, 0);
    std::fill(stack.levels[k].usage.begin(), stack.levels[k].usage.end(), 0);
  }

  Rng order_rng(derive_seed(cfg.seed, "rq-epoch-order-" + std::to_string(epoch_index)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.next_below(i)]);

  double recon_sum = 0.0, cb_sum = 0.0, commit_sum = 0.0, div_sum = 0.0;
  std::size_t batch_count = 0;

  std::vector<LevelBatch> level_batches(levels);
  std::vector<std::vector<double>> soft_weights(levels);  // rows x codes when diversity is on

  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    ++batch_count;

    for (std::size_t k = 0; k < levels; ++k) {
      level_batches[k].dim = dim;
      level_batches[k].count = count;
      level_batches[k].residuals.assign(count * dim, 0.0);
      level_batches[k].assigned.assign(count, 0);
      if (cfg.diversity)
        soft_weights[k].assign(count * stack.levels[k].code_count, 0.0);
    }
    std::vector<double> item_recon(count, 0.0);
    std::vector<double> item_cb(count, 0.0);

    // Assignment pass: greedy through every level, residual trail recorded.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(count); ++bi) {
      const std::size_t row = static_cast<std::size_t>(bi);
      const std::span<const double> h = store.row(order[start + row]);
      std::vector<double> residual(h.begin(), h.end());
      std::vector<double> recon(dim, 0.0);
      for (std::size_t k = 0; k < levels; ++k) {
        const Codebook& book = stack.levels[k];
        std::copy(residual.begin(), residual.end(),
                  level_batches[k].residuals.begin() + static_cast<std::ptrdiff_t>(row * dim));
        std::uint32_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        if (cfg.diversity) {
          // Keep the distance row to form soft assignments afterwards.
          std::vector<double> dists(book.code_count);
          for (std::size_t j = 0; j < book.code_count; ++j) {
            dists[j] = sq_dist(residual, book.entry(j));
            if (dists[j] < best_d) {
              best_d = dists[j];
              best = static_cast<std::uint32_t>(j);
            }
          }
          const double t = cfg.soft_assign_temperature;
          double denom = 0.0;
          double* wrow = soft_weights[k].data() + row * book.code_count;
          for (std::size_t j = 0; j < book.code_count; ++j) {
            wrow[j] = std::exp(-(dists[j] - best_d) / t);
            denom += wrow[j];
          }
          for (std::size_t j = 0; j < book.code_count; ++j) wrow[j] /= denom;
        } else {
          auto [idx, d] = nearest(residual, book.centroids, book.code_count, book.dim);
          best = idx;
          best_d = d;
        }
        level_batches[k].assigned[row] = best;
        item_cb[row] += best_d;
        const std::span<const double> entry = book.entry(best);
        for (std::size_t i = 0; i < dim; ++i) {
          recon[i] += entry[i];
          residual[i] -= entry[i];
        }
      }
      double rec = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = h[i] - recon[i];
        rec += d * d;
      }
      item_recon[row] = rec;
    }

    for (std::size_t row = 0; row < count; ++row) {
      recon_sum += item_recon[row];
      cb_sum += item_cb[row];
      commit_sum += item_cb[row];  // same value, different gradient target
    }

    // Centroid update: step toward the batch statistics, optionally EMA-blended.
    for (std::size_t k = 0; k < levels; ++k) {
      Codebook& book = stack.levels[k];
      const LevelBatch& lb = level_batches[k];
      const std::size_t codes = book.code_count;

      std::vector<double> sums(codes * dim, 0.0);
      std::vector<std::size_t> counts(codes, 0);
      for (std::size_t row = 0; row < count; ++row) {
        const std::uint32_t j = lb.assigned[row];
        ++counts[j];
        const double* r = lb.residuals.data() + row * dim;
        for (std::size_t i = 0; i < dim; ++i) sums[j * dim + i] += r[i];
      }

      std::vector<double> div_grad;
      if (cfg.diversity) {
        const double* w = soft_weights[k].data();
        std::vector<double> soft_n(codes, 0.0);
        for (std::size_t row = 0; row < count; ++row)
          for (std::size_t j = 0; j < codes; ++j) soft_n[j] += w[row * codes + j];
        std::vector<double> p(codes, 0.0);
        std::vector<double> g(codes, 0.0);
        double soft_div = 0.0;
        for (std::size_t j = 0; j < codes; ++j) {
          p[j] = soft_n[j] / static_cast<double>(count);
          soft_div += p[j] * p[j];
          g[j] = 2.0 * cfg.diversity_weight * static_cast<double>(codes) * p[j] /
                 static_cast<double>(count);
        }
        div_sum += cfg.diversity_weight * static_cast<double>(codes) * soft_div;

        div_grad.assign(codes * dim, 0.0);
        std::vector<double> wg_sum(codes, 0.0);      // sum_i w_ij * <g, w_i>
        std::vector<double> w_sum(codes, 0.0);       // sum_i w_ij
        std::vector<double> ws_r(codes * dim, 0.0);  // sum_i w_ij * r_i
        std::vector<double> wgs_r(codes * dim, 0.0); // sum_i w_ij * <g,w_i> * r_i
        for (std::size_t row = 0; row < count; ++row) {
          const double* wrow = w + row * codes;
          double inner = 0.0;
          for (std::size_t j = 0; j < codes; ++j) inner += g[j] * wrow[j];
          const double* r = lb.residuals.data() + row * dim;
          for (std::size_t j = 0; j < codes; ++j) {
            const double wij = wrow[j];
            if (wij == 0.0) continue;
            w_sum[j] += wij;
            wg_sum[j] += wij * inner;
            double* s = ws_r.data() + j * dim;
            double* gs = wgs_r.data() + j * dim;
            for (std::size_t i = 0; i < dim; ++i) {
              s[i] += wij * r[i];
              gs[i] += wij * inner * r[i];
            }
          }
        }
        const double two_over_t = 2.0 / cfg.soft_assign_temperature;
        for (std::size_t j = 0; j < codes; ++j) {
          const std::span<const double> entry = book.entry(j);
          for (std::size_t i = 0; i < dim; ++i) {
            div_grad[j * dim + i] =
                two_over_t * ((wg_sum[j] - g[j] * w_sum[j]) * entry[i] -
                              (wgs_r[j * dim + i] - g[j] * ws_r[j * dim + i]));
          }
        }
      }

      for (std::size_t j = 0; j < codes; ++j) {
        book.usage[j] += counts[j];
        stats.usage[k][j] += counts[j];
        const bool has_cb_grad = counts[j] > 0;
        const bool has_div_grad = cfg.diversity;
        if (!has_cb_grad && !has_div_grad) {
          ++book.unused_streak[j];
          continue;
        }
        std::span<double> entry = book.entry(j);
        std::vector<double> candidate(entry.begin(), entry.end());
        if (has_cb_grad) {
          const double inv = 1.0 / static_cast<double>(counts[j]);
          for (std::size_t i = 0; i < dim; ++i) {
            const double mean = sums[j * dim + i] * inv;
            candidate[i] -= cfg.codebook_step * cfg.codebook_weight * 2.0 * (entry[i] - mean);
          }
        }
        if (has_div_grad)
          for (std::size_t i = 0; i < dim; ++i)
            candidate[i] -= cfg.codebook_step * div_grad[j * dim + i];

        if (cfg.ema) {
          const std::vector<double> blended = ema_update(entry, candidate, cfg.ema_decay);
          std::copy(blended.begin(), blended.end(), entry.begin());
        } else {
          std::copy(candidate.begin(), candidate.end(), entry.begin());
        }
        if (counts[j] > 0)
          book.unused_streak[j] = 0;
        else
          ++book.unused_streak[j];
      }
    }

    if (cfg.dead_code_reset) {
      const auto events = dead_code_reset(stack, level_batches, cfg.reset_threshold);
      stats.resets += events.size();
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  stats.reconstruction_loss = recon_sum * inv_n;
  stats.codebook_loss = cb_sum * inv_n;
  stats.commitment_loss = commit_sum * inv_n;
  stats.diversity = cfg.diversity && batch_count > 0
                        ? div_sum / static_cast<double>(batch_count)
                        : 0.0;
  stats.total_loss = stats.reconstruction_loss + cfg.codebook_weight * stats.codebook_loss +
                     cfg.commit_weight * stats.commitment_loss + stats.diversity;
  return stats;
}

CodebookStack train(const embed::EmbeddingStore& store, const TrainConfig& cfg,
                    std::vector<EpochStats>* history) {
  CodebookStack stack = rq_kmeans_init(store, cfg);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats = train_epoch(store, stack, cfg, epoch);
    if (history) history->push_back(std::move(stats));
  }
  return stack;
}

}  // namespace sidkit::rq
