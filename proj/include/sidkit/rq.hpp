#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sidkit/common.hpp"
#include "sidkit/embedding.hpp"

namespace sidkit::rq {

// One quantization level: a flat row-major centroid table plus per-entry
// bookkeeping (assignment counts for the running epoch, consecutive batches
// an entry went unused).
struct Codebook {
  std::size_t dim = 0;
  std::size_t code_count = 0;
  std::vector<double> centroids;           // code_count x dim
  std::vector<std::uint64_t> usage;        // per-epoch assignment histogram
  std::vector<std::uint32_t> unused_streak;

  Codebook() = default;
  Codebook(std::size_t dim_, std::size_t codes)
      : dim(dim_), code_count(codes), centroids(codes * dim_, 0.0), usage(codes, 0),
        unused_streak(codes, 0) {}

  std::span<const double> entry(std::size_t j) const { return {centroids.data() + j * dim, dim}; }
  std::span<double> entry(std::size_t j) { return {centroids.data() + j * dim, dim}; }
};

struct CodebookStack {
  std::size_t dim = 0;
  std::vector<Codebook> levels;

  std::size_t level_count() const { return levels.size(); }
};

struct QuantizeResult {
  std::vector<std::uint32_t> codes;             // one index per level
  std::vector<std::vector<double>> residuals;   // levels+1 entries; last is the leftover
  std::vector<std::vector<double>> selected;    // chosen centroid per level
  std::vector<double> reconstruction;           // sum of selected centroids
};

struct KmeansParams {
  std::size_t max_iterations = 25;
  double tolerance = 1e-7;  // relative SSE improvement below which Lloyd stops
};

struct TrainConfig {
  // Technique switches.
  bool ema = true;
  bool diversity = false;
  bool dead_code_reset = false;
  bool random_last = false;
  bool contrastive_pre = false;

  double ema_decay = 0.97;             // blend weight on the old entry
  double diversity_weight = 0.1;
  std::uint32_t reset_threshold = 2;   // batches an entry may stay unused
  std::size_t random_last_levels = 1;  // levels drawn uniformly when random_last is on
  double codebook_weight = 1.0;
  double commit_weight = 0.25;
  double soft_assign_temperature = 1.0;
  double codebook_step = 1.0;          // step size toward the batch statistics

  std::size_t levels = 4;
  std::size_t codes_per_level = 256;
  std::size_t epochs = 15;
  std::size_t batch_size = 1024;
  KmeansParams kmeans;
  std::uint64_t seed = 0;

  std::size_t effective_random_last() const { return random_last ? random_last_levels : 0; }
};

// k-means++ seeding followed by Lloyd iterations. `points` is n x dim
// row-major. Throws when there are fewer points than clusters.
std::vector<double> kmeanspp_init(std::span<const double> points, std::size_t n, std::size_t dim,
                                  std::size_t clusters, Rng& rng,
                                  const KmeansParams& params = {});

// Level 1 clusters the raw embeddings, every further level clusters the
// residuals left by the greedy assignment through the previous levels.
CodebookStack rq_kmeans_init(const embed::EmbeddingStore& store, const TrainConfig& cfg);

// Nearest entry by squared distance; ties go to the lowest index.
std::uint32_t assign(std::span<const double> residual, const Codebook& level);

// Greedy through the first levels; the final `random_last_levels` levels draw
// uniformly from their own entries using the supplied generator.
QuantizeResult quantize(std::span<const double> h, const CodebookStack& stack,
                        std::size_t random_last_levels, Rng& rng);

// Parallel greedy assignment of a batch of points at one level.
// `points` is n x dim row-major; output has n entries.
std::vector<std::uint32_t> assign_batch(const Codebook& level, std::span<const double> points,
                                        std::size_t n);

std::vector<double> ema_update(std::span<const double> entry, std::span<const double> candidate,
                               double decay);

// diversity_weight * sum over levels of C_k * sum_j p_{k,j}^2 where each
// soft_counts[k] is a normalized usage distribution.
double diversity_loss(const std::vector<std::vector<double>>& soft_counts,
                      double diversity_weight);

struct ResetEvent {
  std::size_t level = 0;
  std::uint32_t entry = 0;
  std::size_t source = 0;  // batch row whose residual replaced the entry
  double error = 0.0;
};

// Residuals a level saw in the current batch together with its choices.
struct LevelBatch {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<double> residuals;        // count x dim
  std::vector<std::uint32_t> assigned;  // chosen entry per row
};

// Entries unused for `threshold` consecutive batches are reassigned to the
// batch residual with the largest reconstruction error under the current
// codebook, at most one reset per entry per batch.
std::vector<ResetEvent> dead_code_reset(CodebookStack& stack,
                                        const std::vector<LevelBatch>& batches,
                                        std::uint32_t threshold);

struct EpochStats {
  double reconstruction_loss = 0.0;  // mean over items
  double codebook_loss = 0.0;
  double commitment_loss = 0.0;
  double diversity = 0.0;
  double total_loss = 0.0;
  std::vector<std::vector<std::uint64_t>> usage;  // per level histogram
  std::size_t resets = 0;
};

// One pass over the store in seeded mini-batches: assign every level,
// accumulate the loss terms, update centroids by the configured rule and
// apply dead-code resets when enabled.
EpochStats train_epoch(const embed::EmbeddingStore& store, CodebookStack& stack,
                       const TrainConfig& cfg, std::size_t epoch_index);

// rq_kmeans_init followed by the configured number of epochs.
CodebookStack train(const embed::EmbeddingStore& store, const TrainConfig& cfg,
                    std::vector<EpochStats>* history = nullptr);

}  // namespace sidkit::rq
