#pragma once

// Plain serial implementations, independent of the OpenMP kernels. Tests use
// them as oracles; the benchmark tool uses them as the comparison baseline.
// Nothing here shares code with the main library paths it checks.

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sidkit/corpus.hpp"
#include "sidkit/embedding.hpp"
#include "sidkit/rq.hpp"
#include "sidkit/sid.hpp"

namespace sidkit::ref {

// Exhaustive nearest-centroid scan, lowest index on ties.
std::uint32_t nearest_scan(std::span<const double> point, const rq::Codebook& level);

// Fully serial greedy residual quantization down the stack.
std::vector<std::uint32_t> quantize_scan(std::span<const double> h,
                                         const rq::CodebookStack& stack);

// Serial re-implementation of k-means++ seeding plus Lloyd, consuming the
// generator exactly like the library kernel does.
std::vector<double> kmeans_serial(std::span<const double> points, std::size_t n,
                                  std::size_t dim, std::size_t clusters, Rng& rng,
                                  const rq::KmeansParams& params = {});

// Level-by-level serial residual clustering (the greedy init route).
rq::CodebookStack rq_init_serial(const embed::EmbeddingStore& store,
                                 const rq::TrainConfig& cfg);

// Direct term-by-term evaluation of the contrastive objective, no max-shift.
double contrastive_loss_direct(const embed::EmbeddingStore& store, const std::string& anchor,
                               const std::vector<std::string>& positives,
                               const std::vector<std::string>& negatives, double temperature);

// Central finite differences of the contrastive loss for every participating
// vector component.
std::map<std::string, std::vector<double>> finite_difference_grad(
    const embed::EmbeddingStore& store, const std::string& anchor,
    const std::vector<std::string>& positives, const std::vector<std::string>& negatives,
    double temperature, double step);

// O(n^2) pairwise SID collision count: items sharing their SID with another.
std::size_t collision_scan(const sid::SidRegistry& registry);

// All-pairs same-user co-occurrence scan.
std::map<std::string, std::set<std::string>> co_occurrence_scan(
    const corpus::InteractionLog& log);

// Literal fixpoint filter: recount users and items from scratch until stable.
corpus::InteractionLog filter_fixpoint_naive(const corpus::InteractionLog& log,
                                             std::size_t min_count);

// Membership-scan metrics over one ranked list.
double recall_scan(const std::vector<std::string>& ranked, const std::string& target,
                   std::size_t k);
double ndcg_scan(const std::vector<std::string>& ranked, const std::string& target,
                 std::size_t k);

// Direct double sum of the usage concentration penalty.
double diversity_direct(const std::vector<std::vector<double>>& soft_counts, double weight);

}  // namespace sidkit::ref
