#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sidkit/common.hpp"
#include "sidkit/corpus.hpp"

namespace sidkit::embed {

// Dense item vectors of one shared dimension, stored row-major.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim);

  void insert(const std::string& item_id, std::span<const double> vec);
  bool contains(const std::string& item_id) const;
  std::span<const double> vec(const std::string& item_id) const;
  std::span<const double> row(std::size_t index) const;
  std::span<double> mutable_row(std::size_t index);
  std::size_t index_of(const std::string& item_id) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
};

struct ContrastiveConfig {
  double temperature = 0.07;
  std::size_t negatives_per_anchor = 32;
  double learning_rate = 0.05;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

// Temperature-scaled cosine similarity of two raw vectors.
// Throws std::domain_error on a zero-norm vector.
double similarity(std::span<const double> a, std::span<const double> b, double temperature);

// InfoNCE over one anchor: mean over positives of -log of the softmax of the
// positive logit against the negative logits. Log-sum-exp is max-shifted.
double contrastive_loss(const EmbeddingStore& store, const std::string& anchor,
                        const std::vector<std::string>& positives,
                        const std::vector<std::string>& negatives, double temperature);

// Analytic gradients of contrastive_loss with respect to the raw vectors of
// the anchor, every positive and every negative (chain rule through the
// normalization).
std::map<std::string, std::vector<double>> contrastive_grad(
    const EmbeddingStore& store, const std::string& anchor,
    const std::vector<std::string>& positives, const std::vector<std::string>& negatives,
    double temperature);

struct RefineResult {
  EmbeddingStore store;
  std::vector<double> epoch_mean_loss;
};

// Seeded mini-batch SGD on the embedding vectors. Gradient evaluation is
// parallel across anchors in a batch; parameter application is serialized.
// The input store is untouched.
RefineResult refine_embeddings(const EmbeddingStore& store,
                               const corpus::CoEngagementSet& pairs,
                               const ContrastiveConfig& cfg);

}  // namespace sidkit::embed
