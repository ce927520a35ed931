#pragma once

#include <cstdint>
#include <vector>

#include "sidkit/corpus.hpp"
#include "sidkit/embedding.hpp"

namespace sidkit::synthetic {

// Mixture-of-Gaussians item embeddings: component means drawn from N(0, I),
// points from N(mean, spread^2 I). Cluster labels are returned per store row.
embed::EmbeddingStore make_mixture_embeddings(std::size_t items, std::size_t dim,
                                              std::size_t clusters, double spread,
                                              std::uint64_t seed,
                                              std::vector<std::size_t>* cluster_of = nullptr);

struct CorpusSpec {
  std::size_t items = 240;
  std::size_t users = 150;
  std::size_t dim = 32;
  std::size_t clusters = 16;
  double cluster_spread = 0.35;
  std::size_t min_events = 8;
  std::size_t max_events = 20;
  double follow_probability = 0.85;  // chance to follow an item's preferred successor
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  corpus::InteractionLog interactions;
  corpus::MetaMap meta;
  embed::EmbeddingStore embeddings;
  std::vector<std::size_t> cluster_of;

  SyntheticCorpus() : embeddings(1) {}
};

// Interaction sequences follow a hidden per-item successor chain inside the
// embedding clusters, so a first-order frequency model can learn them.
SyntheticCorpus make_corpus(const CorpusSpec& spec);

}  // namespace sidkit::synthetic
