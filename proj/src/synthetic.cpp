#include "sidkit/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

namespace sidkit::synthetic {

embed::EmbeddingStore make_mixture_embeddings(std::size_t items, std::size_t dim,
                                              std::size_t clusters, double spread,
                                              std::uint64_t seed,
                                              std::vector<std::size_t>* cluster_of) {
  if (clusters == 0) throw std::invalid_argument("make_mixture_embeddings: clusters > 0");
  Rng rng(derive_seed(seed, "mixture-embeddings"));
  std::vector<double> means(clusters * dim);
  for (double& v : means) v = rng.next_gaussian();

  embed::EmbeddingStore store(dim);
  if (cluster_of) cluster_of->clear();
  std::vector<double> vec(dim);
  char id[32];
  for (std::size_t i = 0; i < items; ++i) {
    const std::size_t c = i % clusters;  // balanced components
    for (std::size_t k = 0; k < dim; ++k)
      vec[k] = means[c * dim + k] + spread * rng.next_gaussian();
    std::snprintf(id, sizeof(id), "I%05zu", i);
    store.insert(id, vec);
    if (cluster_of) cluster_of->push_back(c);
  }
  return store;
}

namespace {

constexpr std::array<const char*, 8> kMains = {"Kitchen", "Audio",  "Fitness", "Office",
                                               "Garden",  "Travel", "Crafts",  "Grooming"};
constexpr std::array<std::array<const char*, 3>, 8> kSubs = {{
    {"Utensils", "Cookware", "Storage"},
    {"Headphones", "Speakers", "Accessories"},
    {"Weights", "Mats", "Recovery"},
    {"Desk Gear", "Paper Goods", "Organizers"},
    {"Tools", "Planters", "Watering"},
    {"Luggage", "Packing", "Comfort"},
    {"Yarn", "Paint", "Paper"},
    {"Shaving", "Hair", "Skin"},
}};
constexpr std::array<const char*, 8> kAdjectives = {"Compact", "Classic", "Premium", "Eco",
                                                    "Pro",     "Mini",    "Deluxe",  "Everyday"};
constexpr std::array<const char*, 6> kVariants = {"Set", "Kit", "Duo", "Plus", "Max", "Lite"};

}  // namespace

SyntheticCorpus make_corpus(const CorpusSpec& spec) {
  SyntheticCorpus out;
  out.embeddings = make_mixture_embeddings(spec.items, spec.dim, spec.clusters,
                                           spec.cluster_spread, spec.seed, &out.cluster_of);

  Rng rng(derive_seed(spec.seed, "synthetic-corpus"));

  // Metadata: the category path tracks the embedding cluster.
  for (std::size_t i = 0; i < spec.items; ++i) {
    const std::string& id = out.embeddings.ids()[i];
    const std::size_t cluster = out.cluster_of[i];
    const std::size_t main_idx = cluster % kMains.size();
    corpus::ItemMeta meta;
    meta.item_id = id;
    const char* sub = kSubs[main_idx][(cluster / kMains.size()) % kSubs[main_idx].size()];
    meta.categories = {"Retail", kMains[main_idx], sub};
    meta.title = std::string(kAdjectives[rng.next_below(kAdjectives.size())]) + " " + sub +
                 " " + kVariants[rng.next_below(kVariants.size())] + " " +
                 std::to_string(100 + i % 900);
    out.meta.emplace(id, std::move(meta));
  }

  // Hidden successor chain: each item prefers a few cluster-mates.
  std::vector<std::vector<std::size_t>> by_cluster(spec.clusters);
  for (std::size_t i = 0; i < spec.items; ++i) by_cluster[out.cluster_of[i]].push_back(i);
  std::vector<std::array<std::size_t, 3>> successors(spec.items);
  for (std::size_t i = 0; i < spec.items; ++i) {
    const std::vector<std::size_t>& mates = by_cluster[out.cluster_of[i]];
    for (std::size_t s = 0; s < 3; ++s) {
      std::size_t pick = mates[rng.next_below(mates.size())];
      if (pick == i) pick = mates[(rng.next_below(mates.size()) + 1) % mates.size()];
      successors[i][s] = pick;
    }
  }

  std::vector<corpus::Event> events;
  for (std::size_t u = 0; u < spec.users; ++u) {
    char user_id[32];
    std::snprintf(user_id, sizeof(user_id), "U%04zu", u);
    const std::size_t len =
        spec.min_events + rng.next_below(spec.max_events - spec.min_events + 1);
    std::size_t current = rng.next_below(spec.items);
    std::int64_t timestamp = 1700000000 + static_cast<std::int64_t>(u) * 100000;
    std::vector<bool> visited(spec.items, false);
    for (std::size_t e = 0; e < len; ++e) {
      // avoid duplicate (user,item,timestamp) rows; rebuys get later stamps
      events.push_back(
          corpus::Event{user_id, out.embeddings.ids()[current], timestamp});
      timestamp += 60 + static_cast<std::int64_t>(rng.next_below(600));
      visited[current] = true;
      std::size_t next = current;
      for (int tries = 0; tries < 6; ++tries) {
        if (rng.next_unit() < spec.follow_probability)
          next = successors[current][rng.next_below(3)];
        else
          next = rng.next_below(spec.items);
        if (!visited[next]) break;
      }
      current = next;
    }
  }
  out.interactions = corpus::log_from_events(std::move(events));
  return out;
}

}  // namespace sidkit::synthetic
