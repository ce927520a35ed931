#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sidkit/embedding.hpp"
#include "sidkit/reference.hpp"

using namespace sidkit;

namespace {

embed::EmbeddingStore store_of(std::size_t dim,
                               const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  embed::EmbeddingStore store(dim);
  for (const auto& [id, vec] : rows) store.insert(id, vec);
  return store;
}

embed::EmbeddingStore random_store(std::size_t dim, std::size_t count, Rng& rng) {
  embed::EmbeddingStore store(dim);
  std::vector<double> vec(dim);
  for (std::size_t i = 0; i < count; ++i) {
    for (double& v : vec) v = rng.next_gaussian();
    store.insert("x" + std::to_string(i), vec);
  }
  return store;
}

}  // namespace

TEST_CASE("similarity of identical vectors at T=1 is 1") {
  const std::vector<double> v = {0.3, -1.2, 0.5};
  CHECK(embed::similarity(v, v, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("similarity of orthogonal vectors is 0 at any temperature") {
  const std::vector<double> a = {1.0, 0.0};
  const std::vector<double> b = {0.0, 2.5};
  CHECK(embed::similarity(a, b, 0.07) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(embed::similarity(a, b, 3.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("similarity hand case: cos 45deg over T=0.5 is sqrt(2)") {
  const std::vector<double> a = {1.0, 0.0};
  const std::vector<double> b = {1.0, 1.0};
  CHECK(embed::similarity(a, b, 0.5) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("zero-norm vectors are a domain error") {
  const std::vector<double> zero = {0.0, 0.0};
  const std::vector<double> unit = {1.0, 0.0};
  CHECK_THROWS_AS(embed::similarity(zero, unit, 1.0), std::domain_error);
  CHECK_THROWS_AS(embed::similarity(unit, zero, 1.0), std::domain_error);
}

TEST_CASE("loss with one positive and no negatives is exactly zero") {
  auto store = store_of(2, {{"a", {1.0, 0.0}}, {"p", {0.0, 1.0}}});
  CHECK(embed::contrastive_loss(store, "a", {"p"}, {}, 0.07) == doctest::Approx(0.0));
}

TEST_CASE("equal positive and negative logits give ln 2") {
  // p and n sit symmetrically around the anchor.
  auto store = store_of(2, {{"a", {1.0, 0.0}}, {"p", {1.0, 1.0}}, {"n", {1.0, -1.0}}});
  CHECK(embed::contrastive_loss(store, "a", {"p"}, {"n"}, 0.25) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("empty positive set is rejected") {
  auto store = store_of(2, {{"a", {1.0, 0.0}}, {"n", {0.0, 1.0}}});
  CHECK_THROWS_AS(embed::contrastive_loss(store, "a", {}, {"n"}, 1.0), std::invalid_argument);
}

TEST_CASE("loss matches the direct transcription on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    auto store = random_store(8, 6, rng);
    const std::vector<std::string> positives = {"x1", "x2"};
    const std::vector<std::string> negatives = {"x3", "x4", "x5"};
    const double mine = embed::contrastive_loss(store, "x0", positives, negatives, 0.3);
    const double direct = ref::contrastive_loss_direct(store, "x0", positives, negatives, 0.3);
    CHECK(mine == doctest::Approx(direct).epsilon(1e-10));
    CHECK(mine >= -1e-12);
  }
}

TEST_CASE("gradients vanish when the loss is constant") {
  auto store = store_of(3, {{"a", {1.0, 0.2, -0.4}}, {"p", {0.5, 1.0, 0.0}}});
  const auto grads = embed::contrastive_grad(store, "a", {"p"}, {}, 0.07);
  for (const auto& [id, grad] : grads)
    for (double g : grad) CHECK(g == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(7);
  int checked = 0;
  for (std::size_t dim : {std::size_t{4}, std::size_t{32}}) {
    for (std::size_t n_pos : {std::size_t{1}, std::size_t{3}}) {
      for (std::size_t n_neg : {std::size_t{0}, std::size_t{5}}) {
        for (int trial = 0; trial < 4; ++trial) {
          auto store = random_store(dim, 1 + n_pos + n_neg, rng);
          std::vector<std::string> positives, negatives;
          for (std::size_t p = 0; p < n_pos; ++p) positives.push_back("x" + std::to_string(1 + p));
          for (std::size_t n = 0; n < n_neg; ++n)
            negatives.push_back("x" + std::to_string(1 + n_pos + n));
          const auto analytic = embed::contrastive_grad(store, "x0", positives, negatives, 0.2);
          const auto numeric =
              ref::finite_difference_grad(store, "x0", positives, negatives, 0.2, 1e-5);
          for (const auto& [id, grad] : analytic) {
            double diff = 0.0, norm = 0.0;
            for (std::size_t i = 0; i < grad.size(); ++i) {
              diff += (grad[i] - numeric.at(id)[i]) * (grad[i] - numeric.at(id)[i]);
              norm += numeric.at(id)[i] * numeric.at(id)[i];
            }
            const double rel = std::sqrt(diff) / std::max(std::sqrt(norm), 1e-9);
            CHECK(rel <= 1e-4);
          }
          ++checked;
        }
      }
    }
  }
  CHECK(checked == 32);
}

TEST_CASE("anchor gradient is orthogonal to the anchor") {
  Rng rng(31);
  auto store = random_store(8, 5, rng);
  const auto grads = embed::contrastive_grad(store, "x0", {"x1"}, {"x2", "x3", "x4"}, 0.1);
  double dot = 0.0;
  const auto anchor = store.vec("x0");
  for (std::size_t i = 0; i < anchor.size(); ++i) dot += grads.at("x0")[i] * anchor[i];
  CHECK(std::fabs(dot) <= 1e-8);
}

TEST_CASE("loss is invariant to positive rescaling of any vector") {
  Rng rng(77);
  auto store = random_store(6, 5, rng);
  const double before = embed::contrastive_loss(store, "x0", {"x1"}, {"x2", "x3"}, 0.15);
  std::vector<double> doubled(store.vec("x0").begin(), store.vec("x0").end());
  for (double& v : doubled) v *= 2.0;
  store.insert("x0", doubled);
  const double after = embed::contrastive_loss(store, "x0", {"x1"}, {"x2", "x3"}, 0.15);
  CHECK(std::fabs(before - after) <= 1e-9);
}

namespace {

corpus::CoEngagementSet two_cluster_pairs() {
  std::map<std::string, std::set<std::string>> positives;
  std::vector<std::string> universe;
  auto group = [&](const std::vector<std::string>& ids) {
    for (const std::string& a : ids) {
      universe.push_back(a);
      for (const std::string& b : ids)
        if (a != b) positives[a].insert(b);
    }
  };
  group({"g0a", "g0b", "g0c", "g0d"});
  group({"g1a", "g1b", "g1c", "g1d"});
  return corpus::CoEngagementSet(std::move(positives), std::move(universe));
}

embed::EmbeddingStore two_cluster_store() {
  Rng rng(5);
  embed::EmbeddingStore store(8);
  const std::vector<std::string> ids = {"g0a", "g0b", "g0c", "g0d",
                                        "g1a", "g1b", "g1c", "g1d"};
  std::vector<double> vec(8);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (double& v : vec) v = rng.next_gaussian();
    store.insert(ids[i], vec);
  }
  return store;
}

double mean_within_group_cosine(const embed::EmbeddingStore& store) {
  auto cosine = [&](const std::string& a, const std::string& b) {
    return embed::similarity(store.vec(a), store.vec(b), 1.0);
  };
  const std::vector<std::vector<std::string>> groups = {
      {"g0a", "g0b", "g0c", "g0d"}, {"g1a", "g1b", "g1c", "g1d"}};
  double total = 0.0;
  int count = 0;
  for (const auto& group : groups)
    for (std::size_t i = 0; i < group.size(); ++i)
      for (std::size_t j = i + 1; j < group.size(); ++j) {
        total += cosine(group[i], group[j]);
        ++count;
      }
  return total / count;
}

}  // namespace

TEST_CASE("refinement: zero epochs and zero learning rate are no-ops") {
  auto store = two_cluster_store();
  auto pairs = two_cluster_pairs();

  embed::ContrastiveConfig cfg;
  cfg.epochs = 0;
  embed::RefineResult untouched = embed::refine_embeddings(store, pairs, cfg);
  CHECK(untouched.store.data() == store.data());
  CHECK(untouched.epoch_mean_loss.empty());

  cfg.epochs = 5;
  cfg.learning_rate = 0.0;
  embed::RefineResult frozen = embed::refine_embeddings(store, pairs, cfg);
  CHECK(frozen.store.data() == store.data());
  REQUIRE(frozen.epoch_mean_loss.size() == 5);
  for (double loss : frozen.epoch_mean_loss)
    CHECK(loss == doctest::Approx(frozen.epoch_mean_loss.front()).epsilon(1e-12));
}

TEST_CASE("refinement raises within-group cosine on a two-cluster toy set") {
  auto store = two_cluster_store();
  auto pairs = two_cluster_pairs();
  const double before = mean_within_group_cosine(store);

  embed::ContrastiveConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 0.05;
  cfg.negatives_per_anchor = 4;
  cfg.temperature = 0.2;
  cfg.seed = 13;
  embed::RefineResult refined = embed::refine_embeddings(store, pairs, cfg);
  const double after = mean_within_group_cosine(refined.store);
  CHECK(after > before);
}
