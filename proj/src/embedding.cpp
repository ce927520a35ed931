#include "sidkit/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sidkit::embed {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("EmbeddingStore: dimension must be positive");
}

void EmbeddingStore::insert(const std::string& item_id, std::span<const double> vec) {
  if (vec.size() != dim_)
    throw std::invalid_argument("EmbeddingStore: vector for '" + item_id +
                                "' has dimension " + std::to_string(vec.size()) +
                                ", expected " + std::to_string(dim_));
  for (double x : vec)
    if (!std::isfinite(x))
      throw std::invalid_argument("EmbeddingStore: non-finite component in '" + item_id + "'");
  auto [it, inserted] = index_.emplace(item_id, ids_.size());
  if (!inserted) {
    std::copy(vec.begin(), vec.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    return;
  }
  ids_.push_back(item_id);
  data_.insert(data_.end(), vec.begin(), vec.end());
}

bool EmbeddingStore::contains(const std::string& item_id) const {
  return index_.count(item_id) != 0;
}

std::span<const double> EmbeddingStore::vec(const std::string& item_id) const {
  auto it = index_.find(item_id);
  if (it == index_.end())
    throw std::out_of_range("EmbeddingStore: unknown item '" + item_id + "'");
  return row(it->second);
}

std::span<const double> EmbeddingStore::row(std::size_t index) const {
  return {data_.data() + index * dim_, dim_};
}

std::span<double> EmbeddingStore::mutable_row(std::size_t index) {
  return {data_.data() + index * dim_, dim_};
}

std::size_t EmbeddingStore::index_of(const std::string& item_id) const {
  auto it = index_.find(item_id);
  if (it == index_.end())
    throw std::out_of_range("EmbeddingStore: unknown item '" + item_id + "'");
  return it->second;
}

double similarity(std::span<const double> a, std::span<const double> b, double temperature) {
  if (temperature <= 0.0)
    throw std::invalid_argument("similarity: temperature must be positive");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw std::domain_error("similarity: zero-norm vector");
  return dot(a, b) / (na * nb * temperature);
}

double contrastive_loss(const EmbeddingStore& store, const std::string& anchor,
                        const std::vector<std::string>& positives,
                        const std::vector<std::string>& negatives, double temperature) {
  if (positives.empty())
    throw std::invalid_argument("contrastive_loss: positive set must not be empty");
  std::span<const double> h_anchor = store.vec(anchor);
  std::vector<double> neg_logits;
  neg_logits.reserve(negatives.size());
  for (const std::string& n : negatives)
    neg_logits.push_back(similarity(h_anchor, store.vec(n), temperature));

  double loss = 0.0;
  for (const std::string& p : positives) {
    const double pos_logit = similarity(h_anchor, store.vec(p), temperature);
    double max_logit = pos_logit;
    for (double l : neg_logits) max_logit = std::max(max_logit, l);
    double denom = std::exp(pos_logit - max_logit);
    for (double l : neg_logits) denom += std::exp(l - max_logit);
    loss += (std::log(denom) + max_logit) - pos_logit;
  }
  return loss / static_cast<double>(positives.size());
}

namespace {

// d(normalized(h) . u)/dh = (u - (nh . u) nh) / |h| for a fixed unit vector u.
void add_similarity_grad(std::span<const double> raw, std::span<const double> unit_self,
                         std::span<const double> unit_other, double coeff, double temperature,
                         std::vector<double>& out) {
  const double raw_norm = norm2(raw);
  const double cosine = dot(unit_self, unit_other);
  const double scale = coeff / (temperature * raw_norm);
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] += scale * (unit_other[i] - cosine * unit_self[i]);
}

std::vector<double> normalized(std::span<const double> v) {
  const double n = norm2(v);
  if (n == 0.0) throw std::domain_error("contrastive_grad: zero-norm vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

}  // namespace

std::map<std::string, std::vector<double>> contrastive_grad(
    const EmbeddingStore& store, const std::string& anchor,
    const std::vector<std::string>& positives, const std::vector<std::string>& negatives,
    double temperature) {
  if (positives.empty())
    throw std::invalid_argument("contrastive_grad: positive set must not be empty");
  const std::size_t dim = store.dim();
  std::span<const double> h_anchor = store.vec(anchor);
  const std::vector<double> u_anchor = normalized(h_anchor);

  std::vector<std::vector<double>> u_pos, u_neg;
  std::vector<double> pos_logit, neg_logit;
  for (const std::string& p : positives) {
    u_pos.push_back(normalized(store.vec(p)));
    pos_logit.push_back(dot(u_anchor, u_pos.back()) / temperature);
  }
  for (const std::string& n : negatives) {
    u_neg.push_back(normalized(store.vec(n)));
    neg_logit.push_back(dot(u_anchor, u_neg.back()) / temperature);
  }

  // dL/ds for the positive logit of each term and for every negative logit.
  const double inv_p = 1.0 / static_cast<double>(positives.size());
  std::vector<double> dl_dpos(positives.size(), 0.0);
  std::vector<double> dl_dneg(negatives.size(), 0.0);
  for (std::size_t p = 0; p < positives.size(); ++p) {
    double max_logit = pos_logit[p];
    for (double l : neg_logit) max_logit = std::max(max_logit, l);
    const double e_pos = std::exp(pos_logit[p] - max_logit);
    double denom = e_pos;
    for (double l : neg_logit) denom += std::exp(l - max_logit);
    dl_dpos[p] = inv_p * (e_pos / denom - 1.0);
    for (std::size_t n = 0; n < negatives.size(); ++n)
      dl_dneg[n] += inv_p * (std::exp(neg_logit[n] - max_logit) / denom);
  }

  std::map<std::string, std::vector<double>> grads;
  auto slot = [&](const std::string& id) -> std::vector<double>& {
    return grads.try_emplace(id, std::vector<double>(dim, 0.0)).first->second;
  };

  std::vector<double>& g_anchor = slot(anchor);
  for (std::size_t p = 0; p < positives.size(); ++p) {
    add_similarity_grad(h_anchor, u_anchor, u_pos[p], dl_dpos[p], temperature, g_anchor);
    add_similarity_grad(store.vec(positives[p]), u_pos[p], u_anchor, dl_dpos[p], temperature,
                        slot(positives[p]));
  }
  for (std::size_t n = 0; n < negatives.size(); ++n) {
    add_similarity_grad(h_anchor, u_anchor, u_neg[n], dl_dneg[n], temperature, g_anchor);
    add_similarity_grad(store.vec(negatives[n]), u_neg[n], u_anchor, dl_dneg[n], temperature,
                        slot(negatives[n]));
  }
  return grads;
}

RefineResult refine_embeddings(const EmbeddingStore& store,
                               const corpus::CoEngagementSet& pairs,
                               const ContrastiveConfig& cfg) {
  if (cfg.temperature <= 0.0)
    throw std::invalid_argument("refine_embeddings: temperature must be positive");
  if (cfg.learning_rate < 0.0)
    throw std::invalid_argument("refine_embeddings: learning rate must be non-negative");

  RefineResult result{store, {}};
  std::vector<std::string> anchors;
  for (const std::string& id : store.ids())
    if (pairs.has_positives(id)) anchors.push_back(id);
  if (anchors.empty() || cfg.epochs == 0) return result;

  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng(derive_seed(cfg.seed, "refine-order-" + std::to_string(epoch)));
    std::vector<std::size_t> order(anchors.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[order_rng.next_below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const std::size_t count = end - start;
      std::vector<std::map<std::string, std::vector<double>>> batch_grads(count);
      std::vector<double> batch_losses(count, 0.0);

#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(count); ++b) {
        const std::string& anchor = anchors[order[start + static_cast<std::size_t>(b)]];
        const auto& pos_set = pairs.positives(anchor);
        std::vector<std::string> positives(pos_set.begin(), pos_set.end());
        Rng neg_rng(derive_seed(cfg.seed, "refine-neg-" + std::to_string(epoch) + "-" + anchor));
        std::vector<std::string> negatives =
            pairs.sample_negatives(anchor, cfg.negatives_per_anchor, neg_rng);
        batch_losses[static_cast<std::size_t>(b)] = contrastive_loss(
            result.store, anchor, positives, negatives, cfg.temperature);
        if (cfg.learning_rate > 0.0)
          batch_grads[static_cast<std::size_t>(b)] = contrastive_grad(
              result.store, anchor, positives, negatives, cfg.temperature);
      }

      for (std::size_t b = 0; b < count; ++b) {
        epoch_loss += batch_losses[b];
        for (const auto& [id, grad] : batch_grads[b]) {
          std::span<double> target = result.store.mutable_row(result.store.index_of(id));
          for (std::size_t i = 0; i < grad.size(); ++i)
            target[i] -= cfg.learning_rate * grad[i];
        }
      }
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(anchors.size()));
  }
  return result;
}

}  // namespace sidkit::embed
