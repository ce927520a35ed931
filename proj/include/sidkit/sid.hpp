#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sidkit/common.hpp"
#include "sidkit/rq.hpp"

namespace sidkit::sid {

struct SemanticId {
  std::vector<std::uint32_t> codes;

  auto operator<=>(const SemanticId&) const = default;
};

// "<|sid_begin|><s_a_97><s_b_168>...<|sid_end|>"; level letters run a..z,
// so at most 26 levels are renderable.
std::string render(const SemanticId& id);

// Inverse of render. Tolerates surrounding whitespace; rejects missing
// markers, repeated or out-of-order level letters and non-integer payloads.
SemanticId parse_sid(const std::string& text);

struct RegistryConfig {
  std::size_t random_last_levels = 0;
  std::uint64_t seed = 0;
};

// Forward (item -> SID) and inverse (SID -> items) maps over a whole store.
class SidRegistry {
 public:
  SidRegistry() = default;
  SidRegistry(std::map<std::string, SemanticId> forward);

  const std::map<std::string, SemanticId>& forward() const { return forward_; }
  const std::map<SemanticId, std::vector<std::string>>& inverse() const { return inverse_; }
  const SemanticId& sid_of(const std::string& item_id) const;

  // All items carrying this SID, ordered by item id; empty when unknown.
  const std::vector<std::string>& items_of(const SemanticId& id) const;

  std::size_t size() const { return forward_.size(); }

 private:
  std::map<std::string, SemanticId> forward_;
  std::map<SemanticId, std::vector<std::string>> inverse_;
};

// Quantizes every item in the store. The per-item generator is seeded with
// seed ^ hash(item_id), so repeated runs produce identical SIDs.
SidRegistry build_registry(const embed::EmbeddingStore& store, const rq::CodebookStack& stack,
                           const RegistryConfig& cfg);

// 1 - |items sharing their SID with another item| / |items|.
double uniqueness_rate(const SidRegistry& registry);

struct UniquenessReport {
  std::size_t total = 0;
  std::size_t unique = 0;
  std::size_t colliding = 0;
  double uniqueness = 0.0;
};

UniquenessReport uniqueness_report(const SidRegistry& registry);

}  // namespace sidkit::sid
