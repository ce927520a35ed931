#pragma once

#include <string>
#include <vector>

#include "sidkit/corpus.hpp"
#include "sidkit/embedding.hpp"
#include "sidkit/rq.hpp"
#include "sidkit/sid.hpp"

namespace sidkit::ablate {

struct AblationRow {
  bool diversity = false;
  bool dead_code_reset = false;
  bool ema = false;
  bool random_last = false;
  bool contrastive = false;
  sid::UniquenessReport report;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // grouped: ema+reset, ema only, no ema
};

struct AblationConfig {
  rq::TrainConfig train;               // shared geometry, epochs and seed
  embed::ContrastiveConfig refine;     // applied for contrastive rows
  std::uint64_t registry_seed = 0;     // per-item draw seed for tokenization
};

// Runs all 32 technique combinations over one embedding set. Codebook
// initialization is shared between configurations with the same refined
// input, which leaves results identical to independent runs.
AblationResult run_ablation(const embed::EmbeddingStore& store,
                            const corpus::CoEngagementSet& pairs, const AblationConfig& cfg);

std::string ablation_table(const AblationResult& result);
std::string ablation_csv(const AblationResult& result);
std::string ablation_json(const AblationResult& result);

}  // namespace sidkit::ablate
