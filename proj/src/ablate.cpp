#include "sidkit/ablate.hpp"

#include <cstdio>
#include <optional>
#include <sstream>

#include <json.hpp>

namespace sidkit::ablate {

namespace {

std::vector<AblationRow> grid() {
  std::vector<AblationRow> rows;
  // Block 1: EMA + dead-code reset.
  for (int div = 0; div <= 1; ++div)
    for (int rnd = 0; rnd <= 1; ++rnd)
      for (int ctr = 0; ctr <= 1; ++ctr)
        rows.push_back({div != 0, true, true, rnd != 0, ctr != 0, {}});
  // Block 2: EMA without dead-code reset.
  for (int div = 0; div <= 1; ++div)
    for (int rnd = 0; rnd <= 1; ++rnd)
      for (int ctr = 0; ctr <= 1; ++ctr)
        rows.push_back({div != 0, false, true, rnd != 0, ctr != 0, {}});
  // Block 3: no EMA (collapse regime).
  for (int div = 0; div <= 1; ++div)
    for (int dcr = 1; dcr >= 0; --dcr)
      for (int rnd = 0; rnd <= 1; ++rnd)
        for (int ctr = 0; ctr <= 1; ++ctr)
          rows.push_back({div != 0, dcr != 0, false, rnd != 0, ctr != 0, {}});
  return rows;
}

}  // namespace

AblationResult run_ablation(const embed::EmbeddingStore& store,
                            const corpus::CoEngagementSet& pairs, const AblationConfig& cfg) {
  AblationResult result;
  result.rows = grid();

  std::optional<embed::EmbeddingStore> refined;
  std::optional<rq::CodebookStack> init_raw;
  std::optional<rq::CodebookStack> init_refined;

  for (AblationRow& row : result.rows) {
    rq::TrainConfig train = cfg.train;
    train.diversity = row.diversity;
    train.dead_code_reset = row.dead_code_reset;
    train.ema = row.ema;
    train.random_last = row.random_last;
    train.contrastive_pre = row.contrastive;

    const embed::EmbeddingStore* input = &store;
    if (row.contrastive) {
      if (!refined.has_value())
        refined = embed::refine_embeddings(store, pairs, cfg.refine).store;
      input = &*refined;
    }

    std::optional<rq::CodebookStack>& init_cache = row.contrastive ? init_refined : init_raw;
    if (!init_cache.has_value()) init_cache = rq::rq_kmeans_init(*input, train);

    rq::CodebookStack stack = *init_cache;
    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch)
      rq::train_epoch(*input, stack, train, epoch);

    sid::RegistryConfig registry_cfg;
    registry_cfg.random_last_levels = train.effective_random_last();
    registry_cfg.seed = cfg.registry_seed;
    const sid::SidRegistry registry = sid::build_registry(*input, stack, registry_cfg);
    row.report = sid::uniqueness_report(registry);
  }
  return result;
}

namespace {

const char* block_heading(std::size_t row_index) {
  if (row_index == 0) return "== EMA update + dead-code reset ==";
  if (row_index == 8) return "== EMA update, no dead-code reset ==";
  if (row_index == 16) return "== no EMA update ==";
  return nullptr;
}

char mark(bool b) { return b ? 'x' : '-'; }

}  // namespace

std::string ablation_table(const AblationResult& result) {
  std::ostringstream out;
  out << "div  reset  ema  rand  ctr   uniqueness_%\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    if (const char* heading = block_heading(i)) out << heading << "\n";
    const AblationRow& row = result.rows[i];
    char line[96];
    std::snprintf(line, sizeof(line), " %c     %c     %c    %c     %c       %7.2f\n",
                  mark(row.diversity), mark(row.dead_code_reset), mark(row.ema),
                  mark(row.random_last), mark(row.contrastive), 100.0 * row.report.uniqueness);
    out << line;
  }
  return out.str();
}

std::string ablation_csv(const AblationResult& result) {
  std::ostringstream out;
  out << "diversity,dead_code_reset,ema,random_last,contrastive,uniqueness\n";
  for (const AblationRow& row : result.rows) {
    char line[96];
    std::snprintf(line, sizeof(line), "%d,%d,%d,%d,%d,%.6f\n", row.diversity ? 1 : 0,
                  row.dead_code_reset ? 1 : 0, row.ema ? 1 : 0, row.random_last ? 1 : 0,
                  row.contrastive ? 1 : 0, row.report.uniqueness);
    out << line;
  }
  return out.str();
}

std::string ablation_json(const AblationResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const AblationRow& row : result.rows) {
    rows.push_back({{"diversity", row.diversity},
                    {"dead_code_reset", row.dead_code_reset},
                    {"ema", row.ema},
                    {"random_last", row.random_last},
                    {"contrastive", row.contrastive},
                    {"uniqueness", row.report.uniqueness},
                    {"total", row.report.total},
                    {"colliding", row.report.colliding}});
  }
  return nlohmann::json{{"rows", rows}}.dump(2);
}

}  // namespace sidkit::ablate
