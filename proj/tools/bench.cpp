// Throughput comparison of the OpenMP kernels against the serial reference
// paths on the standard synthetic workload.

#include <chrono>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sidkit/eval.hpp"
#include "sidkit/outparse.hpp"
#include "sidkit/reference.hpp"
#include "sidkit/rq.hpp"
#include "sidkit/sid.hpp"
#include "sidkit/synthetic.hpp"

using namespace sidkit;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-28s serial %8.3fs   parallel %8.3fs   speedup %5.2fx\n", name, serial,
              parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t items = 20000;
  if (argc > 1) items = std::stoul(argv[1]);
#ifdef _OPENMP
  std::printf("threads: %d, items: %zu\n", omp_get_max_threads(), items);
#else
  std::printf("threads: 1 (no OpenMP), items: %zu\n", items);
#endif

  std::vector<std::size_t> clusters;
  embed::EmbeddingStore store =
      synthetic::make_mixture_embeddings(items, 32, 256, 0.35, 42, &clusters);

  rq::TrainConfig cfg;
  cfg.levels = 4;
  cfg.codes_per_level = 256;
  cfg.seed = 42;
  cfg.kmeans.max_iterations = 5;
  rq::CodebookStack stack = rq::rq_kmeans_init(store, cfg);

  // Batch assignment at level 0.
  {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::uint32_t> serial_codes(store.size());
    for (std::size_t i = 0; i < store.size(); ++i)
      serial_codes[i] = ref::nearest_scan(store.row(i), stack.levels[0]);
    const double serial = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const std::vector<std::uint32_t> parallel_codes =
        rq::assign_batch(stack.levels[0], store.data(), store.size());
    const double parallel = seconds_since(t0);

    for (std::size_t i = 0; i < store.size(); ++i)
      if (serial_codes[i] != parallel_codes[i]) {
        std::printf("MISMATCH at %zu\n", i);
        return 1;
      }
    report("level-0 assignment", serial, parallel);
  }

  // Full greedy quantization down the stack.
  {
    auto t0 = std::chrono::steady_clock::now();
    std::size_t checksum_serial = 0;
    for (std::size_t i = 0; i < store.size(); ++i) {
      const std::vector<std::uint32_t> codes = ref::quantize_scan(store.row(i), stack);
      checksum_serial += codes.back();
    }
    const double serial = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    sid::RegistryConfig rc{0, 42};
    const sid::SidRegistry registry = sid::build_registry(store, stack, rc);
    const double parallel = seconds_since(t0);

    std::size_t checksum_parallel = 0;
    for (const auto& [item, semantic_id] : registry.forward())
      checksum_parallel += semantic_id.codes.back();
    if (checksum_serial != checksum_parallel) {
      std::printf("MISMATCH in quantization checksums\n");
      return 1;
    }
    report("full-stack tokenization", serial, parallel);
  }

  // Per-user metric evaluation over wide candidate lists.
  {
    std::vector<RerankEpisode> episodes;
    const std::size_t users = 20000;
    const int width = 100;
    Rng rng(7);
    for (std::size_t u = 0; u < users; ++u) {
      RerankEpisode e;
      e.user_id = "U" + std::to_string(u);
      for (int c = 0; c < width; ++c) e.candidates.push_back("I" + std::to_string(c));
      e.pre_rank_position = static_cast<int>(rng.next_below(width)) + 1;
      e.target = e.candidates[static_cast<std::size_t>(e.pre_rank_position - 1)];
      episodes.push_back(std::move(e));
    }
    std::vector<outparse::ParsedOutput> outputs(episodes.size());
    const std::vector<std::size_t> ks = {1, 5, 10, 50, 100};

    auto t0 = std::chrono::steady_clock::now();
    double serial_sum = 0.0;
    for (const RerankEpisode& e : episodes)
      for (std::size_t k : ks) {
        serial_sum += ref::recall_scan(e.candidates, e.target, k);
        serial_sum += ref::ndcg_scan(e.candidates, e.target, k);
      }
    const double serial = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const eval::EvalReport rep = eval::evaluate_rerank(episodes, outputs, ks);
    const double parallel = seconds_since(t0);

    double parallel_sum = 0.0;
    for (std::size_t k : ks)
      parallel_sum += (rep.rows[0].recall.at(k) + rep.rows[0].ndcg.at(k)) *
                      static_cast<double>(episodes.size());
    if (std::abs(serial_sum - parallel_sum) > 1e-6 * serial_sum) {
      std::printf("MISMATCH in metric sums (%f vs %f)\n", serial_sum, parallel_sum);
      return 1;
    }
    report("metric evaluation", serial, parallel);
  }

  return 0;
}
