#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "sidkit/io.hpp"
#include "sidkit/prompt.hpp"
#include "sidkit/synthetic.hpp"

using namespace sidkit;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string file_bytes(const std::string& path) { return io::read_text_file(path); }

}  // namespace

TEST_CASE("embedding binary round-trips byte-exactly") {
  std::vector<std::size_t> clusters;
  embed::EmbeddingStore store = synthetic::make_mixture_embeddings(37, 5, 4, 0.5, 3, &clusters);
  const std::string first = temp_path("sidkit_emb_a.sidemb");
  const std::string second = temp_path("sidkit_emb_b.sidemb");
  io::write_embeddings(first, store);
  embed::EmbeddingStore loaded = io::read_embeddings(first);
  io::write_embeddings(second, loaded);
  CHECK(file_bytes(first) == file_bytes(second));
  CHECK(loaded.size() == store.size());
  CHECK(loaded.dim() == store.dim());
  CHECK(loaded.ids() == store.ids());
}

TEST_CASE("json-lines embeddings are accepted on input") {
  const std::string path = temp_path("sidkit_emb.jsonl");
  {
    std::ofstream out(path, std::ios::trunc);
    out << R"({"item_id":"x","embedding":[1.0,2.0,3.0]})" << "\n";
    out << R"({"item_id":"y","embedding":[4.0,5.0,6.0]})" << "\n";
  }
  embed::EmbeddingStore store = io::read_embeddings(path);
  CHECK(store.size() == 2);
  CHECK(store.dim() == 3);
  CHECK(store.vec("y")[2] == doctest::Approx(6.0));
}

TEST_CASE("codebook checkpoint round-trips byte-exactly and reloads the config") {
  std::vector<std::size_t> clusters;
  embed::EmbeddingStore store = synthetic::make_mixture_embeddings(64, 4, 8, 0.4, 9, &clusters);
  rq::TrainConfig cfg;
  cfg.levels = 3;
  cfg.codes_per_level = 8;
  cfg.random_last = true;
  cfg.random_last_levels = 2;
  cfg.ema_decay = 0.96;
  cfg.seed = 1234;
  rq::CodebookStack stack = rq::rq_kmeans_init(store, cfg);

  const std::string first = temp_path("sidkit_cbk_a.sidcbk");
  const std::string second = temp_path("sidkit_cbk_b.sidcbk");
  io::write_codebook(first, stack, cfg);
  io::CodebookFile loaded = io::read_codebook(first);
  io::write_codebook(second, loaded.stack, loaded.config);
  CHECK(file_bytes(first) == file_bytes(second));

  CHECK(loaded.stack.level_count() == 3);
  CHECK(loaded.stack.dim == 4);
  CHECK(loaded.config.random_last);
  CHECK(loaded.config.random_last_levels == 2);
  CHECK(loaded.config.ema_decay == doctest::Approx(0.96));
  CHECK(loaded.config.seed == 1234);
  // Centroids survive at f32 precision.
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < stack.levels[k].centroids.size(); ++i)
      CHECK(loaded.stack.levels[k].centroids[i] ==
            doctest::Approx(stack.levels[k].centroids[i]).epsilon(1e-6));
}

TEST_CASE("registry export round-trips byte-exactly") {
  std::map<std::string, sid::SemanticId> forward;
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    sid::SemanticId id;
    for (int k = 0; k < 4; ++k)
      id.codes.push_back(static_cast<std::uint32_t>(rng.next_below(256)));
    forward.emplace("item" + std::to_string(i), std::move(id));
  }
  sid::SidRegistry registry{std::move(forward)};

  const std::string first = temp_path("sidkit_reg_a.jsonl");
  const std::string second = temp_path("sidkit_reg_b.jsonl");
  io::write_registry(first, registry);
  sid::SidRegistry loaded = io::read_registry(first);
  io::write_registry(second, loaded);
  CHECK(file_bytes(first) == file_bytes(second));
  CHECK(loaded.forward() == registry.forward());
}

TEST_CASE("chat samples round-trip byte-exactly") {
  corpus::MetaMap meta = testfix::demo_meta();
  sid::SidRegistry registry = testfix::demo_registry();
  prompt::PromptBuilder builder(registry, meta);
  RerankEpisode episode = testfix::demo_episode();

  std::vector<prompt::ChatSample> samples;
  for (int i = 0; i < 3; ++i) {
    prompt::ChatSample sample = builder.build_chat_sample(
        episode, builder.canonical_trace(episode, "Step 1: variant " + std::to_string(i) + "."),
        {.with_category_hierarchy = i % 2 == 0});
    sample.provenance.strategy =
        i % 2 == 0 ? prompt::Strategy::targeted : prompt::Strategy::rejection;
    sample.provenance.knowledge_priming = i % 2 == 0;
    sample.provenance.attempts = static_cast<std::size_t>(i + 1);
    samples.push_back(std::move(sample));
  }

  const std::string first = temp_path("sidkit_samples_a.jsonl");
  const std::string second = temp_path("sidkit_samples_b.jsonl");
  io::write_chat_samples(first, samples);
  std::vector<prompt::ChatSample> loaded = io::read_chat_samples(first);
  io::write_chat_samples(second, loaded);
  CHECK(file_bytes(first) == file_bytes(second));
  REQUIRE(loaded.size() == samples.size());
  CHECK(loaded[1].provenance.strategy == prompt::Strategy::rejection);
  CHECK(loaded[2].provenance.attempts == 3);
  CHECK(loaded[0].messages[2].content == samples[0].messages[2].content);
}

TEST_CASE("episodes round-trip with validation") {
  std::vector<RerankEpisode> episodes = {testfix::demo_episode()};
  const std::string path = temp_path("sidkit_episodes.jsonl");
  io::write_episodes(path, episodes);
  std::vector<RerankEpisode> loaded = io::read_episodes(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].user_id == episodes[0].user_id);
  CHECK(loaded[0].candidates == episodes[0].candidates);
  CHECK(loaded[0].pre_rank_position == episodes[0].pre_rank_position);
}

TEST_CASE("interaction splits round-trip through the loader") {
  std::vector<corpus::Event> events;
  for (int u = 0; u < 4; ++u)
    for (int t = 0; t < 6; ++t)
      events.push_back({"u" + std::to_string(u), "i" + std::to_string((u + t) % 7), t});
  corpus::InteractionLog log = corpus::log_from_events(events);
  const std::string path = temp_path("sidkit_log.jsonl");
  io::write_interactions(path, log);
  corpus::InteractionLog loaded = corpus::load_interactions(path);
  CHECK(loaded.event_count() == log.event_count());
  CHECK(loaded.user_count() == log.user_count());
}
