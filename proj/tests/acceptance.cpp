// Acceptance suite: one pass/fail line per criterion. Exit code is the
// number of failed criteria. Criteria that specify command-line behavior
// drive the real CLI binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "sidkit/ablate.hpp"
#include "sidkit/corpus.hpp"
#include "sidkit/embedding.hpp"
#include "sidkit/eval.hpp"
#include "sidkit/io.hpp"
#include "sidkit/outparse.hpp"
#include "sidkit/prompt.hpp"
#include "sidkit/reference.hpp"
#include "sidkit/reward.hpp"
#include "sidkit/rq.hpp"
#include "sidkit/sid.hpp"
#include "sidkit/synthetic.hpp"

using namespace sidkit;
using nlohmann::json;

namespace {

int failures = 0;
std::filesystem::path work_dir;

void verdict(bool ok, const std::string& name, const std::string& detail) {
  std::printf("[%s] %s — %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string path_in_work(const std::string& name) { return (work_dir / name).string(); }

int run_cli(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string(SIDKIT_CLI_PATH) + " " + args;
  if (!stdout_file.empty()) cmd += " > " + stdout_file;
  cmd += " 2> " + path_in_work("cli_stderr.log");
  return std::system(cmd.c_str());
}

json read_json_file(const std::string& path) { return json::parse(io::read_text_file(path)); }

// The shared tokenizer benchmark corpus: 20k points, 32 dims, a mixture of
// 256 Gaussians, plus interaction logs whose co-engagement follows the
// mixture components.
const synthetic::SyntheticCorpus& tokenizer_corpus() {
  static synthetic::SyntheticCorpus corpus = [] {
    synthetic::CorpusSpec spec;
    spec.items = 20000;
    spec.users = 6000;
    spec.dim = 32;
    spec.clusters = 256;
    spec.cluster_spread = 0.35;
    spec.seed = 42;
    return synthetic::make_corpus(spec);
  }();
  return corpus;
}

// ---------------------------------------------------------------------------
// Criterion 1: codebook-collapse direction on the synthetic corpus.
// ---------------------------------------------------------------------------
void criterion_collapse_direction() {
  const auto start = std::chrono::steady_clock::now();
  const embed::EmbeddingStore& store = tokenizer_corpus().embeddings;

  rq::TrainConfig cfg;
  cfg.ema = true;
  cfg.random_last = true;
  cfg.random_last_levels = 1;
  cfg.levels = 4;
  cfg.codes_per_level = 256;
  cfg.epochs = 15;
  cfg.seed = 42;

  rq::CodebookStack with_ema = rq::train(store, cfg);
  const sid::SidRegistry reg_ema =
      sid::build_registry(store, with_ema, {cfg.effective_random_last(), 42});
  const double uniq_ema = sid::uniqueness_rate(reg_ema);

  rq::TrainConfig no_ema_cfg = cfg;
  no_ema_cfg.ema = false;  // all else equal
  rq::CodebookStack without_ema = rq::train(store, no_ema_cfg);
  const sid::SidRegistry reg_plain =
      sid::build_registry(store, without_ema, {no_ema_cfg.effective_random_last(), 42});
  const double uniq_plain = sid::uniqueness_rate(reg_plain);

  const double elapsed = seconds_since(start);
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "ema+random-last %.2f%% (need >= 99), no-ema %.2f%% (need <= 75), %.0fs "
                "(need <= 300)",
                100.0 * uniq_ema, 100.0 * uniq_plain, elapsed);
  verdict(uniq_ema >= 0.99 && uniq_plain <= 0.75 && elapsed <= 300.0,
          "codebook-collapse direction", detail);
}

// ---------------------------------------------------------------------------
// Criterion 2: the ablate subcommand emits the full grid, grouped, ordered.
// ---------------------------------------------------------------------------
void criterion_ablation_grid() {
  const auto& corpus_data = tokenizer_corpus();
  const std::string emb_path = path_in_work("grid_embeddings.sidemb");
  const std::string log_path = path_in_work("grid_interactions.jsonl");
  io::write_embeddings(emb_path, corpus_data.embeddings);
  io::write_interactions(log_path, corpus_data.interactions);

  const std::string prefix = path_in_work("grid");
  const int rc = run_cli("ablate --embeddings " + emb_path + " --interactions " + log_path +
                             " --out " + prefix + " --epochs 8",
                         path_in_work("grid_stdout.txt"));
  if (rc != 0) {
    verdict(false, "ablation-grid shape", "ablate exited with status " + std::to_string(rc));
    return;
  }

  const json grid = read_json_file(prefix + ".json");
  const auto& rows = grid["rows"];
  bool ok = rows.size() == 32;

  // Grouping: rows 0..7 ema+reset, 8..15 ema only, 16..31 no ema.
  for (std::size_t i = 0; i < rows.size() && ok; ++i) {
    const bool ema = rows[i]["ema"].get<bool>();
    const bool reset = rows[i]["dead_code_reset"].get<bool>();
    if (i < 8)
      ok = ema && reset;
    else if (i < 16)
      ok = ema && !reset;
    else
      ok = !ema;
  }

  // All 32 distinct technique combinations must appear.
  std::set<std::vector<bool>> combos;
  for (const auto& row : rows)
    combos.insert({row["diversity"].get<bool>(), row["dead_code_reset"].get<bool>(),
                   row["ema"].get<bool>(), row["random_last"].get<bool>(),
                   row["contrastive"].get<bool>()});
  ok = ok && combos.size() == 32;

  double ema_min = 1.0, plain_max = 0.0;
  for (const auto& row : rows) {
    const double uniqueness = row["uniqueness"].get<double>();
    if (row["ema"].get<bool>())
      ema_min = std::min(ema_min, uniqueness);
    else
      plain_max = std::max(plain_max, uniqueness);
  }
  const bool ordered = ema_min > plain_max;

  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "32 rows in 3 blocks: %s; min(ema)=%.2f%% > max(no-ema)=%.2f%%: %s",
                ok ? "yes" : "no", 100.0 * ema_min, 100.0 * plain_max, ordered ? "yes" : "no");
  verdict(ok && ordered, "ablation-grid shape", detail);
}

// ---------------------------------------------------------------------------
// Criterion 3: analytic contrastive gradients vs central finite differences.
// ---------------------------------------------------------------------------
void criterion_gradient_check() {
  Rng rng(99);
  double worst = 0.0;
  int instances = 0;
  for (std::size_t dim : {std::size_t{4}, std::size_t{32}}) {
    for (std::size_t n_pos : {std::size_t{1}, std::size_t{3}}) {
      for (std::size_t n_neg : {std::size_t{0}, std::size_t{5}}) {
        const int trials = instances < 48 ? 7 : 1;  // 8 cells, 50 instances total
        for (int t = 0; t < trials && instances < 50; ++t) {
          embed::EmbeddingStore store(dim);
          std::vector<double> vec(dim);
          const std::size_t total = 1 + n_pos + n_neg;
          for (std::size_t i = 0; i < total; ++i) {
            for (double& v : vec) v = rng.next_gaussian();
            store.insert("v" + std::to_string(i), vec);
          }
          std::vector<std::string> positives, negatives;
          for (std::size_t p = 0; p < n_pos; ++p)
            positives.push_back("v" + std::to_string(1 + p));
          for (std::size_t n = 0; n < n_neg; ++n)
            negatives.push_back("v" + std::to_string(1 + n_pos + n));

          const auto analytic = embed::contrastive_grad(store, "v0", positives, negatives, 0.2);
          const auto numeric =
              ref::finite_difference_grad(store, "v0", positives, negatives, 0.2, 1e-5);
          for (const auto& [id, grad] : analytic) {
            double diff = 0.0, norm = 0.0;
            for (std::size_t i = 0; i < grad.size(); ++i) {
              diff += (grad[i] - numeric.at(id)[i]) * (grad[i] - numeric.at(id)[i]);
              norm += numeric.at(id)[i] * numeric.at(id)[i];
            }
            if (norm < 1e-18 && diff < 1e-18) continue;  // jointly zero
            worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-9));
          }
          ++instances;
        }
      }
    }
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail), "%d instances, max relative error %.2e (need <= 1e-4)",
                instances, worst);
  verdict(instances == 50 && worst <= 1e-4, "contrastive gradient check", detail);
}

// ---------------------------------------------------------------------------
// Criterion 4: greedy quantizer equals the exhaustive scan; telescoping.
// ---------------------------------------------------------------------------
void criterion_quantizer_oracle() {
  bool codes_ok = true;
  bool telescoping_ok = true;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(1000 + trial);
    const std::size_t items = 8 + rng.next_below(57);  // up to 64
    const std::size_t dim = 2 + rng.next_below(5);
    embed::EmbeddingStore store(dim);
    std::vector<double> vec(dim);
    for (std::size_t i = 0; i < items; ++i) {
      for (double& v : vec) v = rng.next_gaussian();
      store.insert("t" + std::to_string(i), vec);
    }
    rq::TrainConfig cfg;
    cfg.levels = 2;
    cfg.codes_per_level = 4;
    cfg.seed = trial;
    const rq::CodebookStack stack = rq::rq_kmeans_init(store, cfg);

    for (std::size_t i = 0; i < items; ++i) {
      Rng qrng(0);
      const rq::QuantizeResult fast = rq::quantize(store.row(i), stack, 0, qrng);
      const std::vector<std::uint32_t> oracle = ref::quantize_scan(store.row(i), stack);
      if (fast.codes != oracle) codes_ok = false;

      double diff_sq = 0.0, h_sq = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double reassembled = fast.reconstruction[k] + fast.residuals.back()[k];
        diff_sq += (store.row(i)[k] - reassembled) * (store.row(i)[k] - reassembled);
        h_sq += store.row(i)[k] * store.row(i)[k];
      }
      if (std::sqrt(diff_sq) > 1e-9 * std::max(1.0, std::sqrt(h_sq))) telescoping_ok = false;
    }
  }
  verdict(codes_ok && telescoping_ok, "quantizer oracle equivalence",
          std::string("100 seeded trials: greedy == exhaustive scan: ") +
              (codes_ok ? "yes" : "NO") +
              ", telescoping <= 1e-9: " + (telescoping_ok ? "yes" : "NO"));
}

// ---------------------------------------------------------------------------
// Criterion 5: parser fuzz plus the curated corpus.
// ---------------------------------------------------------------------------
struct CuratedCase {
  std::string raw;
  int n;
  outparse::Stage stage;
  std::vector<int> ranking;  // empty means "no ranking"
  bool reasoning = false;
};

std::vector<CuratedCase> curated_cases() {
  using outparse::Stage;
  std::vector<CuratedCase> cases;
  auto add = [&](std::string raw, int n, Stage stage, std::vector<int> ranking, bool reasoning) {
    cases.push_back({std::move(raw), n, stage, std::move(ranking), reasoning});
  };

  // Clean structured outputs.
  add(R"({"explanation":"Step 1 ...","recommendations":["3","1","2","4","5","6","7","8","9","10"]})",
      10, Stage::json, {2, 0, 1, 3, 4, 5, 6, 7, 8, 9}, true);
  add(R"({"explanation":"e","recommendations":["1","2","3"]})", 3, Stage::json, {0, 1, 2}, true);
  add(R"({"reasoning":"r","ranking":[2,1,3]})", 3, Stage::json, {1, 0, 2}, true);
  add(R"({"recommendations":[3,1,2]})", 3, Stage::json, {2, 0, 1}, false);
  add(R"({"recommendations":["2"]})", 4, Stage::json, {1, 0, 2, 3}, false);
  add(R"({"explanation":"only prose"})", 3, Stage::none, {}, false);
  add(R"({"recommendations":["1","2"],"explanation":"tail"})", 2, Stage::json, {0, 1}, true);
  add(R"({"ranking":["4","4","2"]})", 4, Stage::json, {3, 1, 0, 2}, false);
  add(R"({"recommendations":["10","9","8","7","6","5","4","3","2","1"]})", 10, Stage::json,
      {9, 8, 7, 6, 5, 4, 3, 2, 1, 0}, false);
  add(R"({"explanation":"cites <|sid_begin|><s_a_1><|sid_end|>","recommendations":["2","1"]})",
      2, Stage::json, {1, 0}, true);

  // Structured output wrapped in prose.
  add("Sure! {\"explanation\":\"e\",\"recommendations\":[\"2\",\"1\"]} hope it helps", 2,
      Stage::json, {1, 0}, true);
  add("```json\n{\"recommendations\":[\"2\",\"1\",\"3\"]}\n```", 3, Stage::json, {1, 0, 2},
      false);
  add(R"({"recommendations":["2","1"]} and later {"note":"no ranking"})", 2, Stage::json,
      {1, 0}, false);
  add(R"({"recommendations":["1","2"]} then {"recommendations":["2","1"]})", 2, Stage::json,
      {1, 0}, false);
  add(R"({"outer": {"recommendations":["2","1"]}})", 2, Stage::regex, {1, 0}, false);
  add("{'recommendations': ['3','1','2']}", 3, Stage::json, {2, 0, 1}, false);
  add(R"(Answer: {"recommendations":["2","1","3",],})", 3, Stage::json, {1, 0, 2}, false);
  add("noise {\"recommendations\": [\" 3 \", \"1 \"]} noise", 3, Stage::json, {2, 0, 1}, false);
  add(R"({"explanation":"first"} {"ranking":["2","1"]})", 2, Stage::json, {1, 0}, false);
  add("Answer:{\"recommendations\":[\"1\"]}", 2, Stage::json, {0, 1}, false);

  // Regex fallbacks.
  add("Prediction: Candidate 3", 10, Stage::regex, {2, 0, 1, 3, 4, 5, 6, 7, 8, 9}, false);
  add("prediction: candidate 7", 8, Stage::regex, {6, 0, 1, 2, 3, 4, 5, 7}, false);
  add("Prediction: Candidate #2", 3, Stage::regex, {1, 0, 2}, false);
  add("recommendations: [3, 1, 2]", 3, Stage::regex, {2, 0, 1}, false);
  add("ranking = [2,1]", 2, Stage::regex, {1, 0}, false);
  add("my list [4 2 1]", 4, Stage::regex, {3, 1, 0, 2}, false);
  add("Step 3: pick it.\nPrediction: Candidate 5", 5, Stage::regex, {4, 0, 1, 2, 3}, false);
  add("The answer is [1]", 1, Stage::regex, {0}, false);
  add("recommendations: [] but Prediction: Candidate 2", 3, Stage::regex, {1, 0, 2}, false);
  add("[9,9,9]", 4, Stage::none, {}, false);

  // Duplicates and out-of-range entries.
  add(R"({"recommendations":["1","1","11","2"]})", 10, Stage::json,
      {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, false);
  add(R"({"recommendations":["0","1","2"]})", 3, Stage::json, {0, 1, 2}, false);
  add(R"({"recommendations":["5","5","5"]})", 5, Stage::json, {4, 0, 1, 2, 3}, false);
  add(R"({"recommendations":["-2","3"]})", 3, Stage::json, {2, 0, 1}, false);
  add("Prediction: Candidate 99", 10, Stage::none, {}, false);
  add(R"({"recommendations":["2","abc","1"]})", 2, Stage::json, {1, 0}, false);
  add(R"({"recommendations":[2.5, 1]})", 2, Stage::json, {0, 1}, false);
  add("[1, 2, 2, 3, 99]", 3, Stage::regex, {0, 1, 2}, false);
  add(R"({"recommendations": [], "ranking":["3","2","1"]})", 3, Stage::json, {2, 1, 0}, false);
  add(R"({"recommendations":"3,1,2"})", 3, Stage::none, {}, false);

  // Nothing recoverable.
  add("", 10, Stage::none, {}, false);
  add("no numbers here", 5, Stage::none, {}, false);
  add("{}", 3, Stage::none, {}, false);
  add(R"({"a": {"b": 3}})", 5, Stage::none, {}, false);
  add("[]", 3, Stage::none, {}, false);
  add("[abc]", 3, Stage::none, {}, false);
  add("Candidate", 3, Stage::none, {}, false);
  add("Prediction: Candidate", 3, Stage::none, {}, false);
  add("\xff\xfe garbage \x01", 3, Stage::none, {}, false);
  add("{unbalanced", 3, Stage::none, {}, false);

  // Reasoning extraction.
  add(R"({"explanation":"why not","recommendations":["2","1"]})", 2, Stage::json, {1, 0}, true);
  add(R"({"reasoning":"alt key","ranking":["1","2"]})", 2, Stage::json, {0, 1}, true);
  add(R"({"recommendations":["1","2"]})", 2, Stage::json, {0, 1}, false);
  add(R"({"explanation": 42,"recommendations":["1","2"]})", 2, Stage::json, {0, 1}, false);
  add("Prediction: Candidate 1", 2, Stage::regex, {0, 1}, false);

  // Stage precedence and robustness.
  add(R"(Prediction: Candidate 2 {"recommendations":["1","2"],"explanation":"x"})", 2,
      Stage::json, {0, 1}, true);
  add("recommendations: [2, 1]", 2, Stage::regex, {1, 0}, false);
  add(R"({"recommendations":["2","1"]})", 2, Stage::json, {1, 0}, false);
  add("\n\t {\"recommendations\":[\"2\",\"1\"]} \n", 2, Stage::json, {1, 0}, false);
  add(R"({"model":"m","version":3,"recommendations":["2","1"],"extra":[1]})", 2, Stage::json,
      {1, 0}, false);
  return cases;
}

void criterion_parser_fuzz() {
  const std::vector<CuratedCase> cases = curated_cases();
  std::size_t curated_failures = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const CuratedCase& c = cases[i];
    const outparse::ParsedOutput parsed = outparse::parse_output(c.raw, c.n);
    bool ok = parsed.stage == c.stage;
    if (c.ranking.empty())
      ok = ok && !parsed.ranking.has_value();
    else
      ok = ok && parsed.ranking.has_value() && *parsed.ranking == c.ranking;
    ok = ok && parsed.reasoning.has_value() == c.reasoning;
    if (!ok) {
      ++curated_failures;
      std::printf("  curated case %zu failed: %s\n", i, c.raw.substr(0, 60).c_str());
    }
  }

  // Fuzzing: arbitrary bytes and structured-fragment soup.
  Rng rng(20260808);
  const std::vector<std::string> fragments = {
      "{", "}", "[", "]", ",", ":", "\"recommendations\"", "\"ranking\"", "recommendations",
      "Prediction:", "Candidate", "3", "\"1\"", "'7'", "12", "\"explanation\"", "\"x\"", " ",
      "\n"};
  std::size_t fuzz_failures = 0;
  std::size_t parsed_count = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::string raw;
    const int n = 1 + static_cast<int>(rng.next_below(12));
    if (trial % 2 == 0) {
      const std::size_t len = rng.next_below(240);
      for (std::size_t i = 0; i < len; ++i) raw += static_cast<char>(rng.next_below(256));
    } else {
      const std::size_t parts = rng.next_below(28);
      for (std::size_t i = 0; i < parts; ++i)
        raw += fragments[rng.next_below(fragments.size())];
    }
    const outparse::ParsedOutput parsed = outparse::parse_output(raw, n);
    if (parsed.ranking.has_value()) {
      ++parsed_count;
      std::vector<bool> seen(static_cast<std::size_t>(n), false);
      bool valid = parsed.ranking->size() == static_cast<std::size_t>(n);
      for (int v : *parsed.ranking) {
        if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)])
          valid = false;
        else
          seen[static_cast<std::size_t>(v)] = true;
      }
      if (!valid) ++fuzz_failures;
    } else if (parsed.stage != outparse::Stage::none || parsed.reasoning.has_value()) {
      ++fuzz_failures;
    }
  }

  char detail[192];
  std::snprintf(detail, sizeof(detail),
                "%zu/60 curated exact, 10000 fuzz inputs (%zu recovered rankings, %zu "
                "violations)",
                cases.size() - curated_failures, parsed_count, fuzz_failures);
  verdict(cases.size() == 60 && curated_failures == 0 && fuzz_failures == 0, "parser fuzz",
          detail);
}

// ---------------------------------------------------------------------------
// Criterion 6: reward algebra.
// ---------------------------------------------------------------------------
void criterion_reward_algebra() {
  bool ok = true;

  // Conditional-reward gate, the three case splits.
  ok = ok && std::fabs(reward::conditional_reward(0.4, 1, 5, 0.1) - 0.5) < 1e-15;
  ok = ok && std::fabs(reward::conditional_reward(0.0, 1, 3, 0.1) - 0.0) < 1e-15;
  ok = ok && std::fabs(reward::conditional_reward(0.0, 1, 1, 0.1) - 0.1) < 1e-15;

  // One-hot advantages at sqrt(G-1).
  for (std::size_t g : {std::size_t{2}, std::size_t{4}, std::size_t{8}, std::size_t{16}}) {
    std::vector<double> rewards(g, 0.0);
    rewards[0] = 1.0;
    const std::vector<double> advantages = reward::group_advantages(rewards);
    if (std::fabs(advantages[0] - std::sqrt(static_cast<double>(g - 1))) > 1e-9) ok = false;
  }

  // On-policy objective equals the token-weighted mean advantage.
  reward::RewardGroup group;
  const std::vector<double> rewards = {0.7, -0.1, 0.2, 0.2};
  const std::vector<double> advantages = reward::group_advantages(rewards);
  const std::vector<std::size_t> lengths = {4, 9, 2, 6};
  double weighted = 0.0, tokens = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    reward::OutputSample sample;
    sample.reward = rewards[i];
    sample.advantage = advantages[i];
    sample.logprobs_old.assign(lengths[i], -0.5);
    sample.logprobs_new.assign(lengths[i], -0.5);
    group.outputs.push_back(std::move(sample));
    weighted += advantages[i] * static_cast<double>(lengths[i]);
    tokens += static_cast<double>(lengths[i]);
  }
  const double objective = reward::dapo_objective({group}, 0.2, 0.28);
  ok = ok && std::fabs(objective - weighted / tokens) <= 1e-12;

  // All-equal groups are filtered out; degenerate advantages refuse to compute.
  const auto kept =
      reward::dynamic_sampling_filter({{0.4, 0.4, 0.4, 0.4}, {0.1, 0.2, 0.1, 0.1}});
  ok = ok && kept == std::vector<std::size_t>{1};
  bool threw = false;
  try {
    reward::group_advantages({1.0, 1.0});
  } catch (const std::invalid_argument&) {
    threw = true;
  }
  ok = ok && threw;

  verdict(ok, "reward algebra",
          "gate cases, sqrt(G-1) one-hot advantages, on-policy objective, zero-signal filter");
}

// ---------------------------------------------------------------------------
// Criterion 7: metric oracle on 500 random synthetic users.
// ---------------------------------------------------------------------------
void criterion_metric_oracle() {
  Rng rng(4242);
  bool exact = true;
  for (int user = 0; user < 500; ++user) {
    std::vector<std::string> ranked;
    const std::size_t len = 1 + rng.next_below(20);
    for (std::size_t i = 0; i < len; ++i) ranked.push_back("m" + std::to_string(i));
    for (std::size_t i = len; i > 1; --i)
      std::swap(ranked[i - 1], ranked[rng.next_below(i)]);
    const std::string target = "m" + std::to_string(rng.next_below(len + 4));
    for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{5}, std::size_t{10}}) {
      eval::RankedList list{ranked};
      if (eval::recall_at_k(list, target, k) != ref::recall_scan(ranked, target, k))
        exact = false;
      if (eval::ndcg_at_k(list, target, k) != ref::ndcg_scan(ranked, target, k)) exact = false;
    }
  }

  eval::RankedList spot{{"first", "second", "third", "fourth"}};
  const bool spot_ok = eval::ndcg_at_k(spot, "first", 4) == 1.0 &&
                       std::fabs(eval::ndcg_at_k(spot, "third", 4) - 0.5) < 1e-15;
  verdict(exact && spot_ok, "metric oracle",
          "500 users x K in {1,3,5,10}: exact match with brute force; ndcg(1)=1, ndcg(3)=0.5");
}

// ---------------------------------------------------------------------------
// Criterion 8: the end-to-end desk run over the bundled corpus.
// ---------------------------------------------------------------------------
void criterion_desk_run() {
  const auto start = std::chrono::steady_clock::now();
  const std::string bundled = SIDKIT_BUNDLED_DATA_DIR;
  const std::string out = path_in_work("desk");
  std::filesystem::create_directories(out);

  auto step = [&](const std::string& args, const std::string& stdout_file) {
    const int rc = run_cli(args, stdout_file);
    if (rc != 0)
      throw std::runtime_error("CLI step failed (" + args.substr(0, 48) + "...), status " +
                               std::to_string(rc));
  };

  try {
    step("ingest --interactions " + bundled + "/interactions.jsonl --items " + bundled +
             "/items.jsonl --out-dir " + out,
         out + "/ingest_stats.json");
    step("refine-embed --embeddings " + bundled + "/embeddings.sidemb --train " + out +
             "/train.jsonl --out " + out + "/refined.sidemb --epochs 5",
         out + "/refine_stats.json");
    step("train-codebook --embeddings " + out + "/refined.sidemb --out " + out +
             "/codebook.sidcbk --levels 3 --codes 24 --epochs 10 --random-last",
         out + "/train_stats.json");
    step("tokenize --embeddings " + out + "/refined.sidemb --codebook " + out +
             "/codebook.sidcbk --out " + out + "/registry.jsonl",
         out + "/tokenize_stats.json");
    step("uniqueness-report --registry " + out + "/registry.jsonl", out + "/uniqueness.json");
    step("evaluate --train " + out + "/train.jsonl --valid " + out + "/valid.jsonl --test " +
             out + "/test.jsonl --candidates 10 --episodes-out " + out + "/episodes.jsonl",
         out + "/pre_rank_table.txt");
  } catch (const std::exception& e) {
    verdict(false, "end-to-end desk run", e.what());
    return;
  }

  // Mock policy: always promotes the target to rank 1, full JSON trace.
  const std::vector<RerankEpisode> episodes = io::read_episodes(out + "/episodes.jsonl");
  if (episodes.empty()) {
    verdict(false, "end-to-end desk run", "retriever produced no episodes with the target");
    return;
  }
  {
    std::ofstream outputs(out + "/outputs.jsonl", std::ios::trunc);
    std::ofstream parse_in(out + "/parse_in.jsonl", std::ios::trunc);
    std::ofstream scoring(out + "/scoring.jsonl", std::ios::trunc);
    for (const RerankEpisode& episode : episodes) {
      json trace;
      trace["explanation"] =
          "Step 1: history pattern. Step 2: matching category. Step 3: the promoted "
          "candidate fits best.";
      trace["recommendations"] = json::array();
      trace["recommendations"].push_back(std::to_string(episode.pre_rank_position));
      for (std::size_t c = 1; c <= episode.candidates.size(); ++c)
        if (static_cast<int>(c) != episode.pre_rank_position)
          trace["recommendations"].push_back(std::to_string(c));
      const std::string raw = trace.dump();

      outputs << json{{"user_id", episode.user_id}, {"raw_text", raw}}.dump() << "\n";
      parse_in << json{{"raw", raw}, {"n", episode.candidates.size()}}.dump() << "\n";

      // One reward group per episode: the promoting output plus an
      // order-keeping one, so the group carries signal.
      json keep_order;
      keep_order["explanation"] = "keeps the pre-ranked order";
      keep_order["recommendations"] = json::array();
      for (std::size_t c = 1; c <= episode.candidates.size(); ++c)
        keep_order["recommendations"].push_back(std::to_string(c));
      scoring << json{{"episode_id", episode.user_id},
                      {"pre_rank", episode.pre_rank_position},
                      {"n", episode.candidates.size()},
                      {"outputs", {{{"raw_text", raw}}, {{"raw_text", keep_order.dump()}}}}}
                     .dump()
              << "\n";
    }
  }

  try {
    step("parse-check --in " + out + "/parse_in.jsonl --out " + out + "/parse_out.jsonl", "");
    step("score-rewards --in " + out + "/scoring.jsonl --out " + out + "/scored.json",
         out + "/scored_stdout.json");
    step("evaluate --train " + out + "/train.jsonl --valid " + out + "/valid.jsonl --test " +
             out + "/test.jsonl --candidates 10 --outputs " + out +
             "/outputs.jsonl --report " + out + "/report.json",
         out + "/rerank_table.txt");
    step("gen-traces --episodes " + out + "/episodes.jsonl --meta " + out +
             "/items.jsonl --registry " + out +
             "/registry.jsonl --strategy rejection --client mock-oracle --out " + out +
             "/samples.jsonl",
         out + "/gen_stats.json");
  } catch (const std::exception& e) {
    verdict(false, "end-to-end desk run", e.what());
    return;
  }

  // recall@1 == 1.0 after the mock re-rank.
  const json report = read_json_file(out + "/report.json");
  double rerank_recall1 = -1.0;
  for (const auto& row : report["rows"])
    if (row["method"] == "re-rank") rerank_recall1 = row["recall"]["1"].get<double>();
  const std::size_t parse_failures = report["parse_failures"].get<std::size_t>();

  // Mean ranking reward must equal mean (pre_rank - 1)/10, recomputed
  // independently from the episodes file.
  double expected_mean = 0.0;
  for (const RerankEpisode& episode : episodes)
    expected_mean += static_cast<double>(episode.pre_rank_position - 1) / 10.0;
  expected_mean /= static_cast<double>(episodes.size());

  const json scored = read_json_file(out + "/scored.json");
  double mean_rank_reward = 0.0;
  std::size_t groups = 0;
  for (const auto& group : scored["groups"]) {
    mean_rank_reward += group["r_rank"][0].get<double>();  // the promoting output
    ++groups;
  }
  mean_rank_reward /= static_cast<double>(groups);

  const double elapsed = seconds_since(start);
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "%zu episodes, recall@1=%.4f (need 1.0), mean r_rank %.6f vs independent "
                "%.6f, parse failures %zu, %.0fs (need <= 600)",
                episodes.size(), rerank_recall1, mean_rank_reward, expected_mean,
                parse_failures, elapsed);
  verdict(rerank_recall1 == 1.0 && std::fabs(mean_rank_reward - expected_mean) <= 1e-12 &&
              parse_failures == 0 && groups == episodes.size() && elapsed <= 600.0,
          "end-to-end desk run", detail);
}

// ---------------------------------------------------------------------------
// Criterion 9: format round-trips, write -> read -> write.
// ---------------------------------------------------------------------------
void criterion_round_trips() {
  bool ok = true;
  std::string failed;

  auto same_bytes = [&](const std::string& a, const std::string& b, const char* what) {
    if (io::read_text_file(a) != io::read_text_file(b)) {
      ok = false;
      failed += std::string(what) + " ";
    }
  };

  std::vector<std::size_t> clusters;
  embed::EmbeddingStore store = synthetic::make_mixture_embeddings(80, 6, 8, 0.4, 21, &clusters);
  io::write_embeddings(path_in_work("rt_a.sidemb"), store);
  io::write_embeddings(path_in_work("rt_b.sidemb"),
                       io::read_embeddings(path_in_work("rt_a.sidemb")));
  same_bytes(path_in_work("rt_a.sidemb"), path_in_work("rt_b.sidemb"), "embeddings");

  rq::TrainConfig cfg;
  cfg.levels = 2;
  cfg.codes_per_level = 8;
  cfg.seed = 5;
  const rq::CodebookStack stack = rq::rq_kmeans_init(store, cfg);
  io::write_codebook(path_in_work("rt_a.sidcbk"), stack, cfg);
  const io::CodebookFile reloaded = io::read_codebook(path_in_work("rt_a.sidcbk"));
  io::write_codebook(path_in_work("rt_b.sidcbk"), reloaded.stack, reloaded.config);
  same_bytes(path_in_work("rt_a.sidcbk"), path_in_work("rt_b.sidcbk"), "codebook");

  const sid::SidRegistry registry = sid::build_registry(store, stack, {0, 9});
  io::write_registry(path_in_work("rt_a.jsonl"), registry);
  io::write_registry(path_in_work("rt_b.jsonl"), io::read_registry(path_in_work("rt_a.jsonl")));
  same_bytes(path_in_work("rt_a.jsonl"), path_in_work("rt_b.jsonl"), "registry");

  corpus::MetaMap meta = testfix::demo_meta();
  sid::SidRegistry demo_reg = testfix::demo_registry();
  prompt::PromptBuilder builder(demo_reg, meta);
  RerankEpisode episode = testfix::demo_episode();
  std::vector<prompt::ChatSample> samples;
  for (int i = 0; i < 4; ++i) {
    prompt::ChatSample sample = builder.build_chat_sample(
        episode, builder.canonical_trace(episode, "Step " + std::to_string(i) + "."),
        {.with_category_hierarchy = i % 2 == 0});
    sample.provenance.attempts = static_cast<std::size_t>(i + 1);
    samples.push_back(std::move(sample));
  }
  io::write_chat_samples(path_in_work("rt_samples_a.jsonl"), samples);
  io::write_chat_samples(path_in_work("rt_samples_b.jsonl"),
                         io::read_chat_samples(path_in_work("rt_samples_a.jsonl")));
  same_bytes(path_in_work("rt_samples_a.jsonl"), path_in_work("rt_samples_b.jsonl"),
             "chat-samples");

  verdict(ok, "format round-trips",
          ok ? "embeddings, codebook, registry, chat samples byte-identical"
             : "mismatch in: " + failed);
}

}  // namespace

int main() {
  work_dir = std::filesystem::temp_directory_path() / "sidkit_acceptance";
  std::filesystem::create_directories(work_dir);

  criterion_collapse_direction();
  criterion_ablation_grid();
  criterion_gradient_check();
  criterion_quantizer_oracle();
  criterion_parser_fuzz();
  criterion_reward_algebra();
  criterion_metric_oracle();
  criterion_desk_run();
  criterion_round_trips();

  std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
