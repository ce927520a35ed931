#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sidkit/ablate.hpp"
#include "sidkit/chat_client.hpp"
#include "sidkit/corpus.hpp"
#include "sidkit/embedding.hpp"
#include "sidkit/eval.hpp"
#include "sidkit/io.hpp"
#include "sidkit/outparse.hpp"
#include "sidkit/prompt.hpp"
#include "sidkit/reward.hpp"
#include "sidkit/rq.hpp"
#include "sidkit/sid.hpp"
#include "runconfig.hpp"

namespace sidkit::cli {
namespace {

using nlohmann::json;

struct Ctx {
  RunConfig config;
  std::uint64_t seed = 42;
  int workers = 0;  // 0 = hardware default
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void apply_workers(Ctx& ctx) {
#ifdef _OPENMP
  if (ctx.workers > 0) omp_set_num_threads(ctx.workers);
  ctx.workers = omp_get_max_threads();
#else
  ctx.workers = 1;
#endif
}

// Snapshot of the values a run actually used, written next to its outputs.
void write_snapshot(const Ctx& ctx, const std::string& section,
                    const std::map<std::string, std::string>& entries,
                    const std::string& anchor_path) {
  RunConfig snap;
  snap.set("run.seed", std::to_string(ctx.seed));
  snap.set("run.workers", std::to_string(ctx.workers));
  for (const auto& [key, value] : entries) snap.set(section + "." + key, value);
  io::write_text_file(anchor_path + ".config.toml", snap.to_toml());
}

std::vector<std::size_t> parse_ks(const std::string& spec) {
  std::vector<std::size_t> ks;
  std::stringstream stream(spec);
  std::string part;
  while (std::getline(stream, part, ',')) {
    if (part.empty()) continue;
    ks.push_back(std::stoul(part));
  }
  if (ks.empty()) throw std::runtime_error("empty K list");
  return ks;
}

// ---------------------------------------------------------------- ingest --

int cmd_ingest(Ctx& ctx, const std::string& interactions_path, const std::string& items_path,
               const std::string& out_dir, int min_count) {
  std::filesystem::create_directories(out_dir);
  corpus::InteractionLog log = corpus::load_interactions(interactions_path);
  corpus::InteractionLog filtered =
      corpus::filter_min_count(log, static_cast<std::size_t>(min_count));
  corpus::SplitSet split = corpus::leave_one_out_split(filtered);

  io::write_interactions(out_dir + "/train.jsonl", split.train);
  io::write_events(out_dir + "/valid.jsonl", split.valid);
  io::write_events(out_dir + "/test.jsonl", split.test);
  if (!items_path.empty()) {
    corpus::MetaMap meta = corpus::load_item_meta(items_path);
    io::write_item_meta(out_dir + "/items.jsonl", meta);
  }

  json stats;
  stats["users"] = filtered.user_count();
  stats["events"] = filtered.event_count();
  stats["items"] = filtered.item_counts().size();
  stats["train_events"] = split.train.event_count();
  stats["valid_events"] = split.valid.size();
  stats["test_events"] = split.test.size();
  std::cout << stats.dump() << "\n";

  write_snapshot(ctx, "ingest",
                 {{"interactions", interactions_path},
                  {"items", items_path},
                  {"out_dir", out_dir},
                  {"min_count", std::to_string(min_count)}},
                 out_dir + "/ingest");
  return 0;
}

// ----------------------------------------------------------- refine-embed --

int cmd_refine(Ctx& ctx, const std::string& embeddings_path, const std::string& train_path,
               const std::string& out_path, embed::ContrastiveConfig cfg, int window) {
  embed::EmbeddingStore store = io::read_embeddings(embeddings_path);
  corpus::InteractionLog train = corpus::load_interactions(train_path);
  corpus::CoEngagementSet pairs =
      corpus::co_engagement_pairs(train, static_cast<std::size_t>(window));
  embed::RefineResult result = embed::refine_embeddings(store, pairs, cfg);
  io::write_embeddings(out_path, result.store);

  json stats;
  stats["items"] = result.store.size();
  stats["epoch_mean_loss"] = result.epoch_mean_loss;
  std::cout << stats.dump() << "\n";
  for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e)
    std::cerr << "epoch " << e << " mean loss " << result.epoch_mean_loss[e] << "\n";

  write_snapshot(ctx, "refine_embed",
                 {{"embeddings", embeddings_path},
                  {"train", train_path},
                  {"out", out_path},
                  {"window", std::to_string(window)},
                  {"temperature", fmt_double(cfg.temperature)},
                  {"negatives_per_anchor", std::to_string(cfg.negatives_per_anchor)},
                  {"learning_rate", fmt_double(cfg.learning_rate)},
                  {"epochs", std::to_string(cfg.epochs)},
                  {"batch_size", std::to_string(cfg.batch_size)},
                  {"seed", std::to_string(cfg.seed)}},
                 out_path);
  return 0;
}

// --------------------------------------------------------- train-codebook --

std::map<std::string, std::string> train_config_entries(const rq::TrainConfig& cfg) {
  return {{"ema", cfg.ema ? "true" : "false"},
          {"diversity", cfg.diversity ? "true" : "false"},
          {"dead_code_reset", cfg.dead_code_reset ? "true" : "false"},
          {"random_last", cfg.random_last ? "true" : "false"},
          {"ema_decay", fmt_double(cfg.ema_decay)},
          {"diversity_weight", fmt_double(cfg.diversity_weight)},
          {"reset_threshold", std::to_string(cfg.reset_threshold)},
          {"random_last_levels", std::to_string(cfg.random_last_levels)},
          {"codebook_weight", fmt_double(cfg.codebook_weight)},
          {"commit_weight", fmt_double(cfg.commit_weight)},
          {"soft_assign_temperature", fmt_double(cfg.soft_assign_temperature)},
          {"codebook_step", fmt_double(cfg.codebook_step)},
          {"levels", std::to_string(cfg.levels)},
          {"codes_per_level", std::to_string(cfg.codes_per_level)},
          {"epochs", std::to_string(cfg.epochs)},
          {"batch_size", std::to_string(cfg.batch_size)},
          {"seed", std::to_string(cfg.seed)}};
}

int cmd_train_codebook(Ctx& ctx, const std::string& embeddings_path,
                       const std::string& out_path, const rq::TrainConfig& cfg) {
  embed::EmbeddingStore store = io::read_embeddings(embeddings_path);
  std::vector<rq::EpochStats> history;
  rq::CodebookStack stack = rq::train(store, cfg, &history);
  io::write_codebook(out_path, stack, cfg);

  for (std::size_t e = 0; e < history.size(); ++e)
    std::cerr << "epoch " << e << " recon " << history[e].reconstruction_loss << " codebook "
              << history[e].codebook_loss << " resets " << history[e].resets << "\n";
  json stats;
  stats["items"] = store.size();
  stats["levels"] = stack.level_count();
  if (!history.empty()) {
    stats["final_reconstruction_loss"] = history.back().reconstruction_loss;
    stats["final_codebook_loss"] = history.back().codebook_loss;
  }
  std::cout << stats.dump() << "\n";

  auto entries = train_config_entries(cfg);
  entries["embeddings"] = embeddings_path;
  entries["out"] = out_path;
  write_snapshot(ctx, "train_codebook", entries, out_path);
  return 0;
}

// ------------------------------------------------------------- tokenize --

int cmd_tokenize(Ctx& ctx, const std::string& embeddings_path, const std::string& codebook_path,
                 const std::string& out_path, int random_last_override,
                 std::uint64_t registry_seed) {
  embed::EmbeddingStore store = io::read_embeddings(embeddings_path);
  io::CodebookFile file = io::read_codebook(codebook_path);
  sid::RegistryConfig cfg;
  cfg.random_last_levels = random_last_override >= 0
                               ? static_cast<std::size_t>(random_last_override)
                               : file.config.effective_random_last();
  cfg.seed = registry_seed;
  sid::SidRegistry registry = sid::build_registry(store, file.stack, cfg);
  io::write_registry(out_path, registry);

  std::cout << io::uniqueness_report_json(sid::uniqueness_report(registry)) << "\n";
  write_snapshot(ctx, "tokenize",
                 {{"embeddings", embeddings_path},
                  {"codebook", codebook_path},
                  {"out", out_path},
                  {"random_last_levels", std::to_string(cfg.random_last_levels)},
                  {"registry_seed", std::to_string(cfg.seed)}},
                 out_path);
  return 0;
}

// ------------------------------------------------------ uniqueness-report --

int cmd_uniqueness(Ctx& ctx, const std::string& registry_path, const std::string& out_path) {
  sid::SidRegistry registry = io::read_registry(registry_path);
  const std::string report = io::uniqueness_report_json(sid::uniqueness_report(registry));
  if (out_path.empty()) {
    std::cout << report << "\n";
  } else {
    io::write_text_file(out_path, report + "\n");
    std::cout << report << "\n";
    write_snapshot(ctx, "uniqueness_report", {{"registry", registry_path}, {"out", out_path}},
                   out_path);
  }
  return 0;
}

// --------------------------------------------------------------- ablate --

int cmd_ablate(Ctx& ctx, const std::string& embeddings_path,
               const std::string& interactions_path, const std::string& out_prefix,
               const ablate::AblationConfig& cfg, int window, int min_count) {
  embed::EmbeddingStore store = io::read_embeddings(embeddings_path);
  corpus::InteractionLog log = corpus::load_interactions(interactions_path);
  corpus::InteractionLog filtered =
      corpus::filter_min_count(log, static_cast<std::size_t>(min_count));
  corpus::CoEngagementSet pairs =
      corpus::co_engagement_pairs(filtered, static_cast<std::size_t>(window));

  ablate::AblationResult result = ablate::run_ablation(store, pairs, cfg);
  const std::string table = ablate::ablation_table(result);
  std::cout << table;
  if (!out_prefix.empty()) {
    io::write_text_file(out_prefix + ".txt", table);
    io::write_text_file(out_prefix + ".csv", ablate::ablation_csv(result));
    io::write_text_file(out_prefix + ".json", ablate::ablation_json(result));
    auto entries = train_config_entries(cfg.train);
    entries["embeddings"] = embeddings_path;
    entries["interactions"] = interactions_path;
    entries["out_prefix"] = out_prefix;
    entries["refine_epochs"] = std::to_string(cfg.refine.epochs);
    entries["refine_learning_rate"] = fmt_double(cfg.refine.learning_rate);
    entries["refine_negatives"] = std::to_string(cfg.refine.negatives_per_anchor);
    entries["refine_temperature"] = fmt_double(cfg.refine.temperature);
    entries["registry_seed"] = std::to_string(cfg.registry_seed);
    write_snapshot(ctx, "ablate", entries, out_prefix);
  }
  return 0;
}

// ------------------------------------------------------------ gen-traces --

int cmd_gen_traces(Ctx& ctx, const std::string& episodes_path, const std::string& meta_path,
                   const std::string& registry_path, const std::string& out_path,
                   const std::string& strategy_name_arg, bool knowledge_priming,
                   int max_attempts, const std::string& client_kind,
                   prompt::ChatClientConfig client_cfg) {
  std::vector<RerankEpisode> episodes = io::read_episodes(episodes_path);
  corpus::MetaMap meta = corpus::load_item_meta(meta_path);
  sid::SidRegistry registry = io::read_registry(registry_path);
  prompt::PromptBuilder builder(registry, meta);
  const prompt::Strategy strategy = prompt::strategy_from_name(strategy_name_arg);

  std::vector<prompt::ChatSample> samples;
  std::size_t exhausted = 0;
  std::size_t errors = 0;

  if (client_kind == "http") {
    prompt::HttpChatClient client(client_cfg);
    prompt::GenerationResult result = prompt::generate_traces(
        client, builder, episodes, strategy, knowledge_priming,
        static_cast<std::size_t>(max_attempts), client_cfg.max_concurrent);
    for (auto& sample : result.samples)
      if (sample.has_value()) samples.push_back(std::move(*sample));
    for (const prompt::GenerationFailure& failure : result.failures) {
      std::cerr << "episode " << failure.episode_index << ": " << failure.message << "\n";
      if (failure.transcripts.empty())
        ++errors;
      else
        ++exhausted;
    }
  } else if (client_kind == "mock-oracle" || client_kind == "mock-top1") {
    // Deterministic offline teachers: "oracle" answers the target item,
    // "top1" always predicts Candidate 1.
    for (const RerankEpisode& episode : episodes) {
      std::string reply;
      if (client_kind == "mock-oracle") {
        reply = builder.canonical_trace(
            episode, "Step 1: the purchase history, e.g. " +
                         (episode.history.empty() ? std::string("(empty)")
                                                  : builder.sid_text(episode.history.front())) +
                         ", shows one dominant interest. Step 2: the most recent items narrow "
                         "the expected follow-up purchase. Step 3: the top-ranked candidate "
                         "matches that pattern best.");
      } else {
        json trace;
        trace["explanation"] = "Step 1: broad pattern. Step 2: recent items. Step 3: match.";
        trace["recommendations"] = json::array();
        for (std::size_t c = 1; c <= episode.candidates.size(); ++c)
          trace["recommendations"].push_back(std::to_string(c));
        reply = trace.dump();
      }
      prompt::MockChatClient client([&](const std::vector<prompt::ChatMessage>&, std::size_t) {
        return reply;
      });
      try {
        if (strategy == prompt::Strategy::targeted) {
          samples.push_back(
              prompt::run_targeted(client, builder, episode, knowledge_priming));
        } else {
          prompt::RejectionOutcome outcome =
              prompt::run_rejection(client, builder, episode, knowledge_priming,
                                    static_cast<std::size_t>(max_attempts));
          if (outcome.sample.has_value())
            samples.push_back(std::move(*outcome.sample));
          else
            ++exhausted;
        }
      } catch (const std::exception& e) {
        std::cerr << "episode " << episode.user_id << ": " << e.what() << "\n";
        ++errors;
      }
    }
  } else {
    throw std::runtime_error("unknown client kind: " + client_kind);
  }

  io::write_chat_samples(out_path, samples);
  json stats;
  stats["episodes"] = episodes.size();
  stats["samples"] = samples.size();
  stats["exhausted"] = exhausted;
  stats["errors"] = errors;
  std::cout << stats.dump() << "\n";

  write_snapshot(ctx, "gen_traces",
                 {{"episodes", episodes_path},
                  {"meta", meta_path},
                  {"registry", registry_path},
                  {"out", out_path},
                  {"strategy", strategy_name_arg},
                  {"knowledge_priming", knowledge_priming ? "true" : "false"},
                  {"max_attempts", std::to_string(max_attempts)},
                  {"client", client_kind},
                  {"base_url", client_cfg.base_url},
                  {"model", client_cfg.model},
                  {"api_key_env", client_cfg.api_key_env},
                  {"temperature", fmt_double(client_cfg.temperature)},
                  {"max_concurrent", std::to_string(client_cfg.max_concurrent)},
                  {"timeout_seconds", fmt_double(client_cfg.timeout_seconds)}},
                 out_path);
  return 0;
}

// ------------------------------------------------------------ parse-check --

int cmd_parse_check(Ctx&, const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open: " + in_path);
  std::ostringstream out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.contains("raw") || !obj.contains("n"))
      throw std::runtime_error(in_path + ":" + std::to_string(line_no) +
                               ": expected {raw, n}");
    const outparse::ParsedOutput parsed =
        outparse::parse_output(obj["raw"].get<std::string>(), obj["n"].get<int>());
    json result;
    result["stage"] = outparse::stage_name(parsed.stage);
    result["ranking"] = parsed.ranking.has_value() ? json(*parsed.ranking) : json(nullptr);
    result["reasoning_present"] = parsed.reasoning.has_value();
    out << result.dump() << "\n";
  }
  if (out_path.empty())
    std::cout << out.str();
  else
    io::write_text_file(out_path, out.str());
  return 0;
}

// ---------------------------------------------------------- score-rewards --

int cmd_score_rewards(Ctx& ctx, const std::string& in_path, const std::string& out_path,
                      const reward::RewardConfig& cfg) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open: " + in_path);

  json groups_out = json::array();
  std::vector<reward::RewardGroup> kept_groups;
  bool objective_possible = true;
  std::size_t dropped = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.contains("pre_rank") || !obj.contains("outputs"))
      throw std::runtime_error(in_path + ":" + std::to_string(line_no) +
                               ": expected {episode_id, pre_rank, outputs}");
    const int pre_rank = obj["pre_rank"].get<int>();
    int n = obj.value("n", 0);

    std::vector<double> rewards;
    std::vector<double> rank_rewards;
    std::vector<int> fmt_flags;
    std::vector<int> re_ranks;
    reward::RewardGroup group;
    for (const json& output : obj["outputs"]) {
      std::vector<int> ranking;
      int r_fmt = 0;
      if (output.contains("ranking")) {
        for (const auto& v : output["ranking"]) ranking.push_back(v.get<int>());
        if (n == 0) n = static_cast<int>(ranking.size());
        r_fmt = 1;  // explicit rankings are treated as well-formed
      } else if (output.contains("raw_text")) {
        if (n == 0)
          throw std::runtime_error(in_path + ":" + std::to_string(line_no) +
                                   ": raw_text outputs need an explicit n");
        const outparse::ParsedOutput parsed =
            outparse::parse_output(output["raw_text"].get<std::string>(), n);
        r_fmt = outparse::format_ok(parsed) ? 1 : 0;
        if (parsed.ranking.has_value()) ranking = *parsed.ranking;
      } else {
        throw std::runtime_error(in_path + ":" + std::to_string(line_no) +
                                 ": output needs ranking or raw_text");
      }

      int re_rank = pre_rank;  // unparseable output keeps the pre-ranked order
      if (!ranking.empty()) {
        for (std::size_t pos = 0; pos < ranking.size(); ++pos)
          if (ranking[pos] == pre_rank - 1) {
            re_rank = static_cast<int>(pos + 1);
            break;
          }
      }
      const reward::RewardRecord record =
          reward::score_output(pre_rank, re_rank, n, r_fmt, cfg.alpha);
      rank_rewards.push_back(record.r_rank);
      rewards.push_back(record.total);
      fmt_flags.push_back(record.r_fmt);
      re_ranks.push_back(record.re_rank);

      reward::OutputSample sample;
      if (output.contains("token_logprobs_old") && output.contains("token_logprobs_new")) {
        for (const auto& v : output["token_logprobs_old"])
          sample.logprobs_old.push_back(v.get<double>());
        for (const auto& v : output["token_logprobs_new"])
          sample.logprobs_new.push_back(v.get<double>());
      }
      sample.reward = rewards.back();
      group.outputs.push_back(std::move(sample));
    }

    const bool kept = !reward::dynamic_sampling_filter({rewards}).empty();
    json group_json;
    group_json["episode_id"] = obj.contains("episode_id") ? obj["episode_id"] : json(line_no);
    group_json["rewards"] = rewards;
    group_json["r_rank"] = rank_rewards;
    group_json["r_fmt"] = fmt_flags;
    group_json["re_rank"] = re_ranks;
    group_json["kept"] = kept;
    if (kept) {
      const std::vector<double> advantages = reward::group_advantages(rewards);
      group_json["advantages"] = advantages;
      for (std::size_t i = 0; i < group.outputs.size(); ++i) {
        group.outputs[i].advantage = advantages[i];
        if (group.outputs[i].logprobs_old.empty()) objective_possible = false;
      }
      kept_groups.push_back(std::move(group));
    } else {
      group_json["advantages"] = nullptr;
      ++dropped;
    }
    groups_out.push_back(std::move(group_json));
  }

  json result;
  result["groups"] = groups_out;
  result["kept_groups"] = kept_groups.size();
  result["dropped_groups"] = dropped;
  if (!kept_groups.empty() && objective_possible) {
    result["objective"] = reward::dapo_objective(kept_groups, cfg.eps_low, cfg.eps_high);
  } else {
    result["objective"] = nullptr;
    result["objective_note"] =
        kept_groups.empty() ? "no groups with reward signal" : "token logprobs missing";
  }
  const std::string text = result.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    io::write_text_file(out_path, text);
    std::cout << text;
    write_snapshot(ctx, "score_rewards",
                   {{"in", in_path},
                    {"out", out_path},
                    {"alpha", fmt_double(cfg.alpha)},
                    {"eps_low", fmt_double(cfg.eps_low)},
                    {"eps_high", fmt_double(cfg.eps_high)}},
                   out_path);
  }
  return 0;
}

// -------------------------------------------------------------- evaluate --

int cmd_evaluate(Ctx& ctx, const std::string& train_path, const std::string& valid_path,
                 const std::string& test_path, const std::string& outputs_path,
                 const std::string& episodes_out, const std::string& report_path,
                 const std::string& csv_path, const std::string& ks_spec, int candidates,
                 int markov_order) {
  corpus::InteractionLog train = corpus::load_interactions(train_path);
  corpus::InteractionLog test_log = corpus::load_interactions(test_path);
  std::optional<corpus::InteractionLog> valid_log;
  if (!valid_path.empty()) valid_log = corpus::load_interactions(valid_path);
  const std::vector<std::size_t> ks = parse_ks(ks_spec);

  eval::MarkovRetriever retriever(train, static_cast<std::size_t>(markov_order));

  std::vector<RerankEpisode> episodes;
  std::size_t skipped = 0;
  for (const auto& [user, events] : test_log.by_user) {
    if (events.empty()) continue;
    const std::string& target = events.back().item_id;
    std::vector<std::string> history;
    auto train_it = train.by_user.find(user);
    if (train_it != train.by_user.end())
      for (const corpus::Event& e : train_it->second) history.push_back(e.item_id);
    if (valid_log.has_value()) {
      auto valid_it = valid_log->by_user.find(user);
      if (valid_it != valid_log->by_user.end())
        for (const corpus::Event& e : valid_it->second) history.push_back(e.item_id);
    }

    eval::RankedList ranked =
        retriever.predict(history, static_cast<std::size_t>(candidates));
    RerankEpisode episode;
    episode.user_id = user;
    episode.history = std::move(history);
    episode.candidates = ranked.items;
    episode.target = target;
    episode.pre_rank_position = 0;
    for (std::size_t i = 0; i < episode.candidates.size(); ++i)
      if (episode.candidates[i] == target)
        episode.pre_rank_position = static_cast<int>(i + 1);
    if (episode.pre_rank_position == 0 || episode.candidates.size() < 2) {
      ++skipped;  // target not retrieved: nothing a re-ranker could fix
      continue;
    }
    episodes.push_back(std::move(episode));
  }

  if (!episodes_out.empty()) io::write_episodes(episodes_out, episodes);

  std::vector<outparse::ParsedOutput> outputs(episodes.size());
  if (!outputs_path.empty()) {
    std::map<std::string, std::string> raw_by_user;
    std::ifstream in(outputs_path);
    if (!in) throw std::runtime_error("cannot open: " + outputs_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json obj = json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.contains("user_id") || !obj.contains("raw_text"))
        throw std::runtime_error(outputs_path + ":" + std::to_string(line_no) +
                                 ": expected {user_id, raw_text}");
      raw_by_user[obj["user_id"].get<std::string>()] = obj["raw_text"].get<std::string>();
    }
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      auto it = raw_by_user.find(episodes[i].user_id);
      if (it == raw_by_user.end())
        throw std::runtime_error("no output for episode user " + episodes[i].user_id);
      outputs[i] = outparse::parse_output(it->second,
                                          static_cast<int>(episodes[i].candidates.size()));
    }
  }

  eval::EvalReport report = eval::evaluate_rerank(episodes, outputs, ks);
  if (outputs_path.empty()) {
    // No model outputs: only the retriever baseline is meaningful.
    report.rows.resize(1);
    report.parse_failures = 0;
  }
  std::cout << eval::report_table(report);
  std::cout << "skipped_no_target=" << skipped << "\n";

  json report_json;
  report_json["episodes"] = report.episode_count;
  report_json["parse_failures"] = report.parse_failures;
  report_json["skipped_no_target"] = skipped;
  report_json["truncated_ks"] = report.truncated_ks;
  report_json["rows"] = json::array();
  for (const eval::MethodRow& row : report.rows) {
    json row_json;
    row_json["method"] = row.method;
    for (const auto& [k, v] : row.recall) row_json["recall"][std::to_string(k)] = v;
    for (const auto& [k, v] : row.ndcg) row_json["ndcg"][std::to_string(k)] = v;
    report_json["rows"].push_back(std::move(row_json));
  }
  if (!report_path.empty()) {
    io::write_text_file(report_path, report_json.dump(2) + "\n");
    write_snapshot(ctx, "evaluate",
                   {{"train", train_path},
                    {"valid", valid_path},
                    {"test", test_path},
                    {"outputs", outputs_path},
                    {"episodes_out", episodes_out},
                    {"report", report_path},
                    {"ks", ks_spec},
                    {"candidates", std::to_string(candidates)},
                    {"markov_order", std::to_string(markov_order)}},
                   report_path);
  }
  if (!csv_path.empty()) io::write_text_file(csv_path, eval::report_csv(report));
  return 0;
}

// ------------------------------------------------------------------ main --

int run(int argc, char** argv) {
  // --config/--set must apply before option defaults are bound.
  Ctx ctx;
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      ctx.config = RunConfig::load(args[i + 1]);
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--set" && i + 1 < args.size()) {
      const std::string& kv = args[i + 1];
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("--set expects section.key=value, got: " + kv);
      ctx.config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
  ctx.seed = ctx.config.get_u64("run.seed", 42);
  ctx.workers = static_cast<int>(ctx.config.get_int("run.workers", 0));

  CLI::App app{"semantic-id tokenization and re-ranking evaluation toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> set_values;
  app.add_option("--config", config_path, "TOML run configuration");
  app.add_option("--set", set_values, "override a config key: section.key=value");
  app.add_option("--seed", ctx.seed, "root seed, split per module");
  app.add_option("--workers", ctx.workers, "worker pool size (0 = hardware)");

  auto cfg_str = [&](const std::string& key, const std::string& fallback) {
    return ctx.config.get_string(key, fallback);
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "load, filter and split interactions");
  std::string in_interactions = cfg_str("ingest.interactions", "");
  std::string in_items = cfg_str("ingest.items", "");
  std::string in_out_dir = cfg_str("ingest.out_dir", "out");
  int in_min_count = static_cast<int>(ctx.config.get_int("ingest.min_count", 5));
  ingest->add_option("--interactions", in_interactions)->required(false);
  ingest->add_option("--items", in_items);
  ingest->add_option("--out-dir", in_out_dir);
  ingest->add_option("--min-count", in_min_count);

  // refine-embed
  auto* refine = app.add_subcommand("refine-embed", "contrastive embedding refinement");
  std::string re_embeddings = cfg_str("refine_embed.embeddings", "");
  std::string re_train = cfg_str("refine_embed.train", "");
  std::string re_out = cfg_str("refine_embed.out", "refined.sidemb");
  embed::ContrastiveConfig re_cfg;
  re_cfg.temperature = ctx.config.get_double("refine_embed.temperature", re_cfg.temperature);
  re_cfg.negatives_per_anchor = static_cast<std::size_t>(
      ctx.config.get_int("refine_embed.negatives_per_anchor",
                         static_cast<std::int64_t>(re_cfg.negatives_per_anchor)));
  re_cfg.learning_rate =
      ctx.config.get_double("refine_embed.learning_rate", re_cfg.learning_rate);
  re_cfg.epochs = static_cast<std::size_t>(ctx.config.get_int("refine_embed.epochs", 10));
  re_cfg.batch_size = static_cast<std::size_t>(ctx.config.get_int("refine_embed.batch_size", 32));
  int re_window = static_cast<int>(ctx.config.get_int("refine_embed.window", 0));
  refine->add_option("--embeddings", re_embeddings);
  refine->add_option("--train", re_train);
  refine->add_option("--out", re_out);
  refine->add_option("--temperature", re_cfg.temperature);
  refine->add_option("--negatives", re_cfg.negatives_per_anchor);
  refine->add_option("--lr", re_cfg.learning_rate);
  refine->add_option("--epochs", re_cfg.epochs);
  refine->add_option("--batch", re_cfg.batch_size);
  refine->add_option("--window", re_window, "co-engagement window, 0 = whole history");

  // train-codebook
  auto* train_cmd = app.add_subcommand("train-codebook", "residual quantizer training");
  std::string tc_embeddings = cfg_str("train_codebook.embeddings", "");
  std::string tc_out = cfg_str("train_codebook.out", "codebook.sidcbk");
  rq::TrainConfig tc_cfg;
  tc_cfg.ema = ctx.config.get_bool("train_codebook.ema", tc_cfg.ema);
  tc_cfg.diversity = ctx.config.get_bool("train_codebook.diversity", tc_cfg.diversity);
  tc_cfg.dead_code_reset =
      ctx.config.get_bool("train_codebook.dead_code_reset", tc_cfg.dead_code_reset);
  tc_cfg.random_last = ctx.config.get_bool("train_codebook.random_last", tc_cfg.random_last);
  tc_cfg.ema_decay = ctx.config.get_double("train_codebook.ema_decay", tc_cfg.ema_decay);
  tc_cfg.diversity_weight =
      ctx.config.get_double("train_codebook.diversity_weight", tc_cfg.diversity_weight);
  tc_cfg.reset_threshold = static_cast<std::uint32_t>(
      ctx.config.get_int("train_codebook.reset_threshold", tc_cfg.reset_threshold));
  tc_cfg.random_last_levels = static_cast<std::size_t>(ctx.config.get_int(
      "train_codebook.random_last_levels", static_cast<std::int64_t>(tc_cfg.random_last_levels)));
  tc_cfg.codebook_weight =
      ctx.config.get_double("train_codebook.codebook_weight", tc_cfg.codebook_weight);
  tc_cfg.commit_weight =
      ctx.config.get_double("train_codebook.commit_weight", tc_cfg.commit_weight);
  tc_cfg.soft_assign_temperature = ctx.config.get_double(
      "train_codebook.soft_assign_temperature", tc_cfg.soft_assign_temperature);
  tc_cfg.codebook_step =
      ctx.config.get_double("train_codebook.codebook_step", tc_cfg.codebook_step);
  tc_cfg.levels = static_cast<std::size_t>(
      ctx.config.get_int("train_codebook.levels", static_cast<std::int64_t>(tc_cfg.levels)));
  tc_cfg.codes_per_level = static_cast<std::size_t>(ctx.config.get_int(
      "train_codebook.codes_per_level", static_cast<std::int64_t>(tc_cfg.codes_per_level)));
  tc_cfg.epochs = static_cast<std::size_t>(
      ctx.config.get_int("train_codebook.epochs", static_cast<std::int64_t>(tc_cfg.epochs)));
  tc_cfg.batch_size = static_cast<std::size_t>(ctx.config.get_int(
      "train_codebook.batch_size", static_cast<std::int64_t>(tc_cfg.batch_size)));
  train_cmd->add_option("--embeddings", tc_embeddings);
  train_cmd->add_option("--out", tc_out);
  train_cmd->add_flag("--ema,!--no-ema", tc_cfg.ema, "EMA codebook updates");
  train_cmd->add_flag("--diversity,!--no-diversity", tc_cfg.diversity);
  train_cmd->add_flag("--dead-code-reset,!--no-dead-code-reset", tc_cfg.dead_code_reset);
  train_cmd->add_flag("--random-last,!--no-random-last", tc_cfg.random_last);
  train_cmd->add_option("--ema-decay", tc_cfg.ema_decay);
  train_cmd->add_option("--diversity-weight", tc_cfg.diversity_weight);
  train_cmd->add_option("--reset-threshold", tc_cfg.reset_threshold);
  train_cmd->add_option("--random-last-levels", tc_cfg.random_last_levels);
  train_cmd->add_option("--codebook-weight", tc_cfg.codebook_weight);
  train_cmd->add_option("--commit-weight", tc_cfg.commit_weight);
  train_cmd->add_option("--soft-temp", tc_cfg.soft_assign_temperature);
  train_cmd->add_option("--codebook-step", tc_cfg.codebook_step);
  train_cmd->add_option("--levels", tc_cfg.levels);
  train_cmd->add_option("--codes", tc_cfg.codes_per_level);
  train_cmd->add_option("--epochs", tc_cfg.epochs);
  train_cmd->add_option("--batch", tc_cfg.batch_size);

  // tokenize
  auto* tokenize = app.add_subcommand("tokenize", "assign semantic ids to every item");
  std::string tk_embeddings = cfg_str("tokenize.embeddings", "");
  std::string tk_codebook = cfg_str("tokenize.codebook", "");
  std::string tk_out = cfg_str("tokenize.out", "registry.jsonl");
  int tk_random_last = static_cast<int>(ctx.config.get_int("tokenize.random_last_levels", -1));
  tokenize->add_option("--embeddings", tk_embeddings);
  tokenize->add_option("--codebook", tk_codebook);
  tokenize->add_option("--out", tk_out);
  tokenize->add_option("--random-last-levels", tk_random_last,
                       "-1 = use the checkpoint's setting");

  // uniqueness-report
  auto* uniq = app.add_subcommand("uniqueness-report", "collision statistics for a registry");
  std::string uq_registry = cfg_str("uniqueness_report.registry", "");
  std::string uq_out = cfg_str("uniqueness_report.out", "");
  uniq->add_option("--registry", uq_registry);
  uniq->add_option("--out", uq_out);

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "2^5 technique grid with uniqueness column");
  std::string ab_embeddings = cfg_str("ablate.embeddings", "");
  std::string ab_interactions = cfg_str("ablate.interactions", "");
  std::string ab_out = cfg_str("ablate.out_prefix", "");
  ablate::AblationConfig ab_cfg;
  ab_cfg.train = tc_cfg;  // shares geometry defaults
  ab_cfg.train.epochs =
      static_cast<std::size_t>(ctx.config.get_int("ablate.epochs", 10));
  ab_cfg.refine.epochs = static_cast<std::size_t>(ctx.config.get_int("ablate.refine_epochs", 2));
  ab_cfg.refine.negatives_per_anchor =
      static_cast<std::size_t>(ctx.config.get_int("ablate.refine_negatives", 16));
  ab_cfg.refine.learning_rate = ctx.config.get_double("ablate.refine_learning_rate", 0.05);
  int ab_window = static_cast<int>(ctx.config.get_int("ablate.window", 0));
  int ab_min_count = static_cast<int>(ctx.config.get_int("ablate.min_count", 5));
  ablate_cmd->add_option("--embeddings", ab_embeddings);
  ablate_cmd->add_option("--interactions", ab_interactions);
  ablate_cmd->add_option("--out", ab_out, "prefix for .txt/.csv/.json outputs");
  ablate_cmd->add_option("--levels", ab_cfg.train.levels);
  ablate_cmd->add_option("--codes", ab_cfg.train.codes_per_level);
  ablate_cmd->add_option("--epochs", ab_cfg.train.epochs);
  ablate_cmd->add_option("--batch", ab_cfg.train.batch_size);
  ablate_cmd->add_option("--refine-epochs", ab_cfg.refine.epochs);
  ablate_cmd->add_option("--window", ab_window);
  ablate_cmd->add_option("--min-count", ab_min_count);

  // gen-traces
  auto* gen = app.add_subcommand("gen-traces", "reasoning-trace dataset generation");
  std::string gt_episodes = cfg_str("gen_traces.episodes", "");
  std::string gt_meta = cfg_str("gen_traces.meta", "");
  std::string gt_registry = cfg_str("gen_traces.registry", "");
  std::string gt_out = cfg_str("gen_traces.out", "samples.jsonl");
  std::string gt_strategy = cfg_str("gen_traces.strategy", "targeted");
  std::string gt_client = cfg_str("gen_traces.client", "mock-oracle");
  bool gt_kp = ctx.config.get_bool("gen_traces.knowledge_priming", false);
  int gt_attempts = static_cast<int>(ctx.config.get_int("gen_traces.max_attempts", 8));
  prompt::ChatClientConfig gt_ccfg;
  gt_ccfg.base_url = cfg_str("gen_traces.base_url", gt_ccfg.base_url);
  gt_ccfg.model = cfg_str("gen_traces.model", gt_ccfg.model);
  gt_ccfg.api_key_env = cfg_str("gen_traces.api_key_env", gt_ccfg.api_key_env);
  gt_ccfg.temperature = ctx.config.get_double("gen_traces.temperature", gt_ccfg.temperature);
  gt_ccfg.max_concurrent = static_cast<std::size_t>(ctx.config.get_int(
      "gen_traces.max_concurrent", static_cast<std::int64_t>(gt_ccfg.max_concurrent)));
  gt_ccfg.timeout_seconds =
      ctx.config.get_double("gen_traces.timeout_seconds", gt_ccfg.timeout_seconds);
  gen->add_option("--episodes", gt_episodes);
  gen->add_option("--meta", gt_meta);
  gen->add_option("--registry", gt_registry);
  gen->add_option("--out", gt_out);
  gen->add_option("--strategy", gt_strategy)->check(CLI::IsMember({"targeted", "rejection"}));
  gen->add_flag("--knowledge-priming,!--no-knowledge-priming", gt_kp);
  gen->add_option("--max-attempts", gt_attempts);
  gen->add_option("--client", gt_client)
      ->check(CLI::IsMember({"http", "mock-oracle", "mock-top1"}));
  gen->add_option("--base-url", gt_ccfg.base_url);
  gen->add_option("--model", gt_ccfg.model);
  gen->add_option("--api-key-env", gt_ccfg.api_key_env);
  gen->add_option("--temperature", gt_ccfg.temperature);
  gen->add_option("--concurrency", gt_ccfg.max_concurrent);
  gen->add_option("--timeout", gt_ccfg.timeout_seconds);
  bool gt_debug = false;
  gen->add_flag("--debug-log", gt_debug, "log request/response bodies, token redacted");

  // parse-check
  auto* pc = app.add_subcommand("parse-check", "run the output parser over a corpus");
  std::string pc_in = cfg_str("parse_check.in", "");
  std::string pc_out = cfg_str("parse_check.out", "");
  pc->add_option("--in", pc_in);
  pc->add_option("--out", pc_out);

  // score-rewards
  auto* sr = app.add_subcommand("score-rewards", "rewards, advantages and the batch objective");
  std::string sr_in = cfg_str("score_rewards.in", "");
  std::string sr_out = cfg_str("score_rewards.out", "");
  reward::RewardConfig sr_cfg;
  sr_cfg.alpha = ctx.config.get_double("score_rewards.alpha", sr_cfg.alpha);
  sr_cfg.eps_low = ctx.config.get_double("score_rewards.eps_low", sr_cfg.eps_low);
  sr_cfg.eps_high = ctx.config.get_double("score_rewards.eps_high", sr_cfg.eps_high);
  sr->add_option("--in", sr_in);
  sr->add_option("--out", sr_out);
  sr->add_option("--alpha", sr_cfg.alpha);
  sr->add_option("--eps-low", sr_cfg.eps_low);
  sr->add_option("--eps-high", sr_cfg.eps_high);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "episodes, retriever baseline and metric report");
  std::string ev_train = cfg_str("evaluate.train", "");
  std::string ev_valid = cfg_str("evaluate.valid", "");
  std::string ev_test = cfg_str("evaluate.test", "");
  std::string ev_outputs = cfg_str("evaluate.outputs", "");
  std::string ev_episodes_out = cfg_str("evaluate.episodes_out", "");
  std::string ev_report = cfg_str("evaluate.report", "");
  std::string ev_csv = cfg_str("evaluate.csv", "");
  std::string ev_ks = cfg_str("evaluate.ks", "1,5,9,10");
  int ev_candidates = static_cast<int>(ctx.config.get_int("evaluate.candidates", 10));
  int ev_order = static_cast<int>(ctx.config.get_int("evaluate.markov_order", 1));
  ev->add_option("--train", ev_train);
  ev->add_option("--valid", ev_valid, "appended to histories before prediction");
  ev->add_option("--test", ev_test);
  ev->add_option("--outputs", ev_outputs);
  ev->add_option("--episodes-out", ev_episodes_out);
  ev->add_option("--report", ev_report);
  ev->add_option("--csv", ev_csv);
  ev->add_option("--ks", ev_ks);
  ev->add_option("--candidates", ev_candidates);
  ev->add_option("--markov-order", ev_order);

  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  apply_workers(ctx);

  if (ingest->parsed()) return cmd_ingest(ctx, in_interactions, in_items, in_out_dir, in_min_count);
  if (refine->parsed()) {
    re_cfg.seed = derive_seed(ctx.seed, "embed");
    return cmd_refine(ctx, re_embeddings, re_train, re_out, re_cfg, re_window);
  }
  if (train_cmd->parsed()) {
    tc_cfg.seed = derive_seed(ctx.seed, "rqcodec");
    return cmd_train_codebook(ctx, tc_embeddings, tc_out, tc_cfg);
  }
  if (tokenize->parsed())
    return cmd_tokenize(ctx, tk_embeddings, tk_codebook, tk_out, tk_random_last,
                        derive_seed(ctx.seed, "sid"));
  if (uniq->parsed()) return cmd_uniqueness(ctx, uq_registry, uq_out);
  if (ablate_cmd->parsed()) {
    ab_cfg.train.seed = derive_seed(ctx.seed, "rqcodec");
    ab_cfg.refine.seed = derive_seed(ctx.seed, "embed");
    ab_cfg.registry_seed = derive_seed(ctx.seed, "sid");
    return cmd_ablate(ctx, ab_embeddings, ab_interactions, ab_out, ab_cfg, ab_window,
                      ab_min_count);
  }
  if (gen->parsed()) {
    gt_ccfg.debug_log = gt_debug;
    return cmd_gen_traces(ctx, gt_episodes, gt_meta, gt_registry, gt_out, gt_strategy, gt_kp,
                          gt_attempts, gt_client, gt_ccfg);
  }
  if (pc->parsed()) return cmd_parse_check(ctx, pc_in, pc_out);
  if (sr->parsed()) return cmd_score_rewards(ctx, sr_in, sr_out, sr_cfg);
  if (ev->parsed())
    return cmd_evaluate(ctx, ev_train, ev_valid, ev_test, ev_outputs, ev_episodes_out,
                        ev_report, ev_csv, ev_ks, ev_candidates, ev_order);
  return 1;
}

}  // namespace
}  // namespace sidkit::cli

int main(int argc, char** argv) {
  try {
    return sidkit::cli::run(argc, argv);
  } catch (const std::exception& e) {
    nlohmann::json error;
    error["error"] = {{"type", "runtime"}, {"message", e.what()}};
    std::cerr << error.dump() << "\n";
    return 1;
  }
}
