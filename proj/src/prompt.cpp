#include "sidkit/prompt.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sidkit/outparse.hpp"

namespace sidkit {

void RerankEpisode::validate() const {
  if (candidates.size() < 2)
    throw std::invalid_argument("episode " + user_id + ": needs at least two candidates");
  if (pre_rank_position < 1 || static_cast<std::size_t>(pre_rank_position) > candidates.size())
    throw std::invalid_argument("episode " + user_id + ": pre-rank position out of range");
  if (candidates[static_cast<std::size_t>(pre_rank_position - 1)] != target)
    throw std::invalid_argument("episode " + user_id +
                                ": target does not sit at the pre-rank position");
}

}  // namespace sidkit

namespace sidkit::prompt {

using nlohmann::json;

const char* strategy_name(Strategy s) {
  return s == Strategy::targeted ? "targeted" : "rejection";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "targeted") return Strategy::targeted;
  if (name == "rejection") return Strategy::rejection;
  throw std::invalid_argument("unknown strategy: " + name);
}

std::vector<int> target_first_ranking(const RerankEpisode& episode) {
  episode.validate();
  std::vector<int> out;
  out.push_back(episode.pre_rank_position);
  for (int c = 1; c <= static_cast<int>(episode.candidates.size()); ++c)
    if (c != episode.pre_rank_position) out.push_back(c);
  return out;
}

PromptBuilder::PromptBuilder(const sid::SidRegistry& registry, const corpus::MetaMap& meta)
    : registry_(&registry), meta_(&meta) {}

std::string PromptBuilder::sid_text(const std::string& item_id) const {
  try {
    return sid::render(registry_->sid_of(item_id));
  } catch (const std::out_of_range&) {
    throw std::runtime_error("no semantic id registered for item '" + item_id + "'");
  }
}

namespace {

std::string category_path(const corpus::ItemMeta& meta) {
  std::string out;
  for (std::size_t i = 0; i < meta.categories.size(); ++i) {
    if (i) out += " > ";
    out += meta.categories[i];
  }
  return out;
}

const corpus::ItemMeta& meta_of(const corpus::MetaMap& meta, const std::string& item_id) {
  auto it = meta.find(item_id);
  if (it == meta.end()) throw std::runtime_error("no metadata for item '" + item_id + "'");
  return it->second;
}

const char* level_label(std::size_t depth) {
  switch (depth) {
    case 0: return "Root";
    case 1: return "Main";
    case 2: return "Sub";
    case 3: return "Product Type";
    case 4: return "Specific";
    default: return "Variant";
  }
}

constexpr const char* kGenerationRole =
    "You are an expert at analyzing e-commerce purchase patterns and predicting user "
    "preferences. Given the user's purchase history (with SID identifiers) and a list of "
    "candidate items, reason step by step about which candidate is most likely to be the "
    "user's next purchase.";

}  // namespace

std::string PromptBuilder::item_block(const std::string& item_id, bool with_sid) const {
  const corpus::ItemMeta& meta = meta_of(*meta_, item_id);
  std::string out;
  if (with_sid) out += "Item SID: " + sid_text(item_id) + "\n";
  out += "Title: " + meta.title + "\n";
  out += "Categories: " + category_path(meta) + "\n";
  return out;
}

std::string PromptBuilder::hierarchy_block(const RerankEpisode& episode) const {
  std::map<std::size_t, std::set<std::string>> by_depth;
  auto collect = [&](const std::string& item_id) {
    const corpus::ItemMeta& meta = meta_of(*meta_, item_id);
    for (std::size_t d = 0; d < meta.categories.size(); ++d)
      by_depth[d].insert(meta.categories[d]);
  };
  for (const std::string& id : episode.history) collect(id);
  for (const std::string& id : episode.candidates) collect(id);

  std::ostringstream out;
  out << "# Available Category Hierarchy\n";
  out << "Categories are structured in a hierarchy. Format: 'Level0 > Level1 > Level2 > "
         "...'\n";
  for (const auto& [depth, names] : by_depth) {
    out << "Level " << depth << " (" << level_label(depth) << "): ";
    bool first = true;
    for (const std::string& name : names) {
      if (!first) out << ", ";
      out << name;
      first = false;
    }
    out << "\n";
  }
  return out.str();
}

std::string PromptBuilder::prompt_body(const RerankEpisode& episode, Strategy strategy,
                                       bool knowledge_priming) const {
  episode.validate();
  const std::size_t n = episode.candidates.size();
  std::ostringstream out;

  if (knowledge_priming) out << hierarchy_block(episode) << "\n";

  out << "# User Purchase History\n";
  out << "The user recently purchased the following items:\n\n";
  for (std::size_t i = 0; i < episode.history.size(); ++i) {
    out << "Item " << (i + 1) << "\n";
    out << item_block(episode.history[i], /*with_sid=*/true);
    out << "\n";
  }

  out << "# Candidate Items\n\n";
  for (std::size_t i = 0; i < n; ++i) {
    const corpus::ItemMeta& meta = meta_of(*meta_, episode.candidates[i]);
    out << "Candidate " << (i + 1) << ": " << meta.title << "\n";
    out << "Categories: " << category_path(meta) << "\n\n";
  }

  out << "# Task\n";
  if (strategy == Strategy::targeted) {
    const corpus::ItemMeta& target_meta = meta_of(*meta_, episode.target);
    out << "The correct answer is Candidate " << episode.pre_rank_position << " ("
        << target_meta.title << ").\n";
    out << "Generate a step-by-step reasoning trace (3 steps) explaining why this candidate "
           "is the best match.\n";
    out << "Do NOT use phrases like \"target item\" or \"the target\".\n";
  } else {
    out << "Analyze the user's purchase history and predict which candidate they are most "
           "likely to purchase next.\n";
    out << "Think step-by-step about the patterns and preferences shown in their history.\n";
  }
  out << "\n";

  const std::string example_sid = episode.history.empty()
                                      ? std::string("<|sid_begin|>...<|sid_end|>")
                                      : sid_text(episode.history.front());
  out << "Critical Guidelines:\n";
  out << "1. Cite items by SID: when referring to items in the purchase history, cite them "
         "directly using their SID (e.g., "
      << example_sid << ").\n";
  out << "2. Focus on analyzing patterns in the user's purchase history.\n";
  out << "3. Think about sequential purchase patterns (e.g., shampoo -> conditioner, phone "
         "-> case).\n\n";

  out << "# Example Output Format\n";
  out << "{\n";
  out << "  \"explanation\": \"Step 1: 'Looking at the purchase history, "
         "<|sid_begin|>...<|sid_end|> and <|sid_begin|>...<|sid_end|> share a category...' "
         "Step 2: 'The most recent purchase of <|sid_begin|>...<|sid_end|> suggests...' "
         "Step 3: 'Based on this pattern, the top candidate is the natural next "
         "purchase...'\",\n";
  out << "  \"recommendations\": [\"<best candidate number>\", \"<second best>\", \"... all "
      << n << " candidate numbers ...\"]\n";
  out << "}\n\n";

  out << "# Your Response\n";
  out << "Return exactly one JSON object following the example format. The "
         "\"recommendations\" list must contain each candidate number from 1 to "
      << n << " exactly once, best match first.\n";
  return out.str();
}

std::string PromptBuilder::build_targeted_prompt(const RerankEpisode& episode,
                                                 bool knowledge_priming) const {
  return std::string("# System Role\n") + kGenerationRole + "\n\n" +
         prompt_body(episode, Strategy::targeted, knowledge_priming);
}

std::string PromptBuilder::build_rejection_prompt(const RerankEpisode& episode,
                                                  bool knowledge_priming) const {
  return std::string("# System Role\n") + kGenerationRole + "\n\n" +
         prompt_body(episode, Strategy::rejection, knowledge_priming);
}

std::vector<ChatMessage> PromptBuilder::generation_messages(const RerankEpisode& episode,
                                                            Strategy strategy,
                                                            bool knowledge_priming) const {
  return {{"system", kGenerationRole},
          {"user", prompt_body(episode, strategy, knowledge_priming)}};
}

std::string PromptBuilder::canonical_trace(const RerankEpisode& episode,
                                           const std::string& explanation) const {
  json trace;
  trace["explanation"] = explanation;
  trace["recommendations"] = json::array();
  for (int c : target_first_ranking(episode))
    trace["recommendations"].push_back(std::to_string(c));
  return trace.dump();
}

ChatSample PromptBuilder::build_chat_sample(const RerankEpisode& episode,
                                            const std::string& trace,
                                            const SampleConfig& cfg) const {
  episode.validate();
  const std::size_t n = episode.candidates.size();
  const outparse::ParsedOutput parsed = outparse::parse_output(trace, static_cast<int>(n));
  if (!parsed.ranking.has_value())
    throw std::invalid_argument("build_chat_sample: trace does not parse to a ranking");

  std::ostringstream user;
  if (cfg.with_category_hierarchy) user << hierarchy_block(episode) << "\n";
  user << "The user has purchased the following items:\n";
  for (const std::string& id : episode.history) {
    const corpus::ItemMeta& meta = meta_of(*meta_, id);
    user << sid_text(id) << ", title: \"" << meta.title << "\", categories: \""
         << category_path(meta) << "\";\n";
  }
  user << "\nPlease re-rank the following candidates:\n";
  for (std::size_t i = 0; i < n; ++i) {
    const corpus::ItemMeta& meta = meta_of(*meta_, episode.candidates[i]);
    user << "Candidate " << (i + 1) << ": " << sid_text(episode.candidates[i]) << ", title: \""
         << meta.title << "\", categories: \"" << category_path(meta) << "\"\n";
  }

  std::ostringstream system;
  system << "You are a professional e-commerce recommendation expert specializing in "
            "sequential purchase prediction. YOUR TASK: Predict which item the user is MOST "
            "LIKELY TO PURCHASE NEXT by re-ranking "
         << n << " pre-ranked candidates from a generative retrieval model.";

  ChatSample sample;
  sample.messages = {{"system", system.str()}, {"user", user.str()}, {"assistant", trace}};
  return sample;
}

RejectionOutcome run_rejection(ChatClient& client, const PromptBuilder& builder,
                               const RerankEpisode& episode, bool knowledge_priming,
                               std::size_t max_attempts) {
  episode.validate();
  if (max_attempts < 1)
    throw std::invalid_argument("run_rejection: max_attempts must be >= 1");
  const std::vector<ChatMessage> messages =
      builder.generation_messages(episode, Strategy::rejection, knowledge_priming);
  const int n = static_cast<int>(episode.candidates.size());
  const int target_index = episode.pre_rank_position - 1;  // zero-based

  RejectionOutcome outcome;
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    const std::string raw = client.complete(messages);
    outcome.transcripts.push_back(raw);
    outcome.attempts = attempt;
    const outparse::ParsedOutput parsed = outparse::parse_output(raw, n);
    if (parsed.ranking.has_value() && parsed.ranking->front() == target_index) {
      ChatSample sample = builder.build_chat_sample(
          episode, raw, SampleConfig{.with_category_hierarchy = knowledge_priming});
      sample.provenance =
          Provenance{Strategy::rejection, knowledge_priming, attempt};
      outcome.sample = std::move(sample);
      return outcome;
    }
  }
  return outcome;  // exhausted: transcripts only
}

ChatSample run_targeted(ChatClient& client, const PromptBuilder& builder,
                        const RerankEpisode& episode, bool knowledge_priming) {
  episode.validate();
  std::vector<ChatMessage> messages =
      builder.generation_messages(episode, Strategy::targeted, knowledge_priming);
  const int n = static_cast<int>(episode.candidates.size());

  std::string raw = client.complete(messages);
  std::size_t attempts = 1;
  if (!outparse::parse_output(raw, n).ranking.has_value()) {
    messages.push_back({"assistant", raw});
    messages.push_back({"user",
                        "Your previous reply could not be parsed. Respond again with exactly "
                        "one JSON object with keys \"explanation\" and \"recommendations\" "
                        "listing all " +
                            std::to_string(n) + " candidate numbers."});
    raw = client.complete(messages);
    attempts = 2;
    if (!outparse::parse_output(raw, n).ranking.has_value())
      throw std::runtime_error("run_targeted: reply unparseable after one reformat retry");
  }
  ChatSample sample = builder.build_chat_sample(
      episode, raw, SampleConfig{.with_category_hierarchy = knowledge_priming});
  sample.provenance = Provenance{Strategy::targeted, knowledge_priming, attempts};
  return sample;
}

GenerationResult generate_traces(ChatClient& client, const PromptBuilder& builder,
                                 const std::vector<RerankEpisode>& episodes, Strategy strategy,
                                 bool knowledge_priming, std::size_t max_attempts,
                                 std::size_t max_concurrent) {
  GenerationResult result;
  result.samples.resize(episodes.size());
  std::mutex failure_mutex;
  std::atomic<std::size_t> cursor{0};

  const std::size_t workers = std::max<std::size_t>(1, std::min(max_concurrent, episodes.size()));
  auto worker = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= episodes.size()) return;
      try {
        if (strategy == Strategy::targeted) {
          result.samples[i] =
              run_targeted(client, builder, episodes[i], knowledge_priming);
        } else {
          RejectionOutcome outcome =
              run_rejection(client, builder, episodes[i], knowledge_priming, max_attempts);
          if (outcome.sample.has_value()) {
            result.samples[i] = std::move(outcome.sample);
          } else {
            std::lock_guard<std::mutex> lock(failure_mutex);
            result.failures.push_back(GenerationFailure{
                i, "rejection sampling exhausted after " + std::to_string(outcome.attempts) +
                       " attempts",
                std::move(outcome.transcripts)});
          }
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        result.failures.push_back(GenerationFailure{i, e.what(), {}});
      }
    }
  };

  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  std::sort(result.failures.begin(), result.failures.end(),
            [](const GenerationFailure& a, const GenerationFailure& b) {
              return a.episode_index < b.episode_index;
            });
  return result;
}

}  // namespace sidkit::prompt
