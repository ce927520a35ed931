#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sidkit/chat_client.hpp"
#include "sidkit/corpus.hpp"
#include "sidkit/episode.hpp"
#include "sidkit/sid.hpp"

namespace sidkit::prompt {

enum class Strategy { targeted, rejection };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct Provenance {
  Strategy strategy = Strategy::targeted;
  bool knowledge_priming = false;
  std::size_t attempts = 1;
};

// One chat-format training sample: system -> user -> assistant, where the
// assistant content always parses to a full ranking.
struct ChatSample {
  std::vector<ChatMessage> messages;
  Provenance provenance;
};

struct SampleConfig {
  bool with_category_hierarchy = false;
};

// 1-based candidate numbers with the target first and everything else in the
// original pre-ranked order.
std::vector<int> target_first_ranking(const RerankEpisode& episode);

// Renders items with their SID text, title and category path; every prompt is
// a pure function of the episode and options.
class PromptBuilder {
 public:
  PromptBuilder(const sid::SidRegistry& registry, const corpus::MetaMap& meta);

  // Chat-format training sample; throws when an item lacks a SID or metadata,
  // or when the trace does not parse to a full ranking.
  ChatSample build_chat_sample(const RerankEpisode& episode, const std::string& trace,
                               const SampleConfig& cfg) const;

  // Trace-generation prompts. The targeted variant discloses the answer;
  // the rejection variant withholds it and asks for a prediction.
  std::string build_targeted_prompt(const RerankEpisode& episode,
                                    bool knowledge_priming) const;
  std::string build_rejection_prompt(const RerankEpisode& episode,
                                     bool knowledge_priming) const;

  // The same prompt split for a chat endpoint: system role + user body.
  std::vector<ChatMessage> generation_messages(const RerankEpisode& episode, Strategy strategy,
                                               bool knowledge_priming) const;

  // Assistant JSON with the given explanation and a target-first ranking.
  std::string canonical_trace(const RerankEpisode& episode,
                              const std::string& explanation) const;

  std::string sid_text(const std::string& item_id) const;

 private:
  std::string item_block(const std::string& item_id, bool with_sid) const;
  std::string hierarchy_block(const RerankEpisode& episode) const;
  std::string prompt_body(const RerankEpisode& episode, Strategy strategy,
                          bool knowledge_priming) const;

  const sid::SidRegistry* registry_;
  const corpus::MetaMap* meta_;
};

struct RejectionOutcome {
  std::optional<ChatSample> sample;       // present on acceptance
  std::size_t attempts = 0;
  std::vector<std::string> transcripts;   // raw model text, one per attempt
};

// Queries until the parsed top-1 prediction equals the target, up to
// max_attempts. Exhaustion returns the transcript report instead of a sample.
RejectionOutcome run_rejection(ChatClient& client, const PromptBuilder& builder,
                               const RerankEpisode& episode, bool knowledge_priming,
                               std::size_t max_attempts);

// Single query; one reformat retry when the reply does not parse, then error.
ChatSample run_targeted(ChatClient& client, const PromptBuilder& builder,
                        const RerankEpisode& episode, bool knowledge_priming);

struct GenerationFailure {
  std::size_t episode_index = 0;
  std::string message;
  std::vector<std::string> transcripts;
};

struct GenerationResult {
  std::vector<std::optional<ChatSample>> samples;  // aligned with the episodes
  std::vector<GenerationFailure> failures;
};

// Bounded-parallel pool over episodes; each episode runs its strategy
// sequentially and results keep episode order.
GenerationResult generate_traces(ChatClient& client, const PromptBuilder& builder,
                                 const std::vector<RerankEpisode>& episodes, Strategy strategy,
                                 bool knowledge_priming, std::size_t max_attempts,
                                 std::size_t max_concurrent);

}  // namespace sidkit::prompt
