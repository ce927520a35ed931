#pragma once

#include <string>
#include <vector>

#include "sidkit/corpus.hpp"
#include "sidkit/embedding.hpp"
#include "sidkit/episode.hpp"
#include "sidkit/prompt.hpp"
#include "sidkit/rq.hpp"
#include "sidkit/sid.hpp"

namespace sidkit::io {

// Embedding file: magic "SIDEMB1\0", little-endian u32 count, u32 dim, then
// per item a u16 id length, the UTF-8 id and dim f32 components.
// A JSON-lines fallback ({item_id, embedding:[...]}) is accepted on read.
void write_embeddings(const std::string& path, const embed::EmbeddingStore& store);
embed::EmbeddingStore read_embeddings(const std::string& path);

// Codebook checkpoint: magic "SIDCBK1\0", u32 JSON header length, the header
// (levels, dim, entry counts, seed and config echo) and a level-major f32
// centroid blob. Write -> read -> write is byte-identical.
void write_codebook(const std::string& path, const rq::CodebookStack& stack,
                    const rq::TrainConfig& cfg);
struct CodebookFile {
  rq::CodebookStack stack;
  rq::TrainConfig config;
};
CodebookFile read_codebook(const std::string& path);

// Registry export: JSON lines of {item_id, sid, sid_text}.
void write_registry(const std::string& path, const sid::SidRegistry& registry);
sid::SidRegistry read_registry(const std::string& path);

// Uniqueness report as a single JSON object.
std::string uniqueness_report_json(const sid::UniquenessReport& report);

// Chat samples: JSON lines of {messages, provenance}.
void write_chat_samples(const std::string& path,
                        const std::vector<prompt::ChatSample>& samples);
std::vector<prompt::ChatSample> read_chat_samples(const std::string& path);

// Interaction logs / splits as JSON lines of {user_id, item_id, timestamp}.
void write_interactions(const std::string& path, const corpus::InteractionLog& log);
void write_events(const std::string& path, const std::map<std::string, corpus::Event>& events);

// Episodes: JSON lines of {user_id, history, candidates, target, pre_rank_position}.
void write_episodes(const std::string& path, const std::vector<RerankEpisode>& episodes);
std::vector<RerankEpisode> read_episodes(const std::string& path);

void write_item_meta(const std::string& path, const corpus::MetaMap& meta);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace sidkit::io
