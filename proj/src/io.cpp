#include "sidkit/io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace sidkit::io {

using nlohmann::json;

namespace {

constexpr char kEmbMagic[8] = {'S', 'I', 'D', 'E', 'M', 'B', '1', '\0'};
constexpr char kCbkMagic[8] = {'S', 'I', 'D', 'C', 'B', 'K', '1', '\0'};

void put_u16(std::ofstream& out, std::uint16_t v) {
  const unsigned char bytes[2] = {static_cast<unsigned char>(v & 0xff),
                                  static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(bytes), 2);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void put_f32(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

std::uint16_t get_u16(std::ifstream& in) {
  unsigned char bytes[2];
  in.read(reinterpret_cast<char*>(bytes), 2);
  if (!in) throw std::runtime_error("unexpected end of file");
  return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw std::runtime_error("unexpected end of file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

float get_f32(std::ifstream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

}  // namespace

void write_embeddings(const std::string& path, const embed::EmbeddingStore& store) {
  std::ofstream out = open_out(path, true);
  out.write(kEmbMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  put_u32(out, static_cast<std::uint32_t>(store.dim()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& id = store.ids()[i];
    if (id.size() > 0xffff)
      throw std::runtime_error("item id too long for embedding file: " + id);
    put_u16(out, static_cast<std::uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (double v : store.row(i)) put_f32(out, static_cast<float>(v));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

embed::EmbeddingStore read_embeddings_jsonl(const std::string& path) {
  std::ifstream in = open_in(path, false);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("item_id") ||
        !obj.contains("embedding") || !obj["embedding"].is_array())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed embedding line");
    std::vector<double> vec;
    for (const auto& v : obj["embedding"]) vec.push_back(v.get<double>());
    if (dim == 0) dim = vec.size();
    rows.emplace_back(obj["item_id"].get<std::string>(), std::move(vec));
  }
  if (rows.empty()) throw std::runtime_error("embedding file is empty: " + path);
  embed::EmbeddingStore store(dim);
  for (const auto& [id, vec] : rows) store.insert(id, vec);
  return store;
}

}  // namespace

embed::EmbeddingStore read_embeddings(const std::string& path) {
  {
    std::ifstream probe = open_in(path, true);
    char magic[8] = {};
    probe.read(magic, 8);
    if (!probe || std::memcmp(magic, kEmbMagic, 8) != 0) return read_embeddings_jsonl(path);
  }
  std::ifstream in = open_in(path, true);
  in.seekg(8);
  const std::uint32_t count = get_u32(in);
  const std::uint32_t dim = get_u32(in);
  embed::EmbeddingStore store(dim);
  std::vector<double> vec(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t id_len = get_u16(in);
    std::string id(id_len, '\0');
    in.read(id.data(), id_len);
    if (!in) throw std::runtime_error("unexpected end of file in " + path);
    for (std::uint32_t k = 0; k < dim; ++k) vec[k] = static_cast<double>(get_f32(in));
    store.insert(id, vec);
  }
  return store;
}

namespace {

json codebook_config_json(const rq::TrainConfig& cfg) {
  json j;
  j["ema"] = cfg.ema;
  j["diversity"] = cfg.diversity;
  j["dead_code_reset"] = cfg.dead_code_reset;
  j["random_last"] = cfg.random_last;
  j["contrastive_pre"] = cfg.contrastive_pre;
  j["ema_decay"] = cfg.ema_decay;
  j["diversity_weight"] = cfg.diversity_weight;
  j["reset_threshold"] = cfg.reset_threshold;
  j["random_last_levels"] = cfg.random_last_levels;
  j["codebook_weight"] = cfg.codebook_weight;
  j["commit_weight"] = cfg.commit_weight;
  j["soft_assign_temperature"] = cfg.soft_assign_temperature;
  j["codebook_step"] = cfg.codebook_step;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  return j;
}

rq::TrainConfig codebook_config_from_json(const json& j) {
  rq::TrainConfig cfg;
  cfg.ema = j.value("ema", cfg.ema);
  cfg.diversity = j.value("diversity", cfg.diversity);
  cfg.dead_code_reset = j.value("dead_code_reset", cfg.dead_code_reset);
  cfg.random_last = j.value("random_last", cfg.random_last);
  cfg.contrastive_pre = j.value("contrastive_pre", cfg.contrastive_pre);
  cfg.ema_decay = j.value("ema_decay", cfg.ema_decay);
  cfg.diversity_weight = j.value("diversity_weight", cfg.diversity_weight);
  cfg.reset_threshold = j.value("reset_threshold", cfg.reset_threshold);
  cfg.random_last_levels = j.value("random_last_levels", cfg.random_last_levels);
  cfg.codebook_weight = j.value("codebook_weight", cfg.codebook_weight);
  cfg.commit_weight = j.value("commit_weight", cfg.commit_weight);
  cfg.soft_assign_temperature = j.value("soft_assign_temperature", cfg.soft_assign_temperature);
  cfg.codebook_step = j.value("codebook_step", cfg.codebook_step);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  return cfg;
}

}  // namespace

void write_codebook(const std::string& path, const rq::CodebookStack& stack,
                    const rq::TrainConfig& cfg) {
  json header;
  header["levels"] = stack.level_count();
  header["dim"] = stack.dim;
  json sizes = json::array();
  for (const rq::Codebook& book : stack.levels) sizes.push_back(book.code_count);
  header["entry_counts"] = sizes;
  header["seed"] = cfg.seed;
  header["config"] = codebook_config_json(cfg);
  const std::string header_text = header.dump();

  std::ofstream out = open_out(path, true);
  out.write(kCbkMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const rq::Codebook& book : stack.levels)
    for (double v : book.centroids) put_f32(out, static_cast<float>(v));
  if (!out) throw std::runtime_error("write failed: " + path);
}

CodebookFile read_codebook(const std::string& path) {
  std::ifstream in = open_in(path, true);
  char magic[8] = {};
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCbkMagic, 8) != 0)
    throw std::runtime_error("not a codebook checkpoint: " + path);
  const std::uint32_t header_len = get_u32(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), header_len);
  if (!in) throw std::runtime_error("unexpected end of file in " + path);
  json header = json::parse(header_text);

  CodebookFile file;
  file.config = codebook_config_from_json(header.at("config"));
  file.config.seed = header.value("seed", std::uint64_t{0});
  file.stack.dim = header.at("dim").get<std::size_t>();
  file.config.levels = header.at("levels").get<std::size_t>();
  for (const auto& count : header.at("entry_counts")) {
    rq::Codebook book(file.stack.dim, count.get<std::size_t>());
    for (double& v : book.centroids) v = static_cast<double>(get_f32(in));
    file.stack.levels.push_back(std::move(book));
  }
  if (!file.stack.levels.empty())
    file.config.codes_per_level = file.stack.levels.front().code_count;
  return file;
}

void write_registry(const std::string& path, const sid::SidRegistry& registry) {
  std::ofstream out = open_out(path, false);
  for (const auto& [item, semantic_id] : registry.forward()) {
    json obj;
    obj["item_id"] = item;
    obj["sid"] = semantic_id.codes;
    obj["sid_text"] = sid::render(semantic_id);
    out << obj.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

sid::SidRegistry read_registry(const std::string& path) {
  std::ifstream in = open_in(path, false);
  std::map<std::string, sid::SemanticId> forward;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.contains("item_id") || !obj.contains("sid"))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed registry line");
    sid::SemanticId semantic_id;
    for (const auto& v : obj["sid"]) semantic_id.codes.push_back(v.get<std::uint32_t>());
    forward.emplace(obj["item_id"].get<std::string>(), std::move(semantic_id));
  }
  return sid::SidRegistry(std::move(forward));
}

std::string uniqueness_report_json(const sid::UniquenessReport& report) {
  json obj;
  obj["total"] = report.total;
  obj["unique"] = report.unique;
  obj["colliding"] = report.colliding;
  obj["uniqueness_rate"] = report.uniqueness;
  return obj.dump();
}

void write_chat_samples(const std::string& path,
                        const std::vector<prompt::ChatSample>& samples) {
  std::ofstream out = open_out(path, false);
  for (const prompt::ChatSample& sample : samples) {
    json obj;
    obj["messages"] = json::array();
    for (const prompt::ChatMessage& m : sample.messages)
      obj["messages"].push_back({{"role", m.role}, {"content", m.content}});
    obj["provenance"] = {{"strategy", prompt::strategy_name(sample.provenance.strategy)},
                         {"knowledge_priming", sample.provenance.knowledge_priming},
                         {"attempts", sample.provenance.attempts}};
    out << obj.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<prompt::ChatSample> read_chat_samples(const std::string& path) {
  std::ifstream in = open_in(path, false);
  std::vector<prompt::ChatSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.contains("messages"))
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed sample");
    prompt::ChatSample sample;
    for (const auto& m : obj["messages"])
      sample.messages.push_back({m.at("role").get<std::string>(),
                                 m.at("content").get<std::string>()});
    if (obj.contains("provenance")) {
      const auto& p = obj["provenance"];
      sample.provenance.strategy =
          prompt::strategy_from_name(p.value("strategy", std::string("targeted")));
      sample.provenance.knowledge_priming = p.value("knowledge_priming", false);
      sample.provenance.attempts = p.value("attempts", std::size_t{1});
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

void write_interactions(const std::string& path, const corpus::InteractionLog& log) {
  std::ofstream out = open_out(path, false);
  for (const auto& [user, events] : log.by_user)
    for (const corpus::Event& e : events) {
      json obj;
      obj["user_id"] = e.user_id;
      obj["item_id"] = e.item_id;
      obj["timestamp"] = e.timestamp;
      out << obj.dump() << "\n";
    }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_events(const std::string& path, const std::map<std::string, corpus::Event>& events) {
  std::ofstream out = open_out(path, false);
  for (const auto& [user, e] : events) {
    json obj;
    obj["user_id"] = e.user_id;
    obj["item_id"] = e.item_id;
    obj["timestamp"] = e.timestamp;
    out << obj.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_episodes(const std::string& path, const std::vector<RerankEpisode>& episodes) {
  std::ofstream out = open_out(path, false);
  for (const RerankEpisode& e : episodes) {
    json obj;
    obj["user_id"] = e.user_id;
    obj["history"] = e.history;
    obj["candidates"] = e.candidates;
    obj["target"] = e.target;
    obj["pre_rank_position"] = e.pre_rank_position;
    out << obj.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<RerankEpisode> read_episodes(const std::string& path) {
  std::ifstream in = open_in(path, false);
  std::vector<RerankEpisode> episodes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.contains("candidates") || !obj.contains("target"))
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed episode");
    RerankEpisode e;
    e.user_id = obj.value("user_id", std::string());
    for (const auto& h : obj.value("history", json::array())) e.history.push_back(h.get<std::string>());
    for (const auto& c : obj["candidates"]) e.candidates.push_back(c.get<std::string>());
    e.target = obj["target"].get<std::string>();
    e.pre_rank_position = obj.value("pre_rank_position", 0);
    if (e.pre_rank_position == 0) {
      for (std::size_t i = 0; i < e.candidates.size(); ++i)
        if (e.candidates[i] == e.target) {
          e.pre_rank_position = static_cast<int>(i + 1);
          break;
        }
    }
    e.validate();
    episodes.push_back(std::move(e));
  }
  return episodes;
}

void write_item_meta(const std::string& path, const corpus::MetaMap& meta) {
  std::ofstream out = open_out(path, false);
  for (const auto& [id, m] : meta) {
    json obj;
    obj["item_id"] = m.item_id;
    obj["title"] = m.title;
    obj["categories"] = m.categories;
    out << obj.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out = open_out(path, true);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in = open_in(path, true);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

}  // namespace sidkit::io
