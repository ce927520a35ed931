#include "sidkit/outparse.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <stdexcept>

#include <json.hpp>

namespace sidkit::outparse {

using nlohmann::json;

std::vector<std::string> extract_json_candidates(const std::string& raw) {
  std::vector<std::string> spans;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    if (raw[pos] != '{') {
      ++pos;
      continue;
    }
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string::npos;
    for (std::size_t i = pos; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) {
          end = i;
          break;
        }
      }
    }
    if (end == std::string::npos) {
      ++pos;  // unmatched opener; try the next brace inside it
      continue;
    }
    spans.push_back(raw.substr(pos, end - pos + 1));
    pos = end + 1;
  }
  return spans;
}

namespace {

std::string strip_trailing_commas(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out += c;
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;  // drop it
    }
    out += c;
  }
  return out;
}

std::string swap_single_quotes(const std::string& text) {
  std::string out = text;
  for (char& c : out)
    if (c == '\'') c = '"';
  return out;
}

json parse_lenient(const std::string& text) {
  json parsed = json::parse(text, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  const std::string repaired = strip_trailing_commas(text);
  parsed = json::parse(repaired, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  return json::parse(swap_single_quotes(repaired), nullptr, false);
}

std::optional<int> to_index(const json& value) {
  if (value.is_number_integer()) {
    const std::int64_t v = value.get<std::int64_t>();
    if (v < -1000000000 || v > 1000000000) return std::nullopt;
    return static_cast<int>(v);
  }
  if (value.is_string()) {
    const std::string& s = value.get_ref<const std::string&>();
    std::size_t begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return std::nullopt;
    std::size_t end = s.find_last_not_of(" \t") + 1;
    try {
      std::size_t used = 0;
      const int v = std::stoi(s.substr(begin, end - begin), &used);
      if (used == end - begin) return v;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

std::vector<int> indices_from_text(const std::string& span) {
  std::vector<int> out;
  std::size_t i = 0;
  while (i < span.size()) {
    if (!std::isdigit(static_cast<unsigned char>(span[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < span.size() && std::isdigit(static_cast<unsigned char>(span[j]))) ++j;
    try {
      out.push_back(std::stoi(span.substr(i, j - i)));
    } catch (const std::exception&) {
    }
    i = j;
  }
  return out;
}

// Stage III: validate, dedupe, zero-base and complete to a permutation.
std::optional<std::vector<int>> canonicalize(const std::vector<int>& raw_indices, int n) {
  std::vector<int> kept;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int v : raw_indices) {
    if (v < 1 || v > n) continue;
    if (seen[static_cast<std::size_t>(v - 1)]) continue;
    seen[static_cast<std::size_t>(v - 1)] = true;
    kept.push_back(v - 1);
  }
  if (kept.empty()) return std::nullopt;
  for (int v = 0; v < n; ++v)
    if (!seen[static_cast<std::size_t>(v)]) kept.push_back(v);
  return kept;
}

struct StageOneHit {
  std::vector<int> indices;
  std::optional<std::string> reasoning;
};

std::optional<StageOneHit> stage_one(const std::string& raw) {
  const std::vector<std::string> spans = extract_json_candidates(raw);
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    const json parsed = parse_lenient(*it);
    if (parsed.is_discarded() || !parsed.is_object()) continue;
    const json* ranking = nullptr;
    if (parsed.contains("recommendations") && parsed["recommendations"].is_array() &&
        !parsed["recommendations"].empty())
      ranking = &parsed["recommendations"];
    else if (parsed.contains("ranking") && parsed["ranking"].is_array() &&
             !parsed["ranking"].empty())
      ranking = &parsed["ranking"];
    if (ranking == nullptr) continue;

    StageOneHit hit;
    for (const json& entry : *ranking)
      if (std::optional<int> v = to_index(entry)) hit.indices.push_back(*v);
    if (parsed.contains("explanation") && parsed["explanation"].is_string())
      hit.reasoning = parsed["explanation"].get<std::string>();
    else if (parsed.contains("reasoning") && parsed["reasoning"].is_string())
      hit.reasoning = parsed["reasoning"].get<std::string>();
    return hit;
  }
  return std::nullopt;
}

std::optional<std::vector<int>> stage_two(const std::string& raw) {
  static const std::regex recommendations_re(
      R"("?recommendations"?\s*[:=]\s*\[([^\]]*)\])", std::regex::icase);
  static const std::regex ranking_re(R"("?ranking"?\s*[:=]\s*\[([^\]]*)\])", std::regex::icase);
  static const std::regex prediction_re(R"(Prediction\s*:?\s*Candidate\s*#?\s*(\d+))",
                                        std::regex::icase);
  static const std::regex bare_list_re(R"(\[\s*"?\d[^\]]*\])");

  // First anchor that yields at least one numeric index wins.
  std::smatch match;
  if (std::regex_search(raw, match, recommendations_re)) {
    std::vector<int> indices = indices_from_text(match[1].str());
    if (!indices.empty()) return indices;
  }
  if (std::regex_search(raw, match, ranking_re)) {
    std::vector<int> indices = indices_from_text(match[1].str());
    if (!indices.empty()) return indices;
  }
  if (std::regex_search(raw, match, prediction_re)) {
    std::vector<int> indices = indices_from_text(match[1].str());
    if (!indices.empty()) return indices;
  }
  if (std::regex_search(raw, match, bare_list_re)) {
    std::vector<int> indices = indices_from_text(match[0].str());
    if (!indices.empty()) return indices;
  }
  return std::nullopt;
}

}  // namespace

ParsedOutput parse_output(const std::string& raw, int n_candidates) {
  if (n_candidates < 1)
    throw std::invalid_argument("parse_output: need at least one candidate");

  ParsedOutput out;
  if (std::optional<StageOneHit> hit = stage_one(raw)) {
    if (std::optional<std::vector<int>> ranking = canonicalize(hit->indices, n_candidates)) {
      out.stage = Stage::json;
      out.ranking = std::move(ranking);
      out.reasoning = std::move(hit->reasoning);
    }
    return out;  // a structured hit that fails validation stays unparsed
  }
  if (std::optional<std::vector<int>> indices = stage_two(raw)) {
    if (std::optional<std::vector<int>> ranking = canonicalize(*indices, n_candidates)) {
      out.stage = Stage::regex;
      out.ranking = std::move(ranking);
    }
  }
  return out;
}

bool format_ok(const ParsedOutput& parsed) {
  return parsed.ranking.has_value() && parsed.reasoning.has_value();
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::json:
      return "json";
    case Stage::regex:
      return "regex";
    case Stage::none:
      return "none";
  }
  return "none";
}

}  // namespace sidkit::outparse
