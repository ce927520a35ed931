#include "sidkit/sid.hpp"

#include <algorithm>
#include <charconv>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sidkit::sid {

namespace {
constexpr const char* kBegin = "<|sid_begin|>";
constexpr const char* kEnd = "<|sid_end|>";
}  // namespace

std::string render(const SemanticId& id) {
  if (id.codes.size() > 26)
    throw std::invalid_argument("render: at most 26 levels are renderable");
  if (id.codes.empty()) throw std::invalid_argument("render: empty semantic id");
  std::string out = kBegin;
  for (std::size_t k = 0; k < id.codes.size(); ++k) {
    out += "<s_";
    out += static_cast<char>('a' + k);
    out += '_';
    out += std::to_string(id.codes[k]);
    out += '>';
  }
  out += kEnd;
  return out;
}

SemanticId parse_sid(const std::string& text) {
  std::string_view view(text);
  while (!view.empty() && std::isspace(static_cast<unsigned char>(view.front())))
    view.remove_prefix(1);
  while (!view.empty() && std::isspace(static_cast<unsigned char>(view.back())))
    view.remove_suffix(1);

  const std::string_view begin_tag(kBegin);
  const std::string_view end_tag(kEnd);
  if (view.substr(0, begin_tag.size()) != begin_tag)
    throw std::invalid_argument("parse_sid: missing begin marker");
  if (view.size() < begin_tag.size() + end_tag.size() ||
      view.substr(view.size() - end_tag.size()) != end_tag)
    throw std::invalid_argument("parse_sid: missing end marker");
  std::string_view body = view.substr(begin_tag.size(),
                                      view.size() - begin_tag.size() - end_tag.size());
  if (body.find(begin_tag) != std::string_view::npos ||
      body.find(end_tag) != std::string_view::npos)
    throw std::invalid_argument("parse_sid: expected exactly one begin/end pair");

  SemanticId id;
  std::size_t expected_level = 0;
  while (!body.empty()) {
    if (body.substr(0, 3) != "<s_")
      throw std::invalid_argument("parse_sid: malformed level token");
    body.remove_prefix(3);
    if (body.size() < 2 || body[1] != '_')
      throw std::invalid_argument("parse_sid: malformed level letter");
    const char letter = body[0];
    if (letter < 'a' || letter > 'z')
      throw std::invalid_argument("parse_sid: bad level letter");
    const std::size_t level = static_cast<std::size_t>(letter - 'a');
    if (level != expected_level)
      throw std::invalid_argument("parse_sid: level letters out of order");
    body.remove_prefix(2);
    const std::size_t close = body.find('>');
    if (close == std::string_view::npos || close == 0)
      throw std::invalid_argument("parse_sid: unterminated level token");
    std::uint32_t value = 0;
    const char* first = body.data();
    const char* last = body.data() + close;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
      throw std::invalid_argument("parse_sid: non-integer code payload");
    id.codes.push_back(value);
    body.remove_prefix(close + 1);
    ++expected_level;
  }
  if (id.codes.empty()) throw std::invalid_argument("parse_sid: no level tokens");
  return id;
}

SidRegistry::SidRegistry(std::map<std::string, SemanticId> forward)
    : forward_(std::move(forward)) {
  for (const auto& [item, sid] : forward_) inverse_[sid].push_back(item);
  for (auto& [sid, items] : inverse_) std::sort(items.begin(), items.end());
}

const SemanticId& SidRegistry::sid_of(const std::string& item_id) const {
  auto it = forward_.find(item_id);
  if (it == forward_.end())
    throw std::out_of_range("SidRegistry: unknown item '" + item_id + "'");
  return it->second;
}

const std::vector<std::string>& SidRegistry::items_of(const SemanticId& id) const {
  static const std::vector<std::string> empty;
  auto it = inverse_.find(id);
  return it == inverse_.end() ? empty : it->second;
}

SidRegistry build_registry(const embed::EmbeddingStore& store, const rq::CodebookStack& stack,
                           const RegistryConfig& cfg) {
  if (store.dim() != stack.dim)
    throw std::invalid_argument("build_registry: dimension mismatch");
  const std::size_t n = store.size();
  std::vector<SemanticId> sids(n);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const std::size_t row = static_cast<std::size_t>(i);
    Rng rng(cfg.seed ^ fnv1a64(store.ids()[row]));
    rq::QuantizeResult q = rq::quantize(store.row(row), stack, cfg.random_last_levels, rng);
    sids[row].codes = std::move(q.codes);
  }

  std::map<std::string, SemanticId> forward;
  for (std::size_t i = 0; i < n; ++i) forward.emplace(store.ids()[i], std::move(sids[i]));
  return SidRegistry(std::move(forward));
}

UniquenessReport uniqueness_report(const SidRegistry& registry) {
  if (registry.size() == 0)
    throw std::invalid_argument("uniqueness_report: empty registry");
  UniquenessReport report;
  report.total = registry.size();
  for (const auto& [sid, items] : registry.inverse()) {
    if (items.size() == 1)
      ++report.unique;
    else
      report.colliding += items.size();
  }
  report.uniqueness =
      1.0 - static_cast<double>(report.colliding) / static_cast<double>(report.total);
  return report;
}

double uniqueness_rate(const SidRegistry& registry) { return uniqueness_report(registry).uniqueness; }

}  // namespace sidkit::sid
