#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sidkit::outparse {

enum class Stage { none, json, regex };

struct ParsedOutput {
  std::optional<std::string> reasoning;
  std::optional<std::vector<int>> ranking;  // zero-based permutation of [0, n)
  Stage stage = Stage::none;
};

// Balanced top-level brace spans, left to right, string- and escape-aware.
// Nested objects stay inside their outer span; an unmatched opening brace
// yields nothing for that position.
std::vector<std::string> extract_json_candidates(const std::string& raw);

// Three-stage recovery of a ranking from raw model text.
//   Stage I   last JSON object with a non-empty "recommendations"/"ranking"
//             list ("explanation"/"reasoning" supplies the trace); minor
//             repairs (trailing commas, single quotes) are attempted.
//   Stage II  regex fallback: "recommendations"/"ranking" lists,
//             "Prediction: Candidate N", then any bracketed integer list.
//   Stage III filter to [1, n], dedupe keeping order, zero-base, append the
//             missing candidates in ascending order.
// Never throws on content; every failure is (none, none).
ParsedOutput parse_output(const std::string& raw, int n_candidates);

// True when both a reasoning trace and a ranking were recovered.
bool format_ok(const ParsedOutput& parsed);

const char* stage_name(Stage stage);

}  // namespace sidkit::outparse
