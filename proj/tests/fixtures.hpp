#pragma once

// Shared deterministic fixtures for the prompt/sample tests and golden files.

#include <map>
#include <string>
#include <vector>

#include "sidkit/corpus.hpp"
#include "sidkit/episode.hpp"
#include "sidkit/sid.hpp"

namespace sidkit::testfix {

inline corpus::MetaMap demo_meta() {
  corpus::MetaMap meta;
  auto add = [&](const std::string& id, const std::string& title,
                 std::vector<std::string> categories) {
    corpus::ItemMeta m;
    m.item_id = id;
    m.title = title;
    m.categories = std::move(categories);
    meta.emplace(id, std::move(m));
  };
  add("i01", "Compact Whisk Set 120", {"Retail", "Kitchen", "Utensils"});
  add("i02", "Premium Skillet Duo 121", {"Retail", "Kitchen", "Cookware"});
  add("i03", "Eco Mixing Bowl Kit 122", {"Retail", "Kitchen", "Utensils"});
  add("i04", "Classic Peeler Plus 123", {"Retail", "Kitchen", "Utensils"});
  add("i05", "Pro Spatula Max 124", {"Retail", "Kitchen", "Cookware"});
  add("i06", "Mini Ladle Lite 125", {"Retail", "Kitchen", "Utensils"});
  add("i07", "Deluxe Grater Set 126", {"Retail", "Kitchen", "Utensils"});
  add("i08", "Everyday Tongs Kit 127", {"Retail", "Kitchen", "Cookware"});
  add("i09", "Compact Strainer Duo 128", {"Retail", "Kitchen", "Utensils"});
  add("i10", "Premium Rolling Pin 129", {"Retail", "Kitchen", "Baking"});
  add("i11", "Eco Measuring Cup Set 130", {"Retail", "Kitchen", "Baking"});
  add("i12", "Classic Cutting Board 131", {"Retail", "Kitchen", "Utensils"});
  return meta;
}

inline sid::SidRegistry demo_registry() {
  std::map<std::string, sid::SemanticId> forward;
  std::uint32_t base = 7;
  for (int i = 1; i <= 12; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "i%02d", i);
    sid::SemanticId semantic_id;
    semantic_id.codes = {base % 256, (base * 3 + 11) % 256, (base * 7 + 5) % 256,
                         (base * 13 + 2) % 256};
    forward.emplace(id, std::move(semantic_id));
    base = base * 31 + 17;
  }
  return sid::SidRegistry(std::move(forward));
}

// 2 history items, 10 candidates, target at pre-rank 3.
inline RerankEpisode demo_episode() {
  RerankEpisode episode;
  episode.user_id = "u42";
  episode.history = {"i01", "i02"};
  episode.candidates = {"i03", "i04", "i05", "i06", "i07", "i08", "i09", "i10", "i11", "i12"};
  episode.target = "i05";
  episode.pre_rank_position = 3;
  return episode;
}

}  // namespace sidkit::testfix
