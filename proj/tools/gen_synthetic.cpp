// Regenerates the bundled synthetic corpus under data/synthetic/.

#include <cstdio>
#include <filesystem>
#include <string>

#include "sidkit/io.hpp"
#include "sidkit/synthetic.hpp"

using namespace sidkit;

int main(int argc, char** argv) {
  std::string out_dir = "data/synthetic";
  if (argc > 1) out_dir = argv[1];
  std::filesystem::create_directories(out_dir);

  synthetic::CorpusSpec spec;  // ~2k interactions over a few hundred items
  synthetic::SyntheticCorpus corpus_data = synthetic::make_corpus(spec);

  io::write_interactions(out_dir + "/interactions.jsonl", corpus_data.interactions);
  io::write_item_meta(out_dir + "/items.jsonl", corpus_data.meta);
  io::write_embeddings(out_dir + "/embeddings.sidemb", corpus_data.embeddings);

  std::printf("items=%zu users=%zu events=%zu -> %s\n", corpus_data.embeddings.size(),
              corpus_data.interactions.user_count(), corpus_data.interactions.event_count(),
              out_dir.c_str());
  return 0;
}
