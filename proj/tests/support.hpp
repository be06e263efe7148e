#pragma once

// Small seeded fixtures shared by the unit tests.

#include <filesystem>
#include <string>
#include <vector>

#include "distress/distress.hpp"

namespace distress::testing {

inline SynthConfig small_synth_config(std::uint64_t seed = 3) {
  SynthConfig c;
  c.n_banks = 12;
  c.first_quarter = {2008, 1};
  c.last_quarter = {2010, 4};
  c.sentences_min = 4;
  c.sentences_max = 12;
  c.distress_prior = 0.12;
  c.window_max_months = 9;
  c.seed = seed;
  return c;
}

inline std::vector<Sentence> ingest_all(const SyntheticDataset& ds) {
  std::vector<Sentence> out;
  for (const auto& a : ds.articles)
    for (auto& s : extract_sentences(a, ds.registry)) out.push_back(std::move(s));
  return out;
}

inline PvdmConfig small_pvdm_config(std::size_t dim = 16, std::size_t epochs = 3) {
  PvdmConfig c;
  c.vector_dim = dim;
  c.epochs = epochs;
  c.seed = 11;
  return c;
}

struct Pipeline {
  SyntheticDataset ds;
  std::vector<Sentence> sentences;
  PvdmModel model;
  FusedTable table;
};

inline Pipeline small_pipeline(std::uint64_t seed = 3, std::size_t dim = 16) {
  Pipeline p;
  p.ds = generate(small_synth_config(seed));
  p.sentences = ingest_all(p.ds);
  p.model = init_model(build_vocabulary(p.sentences, 2), p.sentences, small_pvdm_config(dim, 2));
  train(p.model, p.sentences);
  const auto aligned = align(p.sentences, p.ds.indicators);
  p.table = build_table(p.sentences, aligned.aligned, p.ds.events, p.model);
  return p;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("distress_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace distress::testing
