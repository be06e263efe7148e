#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace distress;
using namespace distress::testing;

TEST(Synth, DeterministicFiles) {
  const auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
  write_dataset(generate(small_synth_config(6)), a);
  write_dataset(generate(small_synth_config(6)), b);
  for (const char* f : {"registry.json", "articles.jsonl", "events.csv", "indicators.csv", "truth.csv", "manifest.json"})
    EXPECT_EQ(io::read_text(a / f), io::read_text(b / f)) << f;
  write_dataset(generate(small_synth_config(7)), b);
  EXPECT_NE(io::read_text(a / "articles.jsonl"), io::read_text(b / "articles.jsonl"));
}

TEST(Synth, DefaultPriorOverSeeds) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthConfig c;
    c.seed = seed;
    c.sentences_max = 6;  // prior does not depend on article volume
    c.sentences_min = 1;
    const auto s = describe(generate(c));
    EXPECT_GE(s.prior, 0.05) << seed;
    EXPECT_LE(s.prior, 0.09) << seed;
    EXPECT_EQ(s.banks, 62u);
  }
}

TEST(Synth, SummaryIdentities) {
  const auto ds = generate(small_synth_config(2));
  const auto s = describe(ds);
  std::size_t distressed = 0;
  for (const auto& row : ds.distressed)
    for (auto v : row) distressed += v;
  EXPECT_EQ(s.distressed_bank_months, distressed);
  EXPECT_EQ(s.bank_months, 12u * 36u);
  EXPECT_EQ(s.prior, static_cast<double>(distressed) / (12.0 * 36.0));
  EXPECT_EQ(s.banks, ds.config.n_banks);
  EXPECT_EQ(s.events, ds.events.size());
  // Every distressed month lies in exactly one event window.
  for (std::size_t b = 0; b < ds.registry.size(); ++b)
    for (std::size_t m = 0; m < ds.config.n_months(); ++m) {
      const auto month = ds.month_at(m);
      EXPECT_EQ(ds.distressed[b][m], month_label(ds.registry[b].bank_id, month, ds.events)) << b << " " << m;
    }
  const auto j = to_json(s);
  EXPECT_EQ(j["banks"], 12);
}

TEST(Synth, ShiftedIndicatorsSeparate) {
  SynthConfig c;
  c.sentences_min = 1;
  c.sentences_max = 2;
  const auto s = describe(generate(c));
  std::size_t shifted = 0;
  for (const auto& ind : s.indicators) {
    if (!ind.shifted) continue;
    ++shifted;
    EXPECT_GE(std::abs(ind.mean_distress - ind.mean_tranquil), 0.5 * c.shift_delta * c.numeric_signal) << ind.name;
  }
  EXPECT_EQ(shifted, 6u);
}

TEST(Synth, NoSignalMeansNoShift) {
  auto c = small_synth_config(4);
  c.numeric_signal = 0.0;
  c.text_signal = 0.0;
  const auto ds = generate(c);
  for (std::size_t a = 0; a < ds.sentence_templates.size(); ++a)
    for (int t : ds.sentence_templates[a]) EXPECT_FALSE(ds.is_distress_template(t));
}

TEST(Synth, RoundTripThroughPipelineWithoutDrops) {
  const auto ds = generate(small_synth_config(9));
  const auto dir = scratch_dir("synth_rt");
  write_dataset(ds, dir);
  const SynthPaths paths(dir);
  const auto registry = compile_registry(paths.registry);
  const auto articles = read_articles(paths.articles);
  const auto indicators = read_indicators(paths.indicators);
  const auto events = read_events(paths.events);
  ASSERT_EQ(registry.size(), ds.registry.size());
  ASSERT_EQ(articles.size(), ds.articles.size());

  std::vector<Sentence> sentences;
  std::size_t pieces = 0;
  for (const auto& a : articles) {
    pieces += split_sentences(a.body).size();
    for (auto& s : extract_sentences(a, registry)) sentences.push_back(std::move(s));
  }
  // Each generated sentence names exactly its own bank.
  EXPECT_EQ(sentences.size(), pieces);
  EXPECT_EQ(sentences.size(), ds.bank_sentences);
  for (const auto& s : sentences) EXPECT_EQ(s.sentence_id.substr(s.sentence_id.rfind(':') + 1), s.bank_id);

  const auto aligned = align(sentences, indicators);
  EXPECT_EQ(aligned.report.dropped, 0u);
  EXPECT_TRUE(aligned.report.banks_without_sentences.empty());
  EXPECT_EQ(events.size(), ds.events.size());
  EXPECT_EQ(indicators.size(), ds.config.n_banks * 12u);
}

TEST(Synth, InfeasiblePriorRejected) {
  auto c = small_synth_config(1);
  c.distress_prior = 0.9;
  EXPECT_THROW(generate(c), ValidationError);
  c.distress_prior = 0.0;
  EXPECT_THROW(generate(c), ValidationError);
  c = small_synth_config(1);
  c.n_banks = 3;
  EXPECT_THROW(generate(c), ValidationError);
}

TEST(Synth, ConfigJsonRoundTrip) {
  auto c = small_synth_config(12);
  c.text_signal = 0.25;
  nlohmann::json j = c;
  SynthConfig back;
  from_json(j, back);
  EXPECT_EQ(back.seed, 12u);
  EXPECT_EQ(back.text_signal, 0.25);
  EXPECT_EQ(back.first_quarter, c.first_quarter);
  EXPECT_EQ(back.tranquil_templates, c.tranquil_templates);
}

TEST(Synth, BankNamesAreDistinctMentions) {
  const auto ds = generate(small_synth_config(3));
  for (std::size_t i = 0; i < ds.registry.size(); ++i)
    for (std::size_t j = 0; j < ds.registry.size(); ++j)
      if (i != j) {
        EXPECT_FALSE(ds.registry[i].mentioned_in(ds.registry[j].canonical_name));
      }
}
