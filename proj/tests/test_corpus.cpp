#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "distress/corpus.hpp"

using namespace distress;
namespace fs = std::filesystem;

namespace {

Article article(const std::string& id, const std::string& body) {
  return {id, parse_timestamp("2009-02-14T10:00:00Z"), body};
}

std::vector<BankEntity> small_registry() {
  return {make_bank_entity("dexia", "Dexia", "BE", {"Dexia"}),
          make_bank_entity("hsbc", "HSBC", "GB", {"HSBC", "Hongkong and Shanghai Bank"})};
}

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "distress_test_corpus";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Registry, TwoPatternsOneEntity) {
  const auto reg = parse_registry(R"([{"bank_id":"deutsche","name_patterns":["Deutsche Bank","DBK"]}])");
  ASSERT_EQ(reg.size(), 1u);
  EXPECT_EQ(reg[0].compiled.size(), 2u);
  EXPECT_TRUE(reg[0].mentioned_in("shares of dbk rose"));
  EXPECT_TRUE(reg[0].mentioned_in("DEUTSCHE BANK said"));
  EXPECT_FALSE(reg[0].mentioned_in("Deutsche Post"));
}

TEST(Registry, DuplicateIdRejected) {
  EXPECT_THROW(parse_registry(R"([{"bank_id":"hsbc","name_patterns":["HSBC"]},
                                   {"bank_id":"hsbc","name_patterns":["HSBC Holdings"]}])"),
               ValidationError);
}

TEST(Registry, BadPatternNamesTheBank) {
  try {
    parse_registry(R"([{"bank_id":"broken","name_patterns":["(unclosed"]}])");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
  }
}

TEST(Registry, EmptyPatternsRejected) {
  EXPECT_THROW(parse_registry(R"([{"bank_id":"x","name_patterns":[]}])"), ValidationError);
}

TEST(Registry, MalformedJsonReportsLine) {
  try {
    parse_registry("[\n{\"bank_id\": \"a\",\n oops}]");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Registry, BundledSampleHas62Entities) {
  const auto reg = compile_registry(fs::path(DISTRESS_SOURCE_DIR) / "data" / "registry_sample.json");
  EXPECT_EQ(reg.size(), 62u);
  std::set<std::string> ids;
  for (const auto& e : reg) {
    ids.insert(e.bank_id);
    EXPECT_FALSE(e.compiled.empty());
    EXPECT_EQ(e.country.size(), 2u) << e.bank_id;
    EXPECT_TRUE(e.mentioned_in("News about " + e.canonical_name + " today.")) << e.bank_id;
  }
  EXPECT_EQ(ids.size(), reg.size());
}

TEST(Registry, JsonRoundTrip) {
  const auto reg = small_registry();
  const auto back = parse_registry(registry_to_json(reg).dump());
  ASSERT_EQ(back.size(), reg.size());
  for (std::size_t i = 0; i < reg.size(); ++i) {
    EXPECT_EQ(back[i].bank_id, reg[i].bank_id);
    EXPECT_EQ(back[i].name_patterns, reg[i].name_patterns);
  }
}

TEST(Splitter, BasicAndAbbreviations) {
  EXPECT_EQ(split_sentences("Dexia received aid. Markets fell."),
            (std::vector<std::string>{"Dexia received aid.", "Markets fell."}));
  EXPECT_EQ(split_sentences("Mr. Smith left Acme Inc. Yesterday it fell."),
            (std::vector<std::string>{"Mr. Smith left Acme Inc. Yesterday it fell."}));
  EXPECT_EQ(split_sentences("Rates rose 2.5 percent. Why? Nobody knows!"),
            (std::vector<std::string>{"Rates rose 2.5 percent.", "Why?", "Nobody knows!"}));
  EXPECT_EQ(split_sentences("lower case. follows here"), (std::vector<std::string>{"lower case. follows here"}));
}

TEST(Tokenizer, LowercaseStripNumbers) {
  EXPECT_EQ(tokenize("Dexia received aid."), (std::vector<std::string>{"dexia", "received", "aid"}));
  EXPECT_EQ(tokenize("Shares fell 12.5% in 2008, (again)!"),
            (std::vector<std::string>{"shares", "fell", "<num>", "in", "<num>", "again"}));
  EXPECT_EQ(tokenize("B2B"), (std::vector<std::string>{"b<num>b"}));
  EXPECT_TRUE(tokenize(" ... ").empty());
}

TEST(Extract, SingleMatch) {
  const auto out = extract_sentences(article("a1", "Dexia received aid. Markets fell."), small_registry());
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].bank_id, "dexia");
  EXPECT_EQ(out[0].tokens, (std::vector<std::string>{"dexia", "received", "aid"}));
  EXPECT_EQ(out[0].sentence_id, "a1:0:dexia");
  EXPECT_EQ(out[0].published_at, parse_timestamp("2009-02-14T10:00:00Z"));
}

TEST(Extract, TwoBanksTwoRecords) {
  const auto out = extract_sentences(article("a2", "Calm day. HSBC and Dexia agreed a deal."), small_registry());
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].bank_id, "dexia");
  EXPECT_EQ(out[1].bank_id, "hsbc");
  EXPECT_NE(out[0].sentence_id, out[1].sentence_id);
  EXPECT_EQ(out[0].tokens, out[1].tokens);
}

TEST(Extract, NoMentionNoRecords) {
  EXPECT_TRUE(extract_sentences(article("a3", "Markets fell. Bonds rallied."), small_registry()).empty());
  EXPECT_THROW(extract_sentences(article("a3", "x"), std::vector<BankEntity>{}), ValidationError);
}

TEST(Vocabulary, MinCountAndUnknown) {
  const auto v = Vocabulary::from_counts({{"a", 5}, {"b", 1}}, 2);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<unk>", "a"}));
  EXPECT_EQ(v.index("b"), Vocabulary::kUnknownIndex);
  EXPECT_EQ(v.count(0), 1u);
}

TEST(Vocabulary, NoiseDistribution) {
  const auto v = Vocabulary::from_counts({{"a", 3}, {"b", 1}}, 1, 1.0);
  EXPECT_EQ(v.noise()[0], 0.0);
  EXPECT_NEAR(v.noise()[v.index("a")], 0.75, 1e-15);
  EXPECT_NEAR(v.noise()[v.index("b")], 0.25, 1e-15);

  const auto w = Vocabulary::from_counts({{"a", 16}, {"b", 1}}, 1, 0.75);
  EXPECT_NEAR(w.noise()[w.index("a")], 8.0 / 9.0, 1e-15);

  Rng rng(4);
  std::size_t hits_a = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto k = v.sample_noise(rng);
    ASSERT_NE(k, 0u);
    hits_a += k == v.index("a");
  }
  EXPECT_NEAR(hits_a / 20000.0, 0.75, 0.02);
}

TEST(Vocabulary, NothingRetained) {
  EXPECT_THROW(Vocabulary::from_counts({{"a", 1}}, 5), ValidationError);
}

TEST(Jsonl, SentenceRoundTrip) {
  const auto out = extract_sentences(article("a9", "Dexia received aid. HSBC and Dexia rose 5%."), small_registry());
  const auto path = temp_file("sentences.jsonl");
  write_sentences(path, out);
  EXPECT_EQ(read_sentences(path), out);
}

TEST(Jsonl, ArticleErrorsCarryLineNumbers) {
  const auto path = temp_file("articles.jsonl");
  io::write_text(path,
                 "{\"article_id\":\"x\",\"published_at\":\"2009-01-01T00:00:00Z\",\"body\":\"Hi.\"}\n"
                 "{\"article_id\":\"y\",\"published_at\":\"2009-01-01\",\"body\":\"Hi.\"}\n");
  try {
    read_articles(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(read_articles(temp_file("missing.jsonl")), IoError);
}
