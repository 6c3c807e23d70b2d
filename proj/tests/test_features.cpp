#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "delichain/features.hpp"
#include "delichain/text.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace delichain;

namespace {

std::string random_string(Rng& rng, std::size_t max_len) {
  static const std::string alphabet = "abcdeAB xyz,.7";
  std::string s;
  const auto n = rng.below(max_len + 1);
  for (std::size_t k = 0; k < n; ++k) s.push_back(alphabet[rng.below(alphabet.size())]);
  return s;
}

}  // namespace

TEST(Lexical, IdentityAndDisjoint) {
  EXPECT_DOUBLE_EQ(lexical_ratio("abc", "abc"), 100.0);
  EXPECT_DOUBLE_EQ(lexical_ratio("a", "b"), 0.0);
  EXPECT_DOUBLE_EQ(lexical_ratio("", ""), 100.0);
}

TEST(Lexical, KittenSitting) {
  // LCS = 4 ("ittn"), so 100 * 8 / 13
  EXPECT_EQ(oracle::lcs("kitten", "sitting"), 4u);
  EXPECT_NEAR(lexical_ratio("kitten", "sitting"), 800.0 / 13.0, 1e-12);
  EXPECT_NEAR(lexical_ratio("kitten", "sitting"), 61.538, 1e-3);
}

TEST(Lexical, MatchesLcsOracleAndIsSymmetric) {
  Rng rng(31);
  for (int k = 0; k < 2000; ++k) {
    const auto a = random_string(rng, 14), b = random_string(rng, 14);
    const double r = lexical_ratio(a, b);
    ASSERT_NEAR(r, oracle::indel_ratio(a, b), 1e-9) << a << " | " << b;
    ASSERT_DOUBLE_EQ(r, lexical_ratio(b, a));
    ASSERT_GE(r, 0.0);
    ASSERT_LE(r, 100.0);
  }
}

TEST(Entities, CardUtterance) {
  const auto c = extract_entities("I picked 6 and U", Schema::Delidata);
  EXPECT_EQ(c.counts, (std::map<std::string, int>{{"vowels", 1}, {"even", 1}}));
}

TEST(Entities, EmptyText) {
  EXPECT_TRUE(extract_entities("", Schema::Delidata).empty());
  EXPECT_TRUE(extract_entities("", Schema::Wtd).empty());
}

TEST(Entities, BlockColours) {
  const auto c = extract_entities("red block and blue block", Schema::Wtd);
  EXPECT_EQ(c.counts, (std::map<std::string, int>{{"red", 1}, {"blue", 1}}));
}

TEST(Entities, WeightMentionsFollowTheConfiguredList) {
  EXPECT_EQ(extract_entities("red is 10 and 15", Schema::Wtd).counts.at("weight"), 1);
  EntityOptions opts;
  opts.weight_values = {15};
  EXPECT_EQ(extract_entities("red is 10 and 15", Schema::Wtd, opts).counts.at("weight"), 1);
  EXPECT_EQ(extract_entities("red is 10", Schema::Wtd, opts).counts.count("weight"), 0u);
}

TEST(Entities, CategoriesStayInSchema) {
  Rng rng(8);
  for (int k = 0; k < 500; ++k) {
    const auto s = random_string(rng, 30);
    for (auto schema : {Schema::Delidata, Schema::Wtd}) {
      const auto& cats = schema_categories(schema);
      for (const auto& [cat, n] : extract_entities(s, schema).counts) {
        ASSERT_NE(std::find(cats.begin(), cats.end(), cat), cats.end());
        ASSERT_GE(n, 0);
      }
    }
  }
}

TEST(EntityIou, Examples) {
  const auto a = extract_entities("E and 4", Schema::Delidata);
  EXPECT_DOUBLE_EQ(entity_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(entity_iou(a, extract_entities("K and 7", Schema::Delidata)), 0.0);
  // {vowels:1, even:1} vs {vowels:1, odd:1}: min sum 1, max sum 3
  EXPECT_DOUBLE_EQ(entity_iou(a, extract_entities("A and 7", Schema::Delidata)), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(entity_iou(CategoryCounts{}, CategoryCounts{}), 0.0);
  EXPECT_THROW(entity_iou(a, extract_entities("red", Schema::Wtd)), ConfigError);
}

TEST(EntityIou, MonotoneUnderSharedCategory) {
  CategoryCounts a{Schema::Delidata, {{"vowels", 2}, {"odd", 1}}};
  CategoryCounts b{Schema::Delidata, {{"vowels", 1}, {"even", 2}}};
  const double before = entity_iou(a, b);
  ++a.counts["consonants"];
  ++b.counts["consonants"];
  EXPECT_GT(entity_iou(a, b), before);
}

TEST(HashedBow, DeterministicAndNormalised) {
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const auto s = random_string(rng, 40);
    const auto v = hashed_bow_embed(s);
    ASSERT_EQ(v, hashed_bow_embed(s));
    double n = 0;
    for (double x : v) n += x * x;
    ASSERT_TRUE(tokenize(s).empty() ? n == 0.0 : std::abs(n - 1.0) < 1e-12);
  }
  const auto zero = hashed_bow_embed("");
  EXPECT_TRUE(std::all_of(zero.begin(), zero.end(), [](double x) { return x == 0.0; }));
  EXPECT_THROW(hashed_bow_embed("x", 4), ConfigError);
}

TEST(HashedBow, SharedWordsRaiseCosine) {
  // Bucket oracle: with no collisions among these words, the cosines are
  // 2 / sqrt(6) and 0.
  std::set<std::uint64_t> buckets;
  for (const char* w : {"red", "block", "heavy", "final", "submit"}) buckets.insert(fnv1a64(w) % kDefaultEmbeddingDim);
  ASSERT_EQ(buckets.size(), 5u);
  const auto a = hashed_bow_embed("red block"), b = hashed_bow_embed("red block heavy"),
             c = hashed_bow_embed("final submit");
  EXPECT_NEAR(cosine(a, b), 2.0 / std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(cosine(a, c), 0.0, 1e-12);
  EXPECT_GT(cosine(a, b), cosine(a, c));
}

class EmbeddingFile : public ::testing::Test {
 protected:
  std::filesystem::path path = std::filesystem::temp_directory_path() / "delichain_embed_test.tsv";
  void write(const std::string& content) { std::ofstream(path) << content; }
  void TearDown() override { std::filesystem::remove(path); }
};

TEST_F(EmbeddingFile, LooksUpStoredVectors) {
  write("alpha\t1 0 0\nbeta\t0 1 0\ntab\\there\t0 0 1\n");
  const auto p = FileEmbeddingProvider::load(path);
  EXPECT_EQ(p.dimension(), 3u);
  EXPECT_EQ(p.size(), 3u);
  EXPECT_EQ(p.embed("beta"), (Vector{0, 1, 0}));
  EXPECT_EQ(p.embed("tab\there"), (Vector{0, 0, 1}));
  EXPECT_THROW(p.embed("gamma"), ValidationError);
}

TEST_F(EmbeddingFile, MixedDimensionsFailToLoad) {
  std::string a = "a\t", b = "b\t";
  for (int k = 0; k < 256; ++k) a += "0.5 ";
  for (int k = 0; k < 300; ++k) b += "0.5 ";
  write(a + "\n" + b + "\n");
  EXPECT_THROW(FileEmbeddingProvider::load(path), ParseError);
}

TEST(EmbeddingFileKeys, EscapeRoundTrip) {
  EXPECT_EQ(FileEmbeddingProvider::escape_key("a\tb\nc\\d"), "a\\tb\\nc\\\\d");
}

TEST(PairFeatureTest, LayoutAndHadamard) {
  const auto d = fixture::dialogue("d", {"pick the red card", "hm", "pick the red card"});
  const auto text = assemble_pair_text(d, 0, 2);
  const HashedBowProvider prov;
  const auto f = pair_feature(text, prov);
  EXPECT_EQ(f.concatenated.size(), 4 * kDefaultEmbeddingDim);
  for (std::size_t k = 0; k < f.dimension; ++k) {
    EXPECT_DOUBLE_EQ(f.probing()[k], f.causal()[k]);
    EXPECT_DOUBLE_EQ(f.hadamard()[k], f.probing()[k] * f.probing()[k]);
  }
  const auto ctx = prov.embed(text.rendered);
  EXPECT_TRUE(std::equal(ctx.begin(), ctx.end(), f.context().begin()));
}

TEST(PairFeatureTest, ProbingSegmentIsTheConsequent) {
  const auto d = fixture::dialogue("d", {"seven is odd", "ok", "why flip seven"});
  const HashedBowProvider prov;
  const auto f = pair_feature(assemble_pair_text(d, 0, 2), prov);
  const auto p = prov.embed("why flip seven"), c = prov.embed("seven is odd");
  EXPECT_TRUE(std::equal(p.begin(), p.end(), f.probing().begin()));
  EXPECT_TRUE(std::equal(c.begin(), c.end(), f.causal().begin()));
}

namespace {
class ZeroProvider final : public EmbeddingProvider {
 public:
  std::size_t dimension() const override { return 8; }
  Vector embed(std::string_view text) const override {
    return text.find("zero") != std::string_view::npos ? Vector(8, 0.0) : Vector(8, 1.0);
  }
};
}  // namespace

TEST(PairFeatureTest, ZeroSpanGivesZeroHadamard) {
  const auto d = fixture::dialogue("d", {"zero here", "ok", "nonempty"});
  const auto f = pair_feature(assemble_pair_text(d, 0, 2), ZeroProvider{});
  for (double x : f.hadamard()) EXPECT_EQ(x, 0.0);
}
