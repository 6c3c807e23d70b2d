#include <gtest/gtest.h>

#include <set>

#include "delichain/common.hpp"
#include "delichain/text.hpp"

using namespace delichain;

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Hello, World!"), (std::vector<std::string>{"hello", ",", "world", "!"}));
}

TEST(Tokenize, KeepsMarkersWhole) {
  EXPECT_EQ(tokenize("a <m> b </m>"), (std::vector<std::string>{"a", "<m>", "b", "</m>"}));
}

TEST(Tokenize, LeavesUtf8Intact) {
  EXPECT_EQ(tokenize("Zoë said ÉTÉ"), (std::vector<std::string>{"zoë", "said", "ÉtÉ"}));
}

TEST(Tokenize, SplitTokensPreservesCase) {
  EXPECT_EQ(split_tokens("I picked U."), (std::vector<std::string>{"I", "picked", "U", "."}));
}

TEST(Tokenize, Deterministic) {
  const std::string s = "Why do we need to flip 7? Let's check E.";
  EXPECT_EQ(tokenize(s), tokenize(s));
}

TEST(Roles, CodesRoundTrip) {
  for (auto r : {Role::Probing, Role::Causal, Role::Neither}) EXPECT_EQ(role_from_code(std::string(1, role_code(r))), r);
  EXPECT_THROW(role_from_code("X"), ValidationError);
}

TEST(Schema, NamesRoundTrip) {
  EXPECT_EQ(schema_from_name("delidata"), Schema::Delidata);
  EXPECT_EQ(schema_from_name("wtd"), Schema::Wtd);
  EXPECT_THROW(schema_from_name("cards"), ConfigError);
}

TEST(Fnv, KnownVector) {
  // FNV-1a 64 reference values
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Rng, SeededStreamsRepeat) {
  Rng a(42), b(42), c(43);
  std::vector<std::uint64_t> va, vb, vc;
  for (int i = 0; i < 16; ++i) {
    va.push_back(a.next());
    vb.push_back(b.next());
    vc.push_back(c.next());
  }
  EXPECT_EQ(va, vb);
  EXPECT_NE(va, vc);
}

TEST(Rng, RangesHold) {
  Rng r(1);
  std::set<int> seen;
  for (int i = 0; i < 2000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const int k = r.between(2, 5);
    ASSERT_GE(k, 2);
    ASSERT_LE(k, 5);
    seen.insert(k);
    ASSERT_LT(r.below(7), 7u);
  }
  EXPECT_EQ(seen.size(), 4u);
}
