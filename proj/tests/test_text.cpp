#include <gtest/gtest.h>

#include "ctxsp/text.hpp"

using namespace ctxsp;

TEST(Text, TokenizeLowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Then into the first beaker."),
            (std::vector<std::string>{"then", "into", "the", "first", "beaker", "."}));
  EXPECT_EQ(tokenize("  Mix it!  "), (std::vector<std::string>{"mix", "it", "!"}));
  EXPECT_EQ(tokenize("a|b"), (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Text, NgramTable) {
  Utterance x = Utterance::from_text("pour it into two");
  EXPECT_EQ(x.size(), 4);
  EXPECT_EQ(x.ngrams().size(), 4u + 3u + 2u);
  auto inside = x.ngrams_inside(Span{1, 2});
  ASSERT_EQ(inside.size(), 3u);
  for (int i : inside) {
    const auto& g = x.ngrams()[static_cast<std::size_t>(i)];
    EXPECT_GE(g.span.start, 1);
    EXPECT_LE(g.span.end, 2);
  }
}

TEST(Text, TagsMustMatchTokens) {
  Utterance x = Utterance::from_text("mix it", "VB PRP");
  EXPECT_TRUE(x.has_tags());
  EXPECT_EQ(x.tags()[0], "VB");
  EXPECT_THROW(Utterance::from_text("mix it", "VB"), std::invalid_argument);
}

TEST(Text, HashesAreStable) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_NE(hash_combine(1, 2), hash_combine(2, 1));
}
