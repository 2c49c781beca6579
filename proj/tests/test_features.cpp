#include <gtest/gtest.h>

#include "ctxsp/features.hpp"
#include "support.hpp"

using namespace ctxsp;

namespace {

FeatureKey named(std::string_view name) {
  FeatureKey k = feature_key(name);
  FeatureNames::global().add(k, name);
  return k;
}

bool fires(const FeatureVector& fv, std::string_view name) { return fv.get(feature_key(name)) != 0.0; }

Context alchemy_after_pour() {
  Context c(parse_state("1:gg 2:r 3:_ 4:o", Domain::Alchemy));
  auto rec = execute_root(*parse_logical_form("pour(pos(1),pos(2))", Domain::Alchemy), c);
  return c.extended(std::move(rec).value());
}

}  // namespace

TEST(Features, AnchoredPredicateConjoinsItsSpan) {
  Context c(parse_state("1:gg 2:r", Domain::Alchemy));
  Utterance x = Utterance::from_text("pour it");
  NodePtr root = Node::root(Node::action(ActionName::Pour, Span{0, 0}),
                            {Node::select(Node::property(Property::Pos), Node::literal(Value::number(1), Domain::Alchemy)),
                             Node::select(Node::property(Property::Pos), Node::literal(Value::number(2), Domain::Alchemy, Span{1, 1}))});
  auto fv = featurize_anchored(*root, x, c, FeatureConfig::only({1}));
  ASSERT_TRUE(fv.ok());
  EXPECT_TRUE(fires(*fv, "F1|pour|pour"));
  EXPECT_FALSE(fires(*fv, "F1|pour|it"));
  EXPECT_TRUE(fires(*fv, "F1|2|it"));
  EXPECT_TRUE(fires(*fv, "F1|pos|∅"));
}

TEST(Features, FloatingConditionsUseEveryNgram) {
  Context c = alchemy_after_pour();
  Utterance x = Utterance::from_text("Then into the first beaker.");
  auto fv = featurize_floating(*parse_logical_form("pour(args[1][2],pos(1))", Domain::Alchemy), x, c, FeatureConfig::all());
  ASSERT_TRUE(fv.ok());
  EXPECT_TRUE(fires(*fv, "F6|action.reused|then"));
  EXPECT_TRUE(fires(*fv, "F6|action.reused|the first beaker"));
  EXPECT_TRUE(fires(*fv, "F5|arg1.reused|into"));
  EXPECT_TRUE(fires(*fv, "F1|pour|then"));
  auto flat = featurize_flat(*project_bc(*parse_logical_form("pour(args[1][2],pos(1))", Domain::Alchemy), c), x, c,
                             FeatureConfig::all());
  EXPECT_TRUE(fires(flat, "F6|action.reused|then"));
}

TEST(Features, EmptyUtteranceWithoutContext) {
  Context c(parse_state("1:gg 2:r", Domain::Alchemy));
  auto fv = featurize_flat(FlatLogicalForm{ActionName::Mix, {Value::entity(c.current().at_pos(1)->id)}}, Utterance(), c,
                           FeatureConfig::all());
  ASSERT_GT(fv.size(), 0u);
  const std::string dump = dump_features(fv);
  std::istringstream in(dump);
  std::string line;
  while (std::getline(in, line)) {
    ASSERT_GE(line.size(), 3u);
    EXPECT_TRUE(line.starts_with("F1|") || line.starts_with("F2|") || line.starts_with("F3|") ||
                line.starts_with("F4|")) << line;
    EXPECT_NE(line.find("|∅\t"), std::string::npos) << line;
  }
  EXPECT_TRUE(fires(fv, "F1|mix|∅"));
}

TEST(Features, ProjectFeaturesIsComponentwiseMax) {
  FeatureVector f{{{feature_key("f|x"), 1.0}}};
  FeatureVector g{{{feature_key("g|x"), 1.0}}};
  f.normalize();
  g.normalize();
  std::vector<FeatureVector> both = {f, g};
  auto m = project_features(both);
  EXPECT_EQ(m.get(feature_key("f|x")), 1.0);
  EXPECT_EQ(m.get(feature_key("g|x")), 1.0);
  EXPECT_EQ(m.size(), 2u);
  std::vector<FeatureVector> one = {f};
  EXPECT_EQ(project_features(one), f);
  EXPECT_THROW(project_features(std::vector<FeatureVector>{}), std::invalid_argument);
}

// Every anchored derivation is dominated by the floating features of its
// logical form.
TEST(Features, FloatingDominatesAnchored) {
  Rng rng(31);
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    Domain d = static_cast<Domain>(i % 3);
    Context c = support::random_context(d, support::uniform_int(rng, 1, 2), rng);
    NodePtr lf = support::random_root(c, rng);
    Utterance x = Utterance::from_text("then pour it into the 2 beaker");
    auto floating = featurize_floating(*lf, x, c, FeatureConfig::all());
    if (!floating) continue;
    NodePtr anchored = support::map_leaves(lf, [&](const Node& leaf, int k) {
      if (k % 2) return leaf.with_anchor(std::nullopt);
      return leaf.with_anchor(Span{k, k});
    });
    auto fa = featurize_anchored(*anchored, x, c, FeatureConfig::all());
    ASSERT_TRUE(fa.ok());
    for (const auto& [key, value] : fa->entries) EXPECT_LE(value, floating->get(key));
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(Features, ConfigParsing) {
  EXPECT_EQ(FeatureConfig::parse("F1-F3"), FeatureConfig::only({1, 2, 3}));
  EXPECT_EQ(FeatureConfig::parse("F1..F8"), FeatureConfig::all());
  EXPECT_EQ(FeatureConfig::parse("F1,F2,F8"), FeatureConfig::only({1, 2, 8}));
  EXPECT_EQ(FeatureConfig::parse(FeatureConfig::only({2, 5}).to_string()), FeatureConfig::only({2, 5}));
  EXPECT_THROW(FeatureConfig::parse("F9"), std::invalid_argument);
  EXPECT_THROW(FeatureConfig::parse("G1"), std::invalid_argument);
}

TEST(Features, DisabledFamiliesDoNotFire) {
  Context c = alchemy_after_pour();
  Utterance x = Utterance::from_text("again");
  auto fv = featurize_floating(*parse_logical_form("pour(args[1][1],pos(4))", Domain::Alchemy), x, c,
                               FeatureConfig::only({1}));
  ASSERT_TRUE(fv.ok());
  for (const auto& line : {"F6|action.reused|again", "F2|arg2.pos=4|again"}) EXPECT_FALSE(fires(*fv, line));
  EXPECT_TRUE(fires(*fv, "F1|pour|again"));
}

TEST(Features, DumpIsSortedNameValueLines) {
  FeatureVector fv;
  fv.entries = {{named("b|x"), 1.0}, {named("a|y"), 2.0}};
  fv.normalize();
  EXPECT_EQ(dump_features(fv), "a|y\t2\nb|x\t1\n");
}

TEST(Features, NormalizeMergesDuplicates) {
  FeatureVector fv;
  fv.entries = {{3, 1.0}, {1, 2.0}, {3, 0.5}};
  fv.normalize();
  ASSERT_EQ(fv.size(), 2u);
  EXPECT_EQ(fv.get(3), 1.5);
  EXPECT_EQ(add(fv, fv).get(1), 4.0);
}
