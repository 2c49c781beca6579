#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ctxsp/params.hpp"

using namespace ctxsp;

namespace {

FeatureKey named(std::string_view name) {
  FeatureKey k = feature_key(name);
  FeatureNames::global().add(k, name);
  return k;
}

}  // namespace

TEST(Params, ScoreIsTheDotProduct) {
  Params p;
  p.entry(1).weight = 0.5;
  p.entry(2).weight = -2.0;
  FeatureVector fv{{{1, 2.0}, {2, 1.0}, {3, 7.0}}};
  EXPECT_DOUBLE_EQ(score(fv, p), 0.5 * 2.0 - 2.0);
  EXPECT_EQ(score(FeatureVector{}, p), 0.0);
}

TEST(Params, SoftmaxClosedForm) {
  std::vector<double> s = {1.0, 0.0};
  auto p = beam_softmax(s);
  const double e = std::exp(1.0);
  EXPECT_NEAR(p[0], e / (e + 1), 1e-15);
  EXPECT_NEAR(p[1], 1 / (e + 1), 1e-15);
}

TEST(Params, ZeroWeightsGiveUniformBeam) {
  std::vector<double> s(4, 0.0);
  for (double x : beam_softmax(s)) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Params, SoftmaxIsShiftInvariantAndStable) {
  std::vector<double> s = {3.0, -1.0, 0.5};
  std::vector<double> t = s;
  for (double& x : t) x += 1000.0;
  auto p = beam_softmax(s);
  auto q = beam_softmax(t);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  EXPECT_TRUE(beam_softmax(std::vector<double>{}).empty());
}

TEST(Params, ModelRoundTrip) {
  Params p;
  auto& a = p.entry(named("F1|pour|pour"));
  a.weight = 0.123456789012345678;
  a.accum = 4.5;
  p.entry(named("F2|arg1.pos=1|∅")).weight = -1e-9;
  std::stringstream buf;
  save_model(buf, p, {"A", "abc123", "F1,F2"});
  ModelHeader h;
  Params back = load_model(buf, &h);
  EXPECT_EQ(back, p);
  EXPECT_EQ(h.mode, "A");
  EXPECT_EQ(h.config_digest, "abc123");
  EXPECT_EQ(h.features, "F1,F2");

  std::stringstream again;
  save_model(again, back, h);
  std::stringstream first;
  save_model(first, p, {"A", "abc123", "F1,F2"});
  EXPECT_EQ(again.str(), first.str());
}

TEST(Params, ModelWithoutFeaturesLine) {
  std::stringstream buf;
  save_model(buf, Params{}, {"C", "d", ""});
  EXPECT_EQ(buf.str().find("features"), std::string::npos);
  ModelHeader h;
  EXPECT_TRUE(load_model(buf, &h).empty());
  EXPECT_EQ(h.mode, "C");
  EXPECT_TRUE(h.features.empty());
}

TEST(Params, RejectsMalformedModels) {
  std::stringstream no_magic("mode\tC\n");
  EXPECT_THROW(load_model(no_magic), ParseError);
  std::stringstream bad_weight("# ctxsp model v1\nmode\tC\nconfig\tx\nF1|a|b\tnope\t0\n");
  EXPECT_THROW(load_model(bad_weight), ParseError);
}
