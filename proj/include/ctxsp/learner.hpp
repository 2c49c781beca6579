#pragma once

// Learning from denotations: beam-restricted marginal likelihood of the
// hypotheses that reach the annotated final state, AdaGrad with L1
// proximal shrinkage, a prefix-length curriculum, bootstrapping of mode A
// from mode C, and accuracy / oracle evaluation.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxsp/dataset.hpp"
#include "ctxsp/features.hpp"
#include "ctxsp/params.hpp"
#include "ctxsp/parser.hpp"

namespace ctxsp {

/// Prefix length L' trained on at each iteration; 0 means the whole example.
struct Curriculum {
  std::vector<int> prefix;

  /// 1-based iteration; iterations past the schedule reuse its last entry.
  int at(int iteration) const;
  /// 1, 1, 2, 2, 2, 2.
  static Curriculum two_stage();
  static Curriculum whole(int iterations);
  /// Comma-separated lengths, "full" for 0. Throws std::invalid_argument.
  static Curriculum parse(std::string_view s);
  std::string to_string() const;
};

struct TrainConfig {
  int iterations = 6;
  double l1 = 0.001;
  double eta = 0.1;
  Curriculum curriculum = Curriculum::two_stage();
  BeamConfig beam;
  FeatureConfig features;
  std::uint64_t seed = 1;

  Mode mode() const { return beam.mode; }
  /// Throws std::invalid_argument.
  void validate() const;
  /// Stable hex digest of every field, stored in model headers.
  std::string digest() const;
};

struct IterationMetrics {
  int iteration = 0;
  int prefix = 0;       // L' (0 = whole examples)
  double accuracy = 0;  // top-1 consistent before the update
  double oracle = 0;
  int skipped = 0;      // empty beam or no consistent hypothesis
  int examples = 0;
};

struct TrainResult {
  Params params;
  std::vector<IterationMetrics> metrics;
};

/// Objective value and gradient for one beam.
struct BeamObjective {
  double value = 0.0;
  FeatureVector gradient;
};

/// log sum_{C} p - log sum_{N} p with p the beam softmax of phi . theta,
/// and its gradient E_C[phi] - E_N[phi]. nullopt when no hypothesis is
/// consistent.
std::optional<BeamObjective> beam_objective(std::span<const FeatureVector> phis,
                                            const std::vector<bool>& consistent, const Params& params);

/// AdaGrad ascent with L1 soft-thresholding. Shrinkage is owed for every
/// update step; a coordinate pays what it owes when it is next touched (or
/// at flush), so idle features decay without being visited.
class AdaGradL1 {
 public:
  AdaGradL1(double eta, double l1) : eta_(eta), l1_(l1) {}

  /// One update on the coordinates in `touched` (the gradient may be zero
  /// on some of them).
  void step(Params& params, const FeatureVector& gradient, std::span<const FeatureKey> touched);
  /// Applies all outstanding shrinkage.
  void flush(Params& params);
  std::int64_t steps() const { return t_; }

 private:
  void catch_up(Params::Entry& e, std::int64_t idle) const;

  double eta_;
  double l1_;
  std::int64_t t_ = 0;
  absl::flat_hash_map<FeatureKey, std::int64_t> last_;
};

using IterationCallback = std::function<void(const IterationMetrics&)>;

TrainResult train(const std::vector<Example>& data, const TrainConfig& cfg, Params init = {},
                  const IterationCallback& on_iteration = {});

/// Trains mode C from scratch, then mode A initialised with its weights.
TrainResult bootstrap(const std::vector<Example>& data, const TrainConfig& cfg_c, const TrainConfig& cfg_a,
                      TrainResult* c_result = nullptr);

struct EvalRow {
  int L = 0;
  double accuracy = 0.0;
  double oracle = 0.0;
  double beam_falloff = 0.0;  // incorrect examples with no consistent hypothesis left
  int examples = 0;
};

/// Accuracy and oracle accuracy for every prefix length 1..max_L (0 means
/// the longest example), from one left-to-right parse per example.
std::vector<EvalRow> evaluate(const std::vector<Example>& data, const Params& params, const BeamConfig& beam,
                              const FeatureConfig& features, int max_L = 0);

}  // namespace ctxsp
