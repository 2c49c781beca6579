#pragma once

// Indicator features over logical forms (conditions F1-F8 conjoined with
// utterance n-grams) for the anchored (A), floating (B) and flat (C) models.

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctxsp/logic.hpp"
#include "ctxsp/text.hpp"

namespace ctxsp {

enum class Mode : std::uint8_t { A, B, C };

std::string_view to_string(Mode m);
/// Throws std::invalid_argument.
Mode mode_from_string(std::string_view s);

/// Which condition families (F1..F8) are active.
struct FeatureConfig {
  std::uint8_t mask = 0xFF;

  bool has(int family) const { return (mask >> (family - 1)) & 1u; }
  static FeatureConfig all() { return {}; }
  static FeatureConfig only(std::initializer_list<int> families);
  /// Accepts "F1..F8", "F1-F3" and comma lists such as "F1,F2,F3".
  static FeatureConfig parse(std::string_view spec);
  std::string to_string() const;
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

using FeatureKey = std::uint64_t;

/// Feature names are `<condition>|<ngram>`; keys hash the two halves.
inline FeatureKey feature_key(std::uint64_t condition_hash, std::uint64_t ngram_hash) {
  return hash_combine(condition_hash, ngram_hash);
}
FeatureKey feature_key(std::string_view name);

/// Process-wide key -> name table, filled whenever a named vector is built
/// or a model is loaded. Thread-safe.
class FeatureNames {
 public:
  static FeatureNames& global();
  void add(FeatureKey key, std::string_view name);
  std::optional<std::string> find(FeatureKey key) const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<FeatureKey, std::string> names_;
};

/// Sparse vector sorted by key; absent keys are zero.
struct FeatureVector {
  std::vector<std::pair<FeatureKey, double>> entries;

  double get(FeatureKey k) const;
  std::size_t size() const { return entries.size(); }
  /// Sorts and merges duplicate keys by summing.
  void normalize();
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

FeatureVector add(const FeatureVector& a, const FeatureVector& b);
/// Component-wise maximum; absent keys count as zero. Throws
/// std::invalid_argument on an empty input.
FeatureVector project_features(std::span<const FeatureVector> vectors);

/// `name<TAB>value` lines sorted by name.
std::string dump_features(const FeatureVector& fv);

/// Which parts of a Root a condition talks about; mode A conjoins the
/// condition with the n-grams those parts are anchored to.
enum RefBits : std::uint8_t { kRefAction = 1, kRefArg1 = 2, kRefArg2 = 4 };

struct Condition {
  std::string text;
  std::uint64_t hash = 0;
  std::uint8_t refs = 0;
};

Condition make_condition(std::string text, std::uint8_t refs);
/// F1 condition for predicate `name`.
Condition predicate_condition(std::string_view name);

/// Conditions F2-F7 of a completed Root with concrete action `a` and
/// argument values `args`, evaluated in context `c`.
std::vector<Condition> root_conditions(ActionName a, std::span<const Value> args, const Context& c,
                                       const FeatureConfig& cfg);

/// Predicate names a flat form contains: its action and primitive arguments.
std::vector<std::string> flat_predicates(const FlatLogicalForm& f, Domain d);

inline constexpr std::string_view kOrderedArgsCondition = "F8|args-ordered";

/// Mode A: features of a derivation (anchors live on the leaves).
Outcome<FeatureVector> featurize_anchored(const Node& root, const Utterance& x, const Context& c,
                                          const FeatureConfig& cfg);
/// Mode B: features of an unanchored logical form (anchors ignored).
Outcome<FeatureVector> featurize_floating(const Node& root, const Utterance& x, const Context& c,
                                          const FeatureConfig& cfg);
/// Mode C: features of a flat logical form.
FeatureVector featurize_flat(const FlatLogicalForm& f, const Utterance& x, const Context& c,
                             const FeatureConfig& cfg);

Outcome<FeatureVector> featurize(const Node& root, const Utterance& x, const Context& c, Mode mode,
                                 const FeatureConfig& cfg);

}  // namespace ctxsp
