#pragma once

// Synthetic examples: random worlds, recency-biased action sequences and
// templated, POS-tagged utterances with flat gold logical forms.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctxsp/dataset.hpp"
#include "ctxsp/logic.hpp"

namespace ctxsp {

/// A surface pattern such as `drain {num} from {ref1}` with one POS tag per
/// token; slot tokens carry their own slot name as tag.
///
/// kind is an action name (`pour`, `trade-hats`, ...) or a referring
/// expression: `ref:pos`, `ref:unique:<prop>`, `ref:first:<prop>`,
/// `ref:last:<prop>`, `ref:index:<prop>`.
struct Template {
  std::string kind;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

class TemplateSet {
 public:
  static TemplateSet builtin(Domain d);
  /// Lines `<kind><TAB><surface with {slots}><TAB><POS tags>`; blank lines
  /// and lines starting with '#' are ignored. Throws ParseError.
  static TemplateSet parse(std::istream& in);
  void write(std::ostream& out) const;

  const std::vector<Template>& all() const { return templates_; }
  std::vector<const Template*> of_kind(std::string_view kind) const;
  std::vector<const Template*> references() const;
  /// Every action of `d` has a template and every slot is known.
  void check(Domain d) const;

 private:
  std::vector<Template> templates_;
};

struct GenConfig {
  Domain domain = Domain::Alchemy;
  int L = 5;
  int n_train = 500;
  int n_test = 500;
  double recency_boost = 5.0;
  std::uint64_t seed = 1;
  int slots = 0;  // 0: 7 beakers / 10 stage positions / 5 figures
  TemplateSet templates = TemplateSet::builtin(Domain::Alchemy);

  int world_size() const;
  /// Throws std::invalid_argument.
  void validate() const;
};

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from 53 random bits (platform independent).
double uniform01(Rng& rng);
/// Index drawn proportionally to `weights`.
std::size_t sample_index(const std::vector<double>& weights, Rng& rng);

WorldState random_world(const GenConfig& cfg, Rng& rng);

/// Sampling weight of every valid flat action in `w`: recency_boost when it
/// reuses the previous action name or one of its argument entities, else 1.
std::vector<std::pair<FlatLogicalForm, double>> action_weights(const WorldState& w, const ExecRecord* prev,
                                                               double recency_boost);

struct Rendered {
  std::string text;
  std::string tags;
};

/// Renders `f` in state `w` with uniformly chosen templates.
Rendered render_action(const FlatLogicalForm& f, const WorldState& w, const TemplateSet& ts, Rng& rng);

/// Throws std::runtime_error after repeated failures to find a valid action.
Example gen_example(const GenConfig& cfg, Rng& rng, std::string id);

struct GeneratedData {
  std::vector<Example> train;
  std::vector<Example> test;
};

/// Per-example random streams derived from the seed; the splits never share
/// an example.
GeneratedData gen_dataset(const GenConfig& cfg);

}  // namespace ctxsp
