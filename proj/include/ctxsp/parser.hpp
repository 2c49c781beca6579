#pragma once

// Left-to-right beam parser. `shift` advances a whole utterance; `build`
// grows the stack of logical-form fragments for the current utterance by
// creating predicates (floating or anchored to a span) and applying the
// grammar rules. Modes: A (anchored derivations), B (floating logical
// forms), C (flat forms only).

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "ctxsp/features.hpp"
#include "ctxsp/logic.hpp"
#include "ctxsp/params.hpp"

namespace ctxsp {

struct BeamConfig {
  int intra = 500;          // beam width within an utterance
  int inter = 5;            // beam width between utterances
  int max_predicates = 8;   // B: predicates created per utterance
  Mode mode = Mode::C;
  bool linguistic_constraints = false;  // mode A: POS-restricted anchoring

  /// Throws std::invalid_argument unless intra >= inter >= 1 and B >= 1.
  void validate() const;
};

/// What a fragment on the stack is waiting for.
enum class Role : std::uint8_t {
  Action,    // head of the Root under construction
  Arg,       // completed argument
  SelProp,   // property awaiting its value: p(_)
  SelValue,  // value on top of SelProp, reduces to a selection
  OpenSet,   // selection that may be used as is or refined
  SupProp,   // property on an OpenSet, reduces to argmin/argmax
  IdxNum,    // number on an OpenSet, reduces to s[i]
  Root,      // completed Root, ready for shift
};

struct StackItem {
  NodePtr node;
  Role role = Role::Arg;
  Denotation den;
};

struct StackCell;
using Stack = std::shared_ptr<const StackCell>;
struct StackCell {
  StackItem item;
  Stack below;
};

struct ParsedUtterance {
  NodePtr root;  // anchored in mode A
  FlatLogicalForm flat;
  double score = 0.0;
};

/// h = (i, b, stack) plus the executed context, features fired so far on
/// the current utterance and the running score.
struct Hypothesis {
  int utterance = 0;  // index of the utterance being built (0-based)
  int built = 0;      // predicates created on it
  int args_done = 0;
  int arity = 0;
  ActionName action = ActionName::Pour;
  Stack stack;                      // fragments of the current utterance, top first
  std::uint64_t used_tokens = 0;    // mode A: tokens covered by anchors
  std::vector<std::uint64_t> fired; // F1 bookkeeping for the current utterance
  Context context;
  std::vector<ParsedUtterance> parses;
  double score = 0.0;
  double utterance_score = 0.0;
  std::uint64_t tiebreak = 0;

  const WorldState& state() const { return context.current(); }
  /// Bottom-to-top rendering of the stack (anchors shown in mode A).
  std::string render_stack() const;
  /// Rendered z_1 .. z_i separated by " ; ".
  std::string render_parses() const;
};

struct ParseResult {
  std::vector<Hypothesis> beam;                      // ranked, after the last utterance
  std::vector<std::vector<Hypothesis>> prefix_beams;  // beam after utterance 1, 2, ...
  std::vector<std::size_t> candidates;                // successors generated per utterance
  bool failed() const { return beam.empty(); }
};

/// Beam parser over one text. Not thread-safe (holds per-utterance score
/// caches); create one per example. `params` must outlive the parser.
class Parser {
 public:
  Parser(std::vector<Utterance> text, WorldState w0, const Params& params, BeamConfig cfg,
         FeatureConfig features);
  Parser(std::vector<Utterance>, WorldState, Params&&, BeamConfig, FeatureConfig) = delete;
  ~Parser();
  Parser(const Parser&) = delete;
  Parser& operator=(const Parser&) = delete;

  Hypothesis initial() const;
  /// All build successors of `h` (empty once a Root is complete).
  std::vector<Hypothesis> build(const Hypothesis& h) const;
  /// Executes the completed Root of `h` and moves to the next utterance.
  Outcome<Hypothesis> shift(const Hypothesis& h) const;
  ParseResult parse(std::ostream* trace = nullptr) const;

  const std::vector<Utterance>& text() const { return text_; }
  const BeamConfig& config() const { return cfg_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::vector<Utterance> text_;
  BeamConfig cfg_;
};

ParseResult parse_text(const std::vector<Utterance>& text, const WorldState& w0, const Params& params,
                       const BeamConfig& cfg, const FeatureConfig& features,
                       std::ostream* trace = nullptr);

/// Full feature vector of a hypothesis: sum over its parsed utterances.
FeatureVector hypothesis_features(const Hypothesis& h, const std::vector<Utterance>& text, Mode mode,
                                  const FeatureConfig& features);

}  // namespace ctxsp
