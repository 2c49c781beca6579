#pragma once

// Logical forms: the compositional grammar over world properties, context
// references to earlier utterances (actions[i], args[i][j]), anchored
// derivations, flat forms, evaluation and the two projections.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxsp/text.hpp"
#include "ctxsp/worlds.hpp"

namespace ctxsp {

/// One executed utterance: the concrete action, its argument values and the
/// state it produced.
struct ExecRecord {
  ActionName action;
  std::vector<Value> args;
  WorldState result;
};

/// c_i = (w_0, executed history). Cheap to copy: records are shared.
class Context {
 public:
  Context() = default;
  explicit Context(WorldState w0);

  const WorldState& initial() const { return *w0_; }
  const WorldState& current() const {
    return history_.empty() ? *w0_ : history_.back()->result;
  }
  Domain domain() const { return w0_->domain(); }
  int size() const { return static_cast<int>(history_.size()); }
  /// 1-based, as in args[i][j].
  const ExecRecord& record(int i) const { return *history_.at(static_cast<std::size_t>(i - 1)); }
  const ExecRecord* previous() const { return history_.empty() ? nullptr : history_.back().get(); }

  Context extended(ExecRecord record) const;
  /// The context restricted to its first `n` records.
  Context prefix(int n) const;

 private:
  std::shared_ptr<const WorldState> w0_;
  std::vector<std::shared_ptr<const ExecRecord>> history_;
};

enum class NodeKind : std::uint8_t {
  Action,         // concrete domain action
  ContextAction,  // actions[i]
  Property,       // property name, consumed by Select / Superlative
  Literal,        // number, color, shape, none or entity
  ContextArg,     // args[i][j]
  Select,         // p(v)
  Superlative,    // argmin/argmax(s, p)
  Index,          // s[i]
  Root,           // a(v1[, v2])
};

/// Grammar categories of the stack fragments.
enum class Category : std::uint8_t { Action, Property, Value, Set, Root };

class Node;
using NodePtr = std::shared_ptr<const Node>;

/// Immutable logical-form node. Leaves may carry an anchor (a span of the
/// current utterance); a tree with anchors is a derivation.
class Node {
 public:
  NodeKind kind() const { return kind_; }
  Category category() const;
  bool is_leaf() const { return children_.empty() && kind_ != NodeKind::Root; }

  ActionName action() const { return action_; }
  int ref_utterance() const { return ref_i_; }
  int ref_arg() const { return ref_j_; }
  Property property() const { return property_; }
  const Value& literal() const { return literal_; }
  bool is_max() const { return is_max_; }
  const std::vector<NodePtr>& children() const { return children_; }
  const std::optional<Span>& anchor() const { return anchor_; }

  /// Canonical rendering without anchors, e.g. `pour(argmin(color(green),pos),pos(2))`.
  const std::string& text() const { return text_; }
  std::uint64_t hash() const { return hash_; }
  /// Name of the predicate this node contributes, empty for Select / Root.
  std::string_view predicate() const;

  static NodePtr action(ActionName a, std::optional<Span> anchor = {});
  static NodePtr context_action(int i, std::optional<Span> anchor = {});
  static NodePtr property(Property p, std::optional<Span> anchor = {});
  static NodePtr literal(Value v, Domain d, std::optional<Span> anchor = {});
  static NodePtr context_arg(int i, int j, std::optional<Span> anchor = {});
  static NodePtr select(NodePtr property, NodePtr value);
  static NodePtr superlative(NodePtr set, NodePtr property, bool is_max);
  static NodePtr index(NodePtr set, NodePtr number);
  static NodePtr root(NodePtr action, std::vector<NodePtr> args);

  /// Same node with a different anchor (leaves only).
  NodePtr with_anchor(std::optional<Span> anchor) const;

 private:
  void finish();

  NodeKind kind_ = NodeKind::Literal;
  ActionName action_ = ActionName::Pour;
  int ref_i_ = 0;
  int ref_j_ = 0;
  Property property_ = Property::Pos;
  Value literal_;
  bool is_max_ = false;
  std::vector<NodePtr> children_;
  std::optional<Span> anchor_;
  std::string text_;
  std::uint64_t hash_ = 0;
};

/// Rendering that also shows anchors, e.g. `mix@0(args[1][1])`.
std::string render_anchored(const Node& n);

/// Parses the canonical rendering. Throws ParseError.
NodePtr parse_logical_form(std::string_view text, Domain d);
/// Parses one argument, e.g. `argmin(color(green),pos)`.
NodePtr parse_argument(std::string_view text, Domain d);

/// Result of evaluating a sub-form: a value, an entity set (bitmask over
/// positions, which is also the canonical pos order) or an action.
struct Denotation {
  enum class Kind : std::uint8_t { Value, Set, Action };
  Kind kind = Kind::Value;
  Value value;
  std::uint32_t set = 0;
  ActionName action = ActionName::Pour;

  static Denotation of(Value v) { return {Kind::Value, v, 0, ActionName::Pour}; }
  static Denotation of_set(std::uint32_t mask) { return {Kind::Set, {}, mask, ActionName::Pour}; }
  static Denotation of(ActionName a) { return {Kind::Action, {}, 0, a}; }
};

/// Entity positions supported by the set bitmask.
inline constexpr int kMaxPositions = 32;

Outcome<Denotation> evaluate(const Node& node, const Context& c);

/// Set-to-value coercion used wherever an argument value is required: a
/// singleton set denotes its member.
Outcome<Value> as_value(const Denotation& d, const WorldState& w);

/// Argument value normalization before execution (Tangrams shape literals
/// in figure slots become figure references).
Value normalize_argument(Value v, ArgKind kind, Domain d);

/// Evaluates and executes a Root. Two-argument actions reject identical
/// argument values.
Outcome<ExecRecord> execute_root(const Node& root, const Context& c);

/// A top-level action with fully evaluated arguments.
struct FlatLogicalForm {
  ActionName action;
  std::vector<Value> args;

  std::string render(Domain d) const;
  friend bool operator==(const FlatLogicalForm&, const FlatLogicalForm&) = default;
};

/// Root node with literal arguments for a flat form.
NodePtr to_root(const FlatLogicalForm& f, Domain d);

/// Logical form whose leaves are aligned to utterance spans.
struct Derivation {
  NodePtr root;

  /// Pre-order leaf index -> span, for the anchored leaves.
  std::map<int, Span> alignments() const;
};

/// Drops every anchor; many-to-one.
NodePtr project_ab(const Derivation& d);
NodePtr strip_anchors(const NodePtr& n);
/// Evaluates the top-level arguments; many-to-one.
Outcome<FlatLogicalForm> project_bc(const Node& root, const Context& c);

/// Every precondition-valid flat action in `w`, in canonical order.
std::vector<FlatLogicalForm> enumerate_flat_forms(const WorldState& w);

/// Literal ranges the grammar instantiates for a state.
int max_number_literal(const WorldState& w);
std::vector<Color> color_palette(Domain d);

}  // namespace ctxsp
