#include "ctxsp/logic.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>

namespace ctxsp {

// ---------------------------------------------------------------------------
// Context

Context::Context(WorldState w0) : w0_(std::make_shared<const WorldState>(std::move(w0))) {}

Context Context::extended(ExecRecord record) const {
  Context c = *this;
  c.history_.push_back(std::make_shared<const ExecRecord>(std::move(record)));
  return c;
}

Context Context::prefix(int n) const {
  Context c = *this;
  c.history_.resize(static_cast<std::size_t>(std::clamp(n, 0, size())));
  return c;
}

// ---------------------------------------------------------------------------
// Nodes

Category Node::category() const {
  switch (kind_) {
    case NodeKind::Action:
    case NodeKind::ContextAction: return Category::Action;
    case NodeKind::Property: return Category::Property;
    case NodeKind::Select: return Category::Set;
    case NodeKind::Root: return Category::Root;
    default: return Category::Value;
  }
}

std::string_view Node::predicate() const {
  switch (kind_) {
    case NodeKind::Superlative: return is_max_ ? "argmax" : "argmin";
    case NodeKind::Index: return "index";
    case NodeKind::Select:
    case NodeKind::Root: return {};
    default: return text_;
  }
}

void Node::finish() {
  switch (kind_) {
    case NodeKind::Action: text_ = std::string(to_string(action_)); break;
    case NodeKind::ContextAction: text_ = "actions[" + std::to_string(ref_i_) + "]"; break;
    case NodeKind::Property: text_ = std::string(to_string(property_)); break;
    case NodeKind::Literal: break;  // set by the factory, needs the domain
    case NodeKind::ContextArg:
      text_ = "args[" + std::to_string(ref_i_) + "][" + std::to_string(ref_j_) + "]";
      break;
    case NodeKind::Select:
      text_ = children_[0]->text_ + "(" + children_[1]->text_ + ")";
      break;
    case NodeKind::Superlative:
      text_ = std::string(is_max_ ? "argmax(" : "argmin(") + children_[0]->text_ + "," +
              children_[1]->text_ + ")";
      break;
    case NodeKind::Index:
      text_ = children_[0]->text_ + "[" + children_[1]->text_ + "]";
      break;
    case NodeKind::Root:
      text_ = children_[0]->text_ + "(";
      for (std::size_t k = 1; k < children_.size(); ++k) {
        if (k > 1) text_ += ',';
        text_ += children_[k]->text_;
      }
      text_ += ')';
      break;
  }
  hash_ = fnv1a(text_);
}

NodePtr Node::action(ActionName a, std::optional<Span> anchor) {
  auto n = std::make_shared<Node>();
  n->kind_ = NodeKind::Action;
  n->action_ = a;
  n->anchor_ = anchor;
  n->finish();
  return n;
}

NodePtr Node::context_action(int i, std::optional<Span> anchor) {
  auto n = std::make_shared<Node>();
  n->kind_ = NodeKind::ContextAction;
  n->ref_i_ = i;
  n->anchor_ = anchor;
  n->finish();
  return n;
}

NodePtr Node::property(Property p, std::optional<Span> anchor) {
  auto n = std::make_shared<Node>();
  n->kind_ = NodeKind::Property;
  n->property_ = p;
  n->anchor_ = anchor;
  n->finish();
  return n;
}

NodePtr Node::literal(Value v, Domain d, std::optional<Span> anchor) {
  auto n = std::make_shared<Node>();
  n->kind_ = NodeKind::Literal;
  n->literal_ = v;
  n->anchor_ = anchor;
  n->text_ = render(v, d);
  n->finish();
  return n;
}

NodePtr Node::context_arg(int i, int j, std::optional<Span> anchor) {
  auto n = std::make_shared<Node>();
  n->kind_ = NodeKind::ContextArg;
  n->ref_i_ = i;
  n->ref_j_ = j;
  n->anchor_ = anchor;
  n->finish();
  return n;
}

NodePtr Node::select(NodePtr property, NodePtr value) {
  auto n = std::make_shared<Node>();
  n->kind_ = NodeKind::Select;
  n->children_ = {std::move(property), std::move(value)};
  n->finish();
  return n;
}

NodePtr Node::superlative(NodePtr set, NodePtr property, bool is_max) {
  auto n = std::make_shared<Node>();
  n->kind_ = NodeKind::Superlative;
  n->is_max_ = is_max;
  n->children_ = {std::move(set), std::move(property)};
  n->finish();
  return n;
}

NodePtr Node::index(NodePtr set, NodePtr number) {
  auto n = std::make_shared<Node>();
  n->kind_ = NodeKind::Index;
  n->children_ = {std::move(set), std::move(number)};
  n->finish();
  return n;
}

NodePtr Node::root(NodePtr action, std::vector<NodePtr> args) {
  auto n = std::make_shared<Node>();
  n->kind_ = NodeKind::Root;
  n->children_.reserve(args.size() + 1);
  n->children_.push_back(std::move(action));
  for (auto& a : args) n->children_.push_back(std::move(a));
  n->finish();
  return n;
}

NodePtr Node::with_anchor(std::optional<Span> anchor) const {
  auto n = std::make_shared<Node>(*this);
  n->anchor_ = anchor;
  return n;
}

std::string render_anchored(const Node& n) {
  std::string anchor;
  if (n.anchor()) {
    anchor = "@" + std::to_string(n.anchor()->start);
    if (n.anchor()->end != n.anchor()->start) anchor += "-" + std::to_string(n.anchor()->end);
  }
  const auto& ch = n.children();
  switch (n.kind()) {
    case NodeKind::Select:
      return render_anchored(*ch[0]) + "(" + render_anchored(*ch[1]) + ")";
    case NodeKind::Superlative:
      return std::string(n.is_max() ? "argmax(" : "argmin(") + render_anchored(*ch[0]) + "," +
             render_anchored(*ch[1]) + ")";
    case NodeKind::Index:
      return render_anchored(*ch[0]) + "[" + render_anchored(*ch[1]) + "]";
    case NodeKind::Root: {
      std::string out = render_anchored(*ch[0]) + "(";
      for (std::size_t k = 1; k < ch.size(); ++k) {
        if (k > 1) out += ',';
        out += render_anchored(*ch[k]);
      }
      return out + ")";
    }
    default: return n.text() + anchor;
  }
}

// ---------------------------------------------------------------------------
// Rendering parser (LL(1))

namespace {

class LfParser {
 public:
  LfParser(std::string_view text, Domain d) : s_(text), d_(d) {}

  NodePtr parse_root() {
    NodePtr head = parse_head();
    expect('(');
    std::vector<NodePtr> args;
    args.push_back(parse_value());
    while (peek() == ',') {
      ++i_;
      args.push_back(parse_value());
    }
    expect(')');
    if (i_ != s_.size()) fail("trailing input");
    return Node::root(std::move(head), std::move(args));
  }

  NodePtr parse_argument() {
    NodePtr v = parse_value();
    if (i_ != s_.size()) fail("trailing input");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) { throw ParseError(what, i_); }

  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }

  std::string_view ident() {
    std::size_t start = i_;
    while (i_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[i_])) || s_[i_] == '-'))
      ++i_;
    if (start == i_) fail("expected identifier");
    return s_.substr(start, i_ - start);
  }

  int integer() {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s_.data() + i_, s_.data() + s_.size(), v);
    if (ec != std::errc()) fail("expected integer");
    i_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }

  NodePtr parse_head() {
    std::string_view name = ident();
    if (name == "actions") {
      expect('[');
      int k = integer();
      expect(']');
      return Node::context_action(k);
    }
    auto a = action_from_string(name);
    if (!a || signature(*a).domain != d_) fail("unknown action '" + std::string(name) + "'");
    return Node::action(*a);
  }

  NodePtr parse_value() {
    NodePtr v = parse_term();
    if (peek() == '[') {
      if (v->kind() != NodeKind::Select) fail("index applies to selections only");
      ++i_;
      int k = integer();
      expect(']');
      v = Node::index(std::move(v), Node::literal(Value::number(k), d_));
    }
    return v;
  }

  NodePtr parse_term() {
    if (std::isdigit(static_cast<unsigned char>(peek())))
      return Node::literal(Value::number(integer()), d_);
    std::string_view name = ident();
    if (name == "args") {
      expect('[');
      int k = integer();
      expect(']');
      expect('[');
      int j = integer();
      expect(']');
      return Node::context_arg(k, j);
    }
    if (name == "argmin" || name == "argmax") {
      expect('(');
      NodePtr set = parse_value();
      if (set->category() != Category::Set) fail("superlative needs a selection");
      expect(',');
      auto p = property_from_string(ident());
      if (!p) fail("unknown property");
      expect(')');
      return Node::superlative(std::move(set), Node::property(*p), name == "argmax");
    }
    if (auto p = property_from_string(name)) {
      expect('(');
      NodePtr v = parse_value();
      expect(')');
      return Node::select(Node::property(*p), std::move(v));
    }
    if (auto c = color_from_name(name)) return Node::literal(Value::color(*c), d_);
    if (name == "none") return Node::literal(Value::none(), d_);
    if (auto sh = shape_from_name(name)) return Node::literal(Value::shape(*sh), d_);
    if (name == entity_noun(d_) && std::isdigit(static_cast<unsigned char>(peek())))
      return Node::literal(Value::entity(integer()), d_);
    fail("unknown token '" + std::string(name) + "'");
  }

  std::string_view s_;
  Domain d_;
  std::size_t i_ = 0;
};

}  // namespace

NodePtr parse_logical_form(std::string_view text, Domain d) { return LfParser(text, d).parse_root(); }

NodePtr parse_argument(std::string_view text, Domain d) { return LfParser(text, d).parse_argument(); }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

std::uint32_t select_mask(const WorldState& w, Property p, const Value& v) {
  std::uint32_t mask = 0;
  for (const auto& e : w.entities()) {
    auto pv = lookup_property(e, w.domain(), p);
    if (pv && *pv == v) mask |= 1u << (e.pos - 1);
  }
  return mask;
}

}  // namespace

Outcome<Value> as_value(const Denotation& d, const WorldState& w) {
  switch (d.kind) {
    case Denotation::Kind::Value: return d.value;
    case Denotation::Kind::Set: {
      if (d.set == 0) return Fault::EmptyDenotation;
      if (std::popcount(d.set) != 1) return Fault::NonSingleton;
      const Entity* e = w.at_pos(std::countr_zero(d.set) + 1);
      if (e == nullptr) return Fault::EmptyDenotation;
      return Value::entity(e->id);
    }
    case Denotation::Kind::Action: return Fault::KindMismatch;
  }
  return Fault::KindMismatch;
}

Outcome<Denotation> evaluate(const Node& node, const Context& c) {
  const WorldState& w = c.current();
  const auto& ch = node.children();
  switch (node.kind()) {
    case NodeKind::Action: return Denotation::of(node.action());
    case NodeKind::ContextAction:
      if (node.ref_utterance() < 1 || node.ref_utterance() > c.size())
        return Fault::DanglingReference;
      return Denotation::of(c.record(node.ref_utterance()).action);
    case NodeKind::Property: return Fault::KindMismatch;
    case NodeKind::Literal: return Denotation::of(node.literal());
    case NodeKind::ContextArg: {
      int i = node.ref_utterance();
      int j = node.ref_arg();
      if (i < 1 || i > c.size()) return Fault::DanglingReference;
      const auto& args = c.record(i).args;
      if (j < 1 || j > static_cast<int>(args.size())) return Fault::DanglingReference;
      return Denotation::of(args[static_cast<std::size_t>(j - 1)]);
    }
    case NodeKind::Select: {
      Property p = ch[0]->property();
      if (!has_property(w.domain(), p)) return Fault::UnknownProperty;
      auto v = evaluate(*ch[1], c);
      if (!v) return v.fault();
      if (v->kind != Denotation::Kind::Value) return Fault::KindMismatch;
      std::uint32_t mask = select_mask(w, p, v->value);
      if (mask == 0) return Fault::EmptyDenotation;
      return Denotation::of_set(mask);
    }
    case NodeKind::Superlative: {
      Property p = ch[1]->property();
      if (!has_property(w.domain(), p)) return Fault::UnknownProperty;
      auto s = evaluate(*ch[0], c);
      if (!s) return s.fault();
      if (s->kind != Denotation::Kind::Set) return Fault::KindMismatch;
      const Entity* best = nullptr;
      int best_v = 0;
      for (const auto& e : w.entities()) {
        if (!(s->set & (1u << (e.pos - 1)))) continue;
        auto pv = lookup_property(e, w.domain(), p);
        if (!pv || pv->kind != Value::Kind::Number) continue;
        bool better = node.is_max() ? pv->data > best_v : pv->data < best_v;
        if (best == nullptr || better) {
          best = &e;
          best_v = pv->data;
        }
      }
      if (best == nullptr) return Fault::EmptyDenotation;
      return Denotation::of(Value::entity(best->id));
    }
    case NodeKind::Index: {
      auto s = evaluate(*ch[0], c);
      if (!s) return s.fault();
      if (s->kind != Denotation::Kind::Set) return Fault::KindMismatch;
      int k = ch[1]->literal().data;
      int seen = 0;
      for (const auto& e : w.entities()) {
        if (!(s->set & (1u << (e.pos - 1)))) continue;
        if (++seen == k) return Denotation::of(Value::entity(e.id));
      }
      return Fault::EmptyDenotation;
    }
    case NodeKind::Root: return Fault::KindMismatch;
  }
  return Fault::KindMismatch;
}

Value normalize_argument(Value v, ArgKind kind, Domain d) {
  if (d == Domain::Tangrams && kind == ArgKind::Entity && v.kind == Value::Kind::Shape)
    return Value::entity(v.data);
  return v;
}

Outcome<FlatLogicalForm> project_bc(const Node& root, const Context& c) {
  if (root.kind() != NodeKind::Root) return Fault::KindMismatch;
  const auto& ch = root.children();
  auto head = evaluate(*ch[0], c);
  if (!head) return head.fault();
  if (head->kind != Denotation::Kind::Action) return Fault::KindMismatch;
  const auto& sig = signature(head->action);
  if (static_cast<int>(ch.size()) - 1 != sig.arity) return Fault::ArityMismatch;

  FlatLogicalForm flat{head->action, {}};
  for (int j = 0; j < sig.arity; ++j) {
    auto d = evaluate(*ch[static_cast<std::size_t>(j + 1)], c);
    if (!d) return d.fault();
    auto v = as_value(*d, c.current());
    if (!v) return v.fault();
    flat.args.push_back(normalize_argument(*v, sig.kinds[static_cast<std::size_t>(j)], c.domain()));
  }
  return flat;
}

Outcome<ExecRecord> execute_root(const Node& root, const Context& c) {
  auto flat = project_bc(root, c);
  if (!flat) return flat.fault();
  if (flat->args.size() == 2 && flat->args[0] == flat->args[1]) return Fault::PreconditionViolation;
  auto next = exec_action(c.current(), flat->action, flat->args);
  if (!next) return next.fault();
  return ExecRecord{flat->action, flat->args, std::move(next).value()};
}

// ---------------------------------------------------------------------------
// Flat forms and projections

std::string FlatLogicalForm::render(Domain d) const {
  std::string out(to_string(action));
  out += '(';
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (k) out += ',';
    out += ctxsp::render(args[k], d);
  }
  return out + ')';
}

NodePtr to_root(const FlatLogicalForm& f, Domain d) {
  std::vector<NodePtr> args;
  for (const auto& v : f.args) args.push_back(Node::literal(v, d));
  return Node::root(Node::action(f.action), std::move(args));
}

std::map<int, Span> Derivation::alignments() const {
  std::map<int, Span> out;
  int leaf = 0;
  auto walk = [&](auto&& self, const Node& n) -> void {
    if (n.kind() != NodeKind::Root && n.children().empty()) {
      if (n.anchor()) out.emplace(leaf, *n.anchor());
      ++leaf;
      return;
    }
    for (const auto& c : n.children()) self(self, *c);
  };
  if (root) walk(walk, *root);
  return out;
}

NodePtr strip_anchors(const NodePtr& n) {
  const auto& ch = n->children();
  switch (n->kind()) {
    case NodeKind::Select: return Node::select(strip_anchors(ch[0]), strip_anchors(ch[1]));
    case NodeKind::Superlative:
      return Node::superlative(strip_anchors(ch[0]), strip_anchors(ch[1]), n->is_max());
    case NodeKind::Index: return Node::index(strip_anchors(ch[0]), strip_anchors(ch[1]));
    case NodeKind::Root: {
      std::vector<NodePtr> args;
      for (std::size_t k = 1; k < ch.size(); ++k) args.push_back(strip_anchors(ch[k]));
      return Node::root(strip_anchors(ch[0]), std::move(args));
    }
    default: return n->anchor() ? n->with_anchor(std::nullopt) : n;
  }
}

NodePtr project_ab(const Derivation& d) { return strip_anchors(d.root); }

int max_number_literal(const WorldState& w) {
  switch (w.domain()) {
    case Domain::Alchemy: return std::max(w.slots(), kBeakerCapacity);
    case Domain::Scene: return w.slots();
    case Domain::Tangrams: return static_cast<int>(w.entities().size()) + 1;
  }
  return 0;
}

std::vector<Color> color_palette(Domain d) {
  std::vector<Color> out;
  int n = d == Domain::Alchemy ? kNumColors : kNumBaseColors;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<Color>(i));
  return out;
}

namespace {

std::vector<Value> candidates_for(const WorldState& w, ActionName a, int slot) {
  const auto& sig = signature(a);
  std::vector<Value> out;
  switch (sig.kinds[static_cast<std::size_t>(slot)]) {
    case ArgKind::Entity:
      if (a == ActionName::Add) {
        for (int s = 0; s < kNumShapes; ++s)
          if (!w.contains(s)) out.push_back(Value::entity(s));
      } else {
        for (const auto& e : w.entities()) out.push_back(Value::entity(e.id));
      }
      break;
    case ArgKind::Number:
      for (int n = 1; n <= max_number_literal(w); ++n) out.push_back(Value::number(n));
      break;
    case ArgKind::Color:
      for (Color c : color_palette(w.domain())) out.push_back(Value::color(c));
      break;
  }
  return out;
}

}  // namespace

std::vector<FlatLogicalForm> enumerate_flat_forms(const WorldState& w) {
  std::vector<FlatLogicalForm> out;
  for (ActionName a : domain_actions(w.domain())) {
    const auto& sig = signature(a);
    auto first = candidates_for(w, a, 0);
    if (sig.arity == 1) {
      for (const auto& v : first) {
        Value args[1] = {v};
        if (!check_action(w, a, args)) out.push_back({a, {v}});
      }
      continue;
    }
    auto second = candidates_for(w, a, 1);
    for (const auto& v1 : first)
      for (const auto& v2 : second) {
        if (v1 == v2) continue;
        Value args[2] = {v1, v2};
        if (!check_action(w, a, args)) out.push_back({a, {v1, v2}});
      }
  }
  return out;
}

}  // namespace ctxsp
