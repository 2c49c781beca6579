#include "support.hpp"

#include <stdexcept>

namespace support {

using namespace ctxsp;

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Context random_context(Domain d, int steps, Rng& rng) {
  GenConfig g;
  g.domain = d;
  g.templates = TemplateSet::builtin(d);
  Context c(random_world(g, rng));
  for (int s = 0; s < steps; ++s) {
    auto forms = enumerate_flat_forms(c.current());
    if (forms.empty()) break;
    const auto& f = forms[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(forms.size()) - 1))];
    auto rec = execute_root(*to_root(f, d), c);
    if (!rec) throw std::logic_error("enumerated flat form failed to execute");
    c = c.extended(std::move(rec).value());
  }
  return c;
}

namespace {

Value random_property_value(Property p, const WorldState& w, Rng& rng) {
  switch (p) {
    case Property::Pos: return Value::number(uniform_int(rng, 1, std::max<int>(w.slots(), w.entities().size())));
    case Property::Amount: return Value::number(uniform_int(rng, 0, kBeakerCapacity));
    case Property::Shape: return Value::shape(uniform_int(rng, 0, kNumShapes - 1));
    default: return Value::color(static_cast<Color>(uniform_int(rng, 0, kNumColors - 1)));
  }
}

NodePtr random_selection(const WorldState& w, Rng& rng) {
  auto props = domain_properties(w.domain());
  Property p = props[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(props.size()) - 1))];
  return Node::select(Node::property(p), Node::literal(random_property_value(p, w, rng), w.domain()));
}

NodePtr random_context_arg(const Context& c, Rng& rng) {
  return Node::context_arg(uniform_int(rng, 1, c.size()), uniform_int(rng, 1, 2));
}

NodePtr random_entity(const Context& c, Rng& rng) {
  const WorldState& w = c.current();
  const Domain d = w.domain();
  const int r = uniform_int(rng, 0, 99);
  if (r < 10 && !w.entities().empty()) {
    const auto& e = w.entities()[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(w.entities().size()) - 1))];
    return Node::literal(Value::entity(e.id), d);
  }
  if (r < 15 && d == Domain::Tangrams) return Node::literal(Value::shape(uniform_int(rng, 0, kNumShapes - 1)), d);
  if (r < 45) return random_selection(w, rng);
  if (r < 65) {
    std::vector<Property> numeric;
    for (Property p : domain_properties(d))
      if (is_numeric(p)) numeric.push_back(p);
    Property p = numeric[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(numeric.size()) - 1))];
    return Node::superlative(random_selection(w, rng), Node::property(p), uniform_int(rng, 0, 1) == 1);
  }
  if (r < 85) return Node::index(random_selection(w, rng), Node::literal(Value::number(uniform_int(rng, 1, 3)), d));
  if (c.size() > 0) return random_context_arg(c, rng);
  return random_selection(w, rng);
}

NodePtr random_argument(ArgKind kind, const Context& c, Rng& rng) {
  const Domain d = c.domain();
  if (c.size() > 0 && uniform_int(rng, 0, 9) == 0) return random_context_arg(c, rng);
  switch (kind) {
    case ArgKind::Entity: return random_entity(c, rng);
    case ArgKind::Number: return Node::literal(Value::number(uniform_int(rng, 1, 4)), d);
    case ArgKind::Color:
      return Node::literal(Value::color(static_cast<Color>(uniform_int(rng, 0, kNumColors - 1))), d);
  }
  return nullptr;
}

}  // namespace

NodePtr random_root(const Context& c, Rng& rng) {
  const Domain d = c.domain();
  auto actions = domain_actions(d);
  ActionName a = actions[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(actions.size()) - 1))];
  NodePtr head = Node::action(a);
  if (c.size() > 0 && uniform_int(rng, 0, 4) == 0) {
    int i = uniform_int(rng, 1, c.size());
    a = c.record(i).action;
    head = Node::context_action(i);
  }
  const auto& sig = signature(a);
  std::vector<NodePtr> args;
  for (int k = 0; k < sig.arity; ++k) args.push_back(random_argument(sig.kinds[static_cast<std::size_t>(k)], c, rng));
  return Node::root(head, std::move(args));
}

NodePtr map_leaves(const NodePtr& root, const std::function<NodePtr(const Node&, int)>& leaf) {
  int next = 0;
  auto walk = [&](auto&& self, const NodePtr& n) -> NodePtr {
    const auto& ch = n->children();
    switch (n->kind()) {
      case NodeKind::Select: {
        auto p = self(self, ch[0]);
        return Node::select(p, self(self, ch[1]));
      }
      case NodeKind::Superlative: {
        auto s = self(self, ch[0]);
        return Node::superlative(s, self(self, ch[1]), n->is_max());
      }
      case NodeKind::Index: {
        auto s = self(self, ch[0]);
        return Node::index(s, self(self, ch[1]));
      }
      case NodeKind::Root: {
        auto head = self(self, ch[0]);
        std::vector<NodePtr> args;
        for (std::size_t k = 1; k < ch.size(); ++k) args.push_back(self(self, ch[k]));
        return Node::root(head, std::move(args));
      }
      default: return leaf(*n, next++);
    }
  };
  return walk(walk, root);
}

int count_leaves(const Node& n) {
  if (n.is_leaf()) return 1;
  int total = 0;
  for (const auto& ch : n.children()) total += count_leaves(*ch);
  return total;
}

reference::Arg to_reference(Value v, const WorldState& w) {
  switch (v.kind) {
    case Value::Kind::Entity:
      if (w.domain() == Domain::Tangrams) return {reference::Arg::Shape, v.data};
      if (const Entity* e = w.find(v.data)) return {reference::Arg::Pos, e->pos};
      return {reference::Arg::Pos, -1};
    case Value::Kind::Shape: return {reference::Arg::Shape, v.data};
    case Value::Kind::Number: return {reference::Arg::Number, v.data};
    case Value::Kind::Color: return {reference::Arg::Color, color_letter(v.as_color())};
    case Value::Kind::None: break;
  }
  return {reference::Arg::Number, -1000};
}

std::optional<std::string> reference_exec(const WorldState& w, ActionName a, const std::vector<Value>& args) {
  std::vector<reference::Arg> ref;
  for (Value v : args) ref.push_back(to_reference(v, w));
  return reference::exec(std::string(to_string(w.domain())), serialize_state(w), w.slots(),
                         std::string(to_string(a)), ref);
}

}  // namespace support
