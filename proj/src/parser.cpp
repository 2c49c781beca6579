#include "ctxsp/parser.hpp"

#include <algorithm>
#include <bit>
#include <ostream>
#include <stdexcept>

namespace ctxsp {

void BeamConfig::validate() const {
  if (inter < 1) throw std::invalid_argument("inter-utterance beam must be at least 1");
  if (intra < inter) throw std::invalid_argument("intra-utterance beam must be >= inter-utterance beam");
  if (max_predicates < 1) throw std::invalid_argument("max predicates per utterance must be at least 1");
}

std::string Hypothesis::render_stack() const {
  std::vector<const StackItem*> items;
  for (const StackCell* c = stack.get(); c != nullptr; c = c->below.get()) items.push_back(&c->item);
  std::string out;
  for (auto it = items.rbegin(); it != items.rend(); ++it) {
    if (!out.empty()) out += ' ';
    out += render_anchored(*(*it)->node);
  }
  return out;
}

std::string Hypothesis::render_parses() const {
  std::string out;
  for (const auto& p : parses) {
    if (!out.empty()) out += " ; ";
    out += render_anchored(*p.root);
  }
  return out;
}

namespace {

const std::uint64_t kNoSpanHash = fnv1a(kNoSpanMarker);
const std::uint64_t kOrderedArgsKey = feature_key(fnv1a(kOrderedArgsCondition), fnv1a(""));

// Leaf families restricted by the linguistic constraints: actions anchor
// to verbs and values to adjectives or numbers; properties and context
// references may anchor anywhere.
enum LeafClass : std::uint8_t {
  kClassAction = 1,
  kClassValue = 2,
  kClassProperty = 4,
  kClassReference = 8,
  kClassAll = 15,
};

std::uint8_t tag_classes(std::string_view tag) {
  if (tag.starts_with("VB")) return kClassAction;
  std::uint8_t out = kClassProperty | kClassReference;
  if (tag.starts_with("JJ") || tag == "CD") out |= kClassValue;
  return out;
}

struct Leaf {
  NodePtr node;
  std::uint64_t f1_hash = 0;
  LeafClass cls = kClassValue;
};

enum class OpKind : std::uint8_t { Push, Select, Superlative, Index, Root, FlatRoot };

struct Candidate {
  std::uint32_t parent = 0;
  OpKind op = OpKind::Push;
  Role role = Role::Arg;
  bool is_max = false;
  std::int32_t leaf = -1;
  std::int32_t span = -1;
  std::uint32_t flat = 0;
  Denotation den;
  double delta = 0.0;
  double score = 0.0;
  std::uint64_t tiebreak = 0;
};

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tiebreak != b.tiebreak) return a.tiebreak < b.tiebreak;
  if (a.parent != b.parent) return a.parent < b.parent;
  if (a.leaf != b.leaf) return a.leaf < b.leaf;
  if (a.span != b.span) return a.span < b.span;
  if (a.op != b.op) return a.op < b.op;
  if (a.is_max != b.is_max) return a.is_max < b.is_max;
  return a.flat < b.flat;
}

bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tiebreak < b.tiebreak;
}

std::uint32_t select_mask(const WorldState& w, Property p, const Value& v) {
  std::uint32_t mask = 0;
  for (const auto& e : w.entities()) {
    auto pv = lookup_property(e, w.domain(), p);
    if (pv && *pv == v) mask |= 1u << (e.pos - 1);
  }
  return mask;
}

bool contains_sorted(const std::vector<std::uint64_t>& v, std::uint64_t x) {
  return std::binary_search(v.begin(), v.end(), x);
}

void insert_sorted(std::vector<std::uint64_t>& v, std::uint64_t x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

Stack push(Stack below, StackItem item) {
  return std::make_shared<const StackCell>(StackCell{std::move(item), std::move(below)});
}

std::optional<Span> hull(const Node& n) {
  std::optional<Span> out = n.anchor();
  for (const auto& c : n.children()) {
    auto h = hull(*c);
    if (!h) continue;
    if (!out) {
      out = h;
    } else {
      out->start = std::min(out->start, h->start);
      out->end = std::max(out->end, h->end);
    }
  }
  return out;
}

}  // namespace

// Per-utterance lookup tables.
struct UtteranceData {
  const Utterance* x = nullptr;
  std::vector<Span> spans;
  std::vector<std::uint64_t> span_mask;
  std::vector<std::uint8_t> span_classes;
  std::vector<std::vector<int>> span_ngrams;
  absl::flat_hash_map<std::uint64_t, double> blocks;  // condition -> sum over all n-grams and the marker
};

struct Parser::Impl {
  const Params& params;
  FeatureConfig features;
  BeamConfig cfg;
  Context start;
  Domain domain;
  std::vector<Leaf> leaves;
  // Index ranges into `leaves`.
  std::vector<int> action_leaves, property_leaves, color_leaves, shape_leaves;
  std::vector<int> number_leaves;   // number_leaves[n - 1] is literal n
  std::vector<int> ctx_action_leaves;  // k - 1
  std::vector<std::array<int, 2>> ctx_arg_leaves;  // [k - 1][j - 1]
  mutable std::vector<UtteranceData> utts;

  Impl(const std::vector<Utterance>& text, WorldState w0, const Params& p, BeamConfig c, FeatureConfig f)
      : params(p), features(f), cfg(c), start(std::move(w0)), domain(start.domain()) {
    auto add_leaf = [&](NodePtr n, LeafClass cls) {
      Leaf leaf;
      leaf.f1_hash = predicate_condition(n->predicate()).hash;
      leaf.node = std::move(n);
      leaf.cls = cls;
      leaves.push_back(std::move(leaf));
      return static_cast<int>(leaves.size()) - 1;
    };
    for (ActionName a : domain_actions(domain)) action_leaves.push_back(add_leaf(Node::action(a), kClassAction));
    for (Property pr : domain_properties(domain)) property_leaves.push_back(add_leaf(Node::property(pr), kClassProperty));
    for (Color col : color_palette(domain))
      color_leaves.push_back(add_leaf(Node::literal(Value::color(col), domain), kClassValue));
    if (domain == Domain::Tangrams)
      for (int s = 0; s < kNumShapes; ++s)
        shape_leaves.push_back(add_leaf(Node::literal(Value::shape(s), domain), kClassValue));
    for (int n = 1; n <= kMaxPositions + 1; ++n)
      number_leaves.push_back(add_leaf(Node::literal(Value::number(n), domain), kClassValue));
    const int L = static_cast<int>(text.size());
    for (int k = 1; k <= L; ++k) {
      ctx_action_leaves.push_back(add_leaf(Node::context_action(k), kClassReference));
      ctx_arg_leaves.push_back({add_leaf(Node::context_arg(k, 1), kClassReference),
                                add_leaf(Node::context_arg(k, 2), kClassReference)});
    }

    utts.resize(text.size());
    for (std::size_t u = 0; u < text.size(); ++u) {
      auto& d = utts[u];
      d.x = &text[u];
      const int n = std::min(d.x->size(), 64);
      const bool constrain = cfg.linguistic_constraints && d.x->has_tags() && d.x->tags().size() == text[u].tokens().size();
      for (int s = 0; s < n; ++s)
        for (int len = 1; len <= kMaxNgram && s + len <= n; ++len) {
          Span sp{s, s + len - 1};
          std::uint64_t mask = 0;
          std::uint8_t classes = kClassAll;
          for (int t = s; t <= sp.end; ++t) {
            mask |= 1ull << t;
            if (constrain) classes &= tag_classes(d.x->tags()[static_cast<std::size_t>(t)]);
          }
          if (classes == 0) continue;
          d.spans.push_back(sp);
          d.span_mask.push_back(mask);
          d.span_classes.push_back(classes);
          d.span_ngrams.push_back(d.x->ngrams_inside(sp));
        }
    }
  }

  double w(FeatureKey k) const { return params.weight(k); }

  /// Sum of the weights of `cond` conjoined with every n-gram and the marker.
  double block(int u, std::uint64_t cond) const {
    auto& d = utts[static_cast<std::size_t>(u)];
    auto it = d.blocks.find(cond);
    if (it != d.blocks.end()) return it->second;
    double s = w(feature_key(cond, kNoSpanHash));
    for (const auto& g : d.x->ngrams()) s += w(feature_key(cond, g.hash));
    d.blocks.emplace(cond, s);
    return s;
  }

  /// n-gram indices under the anchors of `n`'s subtree (sorted, unique).
  void collect_lex(const Node& n, int u, std::vector<int>& out) const {
    if (n.anchor()) {
      for (int g : utts[static_cast<std::size_t>(u)].x->ngrams_inside(*n.anchor())) out.push_back(g);
    }
    for (const auto& c : n.children()) collect_lex(*c, u, out);
  }

  static void unique_sorted(std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }

  FeatureKey lex_key(int u, std::uint64_t cond, int g) const {
    return feature_key(cond, g < 0 ? kNoSpanHash : utts[static_cast<std::size_t>(u)].x->ngrams()[static_cast<std::size_t>(g)].hash);
  }

  // ---- F1 on the current utterance -------------------------------------

  /// Score of firing predicate condition `cond` with lexical set `lex`
  /// (mode A) or floating (mode B), skipping what already fired.
  double f1_delta(const Hypothesis& h, std::uint64_t cond, const std::vector<int>* lex) const {
    if (!features.has(1)) return 0.0;
    if (cfg.mode != Mode::A) return contains_sorted(h.fired, cond) ? 0.0 : block(h.utterance, cond);
    double s = 0.0;
    if (lex == nullptr || lex->empty()) {
      FeatureKey k = lex_key(h.utterance, cond, -1);
      return contains_sorted(h.fired, k) ? 0.0 : w(k);
    }
    for (int g : *lex) {
      FeatureKey k = lex_key(h.utterance, cond, g);
      if (!contains_sorted(h.fired, k)) s += w(k);
    }
    return s;
  }

  void f1_fire(Hypothesis& h, std::uint64_t cond, const std::vector<int>* lex) const {
    if (!features.has(1)) return;
    if (cfg.mode != Mode::A) {
      insert_sorted(h.fired, cond);
      return;
    }
    if (lex == nullptr || lex->empty()) {
      insert_sorted(h.fired, lex_key(h.utterance, cond, -1));
      return;
    }
    for (int g : *lex) insert_sorted(h.fired, lex_key(h.utterance, cond, g));
  }

  // ---- stack inspection --------------------------------------------------

  /// Items of the Root under construction: [action, arg1, ...].
  static std::vector<const StackItem*> root_items(const Hypothesis& h) {
    std::vector<const StackItem*> items;
    for (const StackCell* c = h.stack.get(); c != nullptr; c = c->below.get()) items.push_back(&c->item);
    std::reverse(items.begin(), items.end());
    return items;
  }

  /// Normalized argument values of the completed Root, or nullopt when it
  /// cannot execute.
  std::optional<std::vector<Value>> root_values(const Hypothesis& h,
                                                const std::vector<const StackItem*>& items) const {
    const auto& sig = signature(h.action);
    if (static_cast<int>(items.size()) != sig.arity + 1) return std::nullopt;
    std::vector<Value> vals;
    for (int j = 0; j < sig.arity; ++j) {
      auto v = as_value(items[static_cast<std::size_t>(j + 1)]->den, h.state());
      if (!v) return std::nullopt;
      vals.push_back(normalize_argument(*v, sig.kinds[static_cast<std::size_t>(j)], domain));
    }
    if (vals.size() == 2 && vals[0] == vals[1]) return std::nullopt;
    if (check_action(h.state(), h.action, vals)) return std::nullopt;
    return vals;
  }

  double root_delta(const Hypothesis& h, const std::vector<const StackItem*>& items,
                    const std::vector<Value>& vals) const {
    double s = 0.0;
    auto conds = root_conditions(h.action, vals, h.context, features);
    if (cfg.mode != Mode::A) {
      for (const auto& c : conds) s += block(h.utterance, c.hash);
      if (features.has(8) && vals.size() == 2 &&
          utts[static_cast<std::size_t>(h.utterance)].x->size() >= 2)
        s += w(kOrderedArgsKey);
      return s;
    }
    std::vector<std::vector<int>> part_lex(items.size());
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (auto span = hull(*items[k]->node))
        part_lex[k] = utts[static_cast<std::size_t>(h.utterance)].x->ngrams_inside(*span);
    }
    std::vector<int> lex;
    for (const auto& c : conds) {
      lex.clear();
      if (c.refs & kRefAction) lex.insert(lex.end(), part_lex[0].begin(), part_lex[0].end());
      if ((c.refs & kRefArg1) && items.size() > 1) lex.insert(lex.end(), part_lex[1].begin(), part_lex[1].end());
      if ((c.refs & kRefArg2) && items.size() > 2) lex.insert(lex.end(), part_lex[2].begin(), part_lex[2].end());
      unique_sorted(lex);
      if (lex.empty()) {
        s += w(lex_key(h.utterance, c.hash, -1));
      } else {
        for (int g : lex) s += w(lex_key(h.utterance, c.hash, g));
      }
    }
    if (features.has(8) && items.size() == 3) {
      auto s1 = hull(*items[1]->node);
      auto s2 = hull(*items[2]->node);
      if (s1 && s2 && s1->end < s2->start) s += w(kOrderedArgsKey);
    }
    return s;
  }

  double flat_delta(int u, const FlatLogicalForm& f, const Context& c) const {
    double s = 0.0;
    if (features.has(1)) {
      auto names = flat_predicates(f, domain);
      std::sort(names.begin(), names.end());
      names.erase(std::unique(names.begin(), names.end()), names.end());
      for (const auto& n : names) s += block(u, predicate_condition(n).hash);
    }
    for (const auto& cond : root_conditions(f.action, f.args, c, features)) s += block(u, cond.hash);
    if (features.has(8) && f.args.size() == 2 && utts[static_cast<std::size_t>(u)].x->size() >= 2)
      s += w(kOrderedArgsKey);
    return s;
  }

  // ---- candidate generation ---------------------------------------------

  std::uint64_t op_hash(const Candidate& c) const {
    std::uint64_t h = static_cast<std::uint64_t>(c.op) * 0x9e37u + (c.is_max ? 1 : 0);
    if (c.leaf >= 0) h = hash_combine(h, leaves[static_cast<std::size_t>(c.leaf)].node->hash());
    h = hash_combine(h, static_cast<std::uint64_t>(c.span + 1));
    return hash_combine(h, c.flat);
  }

  void emit(const Hypothesis& h, Candidate c, std::vector<Candidate>& out) const {
    c.score = h.score + c.delta;
    c.tiebreak = hash_combine(h.tiebreak, op_hash(c));
    out.push_back(c);
  }

  /// First token an anchored push may use: the second of two same-typed
  /// arguments starts after the last anchor of the first.
  int anchor_floor(const Hypothesis& h, Role role) const {
    if (h.arity != 2 || role == Role::Action) return 0;
    const auto& sig = signature(h.action);
    if (sig.kinds[0] != sig.kinds[1]) return 0;
    const bool closes_open = h.args_done == 0 && h.stack && h.stack->item.role == Role::OpenSet &&
                             (role == Role::Arg || role == Role::SelProp);
    if (h.args_done < 1 && !closes_open) return 0;
    const StackCell* first = nullptr;
    for (const StackCell* cell = h.stack.get(); cell && cell->below; cell = cell->below.get()) first = cell;
    if (first == nullptr) return 0;
    auto span = hull(*first->item.node);
    return span ? span->end + 1 : 0;
  }

  /// Pushes leaf `li` with `role`; in mode A also once per free span.
  void emit_push(const Hypothesis& h, std::uint32_t hi, int li, Role role, Denotation den,
                 std::vector<Candidate>& out) const {
    const Leaf& leaf = leaves[static_cast<std::size_t>(li)];
    Candidate c;
    c.parent = hi;
    c.op = OpKind::Push;
    c.role = role;
    c.leaf = li;
    c.den = den;
    c.delta = f1_delta(h, leaf.f1_hash, nullptr);
    emit(h, c, out);
    if (cfg.mode != Mode::A) return;
    const auto& d = utts[static_cast<std::size_t>(h.utterance)];
    const int floor = anchor_floor(h, role);
    for (std::size_t s = 0; s < d.spans.size(); ++s) {
      if (d.span_mask[s] & h.used_tokens) continue;
      if (d.spans[s].start < floor) continue;
      if (!(d.span_classes[s] & leaf.cls)) continue;
      c.span = static_cast<std::int32_t>(s);
      c.delta = f1_delta(h, leaf.f1_hash, &d.span_ngrams[s]);
      emit(h, c, out);
    }
  }

  /// Values available from args[k][j] in the current context.
  template <class F>
  void for_context_args(const Hypothesis& h, F f) const {
    for (int k = 1; k <= h.context.size(); ++k) {
      const auto& args = h.context.record(k).args;
      for (std::size_t j = 0; j < args.size() && j < 2; ++j)
        f(ctx_arg_leaves[static_cast<std::size_t>(k - 1)][j], args[j]);
    }
  }

  /// Leaves for argument slot `slot` of the current action.
  void emit_slot(const Hypothesis& h, std::uint32_t hi, int slot, std::vector<Candidate>& out) const {
    const auto& sig = signature(h.action);
    const int rest = sig.arity - slot - 1;
    const int B = cfg.max_predicates;
    const ArgKind kind = sig.kinds[static_cast<std::size_t>(slot)];
    const WorldState& st = h.state();
    const bool room_value = h.built + 1 + rest <= B;
    const bool room_select = h.built + 2 + rest <= B;
    if (kind == ArgKind::Entity && room_select)
      for (int li : property_leaves) emit_push(h, hi, li, Role::SelProp, {}, out);
    if (!room_value) return;
    auto wanted = [&](const Value& v) {
      switch (kind) {
        case ArgKind::Entity: return v.kind == Value::Kind::Entity;
        case ArgKind::Number: return v.kind == Value::Kind::Number;
        case ArgKind::Color: return v.kind == Value::Kind::Color;
      }
      return false;
    };
    for_context_args(h, [&](int li, const Value& v) {
      if (wanted(v)) emit_push(h, hi, li, Role::Arg, Denotation::of(v), out);
    });
    switch (kind) {
      case ArgKind::Entity:
        for (int s = 0; s < static_cast<int>(shape_leaves.size()); ++s)
          emit_push(h, hi, shape_leaves[static_cast<std::size_t>(s)], Role::Arg, Denotation::of(Value::shape(s)), out);
        break;
      case ArgKind::Number:
        for (int n = 1; n <= max_number_literal(st); ++n)
          emit_push(h, hi, number_leaves[static_cast<std::size_t>(n - 1)], Role::Arg, Denotation::of(Value::number(n)), out);
        break;
      case ArgKind::Color:
        for (std::size_t k = 0; k < color_leaves.size(); ++k)
          emit_push(h, hi, color_leaves[k], Role::Arg,
                    Denotation::of(leaves[static_cast<std::size_t>(color_leaves[k])].node->literal()), out);
        break;
    }
  }

  /// Values for property `p` awaiting its argument; empty selections are skipped.
  void emit_selection_values(const Hypothesis& h, std::uint32_t hi, Property p,
                             std::vector<Candidate>& out) const {
    const WorldState& st = h.state();
    const int rest = h.arity - h.args_done - 1;
    if (h.built + 1 + rest > cfg.max_predicates) return;
    auto offer = [&](int li, const Value& v) {
      if (select_mask(st, p, v) != 0) emit_push(h, hi, li, Role::SelValue, Denotation::of(v), out);
    };
    if (is_numeric(p)) {
      int hi_n = p == Property::Amount ? kBeakerCapacity : max_number_literal(st);
      for (int n = 1; n <= hi_n; ++n) offer(number_leaves[static_cast<std::size_t>(n - 1)], Value::number(n));
      for_context_args(h, [&](int li, const Value& v) {
        if (v.kind == Value::Kind::Number) offer(li, v);
      });
    } else if (p == Property::Shape) {
      for (int s = 0; s < static_cast<int>(shape_leaves.size()); ++s)
        offer(shape_leaves[static_cast<std::size_t>(s)], Value::shape(s));
    } else {
      for (int li : color_leaves) offer(li, leaves[static_cast<std::size_t>(li)].node->literal());
      for_context_args(h, [&](int li, const Value& v) {
        if (v.kind == Value::Kind::Color) offer(li, v);
      });
    }
  }

  void expand(const Hypothesis& h, std::uint32_t hi, std::vector<Candidate>& out,
              std::vector<FlatLogicalForm>& flat_pool) const {
    if (h.utterance >= static_cast<int>(utts.size())) return;
    const StackItem* top = h.stack ? &h.stack->item : nullptr;
    if (top != nullptr && top->role == Role::Root) return;

    if (cfg.mode == Mode::C) {
      if (top != nullptr) return;
      for (auto& f : enumerate_flat_forms(h.state())) {
        Candidate c;
        c.parent = hi;
        c.op = OpKind::FlatRoot;
        c.flat = static_cast<std::uint32_t>(flat_pool.size());
        c.delta = flat_delta(h.utterance, f, h.context);
        flat_pool.push_back(std::move(f));
        emit(h, c, out);
      }
      return;
    }

    const int B = cfg.max_predicates;
    if (top == nullptr) {
      auto offer_action = [&](int li, ActionName a) {
        if (h.built + 1 + signature(a).arity <= B) emit_push(h, hi, li, Role::Action, Denotation::of(a), out);
      };
      for (std::size_t k = 0; k < action_leaves.size(); ++k)
        offer_action(action_leaves[k], domain_actions(domain)[k]);
      for (int k = 1; k <= h.context.size(); ++k)
        offer_action(ctx_action_leaves[static_cast<std::size_t>(k - 1)], h.context.record(k).action);
      return;
    }

    const WorldState& st = h.state();
    switch (top->role) {
      case Role::SelProp:
        emit_selection_values(h, hi, top->node->property(), out);
        return;
      case Role::SelValue: {
        Candidate c;
        c.parent = hi;
        c.op = OpKind::Select;
        c.role = Role::OpenSet;
        c.den = Denotation::of_set(select_mask(st, h.stack->below->item.node->property(), top->den.value));
        emit(h, c, out);
        return;
      }
      case Role::SupProp: {
        const std::uint32_t set = h.stack->below->item.den.set;
        const Property p = top->node->property();
        for (bool is_max : {false, true}) {
          const Entity* best = nullptr;
          int best_v = 0;
          for (const auto& e : st.entities()) {
            if (!(set & (1u << (e.pos - 1)))) continue;
            auto pv = lookup_property(e, domain, p);
            if (!pv || pv->kind != Value::Kind::Number) continue;
            if (best == nullptr || (is_max ? pv->data > best_v : pv->data < best_v)) {
              best = &e;
              best_v = pv->data;
            }
          }
          if (best == nullptr) continue;
          Candidate c;
          c.parent = hi;
          c.op = OpKind::Superlative;
          c.role = Role::Arg;
          c.is_max = is_max;
          c.den = Denotation::of(Value::entity(best->id));
          c.delta = reduce_f1_delta(h, is_max ? "argmax" : "argmin");
          emit(h, c, out);
        }
        return;
      }
      case Role::IdxNum: {
        const std::uint32_t set = h.stack->below->item.den.set;
        int k = top->den.value.data;
        int seen = 0;
        for (const auto& e : st.entities()) {
          if (!(set & (1u << (e.pos - 1)))) continue;
          if (++seen == k) {
            Candidate c;
            c.parent = hi;
            c.op = OpKind::Index;
            c.role = Role::Arg;
            c.den = Denotation::of(Value::entity(e.id));
            c.delta = reduce_f1_delta(h, "index");
            emit(h, c, out);
            break;
          }
        }
        return;
      }
      case Role::Action:
      case Role::Arg:
      case Role::OpenSet: {
        const bool open = top->role == Role::OpenSet;
        const bool usable = !open || std::popcount(top->den.set) == 1;
        const int filled = h.args_done + (open ? 1 : 0);
        if (usable && filled == h.arity) {
          auto items = root_items(h);
          if (auto vals = root_values(h, items)) {
            Candidate c;
            c.parent = hi;
            c.op = OpKind::Root;
            c.role = Role::Root;
            c.delta = root_delta(h, items, *vals);
            emit(h, c, out);
          }
        }
        if (usable && filled < h.arity) emit_slot(h, hi, filled, out);
        if (open) {
          const int rest = h.arity - h.args_done - 1;
          if (h.built + 1 + rest > B) return;
          for (int li : property_leaves) {
            Property p = leaves[static_cast<std::size_t>(li)].node->property();
            if (is_numeric(p)) emit_push(h, hi, li, Role::SupProp, {}, out);
          }
          const int n = std::popcount(top->den.set);
          for (int k = 1; k <= n; ++k)
            emit_push(h, hi, number_leaves[static_cast<std::size_t>(k - 1)], Role::IdxNum,
                      Denotation::of(Value::number(k)), out);
        }
        return;
      }
      case Role::Root: return;
    }
  }

  /// F1 lexical set of a reduction over the top two items (mode A).
  std::vector<int> reduce_lex(const Hypothesis& h) const {
    std::vector<int> lex;
    collect_lex(*h.stack->item.node, h.utterance, lex);
    collect_lex(*h.stack->below->item.node, h.utterance, lex);
    unique_sorted(lex);
    return lex;
  }

  double reduce_f1_delta(const Hypothesis& h, std::string_view name) const {
    if (!features.has(1)) return 0.0;
    std::uint64_t cond = predicate_condition(name).hash;
    if (cfg.mode != Mode::A) return f1_delta(h, cond, nullptr);
    auto lex = reduce_lex(h);
    return f1_delta(h, cond, &lex);
  }

  // ---- materialization ---------------------------------------------------

  Hypothesis materialize(const Hypothesis& parent, const Candidate& c,
                         const std::vector<FlatLogicalForm>& flat_pool) const {
    Hypothesis h = parent;
    h.score = c.score;
    h.utterance_score += c.delta;
    h.tiebreak = c.tiebreak;
    switch (c.op) {
      case OpKind::Push: {
        const Leaf& leaf = leaves[static_cast<std::size_t>(c.leaf)];
        NodePtr node = leaf.node;
        std::vector<int> lex;
        if (c.span >= 0) {
          const auto& d = utts[static_cast<std::size_t>(h.utterance)];
          node = node->with_anchor(d.spans[static_cast<std::size_t>(c.span)]);
          h.used_tokens |= d.span_mask[static_cast<std::size_t>(c.span)];
          lex = d.span_ngrams[static_cast<std::size_t>(c.span)];
        }
        f1_fire(h, leaf.f1_hash, &lex);
        h.built += 1;
        if (c.role == Role::Action) {
          h.action = c.den.action;
          h.arity = signature(c.den.action).arity;
          h.args_done = 0;
        } else if (h.stack && h.stack->item.role == Role::OpenSet &&
                   (c.role == Role::Arg || c.role == Role::SelProp)) {
          // The open selection below is taken as a finished argument.
          StackItem accepted = h.stack->item;
          accepted.role = Role::Arg;
          h.stack = push(h.stack->below, std::move(accepted));
          h.args_done += 1;
        }
        if (c.role == Role::Arg) h.args_done += 1;
        h.stack = push(h.stack, StackItem{std::move(node), c.role, c.den});
        break;
      }
      case OpKind::Select: {
        const StackItem& value = h.stack->item;
        const StackItem& prop = h.stack->below->item;
        NodePtr node = Node::select(prop.node, value.node);
        Stack below = h.stack->below->below;
        h.stack = push(std::move(below), StackItem{std::move(node), Role::OpenSet, c.den});
        break;
      }
      case OpKind::Superlative:
      case OpKind::Index: {
        const std::string_view name = c.op == OpKind::Index ? "index" : (c.is_max ? "argmax" : "argmin");
        if (features.has(1)) {
          std::uint64_t cond = predicate_condition(name).hash;
          if (cfg.mode == Mode::A) {
            auto lex = reduce_lex(h);
            f1_fire(h, cond, &lex);
          } else {
            f1_fire(h, cond, nullptr);
          }
        }
        const StackItem& leaf = h.stack->item;
        const StackItem& set = h.stack->below->item;
        NodePtr node = c.op == OpKind::Index ? Node::index(set.node, leaf.node)
                                             : Node::superlative(set.node, leaf.node, c.is_max);
        Stack below = h.stack->below->below;
        h.stack = push(std::move(below), StackItem{std::move(node), Role::Arg, c.den});
        h.args_done += 1;
        break;
      }
      case OpKind::Root: {
        auto items = root_items(h);
        std::vector<NodePtr> args;
        for (std::size_t k = 1; k < items.size(); ++k) args.push_back(items[k]->node);
        NodePtr node = Node::root(items[0]->node, std::move(args));
        h.stack = push(nullptr, StackItem{std::move(node), Role::Root, {}});
        break;
      }
      case OpKind::FlatRoot: {
        const auto& f = flat_pool[c.flat];
        h.action = f.action;
        h.arity = static_cast<int>(f.args.size());
        h.args_done = h.arity;
        h.built = 1 + h.arity;
        h.stack = push(nullptr, StackItem{to_root(f, domain), Role::Root, {}});
        break;
      }
    }
    return h;
  }

  Outcome<Hypothesis> shift(const Hypothesis& h) const {
    if (!h.stack || h.stack->item.role != Role::Root) return Fault::ArityMismatch;
    auto rec = execute_root(*h.stack->item.node, h.context);
    if (!rec) return rec.fault();
    Hypothesis out = h;
    out.parses.push_back({h.stack->item.node, FlatLogicalForm{rec->action, rec->args}, h.utterance_score});
    out.context = h.context.extended(std::move(rec).value());
    out.utterance += 1;
    out.built = 0;
    out.args_done = 0;
    out.arity = 0;
    out.stack = nullptr;
    out.used_tokens = 0;
    out.fired.clear();
    out.utterance_score = 0.0;
    return out;
  }
};

Parser::Parser(std::vector<Utterance> text, WorldState w0, const Params& params, BeamConfig cfg,
               FeatureConfig features)
    : text_(std::move(text)), cfg_(cfg) {
  cfg_.validate();
  if (static_cast<int>(w0.entities().size()) > kMaxPositions || w0.slots() > kMaxPositions)
    throw std::invalid_argument("world has more positions than the parser supports");
  impl_ = std::make_unique<Impl>(text_, std::move(w0), params, cfg_, features);
}

Parser::~Parser() = default;

Hypothesis Parser::initial() const {
  Hypothesis h;
  h.context = impl_->start;
  h.tiebreak = fnv1a("start");
  return h;
}

std::vector<Hypothesis> Parser::build(const Hypothesis& h) const {
  std::vector<Candidate> cands;
  std::vector<FlatLogicalForm> flat_pool;
  impl_->expand(h, 0, cands, flat_pool);
  std::vector<Hypothesis> out;
  out.reserve(cands.size());
  for (const auto& c : cands) out.push_back(impl_->materialize(h, c, flat_pool));
  return out;
}

Outcome<Hypothesis> Parser::shift(const Hypothesis& h) const { return impl_->shift(h); }

ParseResult Parser::parse(std::ostream* trace) const {
  ParseResult result;
  const int L = static_cast<int>(text_.size());
  std::vector<Hypothesis> beam{initial()};
  std::vector<Candidate> cands;
  std::vector<FlatLogicalForm> flat_pool;

  for (int u = 0; u < L; ++u) {
    std::size_t generated = 0;
    std::vector<Hypothesis> active = std::move(beam);
    std::vector<Hypothesis> completed;
    int step = 0;
    while (!active.empty()) {
      cands.clear();
      flat_pool.clear();
      for (std::size_t i = 0; i < active.size(); ++i)
        impl_->expand(active[i], static_cast<std::uint32_t>(i), cands, flat_pool);
      generated += cands.size();
      const std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(cfg_.intra));
      if (keep < cands.size())
        std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), ranks_before);
      cands.resize(keep);
      std::sort(cands.begin(), cands.end(), ranks_before);

      std::vector<Hypothesis> next;
      next.reserve(cands.size());
      ++step;
      for (const auto& c : cands) {
        Hypothesis h = impl_->materialize(active[c.parent], c, flat_pool);
        if (trace != nullptr)
          *trace << (u + 1) << '\t' << step << '\t' << to_string(cfg_.mode) << '\t' << h.render_stack()
                 << '\t' << h.score << '\n';
        if (h.stack && h.stack->item.role == Role::Root) {
          auto shifted = impl_->shift(h);
          if (shifted) completed.push_back(std::move(shifted).value());
        } else {
          next.push_back(std::move(h));
        }
      }
      active = std::move(next);
    }
    std::sort(completed.begin(), completed.end(), hypothesis_before);
    if (completed.size() > static_cast<std::size_t>(cfg_.inter))
      completed.resize(static_cast<std::size_t>(cfg_.inter));
    result.candidates.push_back(generated);
    if (trace != nullptr) *trace << "# utterance " << (u + 1) << " candidates " << generated << '\n';
    beam = std::move(completed);
    result.prefix_beams.push_back(beam);
    if (beam.empty()) {
      // Nothing survived: later prefixes have empty beams too.
      for (int v = u + 1; v < L; ++v) {
        result.candidates.push_back(0);
        result.prefix_beams.emplace_back();
      }
      break;
    }
  }
  result.beam = std::move(beam);
  return result;
}

ParseResult parse_text(const std::vector<Utterance>& text, const WorldState& w0, const Params& params,
                       const BeamConfig& cfg, const FeatureConfig& features, std::ostream* trace) {
  Parser p(text, w0, params, cfg, features);
  return p.parse(trace);
}

FeatureVector hypothesis_features(const Hypothesis& h, const std::vector<Utterance>& text, Mode mode,
                                  const FeatureConfig& features) {
  FeatureVector out;
  for (std::size_t i = 0; i < h.parses.size(); ++i) {
    auto fv = featurize(*h.parses[i].root, text[i], h.context.prefix(static_cast<int>(i)), mode, features);
    if (!fv) throw std::logic_error("parsed utterance no longer evaluates");
    out.entries.insert(out.entries.end(), fv->entries.begin(), fv->entries.end());
  }
  out.normalize();
  return out;
}

}  // namespace ctxsp
