#include "ctxsp/datagen.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ctxsp {

namespace {

constexpr std::string_view kAlchemyTemplates =
    "pour\tpour {ref1} into {ref2}\tVB {ref1} IN {ref2}\n"
    "drain\tdrain {num} from {ref1}\tVB CD IN {ref1}\n"
    "mix\tmix {ref1}\tVB {ref1}\n"
    "ref:pos\tbeaker {pos}\tNN CD\n"
    "ref:unique:color\tthe {value} beaker\tDT JJ NN\n"
    "ref:first:color\tthe first {value} beaker\tDT JJ JJ NN\n"
    "ref:last:color\tthe last {value} beaker\tDT JJ JJ NN\n"
    "ref:index:color\tthe {n} {value} beaker\tDT CD JJ NN\n";

constexpr std::string_view kSceneTemplates =
    "enter\ta man in {color} enters at position {num}\tDT NN IN JJ VBZ IN NN CD\n"
    "leave\t{ref1} leaves\t{ref1} VBZ\n"
    "move\tmove {ref1} to position {num}\tVB {ref1} TO NN CD\n"
    "trade-hats\t{ref1} and {ref2} trade hats\t{ref1} CC {ref2} VBP NNS\n"
    "ref:pos\tthe person at position {pos}\tDT NN IN NN CD\n"
    "ref:unique:shirt-color\tthe man in {value}\tDT NN IN JJ\n"
    "ref:unique:hat-color\tthe person with the {value} hat\tDT NN IN DT JJ NN\n"
    "ref:first:shirt-color\tthe first man in {value}\tDT JJ NN IN JJ\n"
    "ref:last:shirt-color\tthe last man in {value}\tDT JJ NN IN JJ\n";

constexpr std::string_view kTangramsTemplates =
    "add\tadd the {shape} at position {num}\tVB DT NN IN NN CD\n"
    "remove\tremove {ref1}\tVB {ref1}\n"
    "swap\tswap {ref1} and {ref2}\tVB {ref1} CC {ref2}\n"
    "ref:pos\tfigure {pos}\tNN CD\n"
    "ref:unique:shape\tthe {value}\tDT NN\n";

std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool is_slot(std::string_view tok) { return tok.size() > 2 && tok.front() == '{' && tok.back() == '}'; }

const std::set<std::string_view> kActionSlots = {"{ref1}", "{ref2}", "{num}", "{color}", "{shape}"};
const std::set<std::string_view> kReferenceSlots = {"{pos}", "{value}", "{n}"};

struct RefKind {
  enum class Form { Pos, Unique, First, Last, Index } form = Form::Pos;
  Property property = Property::Pos;
};

RefKind parse_ref_kind(std::string_view kind) {
  RefKind out;
  std::string_view rest = kind.substr(4);
  if (rest == "pos") return out;
  std::size_t colon = rest.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("bad reference kind " + std::string(kind));
  std::string_view form = rest.substr(0, colon);
  auto p = property_from_string(rest.substr(colon + 1));
  if (!p) throw std::invalid_argument("unknown property in " + std::string(kind));
  out.property = *p;
  if (form == "unique") out.form = RefKind::Form::Unique;
  else if (form == "first") out.form = RefKind::Form::First;
  else if (form == "last") out.form = RefKind::Form::Last;
  else if (form == "index") out.form = RefKind::Form::Index;
  else throw std::invalid_argument("unknown reference form in " + std::string(kind));
  return out;
}

}  // namespace

TemplateSet TemplateSet::builtin(Domain d) {
  std::string text;
  switch (d) {
    case Domain::Alchemy: text = kAlchemyTemplates; break;
    case Domain::Scene: text = kSceneTemplates; break;
    case Domain::Tangrams: text = kTangramsTemplates; break;
  }
  std::istringstream in(text);
  return parse(in);
}

TemplateSet TemplateSet::parse(std::istream& in) {
  TemplateSet ts;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError("template needs kind, surface and tags", n);
    Template t;
    t.kind = line.substr(0, t1);
    t.tokens = split_spaces(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    t.tags = split_spaces(std::string_view(line).substr(t2 + 1));
    if (t.tokens.empty()) throw ParseError("empty template", n);
    if (t.tokens.size() != t.tags.size()) throw ParseError("one POS tag per template token expected", n);
    const bool ref = t.kind.starts_with("ref:");
    if (ref) {
      try {
        parse_ref_kind(t.kind);
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), n);
      }
    } else if (!action_from_string(t.kind)) {
      throw ParseError("unknown template kind '" + t.kind + "'", n);
    }
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      if (!is_slot(t.tokens[i])) continue;
      const auto& known = ref ? kReferenceSlots : kActionSlots;
      if (!known.contains(t.tokens[i])) throw ParseError("unknown slot " + t.tokens[i], n);
    }
    ts.templates_.push_back(std::move(t));
  }
  return ts;
}

void TemplateSet::write(std::ostream& out) const {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) {
      if (!s.empty()) s += ' ';
      s += x;
    }
    return s;
  };
  for (const auto& t : templates_) out << t.kind << '\t' << join(t.tokens) << '\t' << join(t.tags) << '\n';
}

std::vector<const Template*> TemplateSet::of_kind(std::string_view kind) const {
  std::vector<const Template*> out;
  for (const auto& t : templates_)
    if (t.kind == kind) out.push_back(&t);
  return out;
}

std::vector<const Template*> TemplateSet::references() const {
  std::vector<const Template*> out;
  for (const auto& t : templates_)
    if (t.kind.starts_with("ref:")) out.push_back(&t);
  return out;
}

void TemplateSet::check(Domain d) const {
  bool has_pos_ref = false;
  for (const auto* t : references()) {
    RefKind k = parse_ref_kind(t->kind);
    if (k.form != RefKind::Form::Pos && !has_property(d, k.property))
      throw std::invalid_argument("template " + t->kind + " uses a property outside " + std::string(to_string(d)));
    has_pos_ref = has_pos_ref || k.form == RefKind::Form::Pos;
  }
  for (ActionName a : domain_actions(d)) {
    auto ts = of_kind(to_string(a));
    if (ts.empty()) throw std::invalid_argument("no template for action " + std::string(to_string(a)));
    const auto& sig = signature(a);
    for (const auto* t : ts)
      for (int j = 0; j < sig.arity; ++j) {
        if (sig.kinds[static_cast<std::size_t>(j)] != ArgKind::Entity) continue;
        if (a == ActionName::Add) continue;
        std::string slot = "{ref" + std::to_string(j + 1) + "}";
        if (std::find(t->tokens.begin(), t->tokens.end(), slot) == t->tokens.end())
          throw std::invalid_argument("template for " + t->kind + " lacks " + slot);
      }
  }
  // Every entity must be describable; position references always apply.
  if (!has_pos_ref) throw std::invalid_argument("template set needs a ref:pos template");
}

int GenConfig::world_size() const {
  if (slots > 0) return slots;
  switch (domain) {
    case Domain::Alchemy: return 7;
    case Domain::Scene: return 10;
    case Domain::Tangrams: return 5;
  }
  return 0;
}

void GenConfig::validate() const {
  if (L < 1) throw std::invalid_argument("L must be >= 1");
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("example counts must be >= 1");
  if (!(recency_boost >= 1.0)) throw std::invalid_argument("recency boost must be >= 1");
  if (slots < 0 || world_size() > kMaxPositions) throw std::invalid_argument("bad world size");
  if (domain == Domain::Tangrams && world_size() > kNumShapes)
    throw std::invalid_argument("Tangrams worlds hold at most 10 figures");
  templates.check(domain);
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t sample_index(const std::vector<double>& weights, Rng& rng) {
  if (weights.empty()) throw std::invalid_argument("sample_index: no weights");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double r = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (r < weights[i]) return i;
    r -= weights[i];
  }
  return weights.size() - 1;
}

namespace {

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

WorldState random_world(const GenConfig& cfg, Rng& rng) {
  const int n = cfg.world_size();
  std::vector<Entity> ents;
  switch (cfg.domain) {
    case Domain::Alchemy:
      for (int p = 1; p <= n; ++p) {
        Entity e;
        e.id = p;
        e.pos = p;
        e.amount = static_cast<std::uint8_t>(uniform_int(rng, 0, kBeakerCapacity));
        Color c = static_cast<Color>(uniform_int(rng, 0, kNumBaseColors - 1));
        for (int k = 0; k < e.amount; ++k) e.units[static_cast<std::size_t>(k)] = c;
        ents.push_back(e);
      }
      return WorldState(Domain::Alchemy, n, std::move(ents));
    case Domain::Scene: {
      int id = 1;
      for (int p = 1; p <= n; ++p) {
        if (rng() & 1) continue;
        Entity e;
        e.id = id++;
        e.pos = p;
        e.shirt = static_cast<Color>(uniform_int(rng, 0, kNumBaseColors - 1));
        if (rng() & 1) e.hat = static_cast<Color>(uniform_int(rng, 0, kNumBaseColors - 1));
        ents.push_back(e);
      }
      return WorldState(Domain::Scene, n, std::move(ents), id);
    }
    case Domain::Tangrams: {
      std::vector<int> shapes(kNumShapes);
      std::iota(shapes.begin(), shapes.end(), 0);
      for (int i = kNumShapes - 1; i > 0; --i) std::swap(shapes[static_cast<std::size_t>(i)], shapes[static_cast<std::size_t>(uniform_int(rng, 0, i))]);
      for (int p = 1; p <= n; ++p) {
        Entity e;
        e.id = shapes[static_cast<std::size_t>(p - 1)];
        e.pos = p;
        e.shape = e.id;
        ents.push_back(e);
      }
      return WorldState(Domain::Tangrams, n, std::move(ents));
    }
  }
  return {};
}

std::vector<std::pair<FlatLogicalForm, double>> action_weights(const WorldState& w, const ExecRecord* prev,
                                                               double recency_boost) {
  std::vector<std::pair<FlatLogicalForm, double>> out;
  for (auto& f : enumerate_flat_forms(w)) {
    bool recent = false;
    if (prev != nullptr) {
      recent = f.action == prev->action;
      for (const auto& v : f.args)
        if (v.is_entity() && std::find(prev->args.begin(), prev->args.end(), v) != prev->args.end()) recent = true;
    }
    out.emplace_back(std::move(f), recent ? recency_boost : 1.0);
  }
  return out;
}

namespace {

struct Phrase {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

/// Logical form a reference template stands for.
NodePtr reference_form(const RefKind& k, const Value& value, int n, Domain d) {
  if (k.form == RefKind::Form::Pos) return Node::select(Node::property(Property::Pos), Node::literal(value, d));
  NodePtr set = Node::select(Node::property(k.property), Node::literal(value, d));
  switch (k.form) {
    case RefKind::Form::Unique: return set;
    case RefKind::Form::First: return Node::superlative(set, Node::property(Property::Pos), false);
    case RefKind::Form::Last: return Node::superlative(set, Node::property(Property::Pos), true);
    case RefKind::Form::Index: return Node::index(set, Node::literal(Value::number(n), d));
    case RefKind::Form::Pos: break;
  }
  return set;
}

Phrase fill(const Template& t, const std::vector<std::pair<std::string, Phrase>>& slots) {
  Phrase out;
  for (std::size_t i = 0; i < t.tokens.size(); ++i) {
    const std::string& tok = t.tokens[i];
    if (!is_slot(tok)) {
      out.tokens.push_back(tok);
      out.tags.push_back(t.tags[i]);
      continue;
    }
    auto it = std::find_if(slots.begin(), slots.end(), [&](const auto& s) { return s.first == tok; });
    if (it == slots.end()) throw std::logic_error("unfilled slot " + tok + " in template " + t.kind);
    const Phrase& p = it->second;
    out.tokens.insert(out.tokens.end(), p.tokens.begin(), p.tokens.end());
    if (p.tags.size() == 1 && !is_slot(t.tags[i])) {
      out.tags.push_back(t.tags[i]);  // single-token literal slot, tagged by the template
    } else {
      out.tags.insert(out.tags.end(), p.tags.begin(), p.tags.end());
    }
  }
  return out;
}

Phrase word(std::string s, std::string tag = "NN") { return {{std::move(s)}, {std::move(tag)}}; }

/// A referring expression for entity `id`, from the applicable templates.
Phrase refer(int id, const WorldState& w, const TemplateSet& ts, Rng& rng) {
  const Entity* e = w.find(id);
  if (e == nullptr) throw std::logic_error("reference to an absent entity");
  const Domain d = w.domain();
  struct Option {
    const Template* t;
    RefKind kind;
    Value value;
    int n;
  };
  std::vector<Option> options;
  for (const auto* t : ts.references()) {
    RefKind k = parse_ref_kind(t->kind);
    if (k.form == RefKind::Form::Pos) {
      options.push_back({t, k, Value::number(e->pos), 0});
      continue;
    }
    auto v = lookup_property(*e, d, k.property);
    if (!v || v->kind == Value::Kind::None) continue;
    std::vector<const Entity*> set;
    for (const auto& other : w.entities()) {
      auto ov = lookup_property(other, d, k.property);
      if (ov && *ov == *v) set.push_back(&other);
    }
    const int rank = static_cast<int>(std::find(set.begin(), set.end(), e) - set.begin()) + 1;
    const int size = static_cast<int>(set.size());
    switch (k.form) {
      case RefKind::Form::Unique:
        if (size == 1) options.push_back({t, k, *v, 0});
        break;
      case RefKind::Form::First:
        if (size >= 2 && rank == 1) options.push_back({t, k, *v, 0});
        break;
      case RefKind::Form::Last:
        if (size >= 2 && rank == size) options.push_back({t, k, *v, 0});
        break;
      case RefKind::Form::Index:
        if (size >= 2) options.push_back({t, k, *v, rank});
        break;
      case RefKind::Form::Pos: break;
    }
  }
  if (options.empty()) throw std::logic_error("no reference template applies");
  const Option& o = options[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(options.size()) - 1))];

  // The phrase must denote the entity it was chosen for.
  auto den = evaluate(*reference_form(o.kind, o.value, o.n, d), Context(w));
  auto val = den ? as_value(*den, w) : Outcome<Value>(den.fault());
  if (!val || *val != Value::entity(id)) throw std::logic_error("reference template " + o.t->kind + " misfires");

  std::vector<std::pair<std::string, Phrase>> slots;
  if (o.kind.form == RefKind::Form::Pos) {
    slots.emplace_back("{pos}", word(std::to_string(e->pos), "CD"));
  } else {
    slots.emplace_back("{value}", word(render(o.value, d), "JJ"));
    slots.emplace_back("{n}", word(std::to_string(o.n), "CD"));
  }
  return fill(*o.t, slots);
}

}  // namespace

Rendered render_action(const FlatLogicalForm& f, const WorldState& w, const TemplateSet& ts, Rng& rng) {
  auto options = ts.of_kind(to_string(f.action));
  if (options.empty()) throw std::invalid_argument("no template for " + std::string(to_string(f.action)));
  const Template& t = *options[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(options.size()) - 1))];
  const Domain d = w.domain();
  const auto& sig = signature(f.action);
  std::vector<std::pair<std::string, Phrase>> slots;
  int ref = 0;
  for (int j = 0; j < sig.arity; ++j) {
    const Value& v = f.args[static_cast<std::size_t>(j)];
    switch (sig.kinds[static_cast<std::size_t>(j)]) {
      case ArgKind::Entity:
        if (f.action == ActionName::Add) {
          slots.emplace_back("{shape}", word(std::string(shape_name(v.data)), "NN"));
        } else {
          slots.emplace_back("{ref" + std::to_string(++ref) + "}", refer(v.data, w, ts, rng));
        }
        break;
      case ArgKind::Number: slots.emplace_back("{num}", word(std::to_string(v.data), "CD")); break;
      case ArgKind::Color: slots.emplace_back("{color}", word(render(v, d), "JJ")); break;
    }
  }
  Phrase p = fill(t, slots);
  Rendered out;
  for (std::size_t i = 0; i < p.tokens.size(); ++i) {
    if (i) {
      out.text += ' ';
      out.tags += ' ';
    }
    out.text += p.tokens[i];
    out.tags += p.tags[i];
  }
  return out;
}

Example gen_example(const GenConfig& cfg, Rng& rng, std::string id) {
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Example e;
    e.id = id;
    e.domain = cfg.domain;
    e.w0 = random_world(cfg, rng);
    Context c(e.w0);
    bool ok = true;
    for (int i = 0; i < cfg.L; ++i) {
      auto weights = action_weights(c.current(), c.previous(), cfg.recency_boost);
      if (weights.empty()) {
        ok = false;
        break;
      }
      std::vector<double> ws;
      for (const auto& [f, wgt] : weights) ws.push_back(wgt);
      const FlatLogicalForm& f = weights[sample_index(ws, rng)].first;
      Rendered r = render_action(f, c.current(), cfg.templates, rng);
      auto next = exec_action(c.current(), f.action, f.args);
      if (!next) throw std::logic_error("sampled action does not execute");
      e.utterances.push_back(r.text);
      e.pos_tags.push_back(r.tags);
      e.gold_lfs.push_back(f.render(cfg.domain));
      e.worlds.push_back(*next);
      c = c.extended(ExecRecord{f.action, f.args, std::move(next).value()});
    }
    if (!ok) continue;
    e.w_final = c.current();
    return e;
  }
  throw std::runtime_error("no valid action sequence after " + std::to_string(kMaxAttempts) + " worlds");
}

GeneratedData gen_dataset(const GenConfig& cfg) {
  cfg.validate();
  GeneratedData out;
  std::set<std::string> seen;
  const int total = cfg.n_train + cfg.n_test;
  const std::string prefix(to_string(cfg.domain));
  for (int i = 0; i < total; ++i) {
    const bool train = i < cfg.n_train;
    const int k = train ? i : i - cfg.n_train;
    char id[64];
    std::snprintf(id, sizeof id, "%s-%s-%04d", prefix.c_str(), train ? "train" : "test", k);
    Rng rng(hash_combine(cfg.seed, static_cast<std::uint64_t>(i)));
    constexpr int kMaxDraws = 1000;
    int draws = 0;
    for (;;) {
      Example e = gen_example(cfg, rng, id);
      std::string key = serialize_state(e.w0);
      for (const auto& u : e.utterances) key += "|" + u;
      if (seen.insert(key).second) {
        (train ? out.train : out.test).push_back(std::move(e));
        break;
      }
      // Keep the splits disjoint; a tiny configuration may run out of examples.
      if (++draws == kMaxDraws) throw std::runtime_error("cannot draw enough distinct examples");
    }
  }
  return out;
}

}  // namespace ctxsp
