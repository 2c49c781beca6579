#include "ctxsp/features.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ctxsp {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::A: return "A";
    case Mode::B: return "B";
    case Mode::C: return "C";
  }
  return "?";
}

Mode mode_from_string(std::string_view s) {
  if (s == "A" || s == "a") return Mode::A;
  if (s == "B" || s == "b") return Mode::B;
  if (s == "C" || s == "c") return Mode::C;
  throw std::invalid_argument("mode must be A, B or C");
}

FeatureConfig FeatureConfig::only(std::initializer_list<int> families) {
  FeatureConfig cfg{0};
  for (int f : families) cfg.mask |= static_cast<std::uint8_t>(1u << (f - 1));
  return cfg;
}

FeatureConfig FeatureConfig::parse(std::string_view spec) {
  auto family = [&](std::string_view tok) {
    if (tok.size() != 2 || (tok[0] != 'F' && tok[0] != 'f') || tok[1] < '1' || tok[1] > '8')
      throw std::invalid_argument("bad feature family '" + std::string(tok) + "'");
    return tok[1] - '0';
  };
  FeatureConfig cfg{0};
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    std::string_view tok = spec.substr(start, comma == std::string_view::npos ? spec.npos : comma - start);
    std::size_t range = tok.find("..");
    std::size_t dash = tok.find('-');
    if (range != std::string_view::npos || dash != std::string_view::npos) {
      std::size_t cut = range != std::string_view::npos ? range : dash;
      int lo = family(tok.substr(0, cut));
      int hi = family(tok.substr(cut + (range != std::string_view::npos ? 2 : 1)));
      for (int f = lo; f <= hi; ++f) cfg.mask |= static_cast<std::uint8_t>(1u << (f - 1));
    } else if (!tok.empty()) {
      cfg.mask |= static_cast<std::uint8_t>(1u << (family(tok) - 1));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (cfg.mask == 0) throw std::invalid_argument("empty feature set");
  return cfg;
}

std::string FeatureConfig::to_string() const {
  std::string out;
  for (int f = 1; f <= 8; ++f)
    if (has(f)) {
      if (!out.empty()) out += ',';
      out += "F" + std::to_string(f);
    }
  return out;
}

FeatureKey feature_key(std::string_view name) {
  std::size_t bar = name.rfind('|');
  if (bar == std::string_view::npos) throw std::invalid_argument("feature name without '|'");
  return feature_key(fnv1a(name.substr(0, bar)), fnv1a(name.substr(bar + 1)));
}

FeatureNames& FeatureNames::global() {
  static FeatureNames names;
  return names;
}

void FeatureNames::add(FeatureKey key, std::string_view name) {
  std::lock_guard lock(mu_);
  names_.try_emplace(key, name);
}

std::optional<std::string> FeatureNames::find(FeatureKey key) const {
  std::lock_guard lock(mu_);
  auto it = names_.find(key);
  if (it == names_.end()) return std::nullopt;
  return it->second;
}

double FeatureVector::get(FeatureKey k) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), k,
                             [](const auto& e, FeatureKey key) { return e.first < key; });
  return it != entries.end() && it->first == k ? it->second : 0.0;
}

void FeatureVector::normalize() {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (out > 0 && entries[out - 1].first == entries[i].first) {
      entries[out - 1].second += entries[i].second;
    } else {
      entries[out++] = entries[i];
    }
  }
  entries.resize(out);
}

FeatureVector add(const FeatureVector& a, const FeatureVector& b) {
  FeatureVector out;
  out.entries.reserve(a.size() + b.size());
  out.entries.insert(out.entries.end(), a.entries.begin(), a.entries.end());
  out.entries.insert(out.entries.end(), b.entries.begin(), b.entries.end());
  out.normalize();
  return out;
}

FeatureVector project_features(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) throw std::invalid_argument("project_features: empty input set");
  std::map<FeatureKey, double> best;
  for (const auto& v : vectors)
    for (const auto& [k, x] : v.entries) {
      auto [it, fresh] = best.try_emplace(k, x);
      if (!fresh) it->second = std::max(it->second, x);
    }
  // A key missing from some vector is an implicit zero in that vector.
  for (auto& [k, x] : best)
    for (const auto& v : vectors)
      if (v.get(k) == 0.0) {
        x = std::max(x, 0.0);
        break;
      }
  FeatureVector out;
  for (const auto& [k, x] : best)
    if (x != 0.0) out.entries.emplace_back(k, x);
  return out;
}

std::string dump_features(const FeatureVector& fv) {
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& [k, x] : fv.entries) {
    auto name = FeatureNames::global().find(k);
    rows.emplace_back(name ? *name : "#" + std::to_string(k), x);
  }
  std::sort(rows.begin(), rows.end());
  std::ostringstream out;
  out.precision(17);
  for (const auto& [name, x] : rows) out << name << '\t' << x << '\n';
  return out.str();
}

Condition make_condition(std::string text, std::uint8_t refs) {
  Condition c;
  c.hash = fnv1a(text);
  c.text = std::move(text);
  c.refs = refs;
  return c;
}

Condition predicate_condition(std::string_view name) {
  return make_condition("F1|" + std::string(name), 0);
}

namespace {

struct PropValue {
  std::string_view property;
  std::string value;
};

/// Observable properties of an argument value in state `w`; primitives
/// expose their literal under the pseudo-property `val`.
std::vector<PropValue> properties_of(const Value& v, const WorldState& w) {
  std::vector<PropValue> out;
  const Domain d = w.domain();
  if (v.kind != Value::Kind::Entity) {
    out.push_back({"val", render(v, d)});
    return out;
  }
  const Entity* e = w.find(v.data);
  if (e == nullptr) {
    // Absent Tangrams figures still have their shape.
    if (d == Domain::Tangrams) out.push_back({"shape", std::string(shape_name(v.data))});
    return out;
  }
  for (Property p : domain_properties(d)) {
    auto pv = lookup_property(*e, d, p);
    if (pv) out.push_back({to_string(p), render(*pv, d)});
  }
  return out;
}

std::string arg_prop(std::string_view prefix, int j, const PropValue& pv) {
  std::string s(prefix);
  s += std::to_string(j);
  s += '.';
  s += pv.property;
  s += '=';
  s += pv.value;
  return s;
}

std::uint8_t arg_ref(int j) { return j == 1 ? kRefArg1 : kRefArg2; }

}  // namespace

std::vector<Condition> root_conditions(ActionName a, std::span<const Value> args, const Context& c,
                                       const FeatureConfig& cfg) {
  std::vector<Condition> out;
  const WorldState& w = c.current();
  std::vector<std::vector<PropValue>> props;
  for (const auto& v : args) props.push_back(properties_of(v, w));
  const std::string action(to_string(a));

  for (std::size_t j = 0; j < args.size(); ++j) {
    const int jj = static_cast<int>(j) + 1;
    for (const auto& pv : props[j]) {
      std::string cond = arg_prop("arg", jj, pv);
      if (cfg.has(2)) out.push_back(make_condition("F2|" + cond, arg_ref(jj)));
      if (cfg.has(3))
        out.push_back(make_condition("F3|" + action + "|" + cond,
                                     static_cast<std::uint8_t>(kRefAction | arg_ref(jj))));
    }
  }
  if (cfg.has(4) && args.size() == 2)
    for (const auto& p1 : props[0])
      for (const auto& p2 : props[1])
        out.push_back(make_condition("F4|" + arg_prop("arg", 1, p1) + "|" + arg_prop("arg", 2, p2),
                                     kRefArg1 | kRefArg2));

  const ExecRecord* prev = c.previous();
  if (prev == nullptr) return out;
  if (cfg.has(5))
    for (std::size_t j = 0; j < args.size(); ++j)
      if (std::find(prev->args.begin(), prev->args.end(), args[j]) != prev->args.end())
        out.push_back(make_condition("F5|arg" + std::to_string(j + 1) + ".reused",
                                     arg_ref(static_cast<int>(j) + 1)));
  if (cfg.has(6) && prev->action == a) out.push_back(make_condition("F6|action.reused", kRefAction));
  if (cfg.has(7)) {
    std::vector<std::vector<PropValue>> prev_props;
    for (const auto& v : prev->args) prev_props.push_back(properties_of(v, w));
    for (std::size_t j = 0; j < args.size(); ++j)
      for (const auto& pv : props[j])
        for (std::size_t k = 0; k < prev_props.size(); ++k)
          for (const auto& qv : prev_props[k])
            out.push_back(make_condition("F7|" + arg_prop("arg", static_cast<int>(j) + 1, pv) +
                                             "|" + arg_prop("prev", static_cast<int>(k) + 1, qv),
                                         arg_ref(static_cast<int>(j) + 1)));
  }
  return out;
}

std::vector<std::string> flat_predicates(const FlatLogicalForm& f, Domain d) {
  std::vector<std::string> out{std::string(to_string(f.action))};
  for (const auto& v : f.args)
    if (v.kind != Value::Kind::Entity) out.push_back(render(v, d));
  return out;
}

namespace {

const std::uint64_t kNoSpanHash = fnv1a(kNoSpanMarker);
const std::uint64_t kEmptyNgramHash = fnv1a("");

/// Collects named indicator features.
class VectorBuilder {
 public:
  explicit VectorBuilder(const Utterance& x) : x_(x) {}

  void fire(const Condition& c, int ngram) {
    std::uint64_t h = ngram < 0 ? kNoSpanHash : x_.ngrams()[static_cast<std::size_t>(ngram)].hash;
    FeatureKey key = feature_key(c.hash, h);
    if (!FeatureNames::global().find(key)) {
      std::string_view text =
          ngram < 0 ? kNoSpanMarker : std::string_view(x_.ngrams()[static_cast<std::size_t>(ngram)].text);
      FeatureNames::global().add(key, c.text + "|" + std::string(text));
    }
    fv_.entries.emplace_back(key, 1.0);
  }

  /// Conjunction with every n-gram of the utterance plus the no-span marker.
  void fire_all(const Condition& c) {
    fire(c, -1);
    for (int g = 0; g < static_cast<int>(x_.ngrams().size()); ++g) fire(c, g);
  }

  void fire_set(const Condition& c, const std::set<int>& lex) {
    if (lex.empty()) {
      fire(c, -1);
      return;
    }
    for (int g : lex) fire(c, g);
  }

  void fire_ordered_args() {
    FeatureKey key = feature_key(fnv1a(kOrderedArgsCondition), kEmptyNgramHash);
    FeatureNames::global().add(key, std::string(kOrderedArgsCondition) + "|");
    fv_.entries.emplace_back(key, 1.0);
  }

  FeatureVector finish() {
    std::sort(fv_.entries.begin(), fv_.entries.end());
    fv_.entries.erase(std::unique(fv_.entries.begin(), fv_.entries.end()), fv_.entries.end());
    return std::move(fv_);
  }

 private:
  const Utterance& x_;
  FeatureVector fv_;
};

void collect_anchor_ngrams(const Node& n, const Utterance& x, std::set<int>& out) {
  if (n.anchor()) {
    for (int g : x.ngrams_inside(*n.anchor())) out.insert(g);
  }
  for (const auto& c : n.children()) collect_anchor_ngrams(*c, x, out);
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

void collect_predicates(const Node& n, std::vector<const Node*>& out) {
  if (!n.predicate().empty()) out.push_back(&n);
  for (const auto& c : n.children()) collect_predicates(*c, out);
}

bool ordered_args_reachable(const Node& root, const Utterance& x) {
  return root.children().size() == 3 && x.size() >= 2;
}

}  // namespace

Outcome<FeatureVector> featurize_anchored(const Node& root, const Utterance& x, const Context& c,
                                          const FeatureConfig& cfg) {
  auto flat = project_bc(root, c);
  if (!flat) return flat.fault();
  VectorBuilder b(x);
  const auto& parts = root.children();

  if (cfg.has(1)) {
    std::vector<const Node*> preds;
    collect_predicates(root, preds);
    std::map<std::string_view, std::pair<std::set<int>, bool>> by_name;
    for (const Node* p : preds) {
      std::set<int> lex;
      collect_anchor_ngrams(*p, x, lex);
      auto& slot = by_name[p->predicate()];
      if (lex.empty()) slot.second = true;
      slot.first.insert(lex.begin(), lex.end());
    }
    for (const auto& [name, lex] : by_name) {
      Condition cond = predicate_condition(name);
      if (lex.second) b.fire(cond, -1);
      for (int g : lex.first) b.fire(cond, g);
    }
  }

  std::vector<std::set<int>> part_lex(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k)
    if (auto span = hull(*parts[k]))
      for (int g : x.ngrams_inside(*span)) part_lex[k].insert(g);
  for (const auto& cond : root_conditions(flat->action, flat->args, c, cfg)) {
    std::set<int> lex;
    if (cond.refs & kRefAction) lex.insert(part_lex[0].begin(), part_lex[0].end());
    if ((cond.refs & kRefArg1) && parts.size() > 1) lex.insert(part_lex[1].begin(), part_lex[1].end());
    if ((cond.refs & kRefArg2) && parts.size() > 2) lex.insert(part_lex[2].begin(), part_lex[2].end());
    b.fire_set(cond, lex);
  }

  if (cfg.has(8) && parts.size() == 3) {
    auto s1 = hull(*parts[1]);
    auto s2 = hull(*parts[2]);
    if (s1 && s2 && s1->end < s2->start) b.fire_ordered_args();
  }
  return b.finish();
}

Outcome<FeatureVector> featurize_floating(const Node& root, const Utterance& x, const Context& c,
                                          const FeatureConfig& cfg) {
  auto flat = project_bc(root, c);
  if (!flat) return flat.fault();
  VectorBuilder b(x);
  if (cfg.has(1)) {
    std::vector<const Node*> preds;
    collect_predicates(root, preds);
    std::set<std::string_view> names;
    for (const Node* p : preds) names.insert(p->predicate());
    for (auto name : names) b.fire_all(predicate_condition(name));
  }
  for (const auto& cond : root_conditions(flat->action, flat->args, c, cfg)) b.fire_all(cond);
  if (cfg.has(8) && ordered_args_reachable(root, x)) b.fire_ordered_args();
  return b.finish();
}

FeatureVector featurize_flat(const FlatLogicalForm& f, const Utterance& x, const Context& c,
                             const FeatureConfig& cfg) {
  VectorBuilder b(x);
  if (cfg.has(1)) {
    std::set<std::string> names;
    for (auto& p : flat_predicates(f, c.domain())) names.insert(std::move(p));
    for (const auto& name : names) b.fire_all(predicate_condition(name));
  }
  for (const auto& cond : root_conditions(f.action, f.args, c, cfg)) b.fire_all(cond);
  if (cfg.has(8) && f.args.size() == 2 && x.size() >= 2) b.fire_ordered_args();
  return b.finish();
}

Outcome<FeatureVector> featurize(const Node& root, const Utterance& x, const Context& c, Mode mode,
                                 const FeatureConfig& cfg) {
  switch (mode) {
    case Mode::A: return featurize_anchored(root, x, c, cfg);
    case Mode::B: return featurize_floating(root, x, c, cfg);
    case Mode::C: {
      auto flat = project_bc(root, c);
      if (!flat) return flat.fault();
      return featurize_flat(*flat, x, c, cfg);
    }
  }
  return Fault::KindMismatch;
}

}  // namespace ctxsp
