#include "ctxsp/worlds.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace ctxsp {

std::string_view to_string(Fault f) {
  switch (f) {
    case Fault::PreconditionViolation: return "PreconditionViolation";
    case Fault::ArityMismatch: return "ArityMismatch";
    case Fault::KindMismatch: return "KindMismatch";
    case Fault::EmptyDenotation: return "EmptyDenotation";
    case Fault::NonSingleton: return "NonSingleton";
    case Fault::DanglingReference: return "DanglingReference";
    case Fault::UnknownProperty: return "UnknownProperty";
  }
  return "?";
}

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::Alchemy: return "alchemy";
    case Domain::Scene: return "scene";
    case Domain::Tangrams: return "tangrams";
  }
  return "?";
}

Domain domain_from_string(std::string_view name) {
  if (name == "alchemy") return Domain::Alchemy;
  if (name == "scene") return Domain::Scene;
  if (name == "tangrams") return Domain::Tangrams;
  throw std::invalid_argument("unknown domain '" + std::string(name) + "'");
}

namespace {

constexpr std::array<char, kNumColors> kColorLetters = {'g', 'r', 'o', 'y', 'b', 'p', 'n'};
constexpr std::array<std::string_view, kNumColors> kColorNames = {
    "green", "red", "orange", "yellow", "blue", "purple", "brown"};
constexpr std::array<std::string_view, kNumShapes> kShapeNames = {
    "cat", "dog", "bird", "fish", "house", "boat", "tree", "star", "moon", "heart"};

constexpr std::array<Property, 3> kAlchemyProps = {Property::Pos, Property::Color, Property::Amount};
constexpr std::array<Property, 3> kSceneProps = {Property::Pos, Property::ShirtColor,
                                                 Property::HatColor};
constexpr std::array<Property, 2> kTangramProps = {Property::Pos, Property::Shape};

constexpr std::array<ActionSignature, 10> kSignatures = {{
    {ActionName::Pour, Domain::Alchemy, 2, {ArgKind::Entity, ArgKind::Entity}},
    {ActionName::Drain, Domain::Alchemy, 2, {ArgKind::Entity, ArgKind::Number}},
    {ActionName::Mix, Domain::Alchemy, 1, {ArgKind::Entity, ArgKind::Entity}},
    {ActionName::Enter, Domain::Scene, 2, {ArgKind::Color, ArgKind::Number}},
    {ActionName::Leave, Domain::Scene, 1, {ArgKind::Entity, ArgKind::Entity}},
    {ActionName::Move, Domain::Scene, 2, {ArgKind::Entity, ArgKind::Number}},
    {ActionName::TradeHats, Domain::Scene, 2, {ArgKind::Entity, ArgKind::Entity}},
    {ActionName::Add, Domain::Tangrams, 2, {ArgKind::Entity, ArgKind::Number}},
    {ActionName::Remove, Domain::Tangrams, 1, {ArgKind::Entity, ArgKind::Entity}},
    {ActionName::Swap, Domain::Tangrams, 2, {ArgKind::Entity, ArgKind::Entity}},
}};

constexpr std::array<ActionName, 3> kAlchemyActions = {ActionName::Drain, ActionName::Mix,
                                                       ActionName::Pour};
constexpr std::array<ActionName, 4> kSceneActions = {ActionName::Enter, ActionName::Leave,
                                                     ActionName::Move, ActionName::TradeHats};
constexpr std::array<ActionName, 3> kTangramActions = {ActionName::Add, ActionName::Remove,
                                                       ActionName::Swap};

constexpr std::array<std::string_view, 10> kActionNames = {
    "pour", "drain", "mix", "enter", "leave", "move", "trade-hats", "add", "remove", "swap"};

}  // namespace

char color_letter(Color c) { return kColorLetters[static_cast<int>(c)]; }

std::optional<Color> color_from_letter(char c) {
  for (int i = 0; i < kNumColors; ++i)
    if (kColorLetters[i] == c) return static_cast<Color>(i);
  return std::nullopt;
}

std::string_view color_name(Color c) { return kColorNames[static_cast<int>(c)]; }

std::optional<Color> color_from_name(std::string_view name) {
  for (int i = 0; i < kNumColors; ++i)
    if (kColorNames[i] == name) return static_cast<Color>(i);
  return std::nullopt;
}

std::string_view shape_name(int shape) {
  if (shape < 0 || shape >= kNumShapes) return "?";
  return kShapeNames[shape];
}

std::optional<int> shape_from_name(std::string_view name) {
  for (int i = 0; i < kNumShapes; ++i)
    if (kShapeNames[i] == name) return i;
  return std::nullopt;
}

std::string_view to_string(Property p) {
  switch (p) {
    case Property::Pos: return "pos";
    case Property::Color: return "color";
    case Property::Amount: return "amount";
    case Property::ShirtColor: return "shirt-color";
    case Property::HatColor: return "hat-color";
    case Property::Shape: return "shape";
  }
  return "?";
}

std::optional<Property> property_from_string(std::string_view name) {
  for (auto p : {Property::Pos, Property::Color, Property::Amount, Property::ShirtColor,
                 Property::HatColor, Property::Shape})
    if (to_string(p) == name) return p;
  return std::nullopt;
}

std::span<const Property> domain_properties(Domain d) {
  switch (d) {
    case Domain::Alchemy: return kAlchemyProps;
    case Domain::Scene: return kSceneProps;
    case Domain::Tangrams: return kTangramProps;
  }
  return {};
}

bool has_property(Domain d, Property p) {
  auto props = domain_properties(d);
  return std::find(props.begin(), props.end(), p) != props.end();
}

bool is_numeric(Property p) { return p == Property::Pos || p == Property::Amount; }

const ActionSignature& signature(ActionName a) { return kSignatures[static_cast<int>(a)]; }

std::span<const ActionName> domain_actions(Domain d) {
  switch (d) {
    case Domain::Alchemy: return kAlchemyActions;
    case Domain::Scene: return kSceneActions;
    case Domain::Tangrams: return kTangramActions;
  }
  return {};
}

std::string_view to_string(ActionName a) { return kActionNames[static_cast<int>(a)]; }

std::optional<ActionName> action_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i)
    if (kActionNames[i] == name) return static_cast<ActionName>(i);
  return std::nullopt;
}

std::string_view entity_noun(Domain d) {
  switch (d) {
    case Domain::Alchemy: return "beaker";
    case Domain::Scene: return "person";
    case Domain::Tangrams: return "figure";
  }
  return "entity";
}

std::string render(Value v, Domain d) {
  switch (v.kind) {
    case Value::Kind::Entity: return std::string(entity_noun(d)) + std::to_string(v.data);
    case Value::Kind::Number: return std::to_string(v.data);
    case Value::Kind::Color: return std::string(color_name(v.as_color()));
    case Value::Kind::Shape: return std::string(shape_name(v.data));
    case Value::Kind::None: return "none";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Entity / WorldState

std::optional<Color> Entity::uniform_color() const {
  if (amount == 0) return std::nullopt;
  for (int i = 1; i < amount; ++i)
    if (units[i] != units[0]) return std::nullopt;
  return units[0];
}

bool Entity::same_content(const Entity& o) const {
  if (pos != o.pos || amount != o.amount || shirt != o.shirt || hat != o.hat || shape != o.shape)
    return false;
  return std::equal(units.begin(), units.begin() + amount, o.units.begin());
}

WorldState::WorldState(Domain domain, int slots, std::vector<Entity> entities, int next_id)
    : domain_(domain), slots_(slots), entities_(std::move(entities)) {
  std::sort(entities_.begin(), entities_.end(),
            [](const Entity& a, const Entity& b) { return a.pos < b.pos; });
  if (domain_ == Domain::Tangrams) slots_ = static_cast<int>(entities_.size());
  if (next_id < 0) {
    int max_id = 0;
    for (const auto& e : entities_) max_id = std::max(max_id, e.id);
    next_id_ = max_id + 1;
  } else {
    next_id_ = next_id;
  }
}

const Entity* WorldState::find(int id) const {
  for (const auto& e : entities_)
    if (e.id == id) return &e;
  return nullptr;
}

const Entity* WorldState::at_pos(int pos) const {
  for (const auto& e : entities_)
    if (e.pos == pos) return &e;
  return nullptr;
}

bool operator==(const WorldState& a, const WorldState& b) {
  if (a.domain_ != b.domain_ || a.slots_ != b.slots_ || a.entities_.size() != b.entities_.size())
    return false;
  for (std::size_t i = 0; i < a.entities_.size(); ++i)
    if (!a.entities_[i].same_content(b.entities_[i])) return false;
  return true;
}

std::optional<Value> lookup_property(const Entity& e, Domain d, Property p) {
  switch (p) {
    case Property::Pos: return Value::number(e.pos);
    case Property::Color:
      if (d != Domain::Alchemy) return std::nullopt;
      if (auto c = e.uniform_color()) return Value::color(*c);
      return std::nullopt;
    case Property::Amount: return Value::number(e.amount);
    case Property::ShirtColor: return Value::color(e.shirt);
    case Property::HatColor: return e.hat ? Value::color(*e.hat) : Value::none();
    case Property::Shape: return Value::shape(e.shape);
  }
  return std::nullopt;
}

Outcome<std::optional<Value>> lookup_property(const WorldState& w, int entity_id, Property p) {
  if (!has_property(w.domain(), p)) return Fault::UnknownProperty;
  const Entity* e = w.find(entity_id);
  if (e == nullptr) return Fault::EmptyDenotation;
  return lookup_property(*e, w.domain(), p);
}

// ---------------------------------------------------------------------------
// Execution

namespace {

/// Tangrams accepts a shape literal wherever a figure is expected.
std::optional<int> entity_id(const Value& v, Domain d) {
  if (v.kind == Value::Kind::Entity) return v.data;
  if (d == Domain::Tangrams && v.kind == Value::Kind::Shape) return v.data;
  return std::nullopt;
}

bool kind_ok(const Value& v, ArgKind k, Domain d) {
  switch (k) {
    case ArgKind::Entity: return entity_id(v, d).has_value();
    case ArgKind::Number: return v.kind == Value::Kind::Number;
    case ArgKind::Color: return v.kind == Value::Kind::Color;
  }
  return false;
}

bool free_slot(const WorldState& w, int pos) {
  return pos >= 1 && pos <= w.slots() && w.at_pos(pos) == nullptr;
}

}  // namespace

std::optional<Fault> check_action(const WorldState& w, ActionName a, std::span<const Value> args) {
  const auto& sig = signature(a);
  const Domain d = w.domain();
  if (sig.domain != d) return Fault::KindMismatch;
  if (static_cast<int>(args.size()) != sig.arity) return Fault::ArityMismatch;
  for (int j = 0; j < sig.arity; ++j)
    if (!kind_ok(args[j], sig.kinds[j], d)) return Fault::KindMismatch;

  auto present = [&](const Value& v) -> const Entity* { return w.find(*entity_id(v, d)); };
  constexpr auto bad = Fault::PreconditionViolation;

  switch (a) {
    case ActionName::Pour: {
      const Entity* src = present(args[0]);
      const Entity* dst = present(args[1]);
      if (!src || !dst || src == dst) return bad;
      if (src->amount == 0 || dst->amount + src->amount > kBeakerCapacity) return bad;
      return std::nullopt;
    }
    case ActionName::Drain: {
      const Entity* b = present(args[0]);
      if (!b || args[1].data < 1 || args[1].data > b->amount) return bad;
      return std::nullopt;
    }
    case ActionName::Mix: {
      const Entity* b = present(args[0]);
      if (!b || b->amount == 0) return bad;
      return std::nullopt;
    }
    case ActionName::Enter:
      if (!free_slot(w, args[1].data)) return bad;
      return std::nullopt;
    case ActionName::Leave:
      if (!present(args[0])) return bad;
      return std::nullopt;
    case ActionName::Move:
      if (!present(args[0]) || !free_slot(w, args[1].data)) return bad;
      return std::nullopt;
    case ActionName::TradeHats: {
      const Entity* p1 = present(args[0]);
      const Entity* p2 = present(args[1]);
      if (!p1 || !p2 || p1 == p2) return bad;
      if (!p1->hat && !p2->hat) return bad;
      return std::nullopt;
    }
    case ActionName::Add: {
      int shape = *entity_id(args[0], d);
      int n = static_cast<int>(w.entities().size());
      if (shape < 0 || shape >= kNumShapes || present(args[0])) return bad;
      if (args[1].data < 1 || args[1].data > n + 1) return bad;
      return std::nullopt;
    }
    case ActionName::Remove:
      if (!present(args[0])) return bad;
      return std::nullopt;
    case ActionName::Swap: {
      const Entity* f1 = present(args[0]);
      const Entity* f2 = present(args[1]);
      if (!f1 || !f2 || f1 == f2) return bad;
      return std::nullopt;
    }
  }
  return Fault::KindMismatch;
}

Outcome<WorldState> exec_action(const WorldState& w, ActionName a, std::span<const Value> args) {
  if (auto fault = check_action(w, a, args)) return *fault;

  const Domain d = w.domain();
  std::vector<Entity> es = w.entities();
  int next_id = w.next_id();
  auto find = [&](const Value& v) -> Entity& {
    int id = *entity_id(v, d);
    return *std::find_if(es.begin(), es.end(), [id](const Entity& e) { return e.id == id; });
  };

  switch (a) {
    case ActionName::Pour: {
      Entity& src = find(args[0]);
      Entity& dst = find(args[1]);
      for (int i = 0; i < src.amount; ++i) dst.units[dst.amount + i] = src.units[i];
      dst.amount = static_cast<std::uint8_t>(dst.amount + src.amount);
      src.amount = 0;
      break;
    }
    case ActionName::Drain: {
      Entity& b = find(args[0]);
      b.amount = static_cast<std::uint8_t>(b.amount - args[1].data);
      break;
    }
    case ActionName::Mix: {
      Entity& b = find(args[0]);
      std::fill(b.units.begin(), b.units.begin() + b.amount, Color::Brown);
      break;
    }
    case ActionName::Enter: {
      Entity p;
      p.id = next_id++;
      p.pos = args[1].data;
      p.shirt = args[0].as_color();
      es.push_back(p);
      break;
    }
    case ActionName::Leave: {
      int id = find(args[0]).id;
      std::erase_if(es, [id](const Entity& e) { return e.id == id; });
      break;
    }
    case ActionName::Move:
      find(args[0]).pos = args[1].data;
      break;
    case ActionName::TradeHats:
      std::swap(find(args[0]).hat, find(args[1]).hat);
      break;
    case ActionName::Add: {
      int shape = *entity_id(args[0], d);
      int pos = args[1].data;
      for (auto& e : es)
        if (e.pos >= pos) ++e.pos;
      Entity f;
      f.id = shape;
      f.shape = shape;
      f.pos = pos;
      es.push_back(f);
      break;
    }
    case ActionName::Remove: {
      Entity& f = find(args[0]);
      int pos = f.pos;
      int id = f.id;
      std::erase_if(es, [id](const Entity& e) { return e.id == id; });
      for (auto& e : es)
        if (e.pos > pos) --e.pos;
      break;
    }
    case ActionName::Swap:
      std::swap(find(args[0]).pos, find(args[1]).pos);
      break;
  }
  return WorldState(d, w.slots(), std::move(es), next_id);
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_state(const WorldState& w) {
  std::string out;
  auto sep = [&] {
    if (!out.empty()) out += ' ';
  };
  switch (w.domain()) {
    case Domain::Alchemy:
      for (const auto& e : w.entities()) {
        sep();
        out += std::to_string(e.pos) + ':';
        if (e.amount == 0) out += '_';
        for (Color c : e.contents()) out += color_letter(c);
      }
      break;
    case Domain::Scene:
      for (int pos = 1; pos <= w.slots(); ++pos) {
        sep();
        out += std::to_string(pos) + ':';
        if (const Entity* p = w.at_pos(pos)) {
          out += color_letter(p->shirt);
          out += p->hat ? color_letter(*p->hat) : '_';
        } else {
          out += "__";
        }
      }
      break;
    case Domain::Tangrams:
      for (const auto& e : w.entities()) {
        sep();
        out += std::to_string(e.pos) + ':' + std::to_string(e.shape);
      }
      break;
  }
  return out;
}

WorldState parse_state(std::string_view s, Domain d) {
  std::vector<Entity> entities;
  int slots = 0;
  std::size_t i = 0;
  auto skip_spaces = [&] {
    while (i < s.size() && s[i] == ' ') ++i;
  };
  skip_spaces();
  while (i < s.size()) {
    const std::size_t slot_start = i;
    int pos = 0;
    auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), pos);
    if (ec != std::errc() || ptr == s.data() + i) throw ParseError("expected slot number", i);
    i = static_cast<std::size_t>(ptr - s.data());
    if (pos != slots + 1) throw ParseError("slots must be numbered 1, 2, ... in order", slot_start);
    if (i >= s.size() || s[i] != ':') throw ParseError("expected ':'", i);
    ++i;
    const std::size_t body_start = i;
    while (i < s.size() && s[i] != ' ') ++i;
    std::string_view body = s.substr(body_start, i - body_start);
    ++slots;

    Entity e;
    e.pos = pos;
    switch (d) {
      case Domain::Alchemy:
        e.id = pos;
        if (body == "_") break;
        if (body.empty() || body.size() > kBeakerCapacity)
          throw ParseError("beaker contents must be 1-4 color letters or '_'", body_start);
        for (std::size_t k = 0; k < body.size(); ++k) {
          auto c = color_from_letter(body[k]);
          if (!c) throw ParseError(std::string("unknown color letter '") + body[k] + "'",
                                   body_start + k);
          e.units[k] = *c;
        }
        e.amount = static_cast<std::uint8_t>(body.size());
        break;
      case Domain::Scene: {
        if (body.size() != 2) throw ParseError("person slot must be two letters", body_start);
        if (body == "__") {
          skip_spaces();
          continue;
        }
        auto shirt = color_from_letter(body[0]);
        if (!shirt) throw ParseError("unknown shirt color", body_start);
        e.shirt = *shirt;
        if (body[1] != '_') {
          auto hat = color_from_letter(body[1]);
          if (!hat) throw ParseError("unknown hat color", body_start + 1);
          e.hat = *hat;
        }
        e.id = static_cast<int>(entities.size()) + 1;
        break;
      }
      case Domain::Tangrams: {
        if (body.size() != 1 || body[0] < '0' || body[0] > '9')
          throw ParseError("shape id must be a digit 0-9", body_start);
        e.shape = body[0] - '0';
        e.id = e.shape;
        for (const auto& other : entities)
          if (other.shape == e.shape) throw ParseError("duplicate shape", body_start);
        break;
      }
    }
    entities.push_back(e);
    skip_spaces();
  }
  return WorldState(d, slots, std::move(entities));
}

}  // namespace ctxsp
