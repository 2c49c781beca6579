#pragma once

// Micro-domain ontologies (Alchemy, Scene, Tangrams), world states and the
// action executor.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxsp/outcome.hpp"

namespace ctxsp {

enum class Domain : std::uint8_t { Alchemy, Scene, Tangrams };

std::string_view to_string(Domain d);
/// Throws std::invalid_argument on unknown names.
Domain domain_from_string(std::string_view name);

enum class Color : std::uint8_t { Green, Red, Orange, Yellow, Blue, Purple, Brown };

inline constexpr int kNumColors = 7;
/// Colors that appear in freshly generated worlds; brown only arises from mix.
inline constexpr int kNumBaseColors = 6;

char color_letter(Color c);
std::optional<Color> color_from_letter(char c);
std::string_view color_name(Color c);
std::optional<Color> color_from_name(std::string_view name);

/// Tangrams figures are identified by their shape; the alphabet has ten.
inline constexpr int kNumShapes = 10;
std::string_view shape_name(int shape);
std::optional<int> shape_from_name(std::string_view name);

inline constexpr int kBeakerCapacity = 4;

enum class Property : std::uint8_t { Pos, Color, Amount, ShirtColor, HatColor, Shape };

std::string_view to_string(Property p);
std::optional<Property> property_from_string(std::string_view name);
std::span<const Property> domain_properties(Domain d);
bool has_property(Domain d, Property p);
/// Properties with a total order usable by argmin/argmax.
bool is_numeric(Property p);

enum class ActionName : std::uint8_t {
  Pour, Drain, Mix, Enter, Leave, Move, TradeHats, Add, Remove, Swap
};

enum class ArgKind : std::uint8_t { Entity, Number, Color };

struct ActionSignature {
  ActionName name;
  Domain domain;
  int arity;
  std::array<ArgKind, 2> kinds;
};

const ActionSignature& signature(ActionName a);
std::span<const ActionName> domain_actions(Domain d);
std::string_view to_string(ActionName a);
std::optional<ActionName> action_from_string(std::string_view name);

/// A primitive denotation: an entity reference or a literal.
struct Value {
  enum class Kind : std::uint8_t { Entity, Number, Color, Shape, None };

  Kind kind = Kind::None;
  std::int32_t data = 0;

  static constexpr Value entity(int id) { return {Kind::Entity, id}; }
  static constexpr Value number(int n) { return {Kind::Number, n}; }
  static constexpr Value color(Color c) { return {Kind::Color, static_cast<std::int32_t>(c)}; }
  static constexpr Value shape(int s) { return {Kind::Shape, s}; }
  static constexpr Value none() { return {Kind::None, 0}; }

  bool is_entity() const { return kind == Kind::Entity; }
  Color as_color() const { return static_cast<Color>(data); }

  friend constexpr auto operator<=>(const Value&, const Value&) = default;
};

/// Entity literal noun per domain: beaker2, person3, figure7.
std::string_view entity_noun(Domain d);
std::string render(Value v, Domain d);

struct Entity {
  int id = 0;
  int pos = 0;
  // Alchemy: units bottom to top.
  std::array<Color, kBeakerCapacity> units{};
  std::uint8_t amount = 0;
  // Scene
  Color shirt = Color::Green;
  std::optional<Color> hat;
  // Tangrams
  int shape = 0;

  std::span<const Color> contents() const { return {units.data(), amount}; }
  /// Defined only for non-empty beakers whose units share one color.
  std::optional<Color> uniform_color() const;

  /// Content equality; ids are bookkeeping and do not take part.
  bool same_content(const Entity& other) const;
};

/// An immutable snapshot of one world. Entities are kept sorted by position.
class WorldState {
 public:
  WorldState() = default;
  /// `slots` is P for Alchemy/Scene; ignored for Tangrams (contiguous).
  WorldState(Domain domain, int slots, std::vector<Entity> entities, int next_id = -1);

  Domain domain() const { return domain_; }
  int slots() const { return slots_; }
  const std::vector<Entity>& entities() const { return entities_; }
  int next_id() const { return next_id_; }

  const Entity* find(int id) const;
  const Entity* at_pos(int pos) const;
  bool contains(int id) const { return find(id) != nullptr; }

  /// Ids are not compared: two states are equal when their observable
  /// contents agree slot by slot.
  friend bool operator==(const WorldState& a, const WorldState& b);

 private:
  Domain domain_ = Domain::Alchemy;
  int slots_ = 0;
  std::vector<Entity> entities_;
  int next_id_ = 1;
};

/// Property lookup. `std::nullopt` means "undefined" (e.g. the color of a
/// heterogeneous or empty beaker), which matches no selection.
Outcome<std::optional<Value>> lookup_property(const WorldState& w, int entity_id, Property p);
std::optional<Value> lookup_property(const Entity& e, Domain d, Property p);

/// Checks arity, kinds and preconditions without building the successor.
std::optional<Fault> check_action(const WorldState& w, ActionName a, std::span<const Value> args);

/// Pure: returns the successor state, leaves `w` untouched.
Outcome<WorldState> exec_action(const WorldState& w, ActionName a, std::span<const Value> args);

/// Token-string rendering, e.g. `1:gg 2:_ 3:o` (Alchemy), `1:r_ 2:bg 3:__`
/// (Scene), `1:3 2:0` (Tangrams).
std::string serialize_state(const WorldState& w);
/// Throws ParseError on malformed input.
WorldState parse_state(std::string_view s, Domain d);

}  // namespace ctxsp
