#pragma once

#include <cassert>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace ctxsp {

/// Recoverable failures raised while evaluating or executing a logical form.
/// The parser treats every one of them as "discard this hypothesis".
enum class Fault {
  PreconditionViolation,
  ArityMismatch,
  KindMismatch,
  EmptyDenotation,
  NonSingleton,
  DanglingReference,
  UnknownProperty,
};

std::string_view to_string(Fault f);

/// Value-or-fault return type for the hot paths (exec, evaluate), where
/// failure is the common case and exceptions would be too slow.
template <class T>
class Outcome {
 public:
  Outcome(T value) : state_(std::move(value)) {}
  Outcome(Fault fault) : state_(fault) {}

  bool ok() const { return std::holds_alternative<T>(state_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    assert(ok());
    return std::get<T>(state_);
  }
  T&& value() && {
    assert(ok());
    return std::get<T>(std::move(state_));
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  Fault fault() const {
    assert(!ok());
    return std::get<Fault>(state_);
  }

 private:
  std::variant<T, Fault> state_;
};

/// Malformed textual input (state strings, logical-form renderings, datasets).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace ctxsp
