#pragma once

// Tokenization, n-gram tables and the string hashes used for feature keys.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ctxsp {

/// 64-bit FNV-1a. Stable across platforms, so feature keys are reproducible.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

/// Lowercases, splits on whitespace and separates punctuation into its own
/// tokens. '|' is treated as whitespace since it delimits feature names.
std::vector<std::string> tokenize(std::string_view text);

/// Inclusive token span [start, end].
struct Span {
  int start = 0;
  int end = 0;
  int length() const { return end - start + 1; }
  friend constexpr bool operator==(const Span&, const Span&) = default;
};

inline constexpr int kMaxNgram = 3;
/// Lexical marker for conditions whose referenced parts are not anchored.
inline constexpr std::string_view kNoSpanMarker = "\xE2\x88\x85";  // U+2205

/// A tokenized utterance plus its uni/bi/trigram table.
class Utterance {
 public:
  Utterance() = default;
  explicit Utterance(std::vector<std::string> tokens, std::vector<std::string> tags = {});
  static Utterance from_text(std::string_view text, std::string_view tags = {});

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& tags() const { return tags_; }
  bool has_tags() const { return !tags_.empty(); }

  struct Ngram {
    std::string text;
    std::uint64_t hash;
    Span span;
  };
  /// Every n-gram of the utterance, n = 1..3.
  const std::vector<Ngram>& ngrams() const { return ngrams_; }
  /// Indices into ngrams() of the n-grams lying inside `span`.
  std::vector<int> ngrams_inside(Span span) const;

 private:
  void build_ngrams();

  std::vector<std::string> tokens_;
  std::vector<std::string> tags_;
  std::vector<Ngram> ngrams_;
};

}  // namespace ctxsp
