#include "ctxsp/text.hpp"

#include <cctype>
#include <stdexcept>

namespace ctxsp {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || ch == '|') {
      flush();
    } else if (std::ispunct(c) && ch != '-' && ch != '\'') {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return out;
}

Utterance::Utterance(std::vector<std::string> tokens, std::vector<std::string> tags)
    : tokens_(std::move(tokens)), tags_(std::move(tags)) {
  if (!tags_.empty() && tags_.size() != tokens_.size())
    throw std::invalid_argument("POS tag count does not match token count");
  build_ngrams();
}

Utterance Utterance::from_text(std::string_view text, std::string_view tags) {
  std::vector<std::string> tag_list;
  std::string cur;
  for (char ch : tags) {
    if (ch == ' ') {
      if (!cur.empty()) tag_list.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) tag_list.push_back(std::move(cur));
  return Utterance(tokenize(text), std::move(tag_list));
}

void Utterance::build_ngrams() {
  ngrams_.clear();
  const int n = size();
  for (int start = 0; start < n; ++start) {
    std::string text;
    for (int len = 1; len <= kMaxNgram && start + len <= n; ++len) {
      if (len > 1) text += ' ';
      text += tokens_[start + len - 1];
      ngrams_.push_back({text, fnv1a(text), Span{start, start + len - 1}});
    }
  }
}

std::vector<int> Utterance::ngrams_inside(Span span) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(ngrams_.size()); ++i) {
    const Span& s = ngrams_[i].span;
    if (s.start >= span.start && s.end <= span.end) out.push_back(i);
  }
  return out;
}

}  // namespace ctxsp
