#include "ctxsp/params.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

namespace ctxsp {

bool operator==(const Params& a, const Params& b) {
  if (a.table_.size() != b.table_.size()) return false;
  for (const auto& [k, e] : a.table_) {
    auto it = b.table_.find(k);
    if (it == b.table_.end() || it->second.weight != e.weight || it->second.accum != e.accum)
      return false;
  }
  return true;
}

double score(const FeatureVector& fv, const Params& params) {
  double s = 0.0;
  for (const auto& [k, x] : fv.entries) s += x * params.weight(k);
  return s;
}

std::vector<double> beam_softmax(std::span<const double> scores) {
  std::vector<double> p(scores.size());
  if (scores.empty()) return p;
  const double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) z += p[i] = std::exp(scores[i] - top);
  for (double& x : p) x /= z;
  return p;
}

namespace {

constexpr std::string_view kMagic = "# ctxsp model v1";

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, std::size_t line) {
  double x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("bad number '" + std::string(s) + "' on line " + std::to_string(line), 0);
  return x;
}

}  // namespace

void save_model(std::ostream& out, const Params& params, const ModelHeader& header) {
  std::vector<std::pair<std::string, Params::Entry>> rows;
  rows.reserve(params.size());
  for (const auto& [k, e] : params.table()) {
    auto name = FeatureNames::global().find(k);
    if (!name) throw std::logic_error("feature key without a registered name");
    rows.emplace_back(std::move(*name), e);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  out << kMagic << '\n';
  out << "mode\t" << header.mode << '\n';
  out << "config\t" << header.config_digest << '\n';
  if (!header.features.empty()) out << "features\t" << header.features << '\n';
  for (const auto& [name, e] : rows)
    out << name << '\t' << format_double(e.weight) << '\t' << format_double(e.accum) << '\n';
}

Params load_model(std::istream& in, ModelHeader* header) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&] {
    ++lineno;
    return static_cast<bool>(std::getline(in, line));
  };
  if (!next() || line != kMagic) throw ParseError("not a model file (bad header)", 0);
  ModelHeader h;
  for (const char* key : {"mode", "config"}) {
    if (!next()) throw ParseError("truncated model header", lineno);
    std::string prefix = std::string(key) + "\t";
    if (line.rfind(prefix, 0) != 0) throw ParseError("expected '" + std::string(key) + "' line", lineno);
    (key == std::string_view("mode") ? h.mode : h.config_digest) = line.substr(prefix.size());
  }
  Params params;
  while (next()) {
    if (line.empty()) continue;
    if (params.empty() && line.rfind("features\t", 0) == 0) {
      h.features = line.substr(9);
      continue;
    }
    std::size_t t2 = line.rfind('\t');
    std::size_t t1 = t2 == std::string::npos || t2 == 0 ? std::string::npos : line.rfind('\t', t2 - 1);
    if (t1 == std::string::npos) throw ParseError("expected three tab-separated fields", lineno);
    std::string_view name(line.data(), t1);
    double w = parse_double(std::string_view(line).substr(t1 + 1, t2 - t1 - 1), lineno);
    double g = parse_double(std::string_view(line).substr(t2 + 1), lineno);
    if (!std::isfinite(w) || g < 0) throw ParseError("invalid weight or accumulator", lineno);
    FeatureKey k = feature_key(name);
    FeatureNames::global().add(k, name);
    params.entry(k) = {w, g};
  }
  if (header) *header = h;
  return params;
}

}  // namespace ctxsp
