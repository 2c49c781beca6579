#include "reference.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace reference {

namespace {

std::vector<std::pair<int, std::string>> slots_of(const std::string& state) {
  std::vector<std::pair<int, std::string>> out;
  std::istringstream in(state);
  std::string tok;
  while (in >> tok) {
    auto colon = tok.find(':');
    out.emplace_back(std::stoi(tok.substr(0, colon)), tok.substr(colon + 1));
  }
  return out;
}

std::string join(const std::vector<std::pair<int, std::string>>& slots) {
  std::string out;
  for (const auto& [pos, body] : slots) {
    if (!out.empty()) out += ' ';
    out += std::to_string(pos) + ":" + body;
  }
  return out;
}

std::optional<std::string> alchemy(const std::string& state, const std::string& action, const std::vector<Arg>& args) {
  std::map<int, std::string> beakers;
  for (auto& [pos, body] : slots_of(state)) beakers[pos] = body == "_" ? "" : body;
  auto has = [&](const Arg& a) { return a.kind == Arg::Pos && beakers.count(a.value) > 0; };
  if (action == "pour") {
    if (args.size() != 2 || !has(args[0]) || !has(args[1]) || args[0].value == args[1].value) return std::nullopt;
    std::string& src = beakers[args[0].value];
    std::string& dst = beakers[args[1].value];
    if (src.empty() || dst.size() + src.size() > 4) return std::nullopt;
    dst += src;
    src.clear();
  } else if (action == "drain") {
    if (args.size() != 2 || !has(args[0]) || args[1].kind != Arg::Number) return std::nullopt;
    std::string& b = beakers[args[0].value];
    int k = args[1].value;
    if (k < 1 || k > static_cast<int>(b.size())) return std::nullopt;
    b.erase(b.size() - static_cast<std::size_t>(k));
  } else if (action == "mix") {
    if (args.size() != 1 || !has(args[0])) return std::nullopt;
    std::string& b = beakers[args[0].value];
    if (b.empty()) return std::nullopt;
    b.assign(b.size(), 'n');
  } else {
    return std::nullopt;
  }
  std::vector<std::pair<int, std::string>> out;
  for (auto& [pos, body] : beakers) out.emplace_back(pos, body.empty() ? "_" : body);
  return join(out);
}

std::optional<std::string> scene(const std::string& state, int slots, const std::string& action,
                                 const std::vector<Arg>& args) {
  std::map<int, std::string> stage;
  for (auto& [pos, body] : slots_of(state))
    if (body != "__") stage[pos] = body;
  auto has = [&](const Arg& a) { return a.kind == Arg::Pos && stage.count(a.value) > 0; };
  auto free = [&](const Arg& a) {
    return a.kind == Arg::Number && a.value >= 1 && a.value <= slots && stage.count(a.value) == 0;
  };
  if (action == "enter") {
    if (args.size() != 2 || args[0].kind != Arg::Color || !free(args[1])) return std::nullopt;
    stage[args[1].value] = std::string(1, static_cast<char>(args[0].value)) + "_";
  } else if (action == "leave") {
    if (args.size() != 1 || !has(args[0])) return std::nullopt;
    stage.erase(args[0].value);
  } else if (action == "move") {
    if (args.size() != 2 || !has(args[0]) || !free(args[1])) return std::nullopt;
    stage[args[1].value] = stage[args[0].value];
    stage.erase(args[0].value);
  } else if (action == "trade-hats") {
    if (args.size() != 2 || !has(args[0]) || !has(args[1]) || args[0].value == args[1].value) return std::nullopt;
    std::string& a = stage[args[0].value];
    std::string& b = stage[args[1].value];
    if (a[1] == '_' && b[1] == '_') return std::nullopt;
    std::swap(a[1], b[1]);
  } else {
    return std::nullopt;
  }
  std::vector<std::pair<int, std::string>> out;
  for (int pos = 1; pos <= slots; ++pos) out.emplace_back(pos, stage.count(pos) ? stage[pos] : "__");
  return join(out);
}

std::optional<std::string> tangrams(const std::string& state, const std::string& action, const std::vector<Arg>& args) {
  std::vector<int> row;
  for (auto& [pos, body] : slots_of(state)) row.push_back(std::stoi(body));
  auto where = [&](const Arg& a) {
    return a.kind == Arg::Shape ? std::find(row.begin(), row.end(), a.value) : row.end();
  };
  if (action == "add") {
    if (args.size() != 2 || args[0].kind != Arg::Shape || args[1].kind != Arg::Number) return std::nullopt;
    if (args[0].value < 0 || args[0].value > 9 || where(args[0]) != row.end()) return std::nullopt;
    int pos = args[1].value;
    if (pos < 1 || pos > static_cast<int>(row.size()) + 1) return std::nullopt;
    row.insert(row.begin() + (pos - 1), args[0].value);
  } else if (action == "remove") {
    if (args.size() != 1 || where(args[0]) == row.end()) return std::nullopt;
    row.erase(where(args[0]));
  } else if (action == "swap") {
    if (args.size() != 2) return std::nullopt;
    auto a = where(args[0]);
    auto b = where(args[1]);
    if (a == row.end() || b == row.end() || a == b) return std::nullopt;
    std::iter_swap(a, b);
  } else {
    return std::nullopt;
  }
  std::vector<std::pair<int, std::string>> out;
  for (std::size_t i = 0; i < row.size(); ++i) out.emplace_back(static_cast<int>(i) + 1, std::to_string(row[i]));
  return join(out);
}

}  // namespace

std::optional<std::string> exec(const std::string& domain, const std::string& state, int slots,
                                const std::string& action, const std::vector<Arg>& args) {
  if (domain == "alchemy") return alchemy(state, action, args);
  if (domain == "scene") return scene(state, slots, action, args);
  if (domain == "tangrams") return tangrams(state, action, args);
  return std::nullopt;
}

}  // namespace reference
