#include "ctxsp/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ctxsp {

using json = nlohmann::ordered_json;

std::vector<Utterance> Example::tokens() const {
  std::vector<Utterance> out;
  out.reserve(utterances.size());
  for (std::size_t i = 0; i < utterances.size(); ++i)
    out.push_back(Utterance::from_text(utterances[i], i < pos_tags.size() ? pos_tags[i] : std::string_view{}));
  return out;
}

std::optional<WorldState> Example::target(int n) const {
  if (n == length()) return w_final;
  if (n == 0) return w0;
  if (n < 0 || n > length()) return std::nullopt;
  if (static_cast<int>(worlds.size()) >= n) return worlds[static_cast<std::size_t>(n - 1)];
  if (static_cast<int>(gold_lfs.size()) < n) return std::nullopt;
  Context c(w0);
  for (int i = 0; i < n; ++i) {
    auto rec = execute_root(*parse_logical_form(gold_lfs[static_cast<std::size_t>(i)], domain), c);
    if (!rec) return std::nullopt;
    c = c.extended(std::move(rec).value());
  }
  return c.current();
}

namespace {

template <class T>
T field(const json& j, const char* name, std::size_t line) {
  auto it = j.find(name);
  if (it == j.end()) throw ParseError("missing field '" + std::string(name) + "'", line);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError("field '" + std::string(name) + "' has the wrong type", line);
  }
}

Example parse_line(const std::string& text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw ParseError("expected a JSON object", line);
  Example e;
  e.id = field<std::string>(j, "id", line);
  try {
    e.domain = domain_from_string(field<std::string>(j, "domain", line));
    e.w0 = parse_state(field<std::string>(j, "world_0", line), e.domain);
    e.w_final = parse_state(field<std::string>(j, "world_final", line), e.domain);
    e.utterances = field<std::vector<std::string>>(j, "utterances", line);
    if (j.contains("gold_lfs")) e.gold_lfs = field<std::vector<std::string>>(j, "gold_lfs", line);
    if (j.contains("worlds"))
      for (const auto& s : field<std::vector<std::string>>(j, "worlds", line))
        e.worlds.push_back(parse_state(s, e.domain));
    if (j.contains("pos_tags")) e.pos_tags = field<std::vector<std::string>>(j, "pos_tags", line);
    for (const auto& lf : e.gold_lfs) parse_logical_form(lf, e.domain);
  } catch (const ParseError& err) {
    throw ParseError(std::string(err.what()), line);
  } catch (const std::invalid_argument& err) {
    throw ParseError(err.what(), line);
  }
  if (e.utterances.empty()) throw ParseError("example has no utterances", line);
  if (!e.worlds.empty() && e.worlds.size() != e.utterances.size())
    throw ParseError("'worlds' must list one state per utterance", line);
  if (!e.pos_tags.empty() && e.pos_tags.size() != e.utterances.size())
    throw ParseError("'pos_tags' must list one tag string per utterance", line);
  return e;
}

}  // namespace

std::vector<Example> read_dataset(std::istream& in) {
  std::vector<Example> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_line(text, line));
  }
  return out;
}

std::vector<Example> read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_dataset(in);
}

void write_example(std::ostream& out, const Example& e) {
  json j;
  j["id"] = e.id;
  j["domain"] = std::string(to_string(e.domain));
  j["world_0"] = serialize_state(e.w0);
  j["utterances"] = e.utterances;
  j["world_final"] = serialize_state(e.w_final);
  if (!e.gold_lfs.empty()) j["gold_lfs"] = e.gold_lfs;
  if (!e.worlds.empty()) {
    json ws = json::array();
    for (const auto& w : e.worlds) ws.push_back(serialize_state(w));
    j["worlds"] = std::move(ws);
  }
  if (!e.pos_tags.empty()) j["pos_tags"] = e.pos_tags;
  out << j.dump() << '\n';
}

void write_dataset_file(const std::string& path, const std::vector<Example>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& e : data) write_example(out, e);
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

class JsonlConverter : public DatasetConverter {
 public:
  std::vector<Example> convert(std::istream& in, Domain d) const override {
    auto data = read_dataset(in);
    for (const auto& e : data)
      if (e.domain != d) throw ParseError("example " + e.id + " belongs to another domain", 0);
    return data;
  }
};

// Released corpora come as tab-separated rows (id, w_0, then utterance /
// state pairs). Their state notation differs from ours; turning it into
// JSONL is left to an external script, this class only recognises rows.
class SconeTsvConverter : public DatasetConverter {
 public:
  std::vector<Example> convert(std::istream& in, Domain) const override {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      if (std::count(line.begin(), line.end(), '\t') < 3)
        throw ParseError("scone-tsv row needs id, world and utterance/state columns", n);
      throw ParseError("scone-tsv conversion is not built in; convert to JSONL externally", n);
    }
    return {};
  }
};

}  // namespace

std::unique_ptr<DatasetConverter> make_converter(std::string_view format) {
  if (format == "jsonl") return std::make_unique<JsonlConverter>();
  if (format == "scone-tsv") return std::make_unique<SconeTsvConverter>();
  throw std::invalid_argument("unknown dataset format '" + std::string(format) + "'");
}

}  // namespace ctxsp
