#pragma once

// Examples (w_0, x_1..x_L, w_L) and their JSON-lines file format.

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxsp/logic.hpp"
#include "ctxsp/text.hpp"
#include "ctxsp/worlds.hpp"

namespace ctxsp {

struct Example {
  std::string id;
  Domain domain = Domain::Alchemy;
  WorldState w0;
  std::vector<std::string> utterances;
  WorldState w_final;
  std::vector<std::string> gold_lfs;   // optional, artificial data
  std::vector<WorldState> worlds;      // optional w_1..w_L
  std::vector<std::string> pos_tags;   // optional, one space-separated tag string per utterance

  int length() const { return static_cast<int>(utterances.size()); }
  /// Tokenized utterances (with tags when present).
  std::vector<Utterance> tokens() const;
  /// Target state after the first `n` utterances; nullopt when the example
  /// carries neither intermediate worlds nor gold logical forms.
  std::optional<WorldState> target(int n) const;
};

/// One JSON object per line: id, domain, world_0, utterances, world_final
/// and optionally gold_lfs, worlds, pos_tags. Throws ParseError with the
/// 1-based line number as position.
std::vector<Example> read_dataset(std::istream& in);
std::vector<Example> read_dataset_file(const std::string& path);
void write_example(std::ostream& out, const Example& e);
void write_dataset_file(const std::string& path, const std::vector<Example>& data);

/// Adapter for externally converted corpora; `--format scone-tsv` goes
/// through this interface.
class DatasetConverter {
 public:
  virtual ~DatasetConverter() = default;
  virtual std::vector<Example> convert(std::istream& in, Domain d) const = 0;
};

/// Known input formats: "jsonl" and "scone-tsv". The scone-tsv converter
/// only recognises the layout and reports that conversion is external.
std::unique_ptr<DatasetConverter> make_converter(std::string_view format);

}  // namespace ctxsp
