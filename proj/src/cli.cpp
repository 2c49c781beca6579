#include "ctxsp/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctxsp/datagen.hpp"
#include "ctxsp/dataset.hpp"
#include "ctxsp/learner.hpp"
#include "ctxsp/params.hpp"
#include "ctxsp/parser.hpp"

namespace ctxsp::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kVersion = "0.1.0";

/// Failure to read or write a file, or a malformed input file.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 1;
  std::string mode = "C";
  int beam = 500;
  int inter_beam = 5;
  int max_predicates = 8;
  std::string features = "F1-F8";
  bool constraints = false;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--mode", c.mode, "Model: A (anchored), B (floating) or C (flat)")
      ->check(CLI::IsMember({"A", "B", "C"}))
      ->capture_default_str();
  cmd->add_option("--beam", c.beam, "Hypotheses kept within an utterance")->capture_default_str();
  cmd->add_option("--inter-beam", c.inter_beam, "Hypotheses kept across utterance boundaries")
      ->capture_default_str();
  cmd->add_option("--max-predicates", c.max_predicates, "Predicates built per utterance")->capture_default_str();
  cmd->add_option("--features", c.features, "Feature families, e.g. F1-F3 or F1,F2,F8")->capture_default_str();
  cmd->add_flag("--constraints", c.constraints, "Mode A: align actions to verbs, values to adjectives/numbers");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
}

BeamConfig beam_config(const Common& c, Mode mode) {
  BeamConfig b;
  b.mode = mode;
  b.intra = c.beam;
  b.inter = c.inter_beam;
  b.max_predicates = c.max_predicates;
  b.linguistic_constraints = c.constraints;
  b.validate();
  return b;
}

json common_json(const Common& c) {
  return {{"seed", c.seed},
          {"mode", c.mode},
          {"beam", c.beam},
          {"inter_beam", c.inter_beam},
          {"max_predicates", c.max_predicates},
          {"features", FeatureConfig::parse(c.features).to_string()},
          {"constraints", c.constraints}};
}

fs::path out_dir(const Common& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

std::vector<Example> load_data(const std::string& path, const std::string& format, std::optional<Domain> domain) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  auto conv = make_converter(format);
  if (format == "jsonl" && !domain) return read_dataset(in);
  return conv->convert(in, domain.value_or(Domain::Alchemy));
}

Params load_params(const std::string& path, ModelHeader* header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return load_model(in, header);
}

/// Run manifest written next to the outputs. Timings are the only field
/// that differs between identical runs.
class Manifest {
 public:
  Manifest(std::string command, const Common& c) : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["version"] = std::string(kVersion);
    j_["seed"] = c.seed;
    j_["config"] = common_json(c);
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }

  json& config() { return j_["config"]; }
  void input(const std::string& key, const std::string& path) { j_["inputs"][key] = path; }
  void output(const std::string& key, const fs::path& path) { j_["outputs"][key] = path.string(); }
  void timing(const std::string& key, double seconds) { timings_[key] = seconds; }

  void write(const fs::path& dir) {
    auto total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    timings_["total_seconds"] = total;
    j_["timings"] = timings_;
    const fs::path p = dir / (j_["command"].get<std::string>() + ".manifest.json");
    auto f = open_out(p);
    f << j_.dump(2) << '\n';
  }

 private:
  json j_;
  json timings_ = json::object();
  std::chrono::steady_clock::time_point start_;
};

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

// ---- generate ------------------------------------------------------------

struct GenerateArgs {
  std::string domain;
  int L = 5;
  int n_train = 500;
  int n_test = 500;
  double recency_boost = 5.0;
  int slots = 0;
  std::string templates;
};

int cmd_generate(const Common& c, const GenerateArgs& a, std::ostream& out) {
  GenConfig g;
  g.domain = domain_from_string(a.domain);
  g.L = a.L;
  g.n_train = a.n_train;
  g.n_test = a.n_test;
  g.recency_boost = a.recency_boost;
  g.seed = c.seed;
  g.slots = a.slots;
  if (a.templates.empty()) {
    g.templates = TemplateSet::builtin(g.domain);
  } else {
    std::ifstream in(a.templates);
    if (!in) throw IoError("cannot open " + a.templates);
    g.templates = TemplateSet::parse(in);
  }
  g.templates.check(g.domain);
  g.validate();

  Manifest m("generate", c);
  m.config()["domain"] = a.domain;
  m.config()["L"] = a.L;
  m.config()["n_train"] = a.n_train;
  m.config()["n_test"] = a.n_test;
  m.config()["recency_boost"] = a.recency_boost;
  m.config()["slots"] = g.world_size();
  if (!a.templates.empty()) m.input("templates", a.templates);

  auto t0 = std::chrono::steady_clock::now();
  GeneratedData data = gen_dataset(g);
  m.timing("generate_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

  const fs::path dir = out_dir(c);
  const fs::path train = dir / "train.jsonl";
  const fs::path test = dir / "test.jsonl";
  for (const auto& [path, split] : {std::pair{&train, &data.train}, std::pair{&test, &data.test}}) {
    auto f = open_out(*path);
    for (const auto& e : *split) write_example(f, e);
    if (!f) throw IoError("write failed: " + path->string());
  }
  m.output("train", train);
  m.output("test", test);
  m.write(dir);
  out << "wrote " << data.train.size() << " train and " << data.test.size() << " test examples to "
      << dir.string() << '\n';
  return kOk;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string format = "jsonl";
  std::string domain;
  int iterations = 6;
  std::string curriculum = "1,1,2,2,2,2";
  double l1 = 0.001;
  double eta = 0.1;
  std::string bootstrap_from;
};

int cmd_train(const Common& c, const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg;
  cfg.iterations = a.iterations;
  cfg.l1 = a.l1;
  cfg.eta = a.eta;
  cfg.curriculum = Curriculum::parse(a.curriculum);
  cfg.beam = beam_config(c, mode_from_string(c.mode));
  cfg.features = FeatureConfig::parse(c.features);
  cfg.seed = c.seed;
  cfg.validate();

  std::optional<Domain> domain;
  if (!a.domain.empty()) domain = domain_from_string(a.domain);
  auto data = load_data(a.data, a.format, domain);
  if (data.empty()) throw IoError("dataset " + a.data + " is empty");

  Params init;
  if (!a.bootstrap_from.empty()) init = load_params(a.bootstrap_from, nullptr);

  Manifest m("train", c);
  m.config()["iterations"] = a.iterations;
  m.config()["curriculum"] = cfg.curriculum.to_string();
  m.config()["l1"] = a.l1;
  m.config()["eta"] = a.eta;
  m.config()["digest"] = cfg.digest();
  m.input("data", a.data);
  if (!a.bootstrap_from.empty()) m.input("bootstrap_from", a.bootstrap_from);

  const fs::path dir = out_dir(c);
  const fs::path metrics_path = dir / "train_metrics.csv";
  auto metrics = open_out(metrics_path);
  metrics << "iteration,split,L,accuracy,oracle,skipped\n";
  auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(data, cfg, std::move(init), [&](const IterationMetrics& it) {
    const std::string L = it.prefix == 0 ? "full" : std::to_string(it.prefix);
    metrics << it.iteration << ",train," << L << ',' << fixed(it.accuracy) << ',' << fixed(it.oracle) << ','
            << it.skipped << '\n';
    out << "iteration " << it.iteration << " L=" << L << " accuracy " << fixed(it.accuracy) << " oracle "
        << fixed(it.oracle) << " skipped " << it.skipped << '\n';
  });
  m.timing("train_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

  const fs::path model_path = dir / "model.txt";
  {
    auto f = open_out(model_path);
    save_model(f, result.params, {std::string(to_string(cfg.mode())), cfg.digest(), cfg.features.to_string()});
  }
  m.output("model", model_path);
  m.output("metrics", metrics_path);
  m.write(dir);
  out << "wrote " << model_path.string() << " (" << result.params.size() << " features)\n";
  return kOk;
}

// ---- eval / parse ----------------------------------------------------------

struct ModelArgs {
  std::string model;
  std::string data;
  std::string format = "jsonl";
  std::string domain;
  int max_L = 0;
  bool trace = false;
};

/// Flags left at their defaults take the model's mode and features.
struct Resolved {
  BeamConfig beam;
  FeatureConfig features;
  Params params;
};

Resolved resolve(Common& c, const ModelArgs& a, const CLI::App* cmd) {
  ModelHeader header;
  Resolved r;
  r.params = load_params(a.model, &header);
  if (cmd->count("--mode") == 0 && !header.mode.empty()) c.mode = header.mode;
  if (cmd->count("--features") == 0 && !header.features.empty()) c.features = header.features;
  r.beam = beam_config(c, mode_from_string(c.mode));
  r.features = FeatureConfig::parse(c.features);
  return r;
}

int cmd_eval(Common& c, const ModelArgs& a, const CLI::App* cmd, std::ostream& out) {
  Resolved r = resolve(c, a, cmd);
  std::optional<Domain> domain;
  if (!a.domain.empty()) domain = domain_from_string(a.domain);
  auto data = load_data(a.data, a.format, domain);

  Manifest m("eval", c);
  m.input("model", a.model);
  m.input("data", a.data);
  auto t0 = std::chrono::steady_clock::now();
  auto rows = evaluate(data, r.params, r.beam, r.features, a.max_L);
  m.timing("eval_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

  const fs::path dir = out_dir(c);
  const fs::path path = dir / "eval_metrics.csv";
  auto f = open_out(path);
  f << "L,accuracy,oracle,beam_falloff\n";
  for (const auto& row : rows) {
    f << row.L << ',' << fixed(row.accuracy) << ',' << fixed(row.oracle) << ',' << fixed(row.beam_falloff) << '\n';
    out << "L=" << row.L << " accuracy " << fixed(row.accuracy) << " oracle " << fixed(row.oracle)
        << " beam_falloff " << fixed(row.beam_falloff) << " (" << row.examples << " examples)\n";
  }
  m.output("metrics", path);
  m.write(dir);
  return kOk;
}

int cmd_parse(Common& c, const ModelArgs& a, const CLI::App* cmd, std::ostream& out) {
  Resolved r = resolve(c, a, cmd);
  std::optional<Domain> domain;
  if (!a.domain.empty()) domain = domain_from_string(a.domain);
  auto data = load_data(a.data, a.format, domain);

  Manifest m("parse", c);
  m.input("model", a.model);
  m.input("data", a.data);
  const fs::path dir = out_dir(c);
  const fs::path path = dir / "parses.tsv";
  auto f = open_out(path);
  std::ofstream trace;
  if (a.trace) {
    trace = open_out(dir / "trace.txt");
    m.output("trace", dir / "trace.txt");
  }
  f << "id\tlogical_forms\tfinal_state\tscore\tcorrect\n";
  int correct = 0;
  int failed = 0;
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& e : data) {
    auto text = e.tokens();
    if (a.max_L > 0 && static_cast<int>(text.size()) > a.max_L) text.resize(static_cast<std::size_t>(a.max_L));
    const int n = static_cast<int>(text.size());
    if (a.trace) trace << "# example " << e.id << '\n';
    Parser parser(text, e.w0, r.params, r.beam, r.features);
    ParseResult res = parser.parse(a.trace ? &trace : nullptr);
    if (res.failed()) {
      ++failed;
      f << e.id << "\tPARSE_FAIL\t\t\t0\n";
      continue;
    }
    const Hypothesis& top = res.beam.front();
    auto target = e.target(n);
    const bool ok = target && top.state() == *target;
    correct += ok;
    f << e.id << '\t' << top.render_parses() << '\t' << serialize_state(top.state()) << '\t' << fixed(top.score, 6)
      << '\t' << (ok ? 1 : 0) << '\n';
  }
  m.timing("parse_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  m.output("parses", path);
  m.write(dir);
  out << "parsed " << data.size() << " examples: " << correct << " correct, " << failed << " PARSE_FAIL\n";
  return kOk;
}

// ---- inspect-features ------------------------------------------------------

struct InspectArgs {
  std::string data;
  std::string id;
  std::string model;
  int top = 20;
};

int cmd_inspect(Common& c, const InspectArgs& a, std::ostream& out) {
  Manifest m("inspect-features", c);
  m.config()["top"] = a.top;
  if (!a.id.empty()) m.config()["id"] = a.id;
  const fs::path dir = out_dir(c);
  if (!a.model.empty()) {
    ModelHeader header;
    Params params = load_params(a.model, &header);
    m.input("model", a.model);
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& [k, e] : params.table()) rows.emplace_back(FeatureNames::global().find(k).value_or("?"), e.weight);
    std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
      if (std::abs(x.second) != std::abs(y.second)) return std::abs(x.second) > std::abs(y.second);
      return x.first < y.first;
    });
    const fs::path path = dir / "weights.tsv";
    auto f = open_out(path);
    f << "# mode " << header.mode << ", " << params.size() << " features\n";
    const int shown = std::min(a.top, static_cast<int>(rows.size()));
    for (int i = 0; i < shown; ++i)
      f << rows[static_cast<std::size_t>(i)].first << '\t' << fixed(rows[static_cast<std::size_t>(i)].second, 6) << '\n';
    m.output("weights", path);
    m.write(dir);
    out << "wrote " << shown << " of " << params.size() << " weights to " << path.string() << '\n';
    return kOk;
  }
  if (a.data.empty()) throw CLI::ValidationError("inspect-features", "needs --data or --model");
  const Mode mode = mode_from_string(c.mode);
  const FeatureConfig features = FeatureConfig::parse(c.features);
  auto data = load_data(a.data, "jsonl", std::nullopt);
  m.input("data", a.data);
  const fs::path path = dir / "features.txt";
  auto f = open_out(path);
  int dumped = 0;
  for (const auto& e : data) {
    if (!a.id.empty() && e.id != a.id) continue;
    ++dumped;
    auto text = e.tokens();
    Context ctx(e.w0);
    for (std::size_t i = 0; i < e.gold_lfs.size() && i < text.size(); ++i) {
      NodePtr lf = parse_logical_form(e.gold_lfs[i], e.domain);
      f << "# " << e.id << " utterance " << i + 1 << ": " << e.utterances[i] << '\n';
      f << "# " << e.gold_lfs[i] << '\n';
      auto fv = featurize(*lf, text[i], ctx, mode, features);
      if (!fv) throw IoError("gold logical form of " + e.id + " does not execute");
      f << dump_features(*fv);
      auto rec = execute_root(*lf, ctx);
      if (!rec) throw IoError("gold logical form of " + e.id + " does not execute");
      ctx = ctx.extended(std::move(rec).value());
    }
    if (!a.id.empty()) break;
  }
  if (dumped == 0) throw IoError("no example with id " + a.id);
  m.output("features", path);
  m.write(dir);
  out << "wrote gold-form features of " << dumped << " examples to " << path.string() << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-dependent semantic parsing with model projections"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Common common;
  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate an artificial dataset");
  add_common(generate, common);
  generate->add_option("--domain", gen.domain, "alchemy, scene or tangrams")
      ->required()
      ->check(CLI::IsMember({"alchemy", "scene", "tangrams"}));
  generate->add_option("--L", gen.L, "Utterances per example")->capture_default_str();
  generate->add_option("--n-train", gen.n_train, "Training examples")->capture_default_str();
  generate->add_option("--n-test", gen.n_test, "Test examples")->capture_default_str();
  generate->add_option("--recency-boost", gen.recency_boost, "Weight of actions reusing the previous step")
      ->capture_default_str();
  generate->add_option("--slots", gen.slots, "World size (0: domain default)")->capture_default_str();
  generate->add_option("--templates", gen.templates, "Template file replacing the built-in templates");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model from denotations");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", tr.data, "Training dataset")->required();
  train_cmd->add_option("--format", tr.format, "Dataset format")
      ->check(CLI::IsMember({"jsonl", "scone-tsv"}))
      ->capture_default_str();
  train_cmd->add_option("--domain", tr.domain, "Expected domain of the dataset");
  train_cmd->add_option("--iterations", tr.iterations, "Passes over the data")->capture_default_str();
  train_cmd->add_option("--curriculum", tr.curriculum, "Prefix length per iteration ('full' = whole example)")
      ->capture_default_str();
  train_cmd->add_option("--l1", tr.l1, "L1 coefficient")->capture_default_str();
  train_cmd->add_option("--eta", tr.eta, "AdaGrad step size")->capture_default_str();
  train_cmd->add_option("--bootstrap-from", tr.bootstrap_from, "Initialize from a saved model (e.g. mode C)");

  ModelArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and oracle accuracy per prefix length");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset")->required();
  eval_cmd->add_option("--format", ev.format, "Dataset format")
      ->check(CLI::IsMember({"jsonl", "scone-tsv"}))
      ->capture_default_str();
  eval_cmd->add_option("--domain", ev.domain, "Expected domain of the dataset");
  eval_cmd->add_option("--max-L", ev.max_L, "Longest prefix evaluated (0: all)")->capture_default_str();

  ModelArgs pa;
  auto* parse_cmd = app.add_subcommand("parse", "Dump the top parse of every example");
  add_common(parse_cmd, common);
  parse_cmd->add_option("--model", pa.model, "Model file")->required();
  parse_cmd->add_option("--data", pa.data, "Dataset")->required();
  parse_cmd->add_option("--format", pa.format, "Dataset format")
      ->check(CLI::IsMember({"jsonl", "scone-tsv"}))
      ->capture_default_str();
  parse_cmd->add_option("--domain", pa.domain, "Expected domain of the dataset");
  parse_cmd->add_option("--max-L", pa.max_L, "Parse only the first utterances (0: all)")->capture_default_str();
  parse_cmd->add_flag("--trace", pa.trace, "Write per-step beam traces to trace.txt");

  InspectArgs in;
  auto* inspect = app.add_subcommand("inspect-features", "Features of gold logical forms, or a model's top weights");
  add_common(inspect, common);
  inspect->add_option("--data", in.data, "Dataset with gold logical forms");
  inspect->add_option("--id", in.id, "Only this example");
  inspect->add_option("--model", in.model, "List the largest weights of this model instead");
  inspect->add_option("--top", in.top, "Weights listed with --model")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) return cmd_generate(common, gen, out);
    if (*train_cmd) return cmd_train(common, tr, out);
    if (*eval_cmd) return cmd_eval(common, ev, eval_cmd, out);
    if (*parse_cmd) return cmd_parse(common, pa, parse_cmd, out);
    if (*inspect) return cmd_inspect(common, in, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kInputOutput;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputOutput;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace ctxsp::cli
