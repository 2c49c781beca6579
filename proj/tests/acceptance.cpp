// Acceptance checks. `acceptance N` runs check N and prints one line
// `criterion N: PASS|FAIL|SKIP <details>`; exit status 0 on pass, 1 on
// failure, 77 when skipped. `acceptance all` runs every check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "ctxsp/cli.hpp"
#include "ctxsp/datagen.hpp"
#include "ctxsp/features.hpp"
#include "ctxsp/learner.hpp"
#include "ctxsp/parser.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace ctxsp;
using support::uniform_int;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Result {
  Verdict verdict;
  std::string detail;
};

Result verdict(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

constexpr Domain kDomains[] = {Domain::Alchemy, Domain::Scene, Domain::Tangrams};

// ---------------------------------------------------------------------------
// 1. exec_action against the naive reference interpreter

Value random_argument_value(ArgKind kind, const WorldState& w, Rng& rng) {
  switch (kind) {
    case ArgKind::Entity:
      if (w.domain() == Domain::Tangrams) return Value::entity(uniform_int(rng, 0, kNumShapes - 1));
      if (!w.entities().empty() && uniform_int(rng, 0, 9) != 0) {
        const auto& es = w.entities();
        return Value::entity(es[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(es.size()) - 1))].id);
      }
      return Value::entity(w.next_id() + 7);  // absent
    case ArgKind::Number: return Value::number(uniform_int(rng, -1, std::max<int>(w.slots(), w.entities().size()) + 2));
    case ArgKind::Color: return Value::color(static_cast<Color>(uniform_int(rng, 0, kNumColors - 1)));
  }
  return Value::none();
}

Result executor_oracle() {
  Rng rng(101);
  int accepted = 0;
  int mismatches = 0;
  std::string first;
  for (Domain d : kDomains) {
    for (int n = 0; n < 1000; ++n) {
      Context c = support::random_context(d, uniform_int(rng, 0, 6), rng);
      const WorldState& w = c.current();
      auto actions = domain_actions(d);
      ActionName a = actions[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(actions.size()) - 1))];
      const auto& sig = signature(a);
      std::vector<Value> args;
      for (int k = 0; k < sig.arity; ++k) args.push_back(random_argument_value(sig.kinds[static_cast<std::size_t>(k)], w, rng));
      auto got = exec_action(w, a, args);
      auto want = support::reference_exec(w, a, args);
      const bool same = got.ok() ? want && serialize_state(*got) == *want : !want;
      accepted += got.ok();
      if (!same && mismatches++ == 0) {
        first = serialize_state(w) + " " + std::string(to_string(a)) + ": got " +
                (got.ok() ? serialize_state(*got) : std::string(to_string(got.fault()))) + ", want " +
                (want ? *want : std::string("rejection"));
      }
    }
  }
  std::string detail = "3000 triples, " + std::to_string(accepted) + " executable, " + std::to_string(mismatches) +
                       " mismatches";
  if (!first.empty()) detail += "; first: " + first;
  return verdict(mismatches == 0, detail);
}

// ---------------------------------------------------------------------------
// 2. executing a derivation equals executing its A -> B -> C projection

Result commutation() {
  Rng rng(202);
  int executed = 0;
  int agreed_failures = 0;
  int mismatches = 0;
  std::string first;
  for (int attempt = 0; executed < 500 && attempt < 200000; ++attempt) {
    Domain d = kDomains[attempt % 3];
    Context c = support::random_context(d, uniform_int(rng, 0, 3), rng);
    NodePtr lf = support::random_root(c, rng);
    NodePtr anchored = support::map_leaves(lf, [&](const Node& leaf, int) {
      if (uniform_int(rng, 0, 2) == 0) return leaf.with_anchor(std::nullopt);
      int s = uniform_int(rng, 0, 7);
      return leaf.with_anchor(Span{s, s + uniform_int(rng, 0, 2)});
    });
    Derivation deriv{anchored};
    auto direct = execute_root(*deriv.root, c);
    auto flat = project_bc(*project_ab(deriv), c);
    std::optional<Outcome<ExecRecord>> projected;
    if (flat) projected = execute_root(*to_root(*flat, d), c);
    const bool projected_ok = projected && projected->ok();
    bool same = false;
    if (direct.ok()) {
      ++executed;
      same = projected_ok && (*projected)->result == direct->result &&
             serialize_state((*projected)->result) == serialize_state(direct->result);
    } else {
      same = !projected_ok;
      agreed_failures += same;
    }
    if (!same && mismatches++ == 0) first = render_anchored(*deriv.root) + " in " + serialize_state(c.current());
  }
  std::string detail = std::to_string(executed) + " executable derivations, " + std::to_string(agreed_failures) +
                       " failing on both sides, " + std::to_string(mismatches) + " mismatches";
  if (!first.empty()) detail += "; first: " + first;
  return verdict(executed >= 500 && mismatches == 0, detail);
}

// ---------------------------------------------------------------------------
// 3. mode-B features are the component-wise max over mode-A derivations

/// Every assignment of leaves to pairwise disjoint spans (or no span).
void enumerate_anchorings(int leaf, int leaves, int n_tokens, std::uint64_t used, std::vector<std::optional<Span>>& cur,
                          std::vector<std::vector<std::optional<Span>>>& out) {
  if (leaf == leaves) {
    out.push_back(cur);
    return;
  }
  cur[static_cast<std::size_t>(leaf)] = std::nullopt;
  enumerate_anchorings(leaf + 1, leaves, n_tokens, used, cur, out);
  for (int s = 0; s < n_tokens; ++s) {
    for (int len = 1; len <= kMaxNgram && s + len <= n_tokens; ++len) {
      std::uint64_t bits = ((1ULL << len) - 1) << s;
      if (used & bits) continue;
      cur[static_cast<std::size_t>(leaf)] = Span{s, s + len - 1};
      enumerate_anchorings(leaf + 1, leaves, n_tokens, used | bits, cur, out);
    }
  }
  cur[static_cast<std::size_t>(leaf)] = std::nullopt;
}

Result feature_projection() {
  Rng rng(303);
  const std::vector<std::string> vocab = {"pour", "it", "the", "red", "beaker", "into", "2", "mix", "then", "it"};
  const FeatureConfig cfg = FeatureConfig::all();
  int checked = 0;
  long derivations = 0;
  int mismatches = 0;
  std::string first;
  for (int attempt = 0; checked < 20 && attempt < 100000; ++attempt) {
    Domain d = kDomains[attempt % 3];
    Context c = support::random_context(d, uniform_int(rng, 1, 2), rng);
    NodePtr lf = support::random_root(c, rng);
    const int leaves = support::count_leaves(*lf);
    if (leaves > 5) continue;
    std::vector<std::string> tokens;
    const int n = uniform_int(rng, 1, 4);
    for (int k = 0; k < n; ++k) tokens.push_back(vocab[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(vocab.size()) - 1))]);
    Utterance x(tokens);
    auto floating = featurize_floating(*lf, x, c, cfg);
    if (!floating) continue;
    std::vector<std::vector<std::optional<Span>>> anchorings;
    std::vector<std::optional<Span>> cur(static_cast<std::size_t>(leaves));
    enumerate_anchorings(0, leaves, n, 0, cur, anchorings);
    std::vector<FeatureVector> vs;
    for (const auto& anchoring : anchorings) {
      NodePtr root = support::map_leaves(lf, [&](const Node& leaf, int i) {
        return leaf.with_anchor(anchoring[static_cast<std::size_t>(i)]);
      });
      auto fv = featurize_anchored(*root, x, c, cfg);
      if (!fv) {
        ++mismatches;
        break;
      }
      vs.push_back(std::move(fv).value());
    }
    derivations += static_cast<long>(vs.size());
    ++checked;
    if (vs.size() != anchorings.size()) continue;
    if (!(project_features(vs) == *floating) && mismatches++ == 0) {
      first = lf->text() + " on '";
      for (const auto& t : tokens) first += t + " ";
      first.back() = '\'';
    }
  }
  std::string detail = std::to_string(checked) + " utterances, " + std::to_string(derivations) +
                       " anchored derivations, " + std::to_string(mismatches) + " mismatches";
  if (!first.empty()) detail += "; first: " + first;
  return verdict(checked == 20 && mismatches == 0, detail);
}

// ---------------------------------------------------------------------------
// 4. candidate counts A >> B >> C

GeneratedData artificial_alchemy(int n_train, int n_test, std::uint64_t seed, int L = 1) {
  GenConfig g;
  g.domain = Domain::Alchemy;
  g.templates = TemplateSet::builtin(Domain::Alchemy);
  g.L = L;
  g.n_train = n_train;
  g.n_test = n_test;
  g.seed = seed;
  return gen_dataset(g);
}

/// Summed first-utterance candidates per mode at one shared beam width.
std::map<Mode, std::size_t> candidate_totals(const GeneratedData& data, int width) {
  const Params theta;
  std::map<Mode, std::size_t> total;
  for (const auto& e : data.train) {
    auto text = e.tokens();
    text.resize(1);
    for (Mode m : {Mode::A, Mode::B, Mode::C}) {
      BeamConfig beam;
      beam.mode = m;
      beam.intra = width;
      beam.inter = 5;
      beam.max_predicates = 8;
      total[m] += parse_text(text, e.w0, theta, beam, FeatureConfig::all()).candidates.at(0);
    }
  }
  return total;
}

Result search_space() {
  const auto data = artificial_alchemy(20, 1, 4);
  // The budget is wide enough that mode B is barely truncated, so counts
  // reflect the size of each space rather than the beam width. At width
  // 500 both A and B saturate and the ratio only measures branching.
  const int width = 10000;
  auto total = candidate_totals(data, width);
  auto narrow = candidate_totals(data, 500);
  const std::size_t a = total[Mode::A], b = total[Mode::B], c = total[Mode::C];
  auto ratio = [](std::size_t x, std::size_t y) { return fmt(static_cast<double>(x) / static_cast<double>(y)); };
  std::string detail = "candidates over 20 utterances at beam " + std::to_string(width) + ": A=" + std::to_string(a) +
                       " B=" + std::to_string(b) + " C=" + std::to_string(c) + " (A/B=" + ratio(a, b) +
                       ", B/C=" + ratio(b, c) + "); at beam 500 A/B=" + ratio(narrow[Mode::A], narrow[Mode::B]) +
                       " B/C=" + ratio(narrow[Mode::B], narrow[Mode::C]);
  return verdict(a >= 10 * b && b >= 10 * c, detail);
}

// ---------------------------------------------------------------------------
// 5. gradient against central finite differences

Result gradient_check() {
  Rng rng(505);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int keys = 8;
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = uniform_int(rng, 2, 6);
    std::vector<FeatureVector> phis(static_cast<std::size_t>(n));
    std::vector<bool> consistent(static_cast<std::size_t>(n), false);
    for (auto& f : phis) {
      for (int k = 0; k < keys; ++k)
        if (unit(rng) < 0.5) f.entries.emplace_back(static_cast<FeatureKey>(k + 1), unit(rng) < 0.5 ? 1.0 : 2.0 * unit(rng));
      f.normalize();
    }
    for (auto&& b : consistent) b = unit(rng) < 0.4;
    // at least one hypothesis on each side, or the gradient is identically zero
    const int yes = uniform_int(rng, 0, n - 1);
    const int no = (yes + uniform_int(rng, 1, n - 1)) % n;
    consistent[static_cast<std::size_t>(yes)] = true;
    consistent[static_cast<std::size_t>(no)] = false;
    Params theta;
    for (int k = 0; k < keys; ++k) theta.entry(static_cast<FeatureKey>(k + 1)).weight = gauss(rng);

    auto obj = beam_objective(phis, consistent, theta);
    if (!obj) return verdict(false, "objective undefined on a beam with a consistent hypothesis");
    const double h = 1e-5;
    double diff2 = 0.0, norm2 = 0.0;
    for (int k = 0; k < keys; ++k) {
      const FeatureKey key = static_cast<FeatureKey>(k + 1);
      Params plus = theta, minus = theta;
      plus.entry(key).weight += h;
      minus.entry(key).weight -= h;
      const double fd = (beam_objective(phis, consistent, plus)->value - beam_objective(phis, consistent, minus)->value) / (2 * h);
      const double g = obj->gradient.get(key);
      diff2 += (g - fd) * (g - fd);
      norm2 += std::max(g * g, fd * fd);
    }
    const double rel = norm2 > 0 ? std::sqrt(diff2 / norm2) : std::sqrt(diff2);
    worst = std::max(worst, rel);
    ++checked;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d parameter settings, largest relative error %.2e", checked, worst);
  return verdict(worst < 1e-5, buf);
}

// ---------------------------------------------------------------------------
// 6. learning curves on artificial alchemy

TrainConfig curve_config(Mode m, int beam, bool constraints) {
  TrainConfig tc;
  tc.iterations = 6;
  tc.curriculum = Curriculum::whole(6);
  tc.beam.mode = m;
  tc.beam.intra = beam;
  tc.beam.inter = beam;
  tc.beam.linguistic_constraints = constraints;
  tc.features = FeatureConfig::parse("F1-F3");
  return tc;
}

double test_accuracy(const GeneratedData& data, const TrainConfig& tc, Params init = {}) {
  auto trained = train(data.train, tc, std::move(init));
  return evaluate(data.test, trained.params, tc.beam, tc.features).at(0).accuracy;
}

Result learning_curves() {
  const auto data = artificial_alchemy(500, 500, 7);
  const double c40 = test_accuracy(data, curve_config(Mode::C, 40, false));
  const double a260 = test_accuracy(data, curve_config(Mode::A, 260, true));
  const double b260 = test_accuracy(data, curve_config(Mode::B, 260, false));
  const double c260 = test_accuracy(data, curve_config(Mode::C, 260, false));
  const double plain = test_accuracy(data, curve_config(Mode::A, 20, false));
  const Params c20 = train(data.train, curve_config(Mode::C, 20, false)).params;
  const double boot = test_accuracy(data, curve_config(Mode::A, 20, false), c20);

  const bool a = c40 >= 0.85;
  const bool b = a260 >= b260 && a260 >= c260;
  const bool c = boot >= plain + 0.20;
  std::string detail = std::string("(a) ") + (a ? "ok" : "FAIL") + " C@40=" + fmt(c40) + "; (b) " + (b ? "ok" : "FAIL") +
                       " A+constraints@260=" + fmt(a260) + " B@260=" + fmt(b260) + " C@260=" + fmt(c260) + "; (c) " +
                       (c ? "ok" : "FAIL") + " A@20 bootstrapped=" + fmt(boot) + " plain=" + fmt(plain);
  return verdict(a && b && c, detail);
}

// ---------------------------------------------------------------------------
// 7. oracle accuracy does not drop as the beam grows

Result oracle_monotonicity() {
  const auto data = artificial_alchemy(200, 200, 17, 2);
  const int beams[] = {40, 80, 160, 260};
  bool ok = true;
  std::string detail;
  for (Mode m : {Mode::A, Mode::B, Mode::C}) {
    TrainConfig tc;
    tc.iterations = 2;
    tc.curriculum = Curriculum::parse("1,2");
    tc.beam.mode = m;
    tc.beam.intra = 40;
    tc.beam.inter = 40;
    tc.features = FeatureConfig::parse("F1-F3");
    const Params theta = train(data.train, tc).params;
    detail += std::string(detail.empty() ? "" : "; ") + std::string(to_string(m)) + ":";
    double prev = -1.0;
    for (int k : beams) {
      BeamConfig beam = tc.beam;
      beam.intra = k;
      beam.inter = k;
      const double oracle = evaluate(data.test, theta, beam, tc.features).back().oracle;
      detail += " " + fmt(oracle);
      ok = ok && oracle >= prev;
      prev = oracle;
    }
  }
  return verdict(ok, "oracle at L=2 over beams 40/80/160/260, " + detail);
}

// ---------------------------------------------------------------------------
// 8. optional real-data trend check

Result real_data() {
  const char* dir = std::getenv("CTXSP_REAL_DATA");
  if (dir == nullptr || *dir == '\0') return {Verdict::Skip, "CTXSP_REAL_DATA not set"};
  std::string detail;
  bool ok = true;
  for (const char* domain : {"alchemy", "scene"}) {
    const fs::path base = fs::path(dir) / domain;
    if (!fs::exists(base / "train.jsonl") || !fs::exists(base / "test.jsonl"))
      return verdict(false, "expected " + (base / "train.jsonl").string() + " and test.jsonl");
    auto train_set = read_dataset_file((base / "train.jsonl").string());
    auto test_set = read_dataset_file((base / "test.jsonl").string());
    std::map<Mode, double> acc;
    for (Mode m : {Mode::B, Mode::C}) {
      TrainConfig tc;
      tc.beam.mode = m;
      const Params theta = train(train_set, tc).params;
      auto rows = evaluate(test_set, theta, tc.beam, tc.features, 5);
      acc[m] = rows.back().accuracy;
    }
    ok = ok && acc[Mode::C] > acc[Mode::B];
    detail += std::string(detail.empty() ? "" : "; ") + domain + " C=" + fmt(acc[Mode::C]) + " B=" + fmt(acc[Mode::B]);
  }
  return verdict(ok, "accuracy at L=5, " + detail);
}

// ---------------------------------------------------------------------------
// 9. reruns of every command are byte-identical

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string body = buf.str();
    if (entry.path().string().ends_with(".manifest.json")) {
      auto j = nlohmann::ordered_json::parse(body);
      j.erase("timings");
      body = j.dump(1);
    }
    files[fs::relative(entry.path(), dir).string()] = body;
  }
  return files;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"ctxsp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << "ctxsp " << args.front() << " failed: " << err.str();
  return code;
}

Result determinism() {
  const fs::path root = fs::temp_directory_path() / ("ctxsp-determinism-" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string data = (root / "data").string();
  const std::string model = (root / "model").string();
  const std::string train_set = data + "/train.jsonl";
  const std::string test_set = data + "/test.jsonl";
  const std::string model_file = model + "/model.txt";
  struct Step {
    std::string name;
    std::vector<std::string> args;
  };
  const std::vector<Step> steps = {
      {"generate", {"generate", "--domain", "scene", "--L", "2", "--n-train", "40", "--n-test", "20", "--seed", "3", "--out", data}},
      {"train", {"train", "--data", train_set, "--mode", "C", "--beam", "20", "--iterations", "2", "--seed", "3", "--out", model}},
      {"eval", {"eval", "--model", model_file, "--data", test_set, "--beam", "20", "--out", (root / "eval").string()}},
      {"parse", {"parse", "--model", model_file, "--data", test_set, "--beam", "20", "--trace", "--out", (root / "parse").string()}},
      {"inspect-features", {"inspect-features", "--data", train_set, "--out", (root / "inspect").string()}},
      {"inspect-features --model", {"inspect-features", "--model", model_file, "--top", "25", "--out", (root / "top").string()}},
  };
  std::map<std::string, std::string> first_run;
  std::vector<std::string> differing;
  for (int run = 0; run < 2; ++run) {
    for (const auto& step : steps) {
      if (run_cli(step.args) != 0) {
        fs::remove_all(root);
        return verdict(false, step.name + " exited with an error");
      }
    }
    auto files = snapshot(root);
    if (run == 0) {
      first_run = std::move(files);
      continue;
    }
    for (const auto& [path, body] : first_run) {
      auto it = files.find(path);
      if (it == files.end() || it->second != body) differing.push_back(path);
    }
    if (files.size() != first_run.size()) differing.push_back("(file set)");
  }
  fs::remove_all(root);
  std::string detail = std::to_string(steps.size()) + " commands, " + std::to_string(first_run.size()) + " files compared";
  if (!differing.empty()) {
    detail += "; differing:";
    for (const auto& p : differing) detail += " " + p;
  }
  return verdict(differing.empty(), detail);
}

struct Criterion {
  int number;
  Result (*run)();
};

constexpr Criterion kCriteria[] = {
    {1, executor_oracle},   {2, commutation},        {3, feature_projection},
    {4, search_space},      {5, gradient_check},     {6, learning_curves},
    {7, oracle_monotonicity}, {8, real_data},        {9, determinism},
};

int run_one(const Criterion& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Result r;
  try {
    r = c.run();
  } catch (const std::exception& e) {
    r = {Verdict::Fail, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const char* word = r.verdict == Verdict::Pass ? "PASS" : r.verdict == Verdict::Fail ? "FAIL" : "SKIP";
  std::printf("criterion %d: %s %s (%.1fs)\n", c.number, word, r.detail.c_str(), secs);
  std::fflush(stdout);
  return r.verdict == Verdict::Pass ? 0 : r.verdict == Verdict::Fail ? 1 : 77;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <1-9|all>\n");
    return 2;
  }
  const std::string which = argv[1];
  if (which == "all") {
    int failed = 0;
    for (const auto& c : kCriteria) failed += run_one(c) == 1;
    return failed ? 1 : 0;
  }
  for (const auto& c : kCriteria)
    if (std::to_string(c.number) == which) return run_one(c);
  std::fprintf(stderr, "unknown criterion '%s'\n", which.c_str());
  return 2;
}
