#include "ctxsp/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ctxsp {

int Curriculum::at(int iteration) const {
  if (prefix.empty()) return 0;
  std::size_t i = static_cast<std::size_t>(std::max(iteration, 1) - 1);
  return prefix[std::min(i, prefix.size() - 1)];
}

Curriculum Curriculum::two_stage() { return {{1, 1, 2, 2, 2, 2}}; }

Curriculum Curriculum::whole(int iterations) {
  return {std::vector<int>(static_cast<std::size_t>(std::max(iterations, 1)), 0)};
}

Curriculum Curriculum::parse(std::string_view s) {
  Curriculum c;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    std::string tok(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (tok == "full") {
      c.prefix.push_back(0);
    } else {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || tok.empty() || v < 1)
        throw std::invalid_argument("bad curriculum entry '" + tok + "'");
      c.prefix.push_back(v);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return c;
}

std::string Curriculum::to_string() const {
  std::string out;
  for (int p : prefix) {
    if (!out.empty()) out += ',';
    out += p == 0 ? std::string("full") : std::to_string(p);
  }
  return out;
}

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (l1 < 0) throw std::invalid_argument("l1 coefficient must be >= 0");
  if (!(eta > 0)) throw std::invalid_argument("step size must be positive");
  if (iterations > 0 && curriculum.prefix.empty()) throw std::invalid_argument("empty curriculum");
  beam.validate();
}

std::string TrainConfig::digest() const {
  char buf[64];
  std::string s = "iterations=" + std::to_string(iterations);
  std::snprintf(buf, sizeof buf, ";l1=%.17g;eta=%.17g", l1, eta);
  s += buf;
  s += ";curriculum=" + curriculum.to_string();
  s += ";mode=" + std::string(ctxsp::to_string(beam.mode));
  s += ";intra=" + std::to_string(beam.intra) + ";inter=" + std::to_string(beam.inter);
  s += ";B=" + std::to_string(beam.max_predicates);
  s += ";constraints=" + std::to_string(beam.linguistic_constraints ? 1 : 0);
  s += ";features=" + features.to_string() + ";seed=" + std::to_string(seed);
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s)));
  return buf;
}

std::optional<BeamObjective> beam_objective(std::span<const FeatureVector> phis,
                                            const std::vector<bool>& consistent, const Params& params) {
  if (phis.size() != consistent.size()) throw std::invalid_argument("beam_objective: size mismatch");
  if (std::find(consistent.begin(), consistent.end(), true) == consistent.end()) return std::nullopt;
  std::vector<double> scores;
  for (const auto& f : phis) scores.push_back(score(f, params));
  auto p = beam_softmax(scores);
  double zc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (consistent[i]) zc += p[i];
  // log sum_C p - log sum_N p, with sum_N p = 1.
  BeamObjective out;
  out.value = std::log(zc);
  for (std::size_t i = 0; i < p.size(); ++i) {
    double coef = (consistent[i] ? p[i] / zc : 0.0) - p[i];
    if (coef == 0.0) continue;
    for (const auto& [k, x] : phis[i].entries) out.gradient.entries.emplace_back(k, coef * x);
  }
  out.gradient.normalize();
  return out;
}

namespace {

constexpr double kAdaGradEpsilon = 1e-8;

double soft_threshold(double u, double shrink) {
  double w = std::copysign(std::max(0.0, std::abs(u) - shrink), u);
  return w == 0.0 ? 0.0 : w;  // no negative zero in model files
}

}  // namespace

void AdaGradL1::catch_up(Params::Entry& e, std::int64_t idle) const {
  if (idle <= 0 || l1_ == 0.0 || e.weight == 0.0) return;
  const double h = std::sqrt(e.accum) + kAdaGradEpsilon;
  e.weight = soft_threshold(e.weight, static_cast<double>(idle) * eta_ * l1_ / h);
}

void AdaGradL1::step(Params& params, const FeatureVector& gradient, std::span<const FeatureKey> touched) {
  ++t_;
  for (FeatureKey k : touched) {
    const double g = gradient.get(k);
    if (params.find(k) == nullptr && g == 0.0) continue;  // zero weight, nothing to shrink
    Params::Entry& e = params.entry(k);
    auto [it, fresh] = last_.try_emplace(k, 0);
    catch_up(e, t_ - 1 - it->second);
    it->second = t_;
    e.accum += g * g;
    const double h = std::sqrt(e.accum) + kAdaGradEpsilon;
    e.weight = soft_threshold(e.weight + eta_ * g / h, eta_ * l1_ / h);
    if (e.weight == 0.0 && e.accum == 0.0) {
      params.erase(k);
      last_.erase(k);
    }
  }
}

void AdaGradL1::flush(Params& params) {
  std::vector<FeatureKey> dead;
  for (const auto& [k, entry] : params.table()) {
    auto it = last_.find(k);
    const std::int64_t last = it == last_.end() ? 0 : it->second;
    Params::Entry& e = params.entry(k);
    catch_up(e, t_ - last);
    if (e.weight == 0.0 && e.accum == 0.0) dead.push_back(k);
  }
  for (FeatureKey k : dead) params.erase(k);
  last_.clear();
  t_ = 0;
}

namespace {

int effective_prefix(int wanted, const Example& e) {
  return wanted <= 0 || wanted > e.length() ? e.length() : wanted;
}

}  // namespace

TrainResult train(const std::vector<Example>& data, const TrainConfig& cfg, Params init,
                  const IterationCallback& on_iteration) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  TrainResult result;
  result.params = std::move(init);
  std::mt19937_64 rng(cfg.seed);
  AdaGradL1 opt(cfg.eta, cfg.l1);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int it = 1; it <= cfg.iterations; ++it) {
    std::shuffle(order.begin(), order.end(), rng);
    IterationMetrics m;
    m.iteration = it;
    m.prefix = cfg.curriculum.at(it);
    int correct = 0;
    int oracle = 0;
    for (std::size_t idx : order) {
      const Example& e = data[idx];
      const int n = effective_prefix(m.prefix, e);
      auto target = e.target(n);
      ++m.examples;
      if (!target) {
        ++m.skipped;
        continue;
      }
      auto text = e.tokens();
      text.resize(static_cast<std::size_t>(n));
      Parser parser(text, e.w0, result.params, cfg.beam, cfg.features);
      ParseResult parsed = parser.parse();
      if (parsed.failed()) {
        ++m.skipped;
        continue;
      }
      std::vector<FeatureVector> phis;
      std::vector<bool> consistent;
      for (const auto& h : parsed.beam) {
        phis.push_back(hypothesis_features(h, text, cfg.mode(), cfg.features));
        consistent.push_back(h.state() == *target);
      }
      if (consistent[0]) ++correct;
      auto obj = beam_objective(phis, consistent, result.params);
      if (!obj) {
        ++m.skipped;
        continue;
      }
      ++oracle;
      std::vector<FeatureKey> touched;
      for (const auto& f : phis)
        for (const auto& entry : f.entries) touched.push_back(entry.first);
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      opt.step(result.params, obj->gradient, touched);
    }
    opt.flush(result.params);
    m.accuracy = m.examples ? static_cast<double>(correct) / m.examples : 0.0;
    m.oracle = m.examples ? static_cast<double>(oracle) / m.examples : 0.0;
    result.metrics.push_back(m);
    if (on_iteration) on_iteration(m);
  }
  return result;
}

TrainResult bootstrap(const std::vector<Example>& data, const TrainConfig& cfg_c, const TrainConfig& cfg_a,
                      TrainResult* c_result) {
  if (cfg_c.mode() != Mode::C) throw std::invalid_argument("bootstrap: first stage must be mode C");
  if (cfg_a.mode() != Mode::A) throw std::invalid_argument("bootstrap: second stage must be mode A");
  TrainResult c = train(data, cfg_c);
  TrainResult a = train(data, cfg_a, c.params);
  if (c_result != nullptr) *c_result = std::move(c);
  return a;
}

std::vector<EvalRow> evaluate(const std::vector<Example>& data, const Params& params, const BeamConfig& beam,
                              const FeatureConfig& features, int max_L) {
  int longest = 0;
  for (const auto& e : data) longest = std::max(longest, e.length());
  if (max_L <= 0 || max_L > longest) max_L = longest;
  std::vector<EvalRow> rows(static_cast<std::size_t>(max_L));
  std::vector<int> correct(rows.size(), 0), oracle(rows.size(), 0), falloff(rows.size(), 0);
  for (int L = 1; L <= max_L; ++L) rows[static_cast<std::size_t>(L - 1)].L = L;

  for (const auto& e : data) {
    const int n = std::min(e.length(), max_L);
    std::vector<std::optional<WorldState>> targets;
    bool any = false;
    for (int L = 1; L <= n; ++L) {
      targets.push_back(e.target(L));
      any = any || targets.back().has_value();
    }
    if (!any) continue;
    auto text = e.tokens();
    text.resize(static_cast<std::size_t>(n));
    ParseResult parsed = parse_text(text, e.w0, params, beam, features);
    for (int L = 1; L <= n; ++L) {
      const auto& target = targets[static_cast<std::size_t>(L - 1)];
      if (!target) continue;
      const auto slot = static_cast<std::size_t>(L - 1);
      const auto& hyps = parsed.prefix_beams[slot];
      ++rows[slot].examples;
      const bool top = !hyps.empty() && hyps.front().state() == *target;
      const bool some = std::any_of(hyps.begin(), hyps.end(), [&](const Hypothesis& h) { return h.state() == *target; });
      correct[slot] += top;
      oracle[slot] += some;
      if (!top && !some) ++falloff[slot];
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int total = rows[i].examples;
    if (total == 0) continue;
    rows[i].accuracy = static_cast<double>(correct[i]) / total;
    rows[i].oracle = static_cast<double>(oracle[i]) / total;
    const int wrong = total - correct[i];
    rows[i].beam_falloff = wrong ? static_cast<double>(falloff[i]) / wrong : 0.0;
  }
  return rows;
}

}  // namespace ctxsp
