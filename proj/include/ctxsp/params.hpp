#pragma once

// Log-linear parameters: weights plus AdaGrad accumulators, scoring, the
// beam-normalized softmax and the model file format.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "ctxsp/features.hpp"

namespace ctxsp {

class Params {
 public:
  struct Entry {
    double weight = 0.0;
    double accum = 0.0;  // sum of squared gradients
  };

  double weight(FeatureKey k) const {
    auto it = table_.find(k);
    return it == table_.end() ? 0.0 : it->second.weight;
  }
  const Entry* find(FeatureKey k) const {
    auto it = table_.find(k);
    return it == table_.end() ? nullptr : &it->second;
  }
  Entry& entry(FeatureKey k) { return table_[k]; }
  void erase(FeatureKey k) { table_.erase(k); }

  std::size_t size() const { return table_.size(); }
  bool empty() const { return table_.empty(); }
  const absl::flat_hash_map<FeatureKey, Entry>& table() const { return table_; }

  friend bool operator==(const Params& a, const Params& b);

 private:
  absl::flat_hash_map<FeatureKey, Entry> table_;
};

/// phi . theta
double score(const FeatureVector& fv, const Params& params);

/// exp(score) normalized over the hypotheses present on a beam; computed
/// with max-subtraction.
std::vector<double> beam_softmax(std::span<const double> scores);

struct ModelHeader {
  std::string mode;
  std::string config_digest;
  std::string features;  // optional; empty when absent
};

/// Text model file: `# ctxsp model v1`, `mode<TAB>..`, `config<TAB>..`,
/// optionally `features<TAB>..`, then `feature<TAB>weight<TAB>accumulator`
/// sorted by feature name.
void save_model(std::ostream& out, const Params& params, const ModelHeader& header);
/// Throws ParseError.
Params load_model(std::istream& in, ModelHeader* header = nullptr);

}  // namespace ctxsp
