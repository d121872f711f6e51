#pragma once

// Correlation metrics and the two subtask scores.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/core/numeric.hpp"
#include "xlsim/dataset.hpp"
#include "xlsim/scoring.hpp"

namespace xlsim {

/// A correlation is not defined for the input (zero variance or zero norm).
class UndefinedCorrelation : public DataError {
 public:
  explicit UndefinedCorrelation(const std::string& what) : DataError("undefined correlation: " + what) {}
};

struct PairedSeries {
  std::vector<double> predicted;
  std::vector<double> gold;
  std::vector<std::string> ids;  // optional; parallel to the values when present

  std::size_t size() const noexcept { return predicted.size(); }

  void validate() const {
    if (predicted.size() != gold.size()) throw DataError("paired series have different lengths");
    if (!ids.empty() && ids.size() != predicted.size()) throw DataError("paired series ids have the wrong length");
    if (predicted.size() < 2) throw DataError("paired series need at least 2 points");
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      if (std::isnan(predicted[i]) || std::isnan(gold[i])) throw DataError("paired series contain NaN");
    }
  }
};

namespace detail {

inline double mean(const std::vector<double>& xs) {
  return numeric::sum(xs) / static_cast<double>(xs.size());
}

/// Σ (x-mx)(y-my), Σ (x-mx)², Σ (y-my)² with compensated accumulation.
inline std::array<double, 3> centered_moments(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x);
  const double my = mean(y);
  numeric::CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  return {sxy.value(), sxx.value(), syy.value()};
}

/// sxy / sqrt(sxx * syy). One square root keeps identical series at exactly 1;
/// the split form is the fallback when the product leaves the double range.
inline double normalized(double sxy, double sxx, double syy) {
  const double prod = sxx * syy;
  if (std::isfinite(prod) && prod > 0) return numeric::clamp_unit(sxy / std::sqrt(prod));
  return normalized(sxy, sxx, syy);
}

inline double pearson_raw(const std::vector<double>& x, const std::vector<double>& y) {
  const auto [sxy, sxx, syy] = centered_moments(x, y);
  if (!(sxx > 0) || !(syy > 0)) throw UndefinedCorrelation("a series has zero variance");
  return normalized(sxy, sxx, syy);
}

}  // namespace detail

/// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const PairedSeries& s) {
  s.validate();
  return detail::pearson_raw(s.predicted, s.gold);
}

inline double spearman(const PairedSeries& s) {
  s.validate();
  return detail::pearson_raw(average_ranks(s.predicted), average_ranks(s.gold));
}

/// Cosine of the raw vectors; no mean subtraction.
inline double uncentered_pearson(const PairedSeries& s) {
  s.validate();
  numeric::CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < s.size(); ++i) {
    sxy.add(s.predicted[i] * s.gold[i]);
    sxx.add(s.predicted[i] * s.predicted[i]);
    syy.add(s.gold[i] * s.gold[i]);
  }
  if (!(sxx.value() > 0) || !(syy.value() > 0)) throw UndefinedCorrelation("a series has zero norm");
  return detail::normalized(sxy.value(), sxx.value(), syy.value());
}

inline double harmonic_mean(double p, double s) {
  if (p + s == 0.0) throw UndefinedCorrelation("harmonic mean with p + s == 0");
  return 2.0 * p * s / (p + s);
}

/// How the subtask 2 series is assembled.
enum class Pooling {
  pooled,            // context 1 entries then context 2 entries, one correlation
  per_context_mean,  // correlations per context, averaged, then combined
};

inline Pooling parse_pooling(const std::string& s) {
  if (s == "pooled") return Pooling::pooled;
  if (s == "per-context") return Pooling::per_context_mean;
  throw UsageError("unknown pooling '" + s + "' (expected pooled or per-context)");
}

inline std::string to_string(Pooling p) { return p == Pooling::pooled ? "pooled" : "per-context"; }

struct EvalReport {
  int subtask = 1;
  std::string metric;  // headline metric name
  double value = 0.0;
  std::size_t n = 0;
  std::vector<std::pair<std::string, double>> components;  // in report order
  std::vector<std::string> flags;

  bool has_flag(const std::string& f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["subtask"] = subtask;
    j["metric"] = metric;
    j["value"] = value;
    j["n"] = n;
    for (const auto& [k, v] : components) j[k] = v;
    j["flags"] = flags;
    return j;
  }

  /// One machine-readable line.
  std::string jsonl() const { return to_json().dump(); }

  /// Aligned two-column text for humans.
  std::string table() const {
    std::ostringstream out;
    auto row = [&](const std::string& k, const std::string& v) {
      out << k << std::string(k.size() < 20 ? 20 - k.size() : 1, ' ') << v << '\n';
    };
    row("subtask", std::to_string(subtask));
    row("metric", metric);
    row("value", numeric::format_double(value));
    row("n", std::to_string(n));
    for (const auto& [k, v] : components) row(k, numeric::format_double(v));
    row("flags", flags.empty() ? "-" : text::join(flags, ","));
    return out.str();
  }
};

namespace detail {

inline std::map<std::string, const Instance*> gold_index(const std::vector<Instance>& gold) {
  std::map<std::string, const Instance*> out;
  for (const auto& g : gold) {
    if (!out.emplace(g.id, &g).second) throw DataError("duplicate gold id '" + g.id + "'");
  }
  return out;
}

inline const GoldScores& gold_for(const std::map<std::string, const Instance*>& index, const std::string& id) {
  const auto it = index.find(id);
  if (it == index.end()) throw DataError("prediction id '" + id + "' is not in the gold set");
  if (!it->second->gold) throw DataError("gold scores missing for id '" + id + "'");
  return *it->second->gold;
}

inline void coverage_flag(EvalReport& r, std::size_t predicted, const std::vector<Instance>& gold) {
  if (predicted < gold.size()) r.flags.push_back("partial-coverage");
}

inline void harmonic_report(EvalReport& r, double p, double s) {
  r.value = harmonic_mean(p, s);
  r.components = {{"pearson", p}, {"spearman", s}, {"harmonic_mean", r.value}};
  if (p <= 0 || s <= 0) r.flags.push_back("non-interpretable");
}

}  // namespace detail

/// Subtask 1: uncentered Pearson over the predicted and gold changes
/// (gold change = gold_sim2 - gold_sim1).
inline EvalReport evaluate_subtask1(const std::map<std::string, double>& change, const std::vector<Instance>& gold) {
  const auto index = detail::gold_index(gold);
  PairedSeries s;
  for (const auto& [id, d] : change) {
    const auto& g = detail::gold_for(index, id);
    s.ids.push_back(id);
    s.predicted.push_back(d);
    s.gold.push_back(g.sim2_mean - g.sim1_mean);
  }
  EvalReport r;
  r.subtask = 1;
  r.metric = "uncentered_pearson";
  r.n = s.size();
  r.value = uncentered_pearson(s);
  r.components = {{"uncentered_pearson", r.value}};
  detail::coverage_flag(r, change.size(), gold);
  return r;
}

/// Subtask 2: harmonic mean of Pearson and Spearman over the per-context
/// similarities.
inline EvalReport evaluate_subtask2(const std::map<std::string, std::pair<double, double>>& sims,
                                    const std::vector<Instance>& gold, Pooling pooling = Pooling::pooled) {
  const auto index = detail::gold_index(gold);
  PairedSeries c1, c2;
  for (const auto& [id, v] : sims) {
    const auto& g = detail::gold_for(index, id);
    c1.ids.push_back(id);
    c1.predicted.push_back(v.first);
    c1.gold.push_back(g.sim1_mean);
    c2.ids.push_back(id);
    c2.predicted.push_back(v.second);
    c2.gold.push_back(g.sim2_mean);
  }
  EvalReport r;
  r.subtask = 2;
  r.metric = "harmonic_mean";
  if (pooling == Pooling::pooled) {
    PairedSeries all = c1;
    all.ids.insert(all.ids.end(), c2.ids.begin(), c2.ids.end());
    all.predicted.insert(all.predicted.end(), c2.predicted.begin(), c2.predicted.end());
    all.gold.insert(all.gold.end(), c2.gold.begin(), c2.gold.end());
    r.n = all.size();
    detail::harmonic_report(r, pearson(all), spearman(all));
  } else {
    r.n = c1.size() + c2.size();
    detail::harmonic_report(r, (pearson(c1) + pearson(c2)) / 2.0, (spearman(c1) + spearman(c2)) / 2.0);
    r.flags.push_back("per-context-pooling");
  }
  detail::coverage_flag(r, sims.size(), gold);
  return r;
}

inline EvalReport evaluate(const Predictions& preds, const std::vector<Instance>& gold,
                           Pooling pooling = Pooling::pooled) {
  return preds.subtask == 1 ? evaluate_subtask1(preds.change, gold) : evaluate_subtask2(preds.sims, gold, pooling);
}

/// Evaluates score sheets directly for the given subtask.
inline EvalReport evaluate_sheets(const std::vector<ScoreSheet>& sheets, const std::vector<Instance>& gold,
                                  int subtask, Pooling pooling = Pooling::pooled) {
  if (subtask == 1) return evaluate_subtask1(predict_subtask1(sheets), gold);
  if (subtask == 2) return evaluate_subtask2(predict_subtask2(sheets), gold, pooling);
  throw UsageError("subtask must be 1 or 2");
}

}  // namespace xlsim
