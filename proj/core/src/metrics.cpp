#include "rrl/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

namespace rrl {

using nlohmann::json;

ConfusionTally::ConfusionTally(const LabelScheme& scheme)
    : scheme_(scheme),
      tp_(scheme.size(), 0),
      fp_(scheme.size(), 0),
      fn_(scheme.size(), 0),
      support_(scheme.size(), 0) {}

void ConfusionTally::add(int gold, int predicted) {
  const int n = static_cast<int>(scheme_.size());
  if (gold < 0 || gold >= n || predicted < 0 || predicted >= n) {
    throw std::invalid_argument("confusion tally: label index out of range");
  }
  ++support_[gold];
  ++total_;
  if (gold == predicted) {
    ++tp_[gold];
  } else {
    ++fn_[gold];
    ++fp_[predicted];
  }
}

void ConfusionTally::add_sequence(const std::vector<int>& gold,
                                  const std::vector<int>& predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("confusion tally: sequence length mismatch");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) add(gold[i], predicted[i]);
}

std::map<std::string, double> per_class_f1(const ConfusionTally& tally) {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < tally.scheme().size(); ++i) {
    const double denom =
        static_cast<double>(2 * tally.tp(i) + tally.fp(i) + tally.fn(i));
    out[tally.scheme().label_at(i)] =
        denom > 0.0 ? 2.0 * static_cast<double>(tally.tp(i)) / denom : 0.0;
  }
  return out;
}

double macro_f1(const std::map<std::string, double>& per_label) {
  if (per_label.empty()) throw std::invalid_argument("macro_f1: empty label set");
  double sum = 0.0;
  for (const auto& [label, f1] : per_label) sum += f1;
  return sum / static_cast<double>(per_label.size());
}

double weighted_f1(const std::map<std::string, double>& per_label,
                   const std::map<std::string, long>& support) {
  if (per_label.empty()) {
    throw std::invalid_argument("weighted_f1: empty label set");
  }
  double total = 0.0;
  double sum = 0.0;
  for (const auto& [label, f1] : per_label) {
    auto it = support.find(label);
    const long s = it == support.end() ? 0 : it->second;
    sum += f1 * static_cast<double>(s);
    total += static_cast<double>(s);
  }
  if (total <= 0.0) throw std::invalid_argument("weighted_f1: zero total support");
  return sum / total;
}

std::map<std::string, long> support_map(const ConfusionTally& tally) {
  std::map<std::string, long> out;
  for (std::size_t i = 0; i < tally.scheme().size(); ++i) {
    out[tally.scheme().label_at(i)] = tally.support(i);
  }
  return out;
}

double fleiss_kappa(const Eigen::MatrixXi& ratings) {
  const Eigen::Index items = ratings.rows();
  const Eigen::Index cats = ratings.cols();
  if (items < 1 || cats < 1) {
    throw std::invalid_argument("fleiss_kappa: empty rating table");
  }
  const long n = ratings.row(0).sum();
  if (n < 2) throw std::invalid_argument("fleiss_kappa: needs >= 2 raters");
  for (Eigen::Index i = 0; i < items; ++i) {
    if (ratings.row(i).minCoeff() < 0) {
      throw std::invalid_argument("fleiss_kappa: negative count");
    }
    if (ratings.row(i).sum() != n) {
      throw std::invalid_argument(
          "fleiss_kappa: every item must have the same rater count");
    }
  }

  // Observed agreement per item, averaged.
  double p_bar = 0.0;
  for (Eigen::Index i = 0; i < items; ++i) {
    long same = 0;
    for (Eigen::Index j = 0; j < cats; ++j) {
      const long c = ratings(i, j);
      same += c * (c - 1);
    }
    p_bar += static_cast<double>(same) / static_cast<double>(n * (n - 1));
  }
  p_bar /= static_cast<double>(items);

  // Chance agreement from the marginal category distribution.
  double p_e = 0.0;
  for (Eigen::Index j = 0; j < cats; ++j) {
    const double pj = static_cast<double>(ratings.col(j).sum()) /
                      static_cast<double>(items * n);
    p_e += pj * pj;
  }

  if (1.0 - p_e < 1e-15) return 1.0;  // all mass in one category
  return (p_bar - p_e) / (1.0 - p_e);
}

SignificanceResult significance_test(const std::vector<double>& scores_a,
                                     const std::vector<double>& scores_b) {
  if (scores_a.size() != scores_b.size()) {
    throw std::invalid_argument("significance_test: score list length mismatch");
  }
  const std::size_t n = scores_a.size();
  if (n < 2) {
    throw std::invalid_argument("significance_test: needs at least 2 paired scores");
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += scores_a[i] - scores_b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = scores_a[i] - scores_b[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  SignificanceResult res;
  res.degrees_of_freedom = static_cast<int>(n) - 1;
  if (sd == 0.0) {
    // Zero variance: identical differences. Identical lists are maximally
    // non-significant; a constant nonzero shift is a complete separation.
    res.t_statistic = mean == 0.0 ? 0.0
                      : std::numeric_limits<double>::infinity() *
                            (mean > 0.0 ? 1.0 : -1.0);
    res.p_value = mean == 0.0 ? 1.0 : 0.0;
  } else {
    res.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
    boost::math::students_t dist(static_cast<double>(res.degrees_of_freedom));
    res.p_value = 2.0 * boost::math::cdf(dist, -std::abs(res.t_statistic));
  }
  res.significant_at_05 = res.p_value < 0.05;
  res.significant_at_01 = res.p_value < 0.01;
  return res;
}

RunReport make_run_report(const ConfusionTally& tally, std::uint64_t seed,
                          const std::string& config_fingerprint) {
  RunReport r;
  r.seed = seed;
  r.per_label_f1 = per_class_f1(tally);
  r.support = support_map(tally);
  r.macro_f1 = macro_f1(r.per_label_f1);
  r.weighted_f1 = weighted_f1(r.per_label_f1, r.support);
  r.config_fingerprint = config_fingerprint;
  return r;
}

std::string RunReport::to_json_string() const {
  json j;
  j["seed"] = seed;
  j["per_label_f1"] = per_label_f1;
  j["support"] = support;
  j["macro_f1"] = macro_f1;
  j["weighted_f1"] = weighted_f1;
  j["config_fingerprint"] = config_fingerprint;
  return j.dump(2);
}

RunReport RunReport::from_json_string(const std::string& s) {
  json j = json::parse(s);
  RunReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.per_label_f1 = j.at("per_label_f1").get<std::map<std::string, double>>();
  r.support = j.at("support").get<std::map<std::string, long>>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.weighted_f1 = j.at("weighted_f1").get<double>();
  r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  return r;
}

std::string render_report_table(const RunReport& report,
                                const LabelScheme& scheme) {
  std::size_t width = 12;
  for (const auto& label : scheme.labels()) width = std::max(width, label.size());
  long total = 0;
  for (const auto& [label, s] : report.support) total += s;

  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-*s  %7s  %7s\n",
                static_cast<int>(width), "Label", "%", "F1");
  out << line;
  out << std::string(width + 18, '-') << "\n";
  for (const auto& label : scheme.labels()) {
    const double f1 = report.per_label_f1.count(label)
                          ? report.per_label_f1.at(label)
                          : 0.0;
    const long s = report.support.count(label) ? report.support.at(label) : 0;
    const double pct =
        total > 0 ? 100.0 * static_cast<double>(s) / static_cast<double>(total)
                  : 0.0;
    std::snprintf(line, sizeof(line), "%-*s  %6.1f%%  %7.2f\n",
                  static_cast<int>(width), label.c_str(), pct, 100.0 * f1);
    out << line;
  }
  out << std::string(width + 18, '-') << "\n";
  std::snprintf(line, sizeof(line), "%-*s  %7s  %7.2f\n",
                static_cast<int>(width), "Macro-F1", "", 100.0 * report.macro_f1);
  out << line;
  std::snprintf(line, sizeof(line), "%-*s  %7s  %7.2f\n",
                static_cast<int>(width), "Weighted-F1", "",
                100.0 * report.weighted_f1);
  out << line;
  return out.str();
}

}  // namespace rrl
