#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rrl/corpus.hpp"

namespace rrl {

/// Per-label confusion counts accumulated from hard (gold, predicted) label
/// index pairs. Support is the gold count of each label.
class ConfusionTally {
 public:
  explicit ConfusionTally(const LabelScheme& scheme);

  void add(int gold, int predicted);
  void add_sequence(const std::vector<int>& gold, const std::vector<int>& predicted);

  long tp(std::size_t label) const { return tp_[label]; }
  long fp(std::size_t label) const { return fp_[label]; }
  long fn(std::size_t label) const { return fn_[label]; }
  long support(std::size_t label) const { return support_[label]; }
  long total() const { return total_; }
  const LabelScheme& scheme() const { return scheme_; }

 private:
  LabelScheme scheme_;
  std::vector<long> tp_, fp_, fn_, support_;
  long total_ = 0;
};

/// F1 = 2tp / (2tp + fp + fn) per label; 0 when the denominator is 0.
std::map<std::string, double> per_class_f1(const ConfusionTally& tally);

/// Unweighted mean over every scheme label (labels absent from the data
/// contribute their 0).
double macro_f1(const std::map<std::string, double>& per_label);

/// Support-weighted mean; labels with zero support contribute nothing.
double weighted_f1(const std::map<std::string, double>& per_label,
                   const std::map<std::string, long>& support);

std::map<std::string, long> support_map(const ConfusionTally& tally);

/// Fleiss' kappa for an items x categories table of rater counts. Every row
/// must sum to the same rater count n >= 2. Returns 1 exactly when all
/// raters agree on all items.
double fleiss_kappa(const Eigen::MatrixXi& ratings);

/// Two-sided paired t-test over matched score lists.
struct SignificanceResult {
  double t_statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
  bool significant_at_05 = false;
  bool significant_at_01 = false;
};
SignificanceResult significance_test(const std::vector<double>& scores_a,
                                     const std::vector<double>& scores_b);

/// One evaluated run: per-label F1, aggregates and the fingerprint of the
/// configuration that produced it.
struct RunReport {
  std::uint64_t seed = 0;
  std::map<std::string, double> per_label_f1;
  std::map<std::string, long> support;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::string config_fingerprint;

  std::string to_json_string() const;
  static RunReport from_json_string(const std::string& s);
};

RunReport make_run_report(const ConfusionTally& tally, std::uint64_t seed,
                          const std::string& config_fingerprint);

/// Plain-text role-wise table: one row per label (support share and F1),
/// followed by the macro / weighted summary lines.
std::string render_report_table(const RunReport& report,
                                const LabelScheme& scheme);

}  // namespace rrl
