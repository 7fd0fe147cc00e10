#pragma once

// Linear-chain CRF over sentence label sequences, with virtual start/end
// states. Transition matrices are (L+2) x (L+2): entry (i, j) scores moving
// from state i to state j, where indices 0..L-1 are labels, L is the start
// state and L+1 the end state.

#include <cstdint>
#include <functional>
#include <vector>

#include "rrl/autodiff.hpp"

namespace rrl {

inline Eigen::Index crf_start_state(Eigen::Index num_labels) { return num_labels; }
inline Eigen::Index crf_end_state(Eigen::Index num_labels) { return num_labels + 1; }

/// Sequence negative log-likelihood: log Z - score(gold). Emissions are
/// m x L (one row per sentence); transitions are (L+2) x (L+2). The result
/// is differentiable in both.
ad::Var crf_neg_log_likelihood(const ad::Var& emissions, const ad::Var& transitions,
                               const std::vector<int>& gold);

/// Viterbi decode. Ties are broken toward the lowest label index, so an
/// all-equal score table decodes to all zeros.
std::vector<int> crf_decode(const Eigen::MatrixXd& emissions,
                            const Eigen::MatrixXd& transitions);

/// Score of one explicit path under (emissions, transitions); shared by the
/// decoder contract and by exhaustive-enumeration oracles.
double crf_path_score(const Eigen::MatrixXd& emissions,
                      const Eigen::MatrixXd& transitions,
                      const std::vector<int>& path);

/// Emission projection plus transition table. Owns the trainable CRF
/// parameters; the NLL/decode free functions above do the math.
class CrfLayer {
 public:
  CrfLayer(int input_dim, int num_labels, std::uint64_t seed);

  /// Projects contextualized sentence vectors (d x 1 each) to an m x L
  /// emission matrix.
  ad::Var emissions(const std::vector<ad::Var>& states) const;

  ad::Var neg_log_likelihood(const ad::Var& emissions,
                             const std::vector<int>& gold) const;
  std::vector<int> decode(const Eigen::MatrixXd& emissions) const;

  /// Per-sentence cross-entropy over emission softmaxes; the non-structured
  /// alternative objective (decode then degenerates to row-wise argmax,
  /// which crf_decode yields under zero transitions).
  ad::Var cross_entropy(const ad::Var& emissions,
                        const std::vector<int>& gold) const;

  int num_labels() const { return num_labels_; }
  const ad::Var& transitions() const { return transitions_; }
  void visit_params(const std::function<void(const std::string&, ad::Var&)>& fn);

 private:
  int num_labels_;
  ad::Var proj_w_;       // L x d
  ad::Var proj_b_;       // L x 1
  ad::Var transitions_;  // (L+2) x (L+2)
};

}  // namespace rrl
