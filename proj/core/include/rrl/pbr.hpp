#pragma once

// Soft-prototype regularization: a small bank of trainable vectors living in
// the sentence-embedding space, pulled toward sentence embeddings by a
// proximity term and pushed apart by a diversity term. The combined
// objective is  task + lambda_prox * prox - lambda_div * div.

#include <cstdint>
#include <functional>
#include <vector>

#include "rrl/autodiff.hpp"
#include "rrl/util.hpp"

namespace rrl {

struct PbrConfig {
  int q = 8;                 // prototype count
  double lambda_prox = 0.9;
  double lambda_div = 0.9;
  std::string distance = "cosine";

  void validate() const;
};

/// Q trainable prototypes, one per row. Initialized to random unit vectors.
class SoftPrototypeBank {
 public:
  SoftPrototypeBank(int q, int dim, std::uint64_t seed);

  int q() const { return static_cast<int>(prototypes_.rows()); }
  int dim() const { return static_cast<int>(prototypes_.cols()); }
  ad::Var& prototypes() { return prototypes_; }
  const ad::Var& prototypes() const { return prototypes_; }
  ad::Var prototype(int k) const;  // dim x 1

  void visit_params(const std::function<void(const std::string&, ad::Var&)>& fn);

 private:
  ad::Var prototypes_;  // q x dim
};

/// 1 - cos(a, b), in [0, 2]. Throws if either vector has near-zero norm
/// (cosine is undefined at the origin and would silently produce NaN).
ad::Var cosine_distance(const ad::Var& a, const ad::Var& b);
double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Mean over embeddings of the distance to the nearest prototype. The min is
/// evaluated on current values and gradient flows only to the selected
/// prototype (lowest index on ties).
ad::Var prox_loss(const std::vector<ad::Var>& embeddings,
                  const SoftPrototypeBank& bank);

/// Mean pairwise prototype distance over unordered pairs, in [0, 2].
/// Requires q >= 2.
ad::Var div_loss(const SoftPrototypeBank& bank);

/// task + lambda_prox * prox - lambda_div * div. The diversity term enters
/// negatively: spreading prototypes lowers the objective.
ad::Var pbr_total_loss(const ad::Var& task_loss, const ad::Var& prox,
                       const ad::Var& div, const PbrConfig& cfg);

}  // namespace rrl
