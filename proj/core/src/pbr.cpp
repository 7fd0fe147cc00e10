#include "rrl/pbr.hpp"

#include <cmath>
#include <stdexcept>

namespace rrl {

namespace {
constexpr double kNormFloor = 1e-12;
}

void PbrConfig::validate() const {
  if (q < 2) throw std::invalid_argument("pbr: q must be >= 2");
  if (lambda_prox < 0.0 || lambda_div < 0.0) {
    throw std::invalid_argument("pbr: lambda weights must be >= 0");
  }
  if (distance != "cosine") {
    throw std::invalid_argument("pbr: unsupported distance '" + distance + "'");
  }
}

SoftPrototypeBank::SoftPrototypeBank(int q, int dim, std::uint64_t seed) {
  if (q < 1 || dim < 1) {
    throw std::invalid_argument("prototype bank: q and dim must be >= 1");
  }
  RngStream rng(seed);
  Eigen::MatrixXd p(q, dim);
  for (int k = 0; k < q; ++k) {
    Eigen::VectorXd v(dim);
    double norm = 0.0;
    do {
      for (int j = 0; j < dim; ++j) v(j) = rng.normal();
      norm = v.norm();
    } while (norm < kNormFloor);
    p.row(k) = v.transpose() / norm;  // spherical draw
  }
  prototypes_ = ad::Var::param(std::move(p));
}

ad::Var SoftPrototypeBank::prototype(int k) const {
  if (k < 0 || k >= q()) throw std::out_of_range("prototype index out of range");
  return ad::lookup_row(prototypes_, k);
}

void SoftPrototypeBank::visit_params(
    const std::function<void(const std::string&, ad::Var&)>& fn) {
  fn("pbr.prototypes", prototypes_);
}

ad::Var cosine_distance(const ad::Var& a, const ad::Var& b) {
  if (a.cols() != 1 || b.cols() != 1 || a.rows() != b.rows()) {
    throw std::invalid_argument("cosine_distance: expects equal-length column vectors");
  }
  if (a.value().norm() < kNormFloor || b.value().norm() < kNormFloor) {
    throw std::invalid_argument("cosine_distance: zero-norm vector");
  }
  ad::Var na = ad::sqrt(ad::dot(a, a));
  ad::Var nb = ad::sqrt(ad::dot(b, b));
  ad::Var cos = ad::cdiv(ad::dot(a, b), ad::mul(na, nb));
  return ad::sub(ad::Var::scalar_const(1.0), cos);
}

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < kNormFloor || nb < kNormFloor) {
    throw std::invalid_argument("cosine_distance: zero-norm vector");
  }
  return 1.0 - a.dot(b) / (na * nb);
}

ad::Var prox_loss(const std::vector<ad::Var>& embeddings,
                  const SoftPrototypeBank& bank) {
  if (embeddings.empty()) {
    throw std::invalid_argument("prox_loss: no embeddings");
  }
  const Eigen::MatrixXd& protos = bank.prototypes().value();
  std::vector<ad::Var> nearest;
  nearest.reserve(embeddings.size());
  for (const auto& h : embeddings) {
    // Select the nearest prototype by value; only it enters the graph, so
    // the subgradient routes to a single (lowest-index) prototype.
    int best = 0;
    double best_d = cosine_distance(Eigen::VectorXd(h.value().col(0)),
                                    Eigen::VectorXd(protos.row(0).transpose()));
    for (int k = 1; k < bank.q(); ++k) {
      const double d = cosine_distance(Eigen::VectorXd(h.value().col(0)),
                                       Eigen::VectorXd(protos.row(k).transpose()));
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    nearest.push_back(cosine_distance(h, bank.prototype(best)));
  }
  ad::Var total = nearest[0];
  for (std::size_t i = 1; i < nearest.size(); ++i) total = ad::add(total, nearest[i]);
  return ad::scale(total, 1.0 / static_cast<double>(nearest.size()));
}

ad::Var div_loss(const SoftPrototypeBank& bank) {
  const int q = bank.q();
  if (q < 2) throw std::invalid_argument("div_loss: requires at least 2 prototypes");
  std::vector<ad::Var> pairs;
  pairs.reserve(static_cast<std::size_t>(q) * (q - 1) / 2);
  for (int k = 0; k < q; ++k) {
    for (int l = k + 1; l < q; ++l) {
      pairs.push_back(cosine_distance(bank.prototype(k), bank.prototype(l)));
    }
  }
  ad::Var total = pairs[0];
  for (std::size_t i = 1; i < pairs.size(); ++i) total = ad::add(total, pairs[i]);
  return ad::scale(total, 2.0 / (static_cast<double>(q) * (q - 1)));
}

ad::Var pbr_total_loss(const ad::Var& task_loss, const ad::Var& prox,
                       const ad::Var& div, const PbrConfig& cfg) {
  cfg.validate();
  return ad::sub(ad::add(task_loss, ad::scale(prox, cfg.lambda_prox)),
                 ad::scale(div, cfg.lambda_div));
}

}  // namespace rrl
