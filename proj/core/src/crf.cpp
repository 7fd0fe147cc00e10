#include "rrl/crf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rrl/util.hpp"

namespace rrl {

namespace {

void check_inputs(Eigen::Index m, Eigen::Index L, const Eigen::MatrixXd& trans) {
  if (m < 1) throw std::invalid_argument("crf: empty sequence");
  if (trans.rows() != L + 2 || trans.cols() != L + 2) {
    throw std::invalid_argument("crf: transitions must be (L+2) x (L+2)");
  }
}

void check_gold(const std::vector<int>& gold, Eigen::Index m, Eigen::Index L) {
  if (static_cast<Eigen::Index>(gold.size()) != m) {
    throw std::invalid_argument("crf: gold length mismatch");
  }
  for (int y : gold) {
    if (y < 0 || y >= L) throw std::invalid_argument("crf: label index out of range");
  }
}

}  // namespace

ad::Var crf_neg_log_likelihood(const ad::Var& emissions, const ad::Var& transitions,
                               const std::vector<int>& gold) {
  const Eigen::Index m = emissions.rows();
  const Eigen::Index L = emissions.cols();
  check_inputs(m, L, transitions.value());
  check_gold(gold, m, L);
  const Eigen::Index start = crf_start_state(L);
  const Eigen::Index end = crf_end_state(L);

  // Forward recursion in log space. alpha is L x 1.
  const ad::Var label_trans = ad::block(transitions, 0, 0, L, L);
  ad::Var alpha = ad::add(ad::transpose(ad::rows(emissions, 0, 1)),
                          ad::transpose(ad::block(transitions, start, 0, 1, L)));
  for (Eigen::Index t = 1; t < m; ++t) {
    ad::Var scores = ad::add(ad::broadcast_cols(alpha, L), label_trans);
    alpha = ad::add(ad::transpose(ad::colwise_logsumexp(scores)),
                    ad::transpose(ad::rows(emissions, t, 1)));
  }
  const ad::Var log_z =
      ad::logsumexp(ad::add(alpha, ad::block(transitions, 0, end, L, 1)));

  // Gold path score via one-hot masks: keeps the graph at two nodes no
  // matter how long the sequence is.
  Eigen::MatrixXd emit_mask = Eigen::MatrixXd::Zero(m, L);
  Eigen::MatrixXd trans_mask = Eigen::MatrixXd::Zero(L + 2, L + 2);
  trans_mask(start, gold[0]) += 1.0;
  for (Eigen::Index t = 0; t < m; ++t) {
    emit_mask(t, gold[t]) += 1.0;
    if (t + 1 < m) trans_mask(gold[t], gold[t + 1]) += 1.0;
  }
  trans_mask(gold[m - 1], end) += 1.0;
  const ad::Var gold_score = ad::add(ad::mask_sum(emissions, emit_mask),
                                     ad::mask_sum(transitions, trans_mask));
  return ad::sub(log_z, gold_score);
}

std::vector<int> crf_decode(const Eigen::MatrixXd& emissions,
                            const Eigen::MatrixXd& transitions) {
  const Eigen::Index m = emissions.rows();
  const Eigen::Index L = emissions.cols();
  check_inputs(m, L, transitions);
  const Eigen::Index start = crf_start_state(L);
  const Eigen::Index end = crf_end_state(L);

  Eigen::VectorXd score =
      emissions.row(0).transpose() + transitions.row(start).segment(0, L).transpose();
  Eigen::MatrixXi back(m, L);
  for (Eigen::Index t = 1; t < m; ++t) {
    Eigen::VectorXd next(L);
    for (Eigen::Index j = 0; j < L; ++j) {
      int best_i = 0;
      double best = score(0) + transitions(0, j);
      for (Eigen::Index i = 1; i < L; ++i) {
        const double s = score(i) + transitions(i, j);
        if (s > best) {  // strict: ties keep the lowest previous label
          best = s;
          best_i = static_cast<int>(i);
        }
      }
      next(j) = best + emissions(t, j);
      back(t, j) = best_i;
    }
    score = next;
  }
  score += transitions.col(end).segment(0, L);

  int last = 0;
  double best = score(0);
  for (Eigen::Index j = 1; j < L; ++j) {
    if (score(j) > best) {
      best = score(j);
      last = static_cast<int>(j);
    }
  }
  std::vector<int> path(m);
  path[m - 1] = last;
  for (Eigen::Index t = m - 1; t > 0; --t) path[t - 1] = back(t, path[t]);
  return path;
}

double crf_path_score(const Eigen::MatrixXd& emissions,
                      const Eigen::MatrixXd& transitions,
                      const std::vector<int>& path) {
  const Eigen::Index m = emissions.rows();
  const Eigen::Index L = emissions.cols();
  check_inputs(m, L, transitions);
  check_gold(path, m, L);
  double s = transitions(crf_start_state(L), path[0]);
  for (Eigen::Index t = 0; t < m; ++t) {
    s += emissions(t, path[t]);
    if (t + 1 < m) s += transitions(path[t], path[t + 1]);
  }
  s += transitions(path[m - 1], crf_end_state(L));
  return s;
}

CrfLayer::CrfLayer(int input_dim, int num_labels, std::uint64_t seed)
    : num_labels_(num_labels) {
  if (input_dim < 1 || num_labels < 1) {
    throw std::invalid_argument("crf layer: dims must be positive");
  }
  RngStream rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(input_dim));
  Eigen::MatrixXd w(num_labels, input_dim);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.normal(0.0, s);
  }
  proj_w_ = ad::Var::param(w);
  proj_b_ = ad::Var::param(Eigen::MatrixXd::Zero(num_labels, 1));
  transitions_ =
      ad::Var::param(Eigen::MatrixXd::Zero(num_labels + 2, num_labels + 2));
}

ad::Var CrfLayer::emissions(const std::vector<ad::Var>& states) const {
  if (states.empty()) throw std::invalid_argument("crf layer: no states");
  std::vector<ad::Var> rows;
  rows.reserve(states.size());
  for (const auto& s : states) {
    rows.push_back(ad::transpose(
        ad::add(ad::matmul(proj_w_, s), proj_b_)));
  }
  return ad::vcat(rows);  // m x L
}

ad::Var CrfLayer::neg_log_likelihood(const ad::Var& emissions,
                                     const std::vector<int>& gold) const {
  return crf_neg_log_likelihood(emissions, transitions_, gold);
}

std::vector<int> CrfLayer::decode(const Eigen::MatrixXd& emissions) const {
  return crf_decode(emissions, transitions_.value());
}

ad::Var CrfLayer::cross_entropy(const ad::Var& emissions,
                                const std::vector<int>& gold) const {
  const Eigen::Index m = emissions.rows();
  const Eigen::Index L = emissions.cols();
  check_gold(gold, m, L);
  // -sum_t log softmax(e_t)[y_t] = sum_t (logsumexp(e_t) - e_t[y_t])
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(m, L);
  for (Eigen::Index t = 0; t < m; ++t) mask(t, gold[t]) = 1.0;
  ad::Var lse_sum = ad::sum(ad::colwise_logsumexp(ad::transpose(emissions)));
  return ad::sub(lse_sum, ad::mask_sum(emissions, mask));
}

void CrfLayer::visit_params(
    const std::function<void(const std::string&, ad::Var&)>& fn) {
  fn("crf.proj_w", proj_w_);
  fn("crf.proj_b", proj_b_);
  fn("crf.transitions", transitions_);
}

}  // namespace rrl
