#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rrl/pbr.hpp"
#include "support/gradcheck.hpp"

using namespace rrl;

namespace {

ad::Var colvec(std::initializer_list<double> xs) {
  ad::Mat m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return ad::Var::constant(std::move(m));
}

SoftPrototypeBank bank_with(const std::vector<Eigen::VectorXd>& rows) {
  SoftPrototypeBank bank(static_cast<int>(rows.size()),
                         static_cast<int>(rows[0].size()), 0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    bank.prototypes().mutable_value().row(static_cast<Eigen::Index>(k)) =
        rows[k].transpose();
  }
  return bank;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("cosine distance values") {
  CHECK(ad::scalar(cosine_distance(colvec({1, 2, 3}), colvec({1, 2, 3}))) ==
        doctest::Approx(0.0));
  CHECK(ad::scalar(cosine_distance(colvec({1, 0}), colvec({0, 1}))) ==
        doctest::Approx(1.0));
  // (1,2) vs (2,1): 1 - 4/5
  CHECK(ad::scalar(cosine_distance(colvec({1, 2}), colvec({2, 1}))) ==
        doctest::Approx(0.2).epsilon(1e-12));
  // antipodal vectors hit the upper end of the range
  CHECK(ad::scalar(cosine_distance(colvec({1, 1}), colvec({-1, -1}))) ==
        doctest::Approx(2.0));
  CHECK_THROWS_AS(cosine_distance(colvec({0, 0}), colvec({1, 0})),
                  std::invalid_argument);
}

TEST_CASE("cosine distance is scale invariant") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = dist(rng);
      b(i) = dist(rng);
    }
    const double c = std::exp(dist(rng));  // positive scale
    CHECK(cosine_distance(Eigen::VectorXd(c * a), b) ==
          doctest::Approx(cosine_distance(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("prox loss") {
  SUBCASE("embeddings equal to prototypes give zero") {
    auto bank = bank_with({vec2(1, 0), vec2(0, 1)});
    std::vector<ad::Var> hs = {colvec({1, 0}), colvec({0, 1}), colvec({2, 0})};
    CHECK(ad::scalar(prox_loss(hs, bank)) == doctest::Approx(0.0));
  }
  SUBCASE("picks the nearest prototype") {
    // Query along x; prototypes at angles with cosine 0.8 and 0.5:
    // distances 0.2 and 0.5, min = 0.2.
    auto bank = bank_with({vec2(0.8, 0.6), vec2(0.5, std::sqrt(0.75))});
    std::vector<ad::Var> hs = {colvec({1, 0})};
    CHECK(ad::scalar(prox_loss(hs, bank)) == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("duplicating the embedding set leaves the mean unchanged") {
    auto bank = bank_with({vec2(1, 0), vec2(0, 1)});
    std::vector<ad::Var> hs = {colvec({3, 1}), colvec({-1, 2})};
    std::vector<ad::Var> doubled = hs;
    doubled.insert(doubled.end(), hs.begin(), hs.end());
    CHECK(ad::scalar(prox_loss(doubled, bank)) ==
          doctest::Approx(ad::scalar(prox_loss(hs, bank))).epsilon(1e-12));
  }
  SUBCASE("positive rescaling of embeddings changes nothing") {
    auto bank = bank_with({vec2(1, 0), vec2(0, 1)});
    std::vector<ad::Var> hs = {colvec({3, 1})};
    std::vector<ad::Var> scaled = {colvec({30, 10})};
    CHECK(ad::scalar(prox_loss(scaled, bank)) ==
          doctest::Approx(ad::scalar(prox_loss(hs, bank))).epsilon(1e-12));
  }
}

TEST_CASE("div loss") {
  SUBCASE("identical prototypes have zero diversity") {
    auto bank = bank_with({vec2(1, 1), vec2(1, 1)});
    CHECK(ad::scalar(div_loss(bank)) == doctest::Approx(0.0));
  }
  SUBCASE("orthogonal pair scores one") {
    auto bank = bank_with({vec2(1, 0), vec2(0, 1)});
    CHECK(ad::scalar(div_loss(bank)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("three prototypes with equal pairwise distance") {
    // Three unit vectors arranged symmetrically on a cone so every pair has
    // cosine 1/2 (needs three dimensions): distance 0.5 per pair.
    const double s = 1.0 / std::sqrt(3.0);
    const double c = std::sqrt(2.0 / 3.0);
    auto evec3 = [](double x, double y, double z) {
      Eigen::VectorXd v(3);
      v << x, y, z;
      return v;
    };
    auto bank = bank_with({evec3(s, 0, c),
                           evec3(-s / 2.0, s * std::sqrt(3.0) / 2.0, c),
                           evec3(-s / 2.0, -s * std::sqrt(3.0) / 2.0, c)});
    CHECK(ad::scalar(div_loss(bank)) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("single prototype is rejected") {
    SoftPrototypeBank bank(1, 2, 0);
    CHECK_THROWS_AS(div_loss(bank), std::invalid_argument);
  }
  SUBCASE("stays within [0, 2]") {
    for (int seed = 0; seed < 10; ++seed) {
      SoftPrototypeBank bank(4, 3, seed);
      const double d = ad::scalar(div_loss(bank));
      CHECK(d >= 0.0);
      CHECK(d <= 2.0);
    }
  }
}

TEST_CASE("total loss arithmetic") {
  PbrConfig cfg;
  SUBCASE("disabled regularizers reduce to the task loss exactly") {
    cfg.lambda_prox = 0.0;
    cfg.lambda_div = 0.0;
    ad::Var task = ad::Var::scalar_const(1.234567890123456);
    ad::Var total = pbr_total_loss(task, ad::Var::scalar_const(0.7),
                                   ad::Var::scalar_const(0.3), cfg);
    CHECK(ad::scalar(total) == 1.234567890123456);  // bitwise
  }
  SUBCASE("weighted combination") {
    cfg.lambda_prox = 0.9;
    cfg.lambda_div = 0.9;
    ad::Var total = pbr_total_loss(ad::Var::scalar_const(1.0),
                                   ad::Var::scalar_const(0.2),
                                   ad::Var::scalar_const(0.5), cfg);
    CHECK(ad::scalar(total) == doctest::Approx(0.73).epsilon(1e-12));
  }
  SUBCASE("diversity enters negatively") {
    cfg.lambda_prox = 0.0;
    cfg.lambda_div = 2.0;
    const double lo = ad::scalar(pbr_total_loss(ad::Var::scalar_const(1.0),
                                                ad::Var::scalar_const(0.0),
                                                ad::Var::scalar_const(0.8), cfg));
    const double hi = ad::scalar(pbr_total_loss(ad::Var::scalar_const(1.0),
                                                ad::Var::scalar_const(0.0),
                                                ad::Var::scalar_const(0.2), cfg));
    CHECK(lo < hi);
  }
  SUBCASE("negative weights are rejected") {
    cfg.lambda_prox = -0.1;
    CHECK_THROWS_AS(pbr_total_loss(ad::Var::scalar_const(1.0),
                                   ad::Var::scalar_const(0.0),
                                   ad::Var::scalar_const(0.0), cfg),
                    std::invalid_argument);
  }
}

TEST_CASE("pbr gradients match finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist;
  for (int q : {2, 4}) {
    CAPTURE(q);
    const int d = 8;
    SoftPrototypeBank bank(q, d, 77);
    std::vector<ad::Var> hs;
    for (int i = 0; i < 5; ++i) {
      ad::Mat h(d, 1);
      for (int j = 0; j < d; ++j) h(j, 0) = dist(rng);
      hs.push_back(ad::Var::param(std::move(h)));
    }
    PbrConfig cfg;
    cfg.q = q;
    cfg.lambda_prox = 0.9;
    cfg.lambda_div = 0.9;
    auto f = [&] {
      return pbr_total_loss(ad::Var::scalar_const(0.0), prox_loss(hs, bank),
                            div_loss(bank), cfg);
    };
    std::vector<ad::Var> params = hs;
    params.push_back(bank.prototypes());
    CHECK(rrltest::max_grad_error(f, params, 1e-6) < 1e-4);
  }
}

TEST_CASE("min-selection routes gradient to the unique nearest prototype") {
  auto bank = bank_with({vec2(1, 0), vec2(0, 1)});
  std::vector<ad::Var> hs = {colvec({0.9, 0.1})};  // clearly nearest to row 0
  ad::Var loss = prox_loss(hs, bank);
  ad::backward(loss);
  const ad::Mat& g = bank.prototypes().grad();
  CHECK(g.row(0).norm() > 0.0);
  CHECK(g.row(1).norm() == 0.0);
}

TEST_CASE("tied prototypes route gradient to the lowest index") {
  auto bank = bank_with({vec2(0, 1), vec2(0, 1)});  // identical rows: exact tie
  std::vector<ad::Var> hs = {colvec({1, 0})};
  ad::Var loss = prox_loss(hs, bank);
  ad::backward(loss);
  const ad::Mat& g = bank.prototypes().grad();
  CHECK(g.row(0).norm() > 0.0);
  CHECK(g.row(1).norm() == 0.0);
}

TEST_CASE("prototype bank initializes to unit rows") {
  SoftPrototypeBank bank(6, 5, 123);
  for (int k = 0; k < 6; ++k) {
    CHECK(bank.prototypes().value().row(k).norm() == doctest::Approx(1.0));
  }
  // distinct seeds give distinct banks
  SoftPrototypeBank other(6, 5, 124);
  CHECK((bank.prototypes().value() - other.prototypes().value()).norm() > 1e-6);
}
