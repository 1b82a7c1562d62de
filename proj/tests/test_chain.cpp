#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "shiftfunc/chain.hpp"
#include "shiftfunc/parallel.hpp"
#include "test_util.hpp"

using namespace shiftfunc;

namespace {

Point pvec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return Point::vec(std::move(v));
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("bop_apply basics") {
  auto model = CovarianceModel::isotropic(0.04, 5, NormKind::Euclidean);
  std::mt19937_64 gen(2);
  const Point x = testutil::random_vector_point(gen, 5, 1.0);

  SECTION("j = 0 returns f(x) exactly") {
    const Functional f = make_squared_norm();
    const auto est = bop_apply(f, x, 0, model, 100, RngStream(1));
    REQUIRE(est.value == f.eval(x));
    REQUIRE(est.inner_se == 0.0);
    REQUIRE(est.n_evals == 1);
  }
  SECTION("affine functionals are annihilated at j = 1") {
    const Functional f = make_linear(testutil::unit_vector_point(gen, 5));
    const auto est = bop_apply(f, x, 1, model, 20000, RngStream(2));
    REQUIRE(std::abs(est.value) < 5.0 * est.inner_se);
  }
  SECTION("squared norm at j = 1 gives the trace sigma^2 d") {
    const Functional f = make_squared_norm();
    const auto est = bop_apply(f, x, 1, model, 20000, RngStream(3));
    REQUIRE(std::abs(est.value - 0.04 * 5) < 5.0 * est.inner_se);
    REQUIRE(est.n_evals == 20000L * 2);
  }
  SECTION("exp_linear at any j matches the MGF oracle (c-1)^j e^<x,u>") {
    const Point u = testutil::unit_vector_point(gen, 5);
    const Functional f = make_exp_linear(u);
    const double c = testutil::exp_mgf_factor(0.04, 1.0);
    for (int j : {1, 2, 3}) {
      const auto est = bop_apply(f, x, j, model, 400000, RngStream(100 + j));
      const double expect = std::pow(c - 1.0, j) * f.eval(x);
      REQUIRE(std::abs(est.value - expect) < 5.0 * est.inner_se);
    }
  }
  SECTION("order above the cost cap is rejected") {
    const Functional f = make_squared_norm();
    REQUIRE_THROWS_AS(bop_apply(f, x, 13, model, 10, RngStream(1)), capability_error);
  }
}

TEST_CASE("estimate_fk") {
  auto model = CovarianceModel::isotropic(0.09, 4, NormKind::Euclidean);
  std::mt19937_64 gen(5);
  const Point x = testutil::random_vector_point(gen, 4, 1.0);

  SECTION("linear functional: value is <x,u> within 5 SE for every k") {
    const Point u = testutil::unit_vector_point(gen, 4);
    const Functional f = make_linear(u);
    const double expect = pairing(x, u);
    for (int k : {0, 1, 2, 3}) {
      ChainConfig cfg{k, 20000, SeedSpec{7u + static_cast<std::uint64_t>(k)}, true};
      const auto est = estimate_fk(f, x, cfg, model);
      if (k == 0) {
        REQUIRE(est.value == expect);
      } else {
        REQUIRE(std::abs(est.value - expect) < 5.0 * est.inner_se);
      }
    }
  }
  SECTION("shared-draws evaluation count is n_mc (2^{k+1} - 1)") {
    const Functional f = make_squared_norm();
    for (int k : {0, 1, 2, 4}) {
      ChainConfig cfg{k, 50, SeedSpec{1}, true};
      REQUIRE(estimate_fk(f, x, cfg, model).n_evals == 50L * ((1L << (k + 1)) - 1));
    }
  }
  SECTION("squared norm at k = 1 estimates ||x||^2 - sigma^2 d") {
    const Functional f = make_squared_norm();
    ChainConfig cfg{1, 40000, SeedSpec{11}, true};
    const auto est = estimate_fk(f, x, cfg, model);
    const double expect = x.coords.squaredNorm() - 0.09 * 4;
    REQUIRE(std::abs(est.value - expect) < 5.0 * est.inner_se);
  }
  SECTION("exp_linear matches the geometric-sum oracle") {
    const Point u = testutil::unit_vector_point(gen, 4);
    const Functional f = make_exp_linear(u);
    const double c = testutil::exp_mgf_factor(0.09, 1.0);
    for (int k : {1, 2}) {
      ChainConfig cfg{k, 200000, SeedSpec{50u + static_cast<std::uint64_t>(k)}, true};
      const auto est = estimate_fk(f, x, cfg, model);
      double expect = 0.0;
      for (int j = 0; j <= k; ++j) expect += std::pow(-(c - 1.0), j);
      expect *= f.eval(x);
      REQUIRE(std::abs(est.value - expect) < 5.0 * est.inner_se);
    }
  }
}

TEST_CASE("estimate_Tk truncation rule") {
  std::mt19937_64 gen(9);
  const Functional f = make_squared_norm();

  SECTION("large noise truncates to exactly zero") {
    auto model = CovarianceModel::isotropic(1.0, 10, NormKind::Euclidean);
    const Point x = testutil::random_vector_point(gen, 10, 1.0);
    ChainConfig cfg{1, 100, SeedSpec{3}, true};
    const auto est = estimate_Tk(f, x, cfg, model, 10.0);
    REQUIRE(est.value == 0.0);
    REQUIRE(est.inner_se == 0.0);
    REQUIRE(est.n_evals == 0);
  }
  SECTION("small noise passes through to estimate_fk") {
    auto model = CovarianceModel::isotropic(1e-4, 4, NormKind::Euclidean);
    const Point x = testutil::random_vector_point(gen, 4, 1.0);
    ChainConfig cfg{1, 100, SeedSpec{3}, true};
    const auto a = estimate_Tk(f, x, cfg, model, 4e-4);
    const auto b = estimate_fk(f, x, cfg, model);
    REQUIRE(same_bits(a.value, b.value));
    REQUIRE(same_bits(a.inner_se, b.inner_se));
  }
  SECTION("the boundary sqrt(strong variance) = 1/2 is inclusive") {
    auto model = CovarianceModel::isotropic(0.0625, 4, NormKind::Euclidean);  // trace 0.25
    const Point x = testutil::random_vector_point(gen, 4, 1.0);
    ChainConfig cfg{1, 100, SeedSpec{4}, true};
    const auto a = estimate_Tk(f, x, cfg, model, 0.25);
    REQUIRE(a.n_evals > 0);  // not truncated
  }
}

TEST_CASE("derivative-representation oracle") {
  std::mt19937_64 gen(21);
  auto model = CovarianceModel::isotropic(0.04, 3, NormKind::Euclidean);
  const Point theta = testutil::random_vector_point(gen, 3, 1.0);

  SECTION("k = 0 is exact evaluation") {
    const Functional f = make_squared_norm();
    const auto est = oracle_bk_derivative(f, theta, 0, model, 10, RngStream(1));
    REQUIRE(est.value == f.eval(theta));
    REQUIRE(est.inner_se == 0.0);
  }
  SECTION("k = 1 on the squared norm recovers sigma^2 d") {
    const Functional f = make_squared_norm();
    const auto est = oracle_bk_derivative(f, theta, 1, model, 40000, RngStream(2));
    REQUIRE(std::abs(est.value - 0.04 * 3) < 5.0 * est.inner_se);
  }
  SECTION("poly_power at k = p has mean zero (odd moments vanish)") {
    const Point u = testutil::unit_vector_point(gen, 3);
    for (int p : {2, 3}) {
      const Functional f = make_poly_power(u, p);
      const auto est = oracle_bk_derivative(f, theta, p, model, 40000, RngStream(30 + p));
      REQUIRE(std::abs(est.value) < 5.0 * est.inner_se);
    }
  }
  SECTION("missing forms raise a capability error") {
    const Functional f = make_bump(theta, 0.1, 2.0);
    REQUIRE_THROWS_AS(oracle_bk_derivative(f, theta, 1, model, 10, RngStream(1)),
                      capability_error);
  }
}

TEST_CASE("representation equivalence across random instances") {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> dim_dist(2, 5);
  std::uniform_real_distribution<double> sig_dist(0.05, 0.4);
  int instance = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = dim_dist(gen);
    const double s2 = sig_dist(gen) * sig_dist(gen);
    auto model = CovarianceModel::isotropic(s2, d, NormKind::Euclidean);
    const Point theta = testutil::random_vector_point(gen, d, 1.0);
    const Point u = testutil::unit_vector_point(gen, d);
    const Functional f =
        trial % 2 == 0 ? make_squared_norm() : make_poly_power(u, 2 + trial % 3);
    for (int j : {1, 2, 3}) {
      ++instance;
      const auto a =
          bop_apply(f, theta, j, model, 40000, RngStream(1000u + instance));
      const auto b = oracle_bk_derivative(f, theta, j, model, 40000,
                                          RngStream(5000u + instance));
      const double comb = std::hypot(a.inner_se, b.inner_se);
      // Absolute floor guards the exactly-degenerate cases (both routes give
      // identically-zero differences up to float rounding).
      const double tol = 5.0 * comb + 1e-12 * (1.0 + std::abs(a.value) + std::abs(b.value));
      REQUIRE(std::abs(a.value - b.value) < tol);
    }
  }
}

TEST_CASE("polynomial annihilation beyond half the degree") {
  std::mt19937_64 gen(13);
  auto model = CovarianceModel::isotropic(0.09, 4, NormKind::Euclidean);
  const Point theta = testutil::random_vector_point(gen, 4, 1.0);
  const Point u = testutil::unit_vector_point(gen, 4);
  for (int p : {2, 3, 4}) {
    const Functional f = make_poly_power(u, p);
    for (int j = p / 2 + 1; j <= p + 1; ++j) {
      const auto est = bop_apply(f, theta, j, model, 30000, RngStream(40u + p * 7 + j));
      REQUIRE(std::abs(est.value) < 5.0 * est.inner_se + 1e-12);
    }
  }
}

TEST_CASE("chain unbiasedness for polynomials") {
  // Degree 3, k = floor((k+1)/2) rule: f_1 is unbiased.
  std::mt19937_64 gen(15);
  const int d = 4;
  auto model = CovarianceModel::isotropic(0.09, d, NormKind::Euclidean);
  const Point theta = testutil::random_vector_point(gen, d, 1.0);
  const Point u = testutil::unit_vector_point(gen, d);
  const Functional f = make_poly_power(u, 3);
  const double truth = f.eval(theta);
  RngStream root(8888);
  const long n_rep = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (long r = 0; r < n_rep; ++r) {
    RngStream rs = root.fork(r);
    RngStream noise = rs.fork(0);
    RngStream inner = rs.fork(1);
    const Point x = theta + model.sample_noise(noise);
    const double v = estimate_fk_stream(f, x, 1, 8, model, inner).value;
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n_rep;
  const double se = std::sqrt((sumsq / n_rep - mean * mean) / n_rep);
  REQUIRE(std::abs(mean - truth) < 4.0 * se);
}

TEST_CASE("controlled difference estimator") {
  std::mt19937_64 gen(19);
  auto model = CovarianceModel::isotropic(0.04, 5, NormKind::Euclidean);
  const Point theta = testutil::random_vector_point(gen, 5, 0.6);
  const Point u = testutil::unit_vector_point(gen, 5);
  const Functional f = make_exp_linear(u);
  const double c = testutil::exp_mgf_factor(0.04, 1.0);

  SECTION("agrees with the plain difference estimator") {
    for (int j : {1, 2}) {
      const auto plain = bop_apply(f, theta, j, model, 200000, RngStream(60u + j));
      const auto ctrl = bop_apply_controlled(f, theta, j, model, 50000, RngStream(70u + j));
      const double comb = std::hypot(plain.inner_se, ctrl.inner_se);
      REQUIRE(std::abs(plain.value - ctrl.value) < 5.0 * comb);
    }
  }
  SECTION("resolves the closed-form chain bias at every order") {
    for (int k : {0, 1, 2}) {
      const auto est =
          bop_apply_controlled(f, theta, k + 1, model, 200000, RngStream(80u + k));
      const double bias = (k % 2 == 0 ? 1.0 : -1.0) * est.value;
      const double expect = testutil::eigen_chain_bias(c, k, f.eval(theta));
      REQUIRE(std::abs(bias - expect) < 5.0 * est.inner_se);
      REQUIRE(est.inner_se < std::abs(expect));  // actually resolved, not a null test
    }
  }
  SECTION("variance is far below the plain estimator's") {
    const auto plain = bop_apply(f, theta, 2, model, 20000, RngStream(91));
    const auto ctrl = bop_apply_controlled(f, theta, 2, model, 20000, RngStream(92));
    REQUIRE(ctrl.inner_se < 0.15 * plain.inner_se);
  }
}

TEST_CASE("determinism: identical seeds give identical bits at any thread count") {
  std::mt19937_64 gen(33);
  auto model = CovarianceModel::isotropic(0.09, 6, NormKind::Euclidean);
  const Point x = testutil::random_vector_point(gen, 6, 1.0);
  const Point u = testutil::unit_vector_point(gen, 6);
  const Functional f = make_exp_linear(u);
  ChainConfig cfg{2, 4001, SeedSpec{0xDEADBEEF}, true};

  const int saved = default_threads();
  set_default_threads(1);
  const auto a = estimate_fk(f, x, cfg, model);
  set_default_threads(4);
  const auto b = estimate_fk(f, x, cfg, model);
  const auto c = estimate_fk(f, x, cfg, model);
  set_default_threads(saved);

  REQUIRE(same_bits(a.value, b.value));
  REQUIRE(same_bits(a.inner_se, b.inner_se));
  REQUIRE(same_bits(b.value, c.value));
  REQUIRE(a.n_evals == b.n_evals);
}

TEST_CASE("chain config validation") {
  ChainConfig bad{13, 100, SeedSpec{0}, true};
  REQUIRE_THROWS_AS(bad.validate(), capability_error);
  ChainConfig bad2{2, 0, SeedSpec{0}, true};
  REQUIRE_THROWS_AS(bad2.validate(), config_error);
}
