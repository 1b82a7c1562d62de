#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "shiftfunc/covariance.hpp"
#include "shiftfunc/functional.hpp"
#include "test_util.hpp"

using namespace shiftfunc;

namespace {

Point pvec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return Point::vec(std::move(v));
}

}  // namespace

TEST_CASE("sigma_f_xi closed forms") {
  SECTION("linear: sqrt(<Sigma u, u>)") {
    Eigen::VectorXd lam(3);
    lam << 1.0, 2.0, 0.5;
    auto model = CovarianceModel::diagonal(lam, NormKind::Euclidean);
    const Point u = pvec({0.3, -0.4, 1.2});
    const Functional f = make_linear(u);
    const double expect =
        std::sqrt((lam.array() * u.coords.array().square()).sum());
    REQUIRE_THAT(sigma_f_xi(f, model, pvec({5.0, 6.0, 7.0})),
                 Catch::Matchers::WithinRel(expect, 1e-14));
  }
  SECTION("squared norm, isotropic: 2 sigma ||theta||") {
    auto model = CovarianceModel::isotropic(0.25, 2, NormKind::Euclidean);
    const Point theta = pvec({3.0, 4.0});
    REQUIRE_THAT(sigma_f_xi(make_squared_norm(), model, theta),
                 Catch::Matchers::WithinRel(2.0 * 0.5 * 5.0, 1e-14));
  }
  SECTION("exp_linear at theta = 0 with unit u: sigma") {
    auto model = CovarianceModel::isotropic(0.09, 4, NormKind::Euclidean);
    std::mt19937_64 gen(3);
    const Point u = testutil::unit_vector_point(gen, 4);
    const Point theta = pvec({0.0, 0.0, 0.0, 0.0});
    REQUIRE_THAT(sigma_f_xi(make_exp_linear(u), model, theta),
                 Catch::Matchers::WithinRel(0.3, 1e-12));
  }
  SECTION("GOE quadratic form matches an MC oracle") {
    auto model = CovarianceModel::goe(0.7, 4);
    std::mt19937_64 gen(17);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd g(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) g(i, j) = nd(gen);
    g = Eigen::MatrixXd(0.5 * (g + g.transpose()));
    const Point gp = Point::sym(g);
    const double exact = model.quad_form(gp);
    RngStream s(4242);
    const long n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (long r = 0; r < n; ++r) {
      RngStream sub = s.fork(r);
      const double v = pairing(model.sample_noise(sub), gp);
      sum += v;
      sumsq += v * v;
    }
    const double var = sumsq / n - (sum / n) * (sum / n);
    REQUIRE(std::abs(var - exact) < 0.03 * exact);
    REQUIRE_THAT(exact,
                 Catch::Matchers::WithinRel(2.0 * 0.49 * g.squaredNorm(), 1e-12));
  }
}

TEST_CASE("K ratio") {
  auto model = CovarianceModel::isotropic(0.04, 3, NormKind::Euclidean);
  const Point u = pvec({0.6, -0.8, 0.0});
  Functional f = make_linear(u);  // holder_norm defaults to ||u|| = 1
  const Point theta = pvec({0.1, 0.2, -0.1});
  REQUIRE_THAT(K_functional(f, model, theta), Catch::Matchers::WithinRel(1.0, 1e-12));
  f.meta.holder_norm *= 2.0;
  REQUIRE_THAT(K_functional(f, model, theta), Catch::Matchers::WithinRel(2.0, 1e-12));
  SECTION("scale invariance in the covariance") {
    for (double c : {0.01, 0.5, 100.0}) {
      REQUIRE_THAT(K_functional(f, model.scaled(c), theta),
                   Catch::Matchers::WithinRel(K_functional(f, model, theta), 1e-12));
    }
  }
  SECTION("degenerate variance is an error") {
    const Functional zero_grad = make_squared_norm();
    const Point origin = pvec({0.0, 0.0, 0.0});
    REQUIRE_THROWS_AS(K_functional(zero_grad, model, origin), capability_error);
  }
}

TEST_CASE("gradient checks") {
  SECTION("squared norm is exact under central differences") {
    const auto rep = gradient_check(make_squared_norm(), {pvec({1.0, 2.0})}, 1e-8);
    REQUIRE(rep.pass);
    REQUIRE(rep.max_rel_discrepancy < 1e-8);
  }
  SECTION("exp_linear passes at 1e-5") {
    std::mt19937_64 gen(11);
    const Point u = testutil::unit_vector_point(gen, 5);
    std::vector<Point> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(testutil::random_vector_point(gen, 5, 0.7));
    REQUIRE(gradient_check(make_exp_linear(u), pts, 1e-5).pass);
  }
  SECTION("bump gradient vanishes exactly at its center") {
    const Point center = pvec({0.4, -0.2, 0.1});
    const Functional f = make_bump(center, 0.3, 2.5);
    const Point g = f.gradient(center);
    REQUIRE(g.coords.norm() == 0.0);
    const auto rep = gradient_check(f, {center}, 1e-12, 1e-2);
    REQUIRE(rep.max_rel_discrepancy < 1e-12);
  }
  SECTION("bump interior points pass a finite-difference check") {
    const Point center = pvec({0.0, 0.0});
    const Functional f = make_bump(center, 1.0, 3.0);
    REQUIRE(gradient_check(f, {pvec({0.2, 0.1}), pvec({-0.3, 0.25})}, 1e-5, 1e-4).pass);
  }
  SECTION("cosine_mean passes") {
    const Functional f = make_cosine_mean(3.0, 1.5, pvec({0.1, -0.3, 0.0}));
    std::mt19937_64 gen(5);
    std::vector<Point> pts;
    for (int i = 0; i < 3; ++i) pts.push_back(testutil::random_vector_point(gen, 3, 1.0));
    REQUIRE(gradient_check(f, pts, 1e-6, 1e-4).pass);
  }
}

TEST_CASE("bump vanishes outside its support ball") {
  const Point center = pvec({1.0, -1.0});
  const double eps = 0.25;
  const Functional f = make_bump(center, eps, 2.0);
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> angle(0.0, 6.28318);
  std::uniform_real_distribution<double> radius(1.001, 3.0);
  for (int t = 0; t < 200; ++t) {
    const double a = angle(gen);
    const double r = eps * radius(gen);
    const Point x = pvec({1.0 + r * std::cos(a), -1.0 + r * std::sin(a)});
    REQUIRE(f.eval(x) == 0.0);
  }
  REQUIRE(f.eval(center) == std::pow(eps, 2.0));  // profile is 1 at 0
}

TEST_CASE("derivative forms") {
  std::mt19937_64 gen(31);
  SECTION("poly_power order-p form is the constant p! prod <h_i, u>") {
    const int p = 3;
    const Point u = testutil::unit_vector_point(gen, 4);
    const Functional f = make_poly_power(u, p);
    const Point base = testutil::random_vector_point(gen, 4, 1.0);
    std::vector<Point> hs;
    for (int i = 0; i < p; ++i) hs.push_back(testutil::random_vector_point(gen, 4, 1.0));
    double expect = 6.0;
    for (const auto& h : hs) expect *= h.coords.dot(u.coords);
    REQUIRE_THAT(f.form(p, base, hs), Catch::Matchers::WithinRel(expect, 1e-12));
    std::vector<Point> hs4 = hs;
    hs4.push_back(testutil::random_vector_point(gen, 4, 1.0));
    REQUIRE(f.form(p + 1, base, hs4) == 0.0);
  }
  SECTION("order-1 form equals <grad, h> for every builtin that has both") {
    const Point u = testutil::unit_vector_point(gen, 3);
    const std::vector<Functional> fs = {
        make_linear(u), make_squared_norm(), make_poly_power(u, 4), make_exp_linear(u),
        make_cosine_mean(2.0, 0.7, testutil::random_vector_point(gen, 3, 0.5))};
    for (const auto& f : fs) {
      const Point x = testutil::random_vector_point(gen, 3, 0.8);
      const Point h = testutil::random_vector_point(gen, 3, 1.0);
      const double lhs = f.form(1, x, std::vector<Point>{h});
      const double rhs = pairing(f.gradient(x), h);
      REQUIRE_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-11 * (1.0 + std::abs(rhs))));
    }
  }
}

TEST_CASE("spectral bilinear functional") {
  std::mt19937_64 gen(57);
  std::normal_distribution<double> nd;
  auto rand_sym = [&](int d) {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = nd(gen);
    return Eigen::MatrixXd(0.5 * (m + m.transpose()));
  };
  Eigen::VectorXd u(4), v(4);
  for (int i = 0; i < 4; ++i) {
    u[i] = nd(gen);
    v[i] = nd(gen);
  }

  SECTION("h = identity reduces to the linear functional <theta u, v>") {
    const Functional f = make_spectral_bilinear(scalar_function("identity"), u, v);
    for (int t = 0; t < 10; ++t) {
      const Eigen::MatrixXd m = rand_sym(4);
      const double expect = v.dot(m * u);
      REQUIRE_THAT(f.eval(Point::sym(m)),
                   Catch::Matchers::WithinAbs(expect, 1e-12 * (1.0 + std::abs(expect))));
    }
  }
  SECTION("stable under repeated eigenvalues") {
    const Functional f = make_spectral_bilinear(scalar_function("exp"), u, v);
    Eigen::MatrixXd base = Eigen::MatrixXd::Zero(4, 4);
    base.diagonal() << 1.0, 1.0, 1.0, 2.0;  // repeated spectrum
    std::normal_distribution<double> tiny(0.0, 1e-13);
    const double ref = f.eval(Point::sym(base));
    for (int t = 0; t < 5; ++t) {
      Eigen::MatrixXd m = base;
      for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) {
          const double e = tiny(gen);
          m(i, j) += e;
          m(j, i) = m(i, j);
        }
      REQUIRE_THAT(f.eval(Point::sym(m)), Catch::Matchers::WithinAbs(ref, 1e-10));
    }
  }
  SECTION("divided-difference gradient agrees with finite differences") {
    for (const char* hname : {"identity", "exp", "square"}) {
      const Functional f = make_spectral_bilinear(scalar_function(hname), u, v);
      const Point x = Point::sym(rand_sym(4));
      REQUIRE(gradient_check(f, {x}, 1e-6, 1e-5).pass);
    }
  }
  SECTION("gradient with near-degenerate spectrum stays finite and accurate") {
    const Functional f = make_spectral_bilinear(scalar_function("exp"), u, v);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
    m.diagonal() << 0.5, 0.5 + 1e-10, 1.5, 1.5 + 1e-12;
    const Point x = Point::sym(m);
    REQUIRE(f.gradient(x).coords.allFinite());
    REQUIRE(gradient_check(f, {x}, 1e-6, 1e-5).pass);
  }
}

TEST_CASE("missing capabilities raise capability errors") {
  const Functional f = make_bump(pvec({0.0, 0.0}), 0.2, 2.0);
  REQUIRE(!f.has_kth_form());
  REQUIRE_THROWS_AS(f.form(2, pvec({0.0, 0.0}), std::vector<Point>{}), capability_error);
  auto model = CovarianceModel::isotropic(1.0, 2, NormKind::Euclidean);
  Functional no_grad;
  no_grad.name = "eval_only";
  no_grad.eval = [](const Point&) { return 0.0; };
  REQUIRE_THROWS_AS(sigma_f_xi(no_grad, model, pvec({0.0, 0.0})), capability_error);
}

TEST_CASE("smoothness metadata is validated") {
  const SmoothnessMeta bad_s{-1.0, 0.0, 1.0};
  const SmoothnessMeta bad_gamma{2.0, -0.5, 1.0};
  const SmoothnessMeta bad_holder{2.0, 0.0, 0.0};
  REQUIRE_THROWS_AS(bad_s.validate(), config_error);
  REQUIRE_THROWS_AS(bad_gamma.validate(), config_error);
  REQUIRE_THROWS_AS(bad_holder.validate(), config_error);
}
