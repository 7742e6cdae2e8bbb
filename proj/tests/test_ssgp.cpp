#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mp/gp.hpp"
#include "mp/ssgp.hpp"
#include "test_util.hpp"

using namespace mp;
using test_util::Rng;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

Eigen::MatrixXd matern_cov(const Eigen::VectorXd& s, const Matern32Params& p) {
  Eigen::MatrixXd c(s.size(), s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    for (Eigen::Index j = 0; j < s.size(); ++j) c(i, j) = matern32(std::abs(s(i) - s(j)), p);
  return c;
}

}  // namespace

TEST_CASE("matern32_ss realization") {
  SECTION("gamma2 = 1, ell = sqrt(3)") {
    ssgp::StateSpaceModel m = ssgp::matern32_ss({1.0, std::sqrt(3.0)});
    REQUIRE(m.lambda == Catch::Approx(1.0).margin(1e-15));
    ssgp::Mat2 f_expected;
    f_expected << 0, 1, -1, -2;
    REQUIRE((m.F - f_expected).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((m.Pinf - ssgp::Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("Lyapunov residual and prior marginal variance") {
    Rng rng(21);
    for (int k = 0; k < 30; ++k) {
      Matern32Params p{rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0)};
      ssgp::StateSpaceModel m = ssgp::matern32_ss(p);
      double q = 4.0 * std::pow(m.lambda, 3) * p.gamma2;
      ssgp::Mat2 lq;
      lq << 0, 0, 0, q;
      ssgp::Mat2 residual = m.F * m.Pinf + m.Pinf * m.F.transpose() + lq;
      REQUIRE(residual.cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, q));
      REQUIRE(m.Pinf(0, 0) == p.gamma2);  // H Pinf H^T
    }
  }
}

TEST_CASE("step_transition") {
  ssgp::StateSpaceModel m = ssgp::matern32_ss({2.0, 0.7});

  SECTION("delta = 0 is exact identity / zero") {
    ssgp::StepTransition st = ssgp::step_transition(m, 0.0);
    REQUIRE((st.A - ssgp::Mat2::Identity()).isZero(0.0));
    REQUIRE(st.Q.isZero(0.0));
  }

  SECTION("A matches the Taylor exponential for small lambda delta") {
    Rng rng(22);
    for (int k = 0; k < 30; ++k) {
      double delta = rng.uniform(0.0, 0.3 / m.lambda);
      ssgp::StepTransition st = ssgp::step_transition(m, delta);
      Eigen::MatrixXd oracle = test_util::expm_taylor(m.F * delta, 30);
      REQUIRE((st.A - oracle).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SECTION("Q symmetric PSD") {
    Rng rng(23);
    for (int k = 0; k < 30; ++k) {
      ssgp::StepTransition st = ssgp::step_transition(m, rng.uniform(0.0, 3.0));
      REQUIRE((st.Q - st.Q.transpose()).cwiseAbs().maxCoeff() == 0.0);
      Eigen::SelfAdjointEigenSolver<ssgp::Mat2> es(st.Q, Eigen::EigenvaluesOnly);
      REQUIRE(es.eigenvalues().minCoeff() >= -1e-10 * m.gamma2 * (1 + m.lambda * m.lambda));
    }
  }
}

TEST_CASE("kalman_rts") {
  SECTION("N = 1 matches the scalar posterior") {
    Matern32Params p{1.6, 0.9};
    double sigma2 = 0.25;
    Eigen::VectorXd s(1);
    s << 2.0;
    Eigen::MatrixXd y(1, 2);
    y << 0.7, -1.1;
    PosteriorResult post = ssgp::kalman_rts(ssgp::matern32_ss(p), s, y, sigma2);
    double shrink = p.gamma2 / (p.gamma2 + sigma2);
    REQUIRE((post.mean - shrink * y).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(post.var(0) == Catch::Approx(p.gamma2 * sigma2 / (p.gamma2 + sigma2)).margin(1e-12));
  }

  SECTION("matches the batch posterior on random monotone inputs") {
    Rng rng(24);
    for (int rep = 0; rep < 20; ++rep) {
      int n = 2 + static_cast<int>(rng.uniform(0, 199));
      int d = 1 + static_cast<int>(rng.uniform(0, 8));
      Eigen::VectorXd s(n);
      double cur = 0.0;
      for (int i = 0; i < n; ++i) {
        cur += rng.uniform(0.0, 0.4);
        s(i) = cur;
      }
      Matern32Params p{rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0)};
      double sigma2 = rng.uniform(0.01, 1.0) * p.gamma2;
      Eigen::MatrixXd y = random_matrix(rng, n, d) * std::sqrt(p.gamma2);

      PosteriorResult ss = ssgp::kalman_rts(ssgp::matern32_ss(p), s, y, sigma2);
      PosteriorResult batch = gp::posterior(matern_cov(s, p), sigma2, y);

      double mean_scale = std::max(1.0, batch.mean.cwiseAbs().maxCoeff());
      REQUIRE((ss.mean - batch.mean).cwiseAbs().maxCoeff() / mean_scale < 1e-8);
      REQUIRE((ss.var - batch.var).cwiseAbs().maxCoeff() / p.gamma2 < 1e-8);
    }
  }

  SECTION("repeated inputs reproduce the batch solve with duplicated rows") {
    Rng rng(25);
    Eigen::VectorXd s(7);
    s << 0.0, 0.5, 0.5, 0.5, 1.2, 1.2, 2.0;
    Matern32Params p{1.0, 0.8};
    double sigma2 = 0.1;
    Eigen::MatrixXd y = random_matrix(rng, 7, 3);
    PosteriorResult ss = ssgp::kalman_rts(ssgp::matern32_ss(p), s, y, sigma2);
    PosteriorResult batch = gp::posterior(matern_cov(s, p), sigma2, y);
    REQUIRE((ss.mean - batch.mean).cwiseAbs().maxCoeff() < 1e-9);
    REQUIRE((ss.var - batch.var).cwiseAbs().maxCoeff() < 1e-9);
  }

  SECTION("posterior variance stays within the prior") {
    Rng rng(26);
    Eigen::VectorXd s(50);
    double cur = 0.0;
    for (int i = 0; i < 50; ++i) {
      cur += rng.uniform(0.0, 0.3);
      s(i) = cur;
    }
    Matern32Params p{2.2, 1.0};
    Eigen::MatrixXd y = random_matrix(rng, 50, 2);
    PosteriorResult post = ssgp::kalman_rts(ssgp::matern32_ss(p), s, y, 0.4);
    REQUIRE(post.var.minCoeff() >= 0.0);
    REQUIRE(post.var.maxCoeff() <= p.gamma2 + 1e-9);
  }

  SECTION("decreasing inputs are rejected") {
    Eigen::VectorXd s(3);
    s << 0.0, 1.0, 0.5;
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 1);
    REQUIRE_THROWS_AS(ssgp::kalman_rts(ssgp::matern32_ss({1.0, 1.0}), s, y, 0.1),
                      validation_error);
  }
}

TEST_CASE("kalman_filter is the causal half of the smoother") {
  // The filter at the last step equals the smoother at the last step.
  Rng rng(27);
  Eigen::VectorXd s(30);
  double cur = 0.0;
  for (int i = 0; i < 30; ++i) {
    cur += rng.uniform(0.05, 0.3);
    s(i) = cur;
  }
  Matern32Params p{1.0, 1.2};
  Eigen::MatrixXd y = random_matrix(rng, 30, 4);
  PosteriorResult filt = ssgp::kalman_filter(ssgp::matern32_ss(p), s, y, 0.2);
  PosteriorResult smooth = ssgp::kalman_rts(ssgp::matern32_ss(p), s, y, 0.2);
  REQUIRE((filt.mean.row(29) - smooth.mean.row(29)).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE(filt.var(29) == Catch::Approx(smooth.var(29)).margin(1e-12));
}
