#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "mp/errors.hpp"
#include "mp/gp.hpp"
#include "mp/kernels.hpp"

namespace mp {
namespace ssgp {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

// Companion-form realization of the Matern-3/2 process: state (f, df/ds),
// observation picks the first component. Satisfies the stationary Lyapunov
// equation F Pinf + Pinf F^T + L q L^T = 0 with L = (0,1)^T and
// q = 4 lambda^3 gamma2.
struct StateSpaceModel {
  double lambda = 1.0;  // sqrt(3) / ell
  double gamma2 = 1.0;
  Mat2 F = Mat2::Zero();
  Mat2 Pinf = Mat2::Zero();
};

inline StateSpaceModel matern32_ss(const Matern32Params& p) {
  validate(p);
  StateSpaceModel m;
  m.lambda = std::sqrt(3.0) / p.ell;
  m.gamma2 = p.gamma2;
  m.F << 0.0, 1.0, -m.lambda * m.lambda, -2.0 * m.lambda;
  m.Pinf << p.gamma2, 0.0, 0.0, m.lambda * m.lambda * p.gamma2;
  return m;
}

struct StepTransition {
  Mat2 A = Mat2::Identity();
  Mat2 Q = Mat2::Zero();
};

// Closed-form exp(F delta) for the critically damped companion form:
// exp(F d) = e^{-lambda d} (I + (F + lambda I) d), since (F + lambda I)^2 = 0.
inline StepTransition step_transition(const StateSpaceModel& m, double delta) {
  if (!(delta >= 0.0))
    throw validation_error("step_transition: delta must be >= 0, got " + std::to_string(delta));
  StepTransition st;
  if (delta == 0.0) return st;  // A = I, Q = 0 exactly
  double l = m.lambda;
  double e = std::exp(-l * delta);
  st.A << e * (1.0 + l * delta), e * delta,
          -e * l * l * delta, e * (1.0 - l * delta);
  st.Q = m.Pinf - st.A * m.Pinf * st.A.transpose();
  st.Q = 0.5 * (st.Q + st.Q.transpose()).eval();
  return st;
}

namespace detail {

struct FilterPass {
  // Per step: filtered mean (2 x D), filtered covariance, predicted
  // covariance, and the transition into the step. Predicted means are
  // recomputed during smoothing from A and the previous filtered mean.
  std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> mean_f;
  std::vector<Mat2> cov_f;
  std::vector<Mat2> cov_p;
  std::vector<Mat2> a;
};

inline void check_inputs(const Eigen::VectorXd& s, const Eigen::MatrixXd& y, double sigma2) {
  if (s.size() != y.rows())
    throw validation_error("kalman: input count " + std::to_string(s.size()) +
                           " does not match Y rows " + std::to_string(y.rows()));
  if (s.size() == 0) throw validation_error("kalman: empty input");
  if (!(sigma2 > 0.0)) throw validation_error("kalman: sigma2 must be > 0");
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    if (s(i) < s(i - 1))
      throw validation_error("kalman: inputs decrease at index " + std::to_string(i) + " (" +
                             std::to_string(s(i - 1)) + " -> " + std::to_string(s(i)) + ")");
  }
}

inline FilterPass run_filter(const StateSpaceModel& m, const Eigen::VectorXd& s,
                             const Eigen::MatrixXd& y, double sigma2) {
  check_inputs(s, y, sigma2);
  const Eigen::Index n = s.size();
  const Eigen::Index d = y.cols();

  FilterPass fp;
  fp.mean_f.resize(n);
  fp.cov_f.resize(n);
  fp.cov_p.resize(n);
  fp.a.resize(n);

  Eigen::Matrix<double, 2, Eigen::Dynamic> mean = Eigen::MatrixXd::Zero(2, d);
  Mat2 cov = m.Pinf;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k == 0) {
      fp.a[k] = Mat2::Identity();  // unused
    } else {
      StepTransition st = step_transition(m, s(k) - s(k - 1));
      fp.a[k] = st.A;
      mean = st.A * mean;
      cov = st.A * cov * st.A.transpose() + st.Q;
      cov = 0.5 * (cov + cov.transpose()).eval();
    }
    fp.cov_p[k] = cov;

    double innov_var = cov(0, 0) + sigma2;
    Vec2 gain = cov.col(0) / innov_var;
    mean += gain * (y.row(k) - mean.row(0));
    cov -= gain * innov_var * gain.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();

    fp.mean_f[k] = mean;
    fp.cov_f[k] = cov;
  }
  return fp;
}

inline Mat2 inverse_2x2(const Mat2& p) {
  double det = p(0, 0) * p(1, 1) - p(0, 1) * p(1, 0);
  if (!(det > 0.0) || !std::isfinite(det))
    throw numerical_error("kalman smoother: predicted covariance not invertible (det = " +
                          std::to_string(det) + ")");
  Mat2 inv;
  inv << p(1, 1), -p(0, 1), -p(1, 0), p(0, 0);
  return inv / det;
}

}  // namespace detail

// Filter-only estimate: mean and variance at step k use observations 0..k.
inline PosteriorResult kalman_filter(const StateSpaceModel& m, const Eigen::VectorXd& s,
                                     const Eigen::MatrixXd& y, double sigma2) {
  detail::FilterPass fp = detail::run_filter(m, s, y, sigma2);
  const Eigen::Index n = s.size();
  PosteriorResult out;
  out.mean.resize(n, y.cols());
  out.var.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.mean.row(k) = fp.mean_f[k].row(0);
    out.var(k) = std::max(fp.cov_f[k](0, 0), 0.0);
  }
  return out;
}

// Forward Kalman filter from the stationary distribution followed by an RTS
// backward pass. For nondecreasing inputs this reproduces the exact batch
// Matern-3/2 posterior in O(N D) time and memory. Ties (delta = 0) become
// identity transitions with zero process noise, i.e. repeated measurement
// updates at one input.
inline PosteriorResult kalman_rts(const StateSpaceModel& m, const Eigen::VectorXd& s,
                                  const Eigen::MatrixXd& y, double sigma2) {
  detail::FilterPass fp = detail::run_filter(m, s, y, sigma2);
  const Eigen::Index n = s.size();
  const Eigen::Index d = y.cols();

  PosteriorResult out;
  out.mean.resize(n, d);
  out.var.resize(n);

  Eigen::Matrix<double, 2, Eigen::Dynamic> mean_s = fp.mean_f[n - 1];
  Mat2 cov_s = fp.cov_f[n - 1];
  out.mean.row(n - 1) = mean_s.row(0);
  out.var(n - 1) = std::max(cov_s(0, 0), 0.0);

  for (Eigen::Index k = n - 2; k >= 0; --k) {
    const Mat2& a_next = fp.a[k + 1];
    const Mat2& cov_pred = fp.cov_p[k + 1];
    Mat2 gain = fp.cov_f[k] * a_next.transpose() * detail::inverse_2x2(cov_pred);
    Eigen::Matrix<double, 2, Eigen::Dynamic> mean_pred = a_next * fp.mean_f[k];
    mean_s = fp.mean_f[k] + gain * (mean_s - mean_pred);
    cov_s = fp.cov_f[k] + gain * (cov_s - cov_pred) * gain.transpose();
    cov_s = 0.5 * (cov_s + cov_s.transpose()).eval();
    out.mean.row(k) = mean_s.row(0);
    out.var(k) = std::max(cov_s(0, 0), 0.0);
  }
  return out;
}

}  // namespace ssgp
}  // namespace mp
