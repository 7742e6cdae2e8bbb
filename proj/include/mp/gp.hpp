#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mp/errors.hpp"
#include "mp/kernels.hpp"

namespace mp {

struct LatentSequence {
  std::vector<double> timestamps;  // seconds, strictly increasing
  Eigen::MatrixXd Y;               // N x D, row i = latent vector at timestamps[i]
};

inline void validate(const LatentSequence& s) {
  const std::size_t n = s.timestamps.size();
  if (static_cast<std::size_t>(s.Y.rows()) != n)
    throw validation_error("LatentSequence: row count " + std::to_string(s.Y.rows()) +
                           " does not match timestamp count " + std::to_string(n));
  if (s.Y.cols() < 1) throw validation_error("LatentSequence: need at least 1 latent dimension");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(s.timestamps[i] > s.timestamps[i - 1]))
      throw validation_error("LatentSequence: timestamps not strictly increasing at index " +
                             std::to_string(i));
  }
  if (!s.Y.allFinite()) throw validation_error("LatentSequence: non-finite latent values");
}

struct GPHyper {
  KernelSpec kernel;
  double sigma2 = 0.1;  // observation noise variance
};

inline void validate(const GPHyper& h) {
  validate(h.kernel);
  if (!(h.sigma2 > 0.0) || !std::isfinite(h.sigma2))
    throw validation_error("GPHyper: sigma2 must be > 0, got " + std::to_string(h.sigma2));
}

struct PosteriorResult {
  Eigen::MatrixXd mean;  // N x D
  Eigen::VectorXd var;   // N, shared across latent dimensions
};

namespace gp {

struct RobustCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // absolute value added to the diagonal
};

// SPD factorization with jitter escalation: 1e-9 * scale, growing tenfold up
// to 1e-3 * scale, then failure reporting the smallest eigenvalue.
inline RobustCholesky robust_cholesky(const Eigen::MatrixXd& a, double scale) {
  RobustCholesky out;
  out.llt.compute(a);
  if (out.llt.info() == Eigen::Success) return out;
  for (double rel = 1e-9; rel <= 1.5e-3; rel *= 10.0) {
    double jitter = rel * scale;
    Eigen::MatrixXd aj = a;
    aj.diagonal().array() += jitter;
    out.llt.compute(aj);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = jitter;
      return out;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  throw numerical_error("robust_cholesky: factorization failed after maximal jitter " +
                        std::to_string(1e-3 * scale) + "; smallest eigenvalue estimate " +
                        std::to_string(es.eigenvalues().minCoeff()));
}

// Exact batch posterior:
//   mean = C (C + sigma2 I)^{-1} Y
//   var  = diag(C - C (C + sigma2 I)^{-1} C)
// One factorization serves all D right-hand sides; the variance is
// independent of Y and reported once per frame.
inline PosteriorResult posterior(const Eigen::MatrixXd& c, double sigma2, const Eigen::MatrixXd& y) {
  const Eigen::Index n = c.rows();
  if (c.cols() != n) throw validation_error("posterior: covariance must be square");
  if (y.rows() != n)
    throw validation_error("posterior: Y has " + std::to_string(y.rows()) + " rows, expected " +
                           std::to_string(n));
  if (!(sigma2 > 0.0)) throw validation_error("posterior: sigma2 must be > 0");

  Eigen::MatrixXd a = c;
  a.diagonal().array() += sigma2;
  double scale = std::max(c.diagonal().maxCoeff(), sigma2);
  RobustCholesky chol = robust_cholesky(a, scale);

  PosteriorResult out;
  out.mean = c * chol.llt.solve(y);
  Eigen::MatrixXd w = chol.llt.solve(c);
  out.var = (c.diagonal().array() - (c.cwiseProduct(w)).colwise().sum().transpose().array())
                .max(0.0)
                .matrix();
  return out;
}

// Negative log marginal likelihood summed over the D independent latent
// regressions sharing one covariance.
inline double nlml(const Eigen::MatrixXd& c, double sigma2, const Eigen::MatrixXd& y) {
  const Eigen::Index n = c.rows();
  const Eigen::Index d = y.cols();
  Eigen::MatrixXd a = c;
  a.diagonal().array() += sigma2;
  double scale = std::max(c.diagonal().maxCoeff(), sigma2);
  RobustCholesky chol = robust_cholesky(a, scale);

  Eigen::MatrixXd alpha = chol.llt.solve(y);
  double quad = (y.cwiseProduct(alpha)).sum();
  double logdet = 2.0 * chol.llt.matrixLLT().diagonal().array().log().sum();
  return 0.5 * quad + 0.5 * static_cast<double>(d) * logdet +
         0.5 * static_cast<double>(n * d) * std::log(2.0 * std::numbers::pi);
}

// Distance data for a kernel, fixed by the sensor streams; only the
// hyperparameters vary during fitting.
struct KernelDistances {
  KernelKind kind = KernelKind::TimeDecay;
  Eigen::MatrixXd main;  // time/gyro/pose distances; gyro factor for the product
  Eigen::MatrixXd time;  // product only
};

inline KernelDistances kernel_distances(KernelKind kind, const FrameTimeline& frames,
                                        const GyroLog* gyro = nullptr,
                                        const PoseLog* poses = nullptr,
                                        const GyroIntervalOptions& opt = {}) {
  KernelDistances out;
  out.kind = kind;
  if (kind == KernelKind::ProductTimeGyro) {
    out.main = distance_matrix(KernelKind::Gyro, frames, gyro, poses, opt);
    out.time = distance_matrix(KernelKind::TimeDecay, frames, gyro, poses, opt);
  } else {
    out.main = distance_matrix(kind, frames, gyro, poses, opt);
  }
  return out;
}

inline Eigen::MatrixXd covariance_from(const KernelDistances& d, const KernelSpec& spec) {
  if (spec.kind != d.kind) throw validation_error("covariance_from: kernel kind mismatch");
  if (d.kind == KernelKind::ProductTimeGyro) {
    return covariance_from_distance(d.time, spec.time_factor)
        .cwiseProduct(covariance_from_distance(d.main, spec.main));
  }
  return covariance_from_distance(d.main, spec.main);
}

struct NlmlResult {
  double value = 0.0;
  // Gradient in log space. Single kernels: (log gamma2, log ell, log sigma2).
  // Product kernel: (log gamma2, log ell_gyro, log ell_time, log sigma2) with
  // the composite magnitude carried by the gyro factor.
  Eigen::VectorXd grad;
};

namespace detail {

// d kappa / d log ell for Matern-3/2 has entries gamma2 * r^2 * exp(-r).
inline Eigen::MatrixXd matern32_dlogell(const Eigen::MatrixXd& dist, const Matern32Params& p) {
  return dist.unaryExpr([&](double d) {
    double r = std::sqrt(3.0) * d / p.ell;
    return p.gamma2 * r * r * std::exp(-r);
  });
}

}  // namespace detail

inline NlmlResult nlml_with_grad(const KernelDistances& dist, const KernelSpec& spec, double sigma2,
                                 const Eigen::MatrixXd& y) {
  const Eigen::Index n = y.rows();
  const Eigen::Index d = y.cols();
  Eigen::MatrixXd c = covariance_from(dist, spec);
  Eigen::MatrixXd a = c;
  a.diagonal().array() += sigma2;
  double scale = std::max(c.diagonal().maxCoeff(), sigma2);
  RobustCholesky chol = robust_cholesky(a, scale);

  Eigen::MatrixXd alpha = chol.llt.solve(y);
  double quad = (y.cwiseProduct(alpha)).sum();
  double logdet = 2.0 * chol.llt.matrixLLT().diagonal().array().log().sum();

  NlmlResult out;
  out.value = 0.5 * quad + 0.5 * static_cast<double>(d) * logdet +
              0.5 * static_cast<double>(n * d) * std::log(2.0 * std::numbers::pi);

  Eigen::MatrixXd ainv = chol.llt.solve(Eigen::MatrixXd::Identity(n, n));
  auto grad_term = [&](const Eigen::MatrixXd& da) {
    double quad_term = (alpha.cwiseProduct(da * alpha)).sum();
    double trace_term = (ainv.cwiseProduct(da)).sum();
    return -0.5 * quad_term + 0.5 * static_cast<double>(d) * trace_term;
  };

  const bool product = spec.kind == KernelKind::ProductTimeGyro;
  out.grad.resize(product ? 4 : 3);
  out.grad(0) = grad_term(c);  // d A / d log gamma2 = C
  if (product) {
    Eigen::MatrixXd cg = covariance_from_distance(dist.main, spec.main);
    Eigen::MatrixXd ct = covariance_from_distance(dist.time, spec.time_factor);
    out.grad(1) = grad_term(detail::matern32_dlogell(dist.main, spec.main).cwiseProduct(ct));
    out.grad(2) = grad_term(detail::matern32_dlogell(dist.time, spec.time_factor).cwiseProduct(cg));
    out.grad(3) = grad_term(sigma2 * Eigen::MatrixXd::Identity(n, n));
  } else {
    out.grad(1) = grad_term(detail::matern32_dlogell(dist.main, spec.main));
    out.grad(2) = grad_term(sigma2 * Eigen::MatrixXd::Identity(n, n));
  }
  return out;
}

struct FitOptions {
  int max_iterations = 200;
  double grad_tol = 1e-4;
  int refined_starts = 3;  // grid points carried into full optimization
  GyroIntervalOptions gyro_opts{};
};

struct FitResult {
  GPHyper hyper;
  double nlml = 0.0;
  double grad_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
};

namespace detail {

struct ObjectiveEval {
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
  bool ok = false;
};

// BFGS with Armijo backtracking in log-parameter space. Evaluations that
// throw or return non-finite values are treated as line-search failures.
template <class Objective>
inline void minimize_bfgs(const Objective& objective, Eigen::VectorXd& x, ObjectiveEval& best,
                          int max_iterations, double grad_tol) {
  const Eigen::Index dim = x.size();
  ObjectiveEval cur = objective(x);
  if (!cur.ok) return;
  best = cur;
  Eigen::VectorXd best_x = x;

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(dim, dim);  // inverse Hessian approximation
  for (int iter = 0; iter < max_iterations; ++iter) {
    if (cur.grad.norm() <= grad_tol) break;
    Eigen::VectorXd dir = -h * cur.grad;
    double slope = dir.dot(cur.grad);
    if (!(slope < 0.0)) {
      h.setIdentity();
      dir = -cur.grad;
      slope = dir.dot(cur.grad);
    }

    double step = 1.0;
    ObjectiveEval next;
    Eigen::VectorXd xn;
    bool accepted = false;
    for (int ls = 0; ls < 48; ++ls) {
      xn = x + step * dir;
      if (xn.cwiseAbs().maxCoeff() <= 40.0) {  // log-space sanity box
        next = objective(xn);
        if (next.ok && next.value <= cur.value + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd s = xn - x;
    Eigen::VectorXd yv = next.grad - cur.grad;
    double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      Eigen::VectorXd hy = h * yv;
      double yhy = yv.dot(hy);
      h += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
           (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    x = xn;
    cur = next;
    if (cur.value < best.value) {
      best = cur;
      best_x = x;
    }
  }
  x = best_x;
}

}  // namespace detail

// Marginal-likelihood fit in log space. Initialization is data-driven
// (gamma2 from the sample variance, ell from half the driving-input range,
// sigma2 = 0.1 gamma2) unless an explicit init is given. A fixed 3x3x3
// log-grid around the init is screened by nlml value and the best few
// points are refined with BFGS. For the product kernel the time factor's
// magnitude is pinned to 1 and the composite magnitude rides on the gyro
// factor.
inline FitResult fit_hyperparams(const FrameTimeline& frames, const GyroLog* gyro,
                                 const PoseLog* poses, const Eigen::MatrixXd& y, KernelKind kind,
                                 const std::optional<GPHyper>& init = std::nullopt,
                                 const FitOptions& opt = {}) {
  validate(frames);
  if (static_cast<std::size_t>(y.rows()) != frames.size())
    throw validation_error("fit_hyperparams: Y rows do not match frame count");

  KernelDistances dist = kernel_distances(kind, frames, gyro, poses, opt.gyro_opts);
  const bool product = kind == KernelKind::ProductTimeGyro;
  const Eigen::Index dim = product ? 4 : 3;

  auto unpack = [&](const Eigen::VectorXd& x) {
    GPHyper h;
    h.kernel.kind = kind;
    h.kernel.main.gamma2 = std::exp(x(0));
    h.kernel.main.ell = std::exp(x(1));
    if (product) {
      h.kernel.time_factor.gamma2 = 1.0;
      h.kernel.time_factor.ell = std::exp(x(2));
      h.sigma2 = std::exp(x(3));
    } else {
      h.sigma2 = std::exp(x(2));
    }
    return h;
  };

  auto objective = [&](const Eigen::VectorXd& x) {
    detail::ObjectiveEval ev;
    try {
      GPHyper h = unpack(x);
      NlmlResult r = nlml_with_grad(dist, h.kernel, h.sigma2, y);
      if (std::isfinite(r.value) && r.grad.allFinite()) {
        ev.value = r.value;
        ev.grad = r.grad;
        ev.ok = true;
      }
    } catch (const error&) {
      // leave ev.ok = false; the line search backs off
    }
    return ev;
  };

  // Data-driven center of the start grid.
  Eigen::VectorXd center(dim);
  if (init) {
    validate(*init);
    if (init->kernel.kind != kind)
      throw validation_error("fit_hyperparams: init kernel kind mismatch");
    center(0) = std::log(init->kernel.main.gamma2);
    center(1) = std::log(init->kernel.main.ell);
    if (product) {
      center(2) = std::log(init->kernel.time_factor.ell);
      center(3) = std::log(init->sigma2);
    } else {
      center(2) = std::log(init->sigma2);
    }
  } else {
    // Per-dimension sample variance, averaged.
    double var_sum = 0.0;
    for (Eigen::Index dcol = 0; dcol < y.cols(); ++dcol) {
      double mu = y.col(dcol).mean();
      var_sum += (y.col(dcol).array() - mu).square().mean();
    }
    double gamma2 = std::max(var_sum / static_cast<double>(y.cols()), 1e-12);
    double range_main = dist.main.maxCoeff();
    double ell_main = range_main > 0.0 ? 0.5 * range_main : 1.0;
    center(0) = std::log(gamma2);
    center(1) = std::log(ell_main);
    if (product) {
      double range_t = dist.time.maxCoeff();
      center(2) = std::log(range_t > 0.0 ? 0.5 * range_t : 1.0);
      center(3) = std::log(0.1 * gamma2);
    } else {
      center(2) = std::log(0.1 * gamma2);
    }
  }

  // 3x3x3 grid: gamma2, length-scale(s), sigma2 each scaled by {0.1, 1, 10}.
  // The product kernel's two length-scales move together.
  std::vector<Eigen::VectorXd> starts;
  const double offsets[3] = {std::log(0.1), 0.0, std::log(10.0)};
  for (double og : offsets)
    for (double ol : offsets)
      for (double os : offsets) {
        Eigen::VectorXd x = center;
        x(0) += og;
        x(1) += ol;
        if (product) {
          x(2) += ol;
          x(3) += os;
        } else {
          x(2) += os;
        }
        starts.push_back(std::move(x));
      }

  // Screening uses value-only evaluations; gradients are only paid for the
  // starts that are actually refined.
  auto value_only = [&](const Eigen::VectorXd& x) {
    try {
      GPHyper h = unpack(x);
      double v = nlml(covariance_from(dist, h.kernel), h.sigma2, y);
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  struct Screened {
    double value;
    std::size_t index;
  };
  std::vector<Screened> screened;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    double v = value_only(starts[i]);
    if (std::isfinite(v)) screened.push_back({v, i});
  }
  if (screened.empty())
    throw numerical_error("fit_hyperparams: nlml not evaluable at any start point");
  std::sort(screened.begin(), screened.end(), [](const Screened& a, const Screened& b) {
    return a.value < b.value || (a.value == b.value && a.index < b.index);
  });

  std::vector<std::size_t> refine;
  for (std::size_t i = 0; i < screened.size() && refine.size() < static_cast<std::size_t>(opt.refined_starts); ++i)
    refine.push_back(screened[i].index);
  // The center (the init when one was given) is always refined so the
  // descent contract nlml(result) <= nlml(init) holds by construction.
  std::size_t center_index = 13;  // all-zero offsets
  if (std::find(refine.begin(), refine.end(), center_index) == refine.end() &&
      std::isfinite(value_only(starts[center_index])))
    refine.push_back(center_index);

  FitResult result;
  double best_value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;
  Eigen::VectorXd best_grad;
  for (std::size_t idx : refine) {
    Eigen::VectorXd x = starts[idx];
    detail::ObjectiveEval ev;
    detail::minimize_bfgs(objective, x, ev, opt.max_iterations, opt.grad_tol);
    if (ev.ok && ev.value < best_value) {
      best_value = ev.value;
      best_x = x;
      best_grad = ev.grad;
    }
  }
  // Fall back to the best screened point if every refinement failed outright;
  // the caller sees the degraded-convergence flag.
  if (!std::isfinite(best_value)) {
    best_x = starts[screened.front().index];
    best_value = screened.front().value;
  }

  result.hyper = unpack(best_x);
  result.nlml = best_value;
  result.grad_norm = best_grad.size() ? best_grad.norm() : std::numeric_limits<double>::infinity();
  result.converged = result.grad_norm <= opt.grad_tol;
  return result;
}

}  // namespace gp
}  // namespace mp
