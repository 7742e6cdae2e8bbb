#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mp/errors.hpp"
#include "mp/so3.hpp"

namespace mp {

struct Matern32Params {
  double gamma2 = 1.0;  // magnitude
  double ell = 1.0;     // length-scale, in units of the driving distance
};

inline void validate(const Matern32Params& p) {
  if (!(p.gamma2 > 0.0) || !std::isfinite(p.gamma2))
    throw validation_error("Matern32Params: gamma2 must be > 0, got " + std::to_string(p.gamma2));
  if (!(p.ell > 0.0) || !std::isfinite(p.ell))
    throw validation_error("Matern32Params: ell must be > 0, got " + std::to_string(p.ell));
}

enum class KernelKind { TimeDecay, Gyro, Pose, ProductTimeGyro };

inline const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::TimeDecay: return "time";
    case KernelKind::Gyro: return "gyro";
    case KernelKind::Pose: return "pose";
    case KernelKind::ProductTimeGyro: return "product";
  }
  return "?";
}

inline std::optional<KernelKind> kernel_kind_from_string(const std::string& s) {
  if (s == "time") return KernelKind::TimeDecay;
  if (s == "gyro") return KernelKind::Gyro;
  if (s == "pose") return KernelKind::Pose;
  if (s == "product") return KernelKind::ProductTimeGyro;
  return std::nullopt;
}

// Kernel selection plus its hyperparameters. For ProductTimeGyro, `main`
// parameterizes the gyro factor and `time_factor` the time factor; each
// factor keeps its own magnitude and length-scale.
struct KernelSpec {
  KernelKind kind = KernelKind::TimeDecay;
  Matern32Params main{};
  Matern32Params time_factor{};
};

inline void validate(const KernelSpec& k) {
  validate(k.main);
  if (k.kind == KernelKind::ProductTimeGyro) validate(k.time_factor);
}

struct FrameTimeline {
  std::vector<std::int64_t> frame_ids;
  std::vector<double> t;  // seconds, strictly increasing

  std::size_t size() const { return t.size(); }
};

inline void validate(const FrameTimeline& f) {
  if (f.t.empty()) throw validation_error("FrameTimeline: need at least 1 frame");
  if (f.frame_ids.size() != f.t.size())
    throw validation_error("FrameTimeline: frame_ids/t size mismatch");
  for (std::size_t i = 1; i < f.t.size(); ++i) {
    if (!(f.t[i] > f.t[i - 1]))
      throw validation_error("FrameTimeline: timestamps not strictly increasing at index " +
                             std::to_string(i));
  }
}

// Matern-3/2: gamma2 * (1 + sqrt(3) d / ell) * exp(-sqrt(3) d / ell).
inline double matern32(double d, const Matern32Params& p) {
  double r = std::sqrt(3.0) * d / p.ell;
  return p.gamma2 * (1.0 + r) * std::exp(-r);
}

// Combined translation + chordal rotation distance:
// sqrt(|pa - pb|^2 + (2/3) tr(I - Ra^T Rb)).
inline double pose_distance(const PoseSample& a, const PoseSample& b) {
  Mat3 ra = quat_to_rot(a.q);
  Mat3 rb = quat_to_rot(b.q);
  double rot = 3.0 - (ra.transpose() * rb).trace();
  rot = std::clamp(rot, 0.0, 4.0);
  return std::sqrt((a.p - b.p).squaredNorm() + (2.0 / 3.0) * rot);
}

struct GyroIntervalOptions {
  // A gyro hold interval longer than this that intersects the query is an
  // error rather than a silent extrapolation.
  double max_gap = 0.5;  // seconds
};

// Relative rotation accumulated over (ti, tj] from a gyro log. Sample k
// holds its rate over (t_{k-1}, t_k]; every hold interval intersecting the
// query contributes, with its dt clipped at both query boundaries. The
// clipping makes the result compose exactly across adjacent frame intervals.
inline Mat3 gyro_relative_rotation(const GyroLog& gyro, double ti, double tj,
                                   const GyroIntervalOptions& opt = {}) {
  if (gyro.empty()) throw validation_error("gyro_relative_rotation: empty gyro log");
  if (!(ti <= tj))
    throw validation_error("gyro_relative_rotation: ti must be <= tj, got ti = " +
                           std::to_string(ti) + ", tj = " + std::to_string(tj));
  if (ti == tj) return Mat3::Identity();
  if (gyro.front().t > ti || gyro.back().t < tj) {
    throw validation_error("gyro_relative_rotation: gyro log [" + std::to_string(gyro.front().t) +
                           ", " + std::to_string(gyro.back().t) + "] does not span [" +
                           std::to_string(ti) + ", " + std::to_string(tj) + "]");
  }

  // First sample whose stamp lies past ti; its hold interval is the first to
  // intersect (ti, tj].
  auto it = std::upper_bound(gyro.begin(), gyro.end(), ti,
                             [](double v, const GyroSample& s) { return v < s.t; });
  Mat3 r = Mat3::Identity();
  for (std::size_t k = static_cast<std::size_t>(it - gyro.begin()); k < gyro.size(); ++k) {
    double lo = gyro[k - 1].t;
    double hi = gyro[k].t;
    if (lo >= tj) break;
    if (hi - lo > opt.max_gap) {
      throw validation_error("gyro_relative_rotation: gap of " + std::to_string(hi - lo) +
                             " s between samples at t = " + std::to_string(lo) + " and t = " +
                             std::to_string(hi) + " exceeds max gap " + std::to_string(opt.max_gap));
    }
    double dt = std::min(hi, tj) - std::max(lo, ti);
    if (dt > 0.0) r = r * expm_so3(gyro[k].omega, dt);
  }
  return r;
}

// sqrt(tr(I - relative rotation)), trace argument clamped to [0, 4].
inline double gyro_distance(const GyroLog& gyro, double ti, double tj,
                            const GyroIntervalOptions& opt = {}) {
  Mat3 r = gyro_relative_rotation(gyro, ti, tj, opt);
  double arg = std::clamp(3.0 - r.trace(), 0.0, 4.0);
  return std::sqrt(arg);
}

// Cumulative rotational path length at the frame times:
// s_0 = 0, s_i = s_{i-1} + d_gyro(t_{i-1}, t_i).
inline Eigen::VectorXd cumulative_arclength(const FrameTimeline& frames, const GyroLog& gyro,
                                            const GyroIntervalOptions& opt = {}) {
  validate(frames);
  const std::size_t n = frames.size();
  Eigen::VectorXd s(n);
  s(0) = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    s(i) = s(i - 1) + gyro_distance(gyro, frames.t[i - 1], frames.t[i], opt);
  }
  return s;
}

// Pose samples matched to frame times (within 1e-9 s).
inline PoseLog poses_at_frames(const FrameTimeline& frames, const PoseLog& poses) {
  validate(frames);
  PoseLog out;
  out.reserve(frames.size());
  std::string missing;
  std::size_t pk = 0;
  for (double tf : frames.t) {
    while (pk < poses.size() && poses[pk].t < tf - 1e-9) ++pk;
    if (pk < poses.size() && std::abs(poses[pk].t - tf) <= 1e-9) {
      out.push_back(poses[pk]);
    } else {
      if (!missing.empty()) missing += ", ";
      missing += std::to_string(tf);
    }
  }
  if (!missing.empty())
    throw validation_error("poses_at_frames: no pose sample at frame times: " + missing);
  return out;
}

namespace detail {

inline Eigen::MatrixXd abs_difference_matrix(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double val = std::abs(v(i) - v(j));
      d(i, j) = val;
      d(j, i) = val;
    }
  }
  return d;
}

}  // namespace detail

// N x N distance matrix driving a kernel: |t_i - t_j| for TimeDecay,
// |s_i - s_j| (Markovian arclength) for Gyro, the full pose cross-distance
// for Pose. ProductTimeGyro has no single distance matrix.
inline Eigen::MatrixXd distance_matrix(KernelKind kind, const FrameTimeline& frames,
                                       const GyroLog* gyro = nullptr,
                                       const PoseLog* poses = nullptr,
                                       const GyroIntervalOptions& opt = {}) {
  validate(frames);
  const Eigen::Index n = static_cast<Eigen::Index>(frames.size());
  switch (kind) {
    case KernelKind::TimeDecay: {
      Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(frames.t.data(), n);
      return detail::abs_difference_matrix(t);
    }
    case KernelKind::Gyro: {
      if (!gyro) throw validation_error("distance_matrix: gyro kernel requires a gyro log");
      return detail::abs_difference_matrix(cumulative_arclength(frames, *gyro, opt));
    }
    case KernelKind::Pose: {
      if (!poses) throw validation_error("distance_matrix: pose kernel requires a pose log");
      PoseLog at = poses_at_frames(frames, *poses);
      Eigen::MatrixXd d(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
          double val = pose_distance(at[static_cast<std::size_t>(i)], at[static_cast<std::size_t>(j)]);
          d(i, j) = val;
          d(j, i) = val;
        }
      }
      return d;
    }
    case KernelKind::ProductTimeGyro:
      throw validation_error("distance_matrix: the product kernel has no single distance matrix; "
                             "request its factors separately");
  }
  throw validation_error("distance_matrix: unknown kernel kind");
}

inline Eigen::MatrixXd covariance_from_distance(const Eigen::MatrixXd& d, const Matern32Params& p) {
  validate(p);
  const Eigen::Index n = d.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) = matern32(d(i, i), p);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double val = matern32(d(i, j), p);
      c(i, j) = val;
      c(j, i) = val;
    }
  }
  return c;
}

// Covariance matrix over the frame timeline. The product kernel is the
// elementwise product of its time and gyro factors.
inline Eigen::MatrixXd build_covariance(const KernelSpec& kernel, const FrameTimeline& frames,
                                        const GyroLog* gyro = nullptr,
                                        const PoseLog* poses = nullptr,
                                        const GyroIntervalOptions& opt = {}) {
  validate(kernel);
  if (kernel.kind == KernelKind::ProductTimeGyro) {
    Eigen::MatrixXd ct = covariance_from_distance(
        distance_matrix(KernelKind::TimeDecay, frames, gyro, poses, opt), kernel.time_factor);
    Eigen::MatrixXd cg = covariance_from_distance(
        distance_matrix(KernelKind::Gyro, frames, gyro, poses, opt), kernel.main);
    return ct.cwiseProduct(cg);
  }
  return covariance_from_distance(distance_matrix(kernel.kind, frames, gyro, poses, opt),
                                  kernel.main);
}

}  // namespace mp
