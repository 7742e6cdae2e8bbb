#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mp/errors.hpp"
#include "mp/gp.hpp"
#include "mp/kernels.hpp"
#include "mp/ssgp.hpp"

namespace mp {
namespace fusion {

enum class Solver { Auto, Batch, StateSpace };

inline const char* to_string(Solver s) {
  switch (s) {
    case Solver::Auto: return "auto";
    case Solver::Batch: return "batch";
    case Solver::StateSpace: return "statespace";
  }
  return "?";
}

inline std::optional<Solver> solver_from_string(const std::string& s) {
  if (s == "auto") return Solver::Auto;
  if (s == "batch") return Solver::Batch;
  if (s == "statespace") return Solver::StateSpace;
  return std::nullopt;
}

enum class Mode { FullSequence, SlidingWindow, FixedLag };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::FullSequence: return "full-sequence";
    case Mode::SlidingWindow: return "sliding-window";
    case Mode::FixedLag: return "fixed-lag";
  }
  return "?";
}

struct FusionConfig {
  GPHyper hyper;                 // kernel + sigma2; replaced by the fit when fit = true
  bool fit = false;
  Solver solver = Solver::Auto;
  Mode mode = Mode::FullSequence;
  int window = 0;                // sliding-window size, >= 2
  int lag = 0;                   // fixed-lag horizon, >= 0
  GyroIntervalOptions gyro_opts{};
};

struct StageTimings {
  double fit_ms = 0.0;
  double distance_ms = 0.0;
  double solve_ms = 0.0;
  double total_ms = 0.0;
};

struct FusionReport {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::string kernel;
  std::string solver;
  std::string mode;
  GPHyper hyper;
  bool fitted = false;
  bool fit_converged = true;
  double var_min = 0.0, var_max = 0.0, var_mean = 0.0;
  StageTimings timings;
};

inline nlohmann::json to_json(const FusionReport& r) {
  nlohmann::json hyper{
      {"gamma2", r.hyper.kernel.main.gamma2},
      {"ell", r.hyper.kernel.main.ell},
      {"sigma2", r.hyper.sigma2},
  };
  if (r.hyper.kernel.kind == KernelKind::ProductTimeGyro) {
    hyper["gamma2_t"] = r.hyper.kernel.time_factor.gamma2;
    hyper["ell_t"] = r.hyper.kernel.time_factor.ell;
  }
  return nlohmann::json{
      {"frames", r.frames},
      {"dims", r.dims},
      {"kernel", r.kernel},
      {"solver", r.solver},
      {"mode", r.mode},
      {"hyperparameters", hyper},
      {"fitted", r.fitted},
      {"fit_converged", r.fit_converged},
      {"posterior_variance", {{"min", r.var_min}, {"max", r.var_max}, {"mean", r.var_mean}}},
      {"timings_ms",
       {{"fit", r.timings.fit_ms},
        {"distance", r.timings.distance_ms},
        {"solve", r.timings.solve_ms},
        {"total", r.timings.total_ms}}},
  };
}

struct FusionInput {
  FrameTimeline frames;
  LatentSequence latents;
  std::optional<GyroLog> gyro;
  std::optional<PoseLog> poses;
};

struct FusionOutput {
  LatentSequence fused;
  FusionReport report;
};

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

inline bool markovian(KernelKind k) {
  return k == KernelKind::TimeDecay || k == KernelKind::Gyro;
}

inline void check_alignment(const FrameTimeline& frames, const LatentSequence& latents) {
  if (latents.timestamps.size() != frames.size()) {
    throw validation_error("fusion: latent count " + std::to_string(latents.timestamps.size()) +
                           " does not match frame count " + std::to_string(frames.size()));
  }
  std::string bad;
  int shown = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (latents.timestamps[i] != frames.t[i]) {
      ++total;
      if (shown < 8) {
        if (!bad.empty()) bad += ", ";
        bad += "frame " + std::to_string(frames.frame_ids[i]) + " (" +
               std::to_string(frames.t[i]) + " vs " + std::to_string(latents.timestamps[i]) + ")";
        ++shown;
      }
    }
  }
  if (total > 0) {
    if (total > static_cast<std::size_t>(shown))
      bad += ", and " + std::to_string(total - shown) + " more";
    throw validation_error("fusion: latent timestamps do not match the frame timeline at: " + bad);
  }
}

// Markovian 1D input driving the state-space form: t for the time kernel,
// cumulative gyro arclength for the gyro kernel.
inline Eigen::VectorXd markov_input(KernelKind kind, const FrameTimeline& frames,
                                    const std::optional<GyroLog>& gyro,
                                    const GyroIntervalOptions& opt) {
  if (kind == KernelKind::TimeDecay) {
    return Eigen::Map<const Eigen::VectorXd>(frames.t.data(),
                                             static_cast<Eigen::Index>(frames.size()));
  }
  if (!gyro) throw validation_error("fusion: gyro kernel requires a gyro log");
  return cumulative_arclength(frames, *gyro, opt);
}

inline void require_streams(const FusionConfig& cfg, const FusionInput& in) {
  bool needs_gyro = cfg.hyper.kernel.kind == KernelKind::Gyro ||
                    cfg.hyper.kernel.kind == KernelKind::ProductTimeGyro;
  if (needs_gyro && !in.gyro)
    throw validation_error("fusion: kernel '" + std::string(to_string(cfg.hyper.kernel.kind)) +
                           "' requires a gyro log");
  if (cfg.hyper.kernel.kind == KernelKind::Pose && !in.poses)
    throw validation_error("fusion: pose kernel requires a pose log");
}

}  // namespace detail

// Full-sequence fusion: posterior means with unchanged shape and timestamps,
// plus a run report. Solver "auto" picks the linear-time state-space path
// for the Markovian kernels and the batch solve otherwise.
inline FusionOutput fuse_sequence(const FusionInput& input, const FusionConfig& config) {
  auto t_total = std::chrono::steady_clock::now();
  validate(input.frames);
  validate(input.latents);
  detail::check_alignment(input.frames, input.latents);
  detail::require_streams(config, input);

  const GyroLog* gyro = input.gyro ? &*input.gyro : nullptr;
  const PoseLog* poses = input.poses ? &*input.poses : nullptr;
  const KernelKind kind = config.hyper.kernel.kind;
  const bool markov = detail::markovian(kind);

  Solver solver = config.solver;
  if (solver == Solver::StateSpace && !markov) {
    throw validation_error(
        "fusion: unsupported combination: solver 'statespace' requires a Markovian kernel "
        "(time or gyro), got '" + std::string(to_string(kind)) + "'");
  }
  if (solver == Solver::Auto) solver = markov ? Solver::StateSpace : Solver::Batch;

  FusionReport report;
  report.frames = input.frames.size();
  report.dims = static_cast<std::size_t>(input.latents.Y.cols());
  report.kernel = to_string(kind);
  report.mode = to_string(config.mode);

  GPHyper hyper = config.hyper;
  if (config.fit) {
    auto t_fit = std::chrono::steady_clock::now();
    gp::FitOptions fopt;
    fopt.gyro_opts = config.gyro_opts;
    gp::FitResult fit =
        gp::fit_hyperparams(input.frames, gyro, poses, input.latents.Y, kind, std::nullopt, fopt);
    hyper = fit.hyper;
    report.fitted = true;
    report.fit_converged = fit.converged;
    report.timings.fit_ms = detail::ms_since(t_fit);
  }
  validate(hyper);
  report.hyper = hyper;

  PosteriorResult post;
  if (config.mode == Mode::SlidingWindow) {
    // A full batch posterior per window; each frame is emitted from the
    // window it centers (shifted at the sequence ends).
    if (config.window < 2) throw validation_error("fusion: sliding window must be >= 2");
    const std::size_t n = input.frames.size();
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(config.window), n);
    auto t_dist = std::chrono::steady_clock::now();
    Eigen::MatrixXd c_full = build_covariance(hyper.kernel, input.frames, gyro, poses, config.gyro_opts);
    report.timings.distance_ms = detail::ms_since(t_dist);
    report.solver = "batch";

    auto t_solve = std::chrono::steady_clock::now();
    post.mean.resize(c_full.rows(), input.latents.Y.cols());
    post.var.resize(c_full.rows());
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t lo = i >= (w - 1) / 2 ? i - (w - 1) / 2 : 0;
      lo = std::min(lo, n - w);
      PosteriorResult win = gp::posterior(c_full.block(lo, lo, w, w), hyper.sigma2,
                                          input.latents.Y.middleRows(lo, w));
      post.mean.row(static_cast<Eigen::Index>(i)) = win.mean.row(static_cast<Eigen::Index>(i - lo));
      post.var(static_cast<Eigen::Index>(i)) = win.var(static_cast<Eigen::Index>(i - lo));
    }
    report.timings.solve_ms = detail::ms_since(t_solve);
  } else if (solver == Solver::StateSpace) {
    auto t_dist = std::chrono::steady_clock::now();
    Eigen::VectorXd s = detail::markov_input(kind, input.frames, input.gyro, config.gyro_opts);
    report.timings.distance_ms = detail::ms_since(t_dist);
    report.solver = "statespace";

    auto t_solve = std::chrono::steady_clock::now();
    ssgp::StateSpaceModel model = ssgp::matern32_ss(hyper.kernel.main);
    post = ssgp::kalman_rts(model, s, input.latents.Y, hyper.sigma2);
    report.timings.solve_ms = detail::ms_since(t_solve);
  } else {
    auto t_dist = std::chrono::steady_clock::now();
    Eigen::MatrixXd c = build_covariance(hyper.kernel, input.frames, gyro, poses, config.gyro_opts);
    report.timings.distance_ms = detail::ms_since(t_dist);
    report.solver = "batch";

    auto t_solve = std::chrono::steady_clock::now();
    post = gp::posterior(c, hyper.sigma2, input.latents.Y);
    report.timings.solve_ms = detail::ms_since(t_solve);
  }

  report.var_min = post.var.minCoeff();
  report.var_max = post.var.maxCoeff();
  report.var_mean = post.var.mean();
  report.timings.total_ms = detail::ms_since(t_total);

  FusionOutput out;
  out.fused.timestamps = input.latents.timestamps;
  out.fused.Y = std::move(post.mean);
  out.report = report;
  return out;
}

struct FusedFrame {
  std::size_t index = 0;
  Eigen::VectorXd mean;
  double var = 0.0;
};

// Fixed-lag streaming smoother over a Markovian kernel: frame i is emitted
// once frame i + lag has been pushed, carrying the smoothed estimate that
// uses observations up to i + lag. lag = 0 yields pure filtering; lag = N-1
// reproduces the full smoother.
class StreamingFuser {
 public:
  StreamingFuser(const ssgp::StateSpaceModel& model, double sigma2, int lag)
      : model_(model), sigma2_(sigma2), lag_(lag) {
    if (!(sigma2 > 0.0)) throw validation_error("StreamingFuser: sigma2 must be > 0");
    if (lag < 0) throw validation_error("StreamingFuser: lag must be >= 0");
  }

  // Push the next frame (nondecreasing input coordinate). Returns the frame
  // that became final, if any.
  std::optional<FusedFrame> push(double input, const Eigen::VectorXd& y) {
    if (count_ > 0 && input < last_input_)
      throw validation_error("StreamingFuser: inputs decrease at frame " + std::to_string(count_));

    Record rec;
    Eigen::MatrixXd mean_pred;
    if (count_ == 0) {
      mean_pred = Eigen::MatrixXd::Zero(2, y.size());
      rec.cov_pred = model_.Pinf;
      rec.a = ssgp::Mat2::Identity();
    } else {
      ssgp::StepTransition st = ssgp::step_transition(model_, input - last_input_);
      const Record& prev = window_.back();
      rec.a = st.A;
      mean_pred = st.A * prev.mean_f;
      rec.cov_pred = st.A * prev.cov_f * st.A.transpose() + st.Q;
      rec.cov_pred = 0.5 * (rec.cov_pred + rec.cov_pred.transpose()).eval();
    }
    double innov_var = rec.cov_pred(0, 0) + sigma2_;
    ssgp::Vec2 gain = rec.cov_pred.col(0) / innov_var;
    rec.mean_f = mean_pred + gain * (y.transpose() - mean_pred.row(0));
    rec.cov_f = rec.cov_pred - gain * innov_var * gain.transpose();
    rec.cov_f = 0.5 * (rec.cov_f + rec.cov_f.transpose()).eval();

    window_.push_back(std::move(rec));
    if (window_.size() > static_cast<std::size_t>(lag_) + 1) window_.pop_front();
    last_input_ = input;
    ++count_;

    if (count_ <= static_cast<std::size_t>(lag_)) return std::nullopt;
    // A backward pass across the whole window finalizes its oldest frame,
    // which is exactly lag frames behind the one just pushed.
    return smooth_oldest();
  }

  // Flush the frames still inside the lag horizon, oldest first. Their
  // estimates use all observations seen, i.e. less than a full lag of
  // lookahead for the last frames of the stream.
  std::vector<FusedFrame> finish() {
    std::size_t pending = std::min<std::size_t>(count_, static_cast<std::size_t>(lag_));
    std::vector<FusedFrame> out;
    if (pending > 0) out = smooth_newest(pending);
    window_.clear();
    return out;
  }

 private:
  struct Record {
    Eigen::MatrixXd mean_f;  // filtered mean (2 x D)
    ssgp::Mat2 cov_pred;     // covariance predicted into this step
    ssgp::Mat2 cov_f;        // filtered covariance
    ssgp::Mat2 a;            // transition into this step
  };

  std::size_t global_index(std::size_t k) const { return count_ - window_.size() + k; }

  void step_back(std::size_t k, Eigen::MatrixXd& mean_s, ssgp::Mat2& cov_s) const {
    const Record& cur = window_[k];
    const Record& next = window_[k + 1];
    ssgp::Mat2 gain = cur.cov_f * next.a.transpose() * ssgp::detail::inverse_2x2(next.cov_pred);
    Eigen::MatrixXd mean_pred = next.a * cur.mean_f;
    mean_s = cur.mean_f + gain * (mean_s - mean_pred);
    cov_s = cur.cov_f + gain * (cov_s - next.cov_pred) * gain.transpose();
    cov_s = 0.5 * (cov_s + cov_s.transpose()).eval();
  }

  // Full RTS pass across the window; only the oldest frame is materialized.
  FusedFrame smooth_oldest() {
    std::size_t from = window_.size() - 1;
    Eigen::MatrixXd mean_s = window_[from].mean_f;
    ssgp::Mat2 cov_s = window_[from].cov_f;
    for (std::size_t k = from; k-- > 0;) step_back(k, mean_s, cov_s);
    return {global_index(0), mean_s.row(0).transpose(), std::max(cov_s(0, 0), 0.0)};
  }

  // Partial RTS pass returning the newest `m` smoothed frames in stream
  // order. Smoothing starts at the stream head, so every visited state
  // carries its final estimate given the data seen so far.
  std::vector<FusedFrame> smooth_newest(std::size_t m) {
    std::size_t from = window_.size() - 1;
    Eigen::MatrixXd mean_s = window_[from].mean_f;
    ssgp::Mat2 cov_s = window_[from].cov_f;

    std::vector<FusedFrame> out;
    out.reserve(m);
    out.push_back({global_index(from), mean_s.row(0).transpose(), std::max(cov_s(0, 0), 0.0)});
    for (std::size_t k = from; k-- > 0 && out.size() < m;) {
      step_back(k, mean_s, cov_s);
      out.push_back({global_index(k), mean_s.row(0).transpose(), std::max(cov_s(0, 0), 0.0)});
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  ssgp::StateSpaceModel model_;
  double sigma2_;
  int lag_;
  std::deque<Record> window_;
  double last_input_ = 0.0;
  std::size_t count_ = 0;
};

// Runs the fixed-lag smoother over a whole in-memory sequence.
inline FusionOutput fuse_streaming(const FusionInput& input, const FusionConfig& config) {
  auto t_total = std::chrono::steady_clock::now();
  validate(input.frames);
  validate(input.latents);
  detail::check_alignment(input.frames, input.latents);
  detail::require_streams(config, input);

  const KernelKind kind = config.hyper.kernel.kind;
  if (!detail::markovian(kind)) {
    throw validation_error(
        "fusion: unsupported combination: fixed-lag streaming requires a Markovian kernel "
        "(time or gyro), got '" + std::string(to_string(kind)) + "'");
  }
  validate(config.hyper);

  auto t_dist = std::chrono::steady_clock::now();
  Eigen::VectorXd s = detail::markov_input(kind, input.frames, input.gyro, config.gyro_opts);
  double distance_ms = detail::ms_since(t_dist);

  auto t_solve = std::chrono::steady_clock::now();
  ssgp::StateSpaceModel model = ssgp::matern32_ss(config.hyper.kernel.main);
  StreamingFuser fuser(model, config.hyper.sigma2, config.lag);

  const Eigen::Index n = s.size();
  FusionOutput out;
  out.fused.timestamps = input.latents.timestamps;
  out.fused.Y.resize(n, input.latents.Y.cols());
  Eigen::VectorXd var(n);
  auto place = [&](const FusedFrame& f) {
    out.fused.Y.row(static_cast<Eigen::Index>(f.index)) = f.mean.transpose();
    var(static_cast<Eigen::Index>(f.index)) = f.var;
  };
  for (Eigen::Index k = 0; k < n; ++k) {
    if (auto emitted = fuser.push(s(k), input.latents.Y.row(k).transpose())) place(*emitted);
  }
  for (const FusedFrame& f : fuser.finish()) place(f);

  out.report.frames = input.frames.size();
  out.report.dims = static_cast<std::size_t>(input.latents.Y.cols());
  out.report.kernel = to_string(kind);
  out.report.solver = "statespace";
  out.report.mode = to_string(Mode::FixedLag);
  out.report.hyper = config.hyper;
  out.report.var_min = var.minCoeff();
  out.report.var_max = var.maxCoeff();
  out.report.var_mean = var.mean();
  out.report.timings.distance_ms = distance_ms;
  out.report.timings.solve_ms = detail::ms_since(t_solve);
  out.report.timings.total_ms = detail::ms_since(t_total);
  return out;
}

}  // namespace fusion
}  // namespace mp
