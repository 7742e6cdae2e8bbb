#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mp/errors.hpp"
#include "mp/gp.hpp"
#include "mp/io.hpp"
#include "mp/kernels.hpp"
#include "mp/so3.hpp"

namespace mp {
namespace synth {

namespace detail {

// mt19937_64 with hand-rolled uniform/normal mapping so streams are pinned
// by the standard and identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {  // Box-Muller, cached pair
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vec3 unit_vector() {
    // Marsaglia rejection on the cube
    while (true) {
      Vec3 v(uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0));
      double n = v.norm();
      if (n > 1e-3 && n <= 1.0) return v / n;
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace detail

enum class MotionProfile { ConstantOmega, StopAndGo, SmoothRandom };

inline const char* to_string(MotionProfile p) {
  switch (p) {
    case MotionProfile::ConstantOmega: return "constant";
    case MotionProfile::StopAndGo: return "stopgo";
    case MotionProfile::SmoothRandom: return "random";
  }
  return "?";
}

inline std::optional<MotionProfile> motion_profile_from_string(const std::string& s) {
  if (s == "constant") return MotionProfile::ConstantOmega;
  if (s == "stopgo") return MotionProfile::StopAndGo;
  if (s == "random") return MotionProfile::SmoothRandom;
  return std::nullopt;
}

struct TrajectorySpec {
  std::uint64_t seed = 0;
  double duration = 10.0;       // seconds
  double gyro_rate_hz = 100.0;
  double frame_rate_hz = 10.0;
  MotionProfile profile = MotionProfile::SmoothRandom;
  double omega_min = 0.0;       // rad/s
  double omega_max = 1.0;       // rad/s
};

inline void validate(const TrajectorySpec& s) {
  if (!(s.duration > 0.0)) throw validation_error("TrajectorySpec: duration must be > 0");
  if (!(s.gyro_rate_hz > 0.0) || !(s.frame_rate_hz > 0.0))
    throw validation_error("TrajectorySpec: rates must be > 0");
  if (!(s.omega_min >= 0.0) || !(s.omega_max >= s.omega_min))
    throw validation_error("TrajectorySpec: need 0 <= omega_min <= omega_max");
}

struct Trajectory {
  GyroLog gyro;
  PoseLog poses;
  FrameTimeline frames;
};

// Deterministic trajectory generator. Orientations are the exact stepwise
// integral of the emitted gyro samples (sample k held over (t_{k-1}, t_k]),
// so the two modalities agree by construction. Frame timestamps are a
// subset of the gyro timestamps, bit-identical.
inline Trajectory gen_trajectory(const TrajectorySpec& spec) {
  validate(spec);
  detail::Rng rng(spec.seed);

  const std::size_t steps = static_cast<std::size_t>(std::llround(spec.duration * spec.gyro_rate_hz));
  if (steps == 0) throw validation_error("gen_trajectory: duration shorter than one gyro sample");

  // Profile state
  Vec3 const_omega = rng.unit_vector() * rng.uniform(spec.omega_min, spec.omega_max);
  struct Sine {
    Vec3 amp;
    Vec3 freq;
    Vec3 phase;
  };
  std::vector<Sine> sines;
  for (int i = 0; i < 3; ++i) {
    Sine s;
    s.amp = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    s.freq = Vec3(rng.uniform(0.1, 0.8), rng.uniform(0.1, 0.8), rng.uniform(0.1, 0.8));
    s.phase = Vec3(rng.uniform(0, 2 * std::numbers::pi), rng.uniform(0, 2 * std::numbers::pi),
                   rng.uniform(0, 2 * std::numbers::pi));
    sines.push_back(s);
  }
  auto raw_random_rate = [&](double t) {
    Vec3 w = Vec3::Zero();
    for (const Sine& s : sines) {
      for (int a = 0; a < 3; ++a)
        w(a) += s.amp(a) * std::sin(2 * std::numbers::pi * s.freq(a) * t + s.phase(a));
    }
    return w;
  };
  double random_peak = 1e-12;
  if (spec.profile == MotionProfile::SmoothRandom) {
    for (std::size_t k = 1; k <= steps; ++k) {
      double mid = (static_cast<double>(k) - 0.5) / spec.gyro_rate_hz;
      random_peak = std::max(random_peak, raw_random_rate(mid).norm());
    }
  }

  // One random axis per 1 s stop-and-go segment.
  std::vector<Vec3> segment_axes;
  auto segment_axis = [&](std::size_t seg) {
    while (segment_axes.size() <= seg) segment_axes.push_back(rng.unit_vector());
    return segment_axes[seg];
  };

  auto rate_at = [&](double t) -> Vec3 {
    switch (spec.profile) {
      case MotionProfile::ConstantOmega:
        return const_omega;
      case MotionProfile::StopAndGo: {
        std::size_t seg = static_cast<std::size_t>(std::floor(t));
        if (seg % 2 == 1) return Vec3::Zero();
        return segment_axis(seg) * spec.omega_max;
      }
      case MotionProfile::SmoothRandom:
        return raw_random_rate(t) * (spec.omega_max / random_peak);
    }
    return Vec3::Zero();
  };

  // Smooth translation: constant velocity plus sinusoidal sway.
  Vec3 vel = rng.unit_vector() * rng.uniform(0.5, 1.5);
  Vec3 sway_amp(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
  Vec3 sway_freq(rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5));
  auto position = [&](double t) {
    Vec3 p = vel * t;
    for (int a = 0; a < 3; ++a)
      p(a) += sway_amp(a) * std::sin(2 * std::numbers::pi * sway_freq(a) * t);
    return p;
  };

  Trajectory traj;
  traj.gyro.resize(steps + 1);
  traj.poses.resize(steps + 1);

  UnitQuaternion q;  // identity
  for (std::size_t k = 0; k <= steps; ++k) {
    double t = static_cast<double>(k) / spec.gyro_rate_hz;
    Vec3 w;
    if (k == 0) {
      w = rate_at(0.5 / spec.gyro_rate_hz);  // stamp 0 carries the first hold value
    } else {
      double prev = static_cast<double>(k - 1) / spec.gyro_rate_hz;
      double mid = 0.5 * (prev + t);
      w = rate_at(mid);
      q = quat_mul(q, quat_from_rotvec(w * (t - prev))).normalized();
    }
    traj.gyro[k] = {t, w};
    traj.poses[k] = {t, position(t), q};
  }

  const std::size_t frame_step =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.gyro_rate_hz / spec.frame_rate_hz)));
  std::int64_t id = 0;
  for (std::size_t k = 0; k <= steps; k += frame_step) {
    traj.frames.frame_ids.push_back(id++);
    traj.frames.t.push_back(traj.gyro[k].t);
  }
  return traj;
}

// Draws with column covariance C: chol(C + jitter) times standard normals.
inline Eigen::MatrixXd sample_gp(const Eigen::MatrixXd& c, int dims, std::uint64_t seed) {
  if (c.rows() != c.cols()) throw validation_error("sample_gp: covariance must be square");
  if (dims < 1) throw validation_error("sample_gp: dims must be >= 1");
  double scale = c.diagonal().maxCoeff();
  Eigen::MatrixXd cj = c;
  cj.diagonal().array() += 1e-9 * scale;  // prior samples need a strictly PD factor
  gp::RobustCholesky chol = gp::robust_cholesky(cj, scale);
  detail::Rng rng(seed);
  Eigen::MatrixXd g(c.rows(), dims);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
  return Eigen::MatrixXd(chol.llt.matrixL()) * g;
}

struct DatasetManifest {
  std::filesystem::path dir;
  std::string gyro_csv = "gyro.csv";
  std::string pose_csv = "poses.csv";
  std::string frames_csv = "frames.csv";
  std::string clean_latents = "latents_clean.lseq";
  std::string noisy_latents = "latents_noisy.lseq";
  std::string manifest_json = "manifest.json";
  std::size_t frames = 0;
  int dims = 0;
  TrajectorySpec spec;
  KernelSpec kernel;
  double noise_sigma = 0.0;
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j{
      {"dir", m.dir.string()},
      {"files",
       {{"gyro", m.gyro_csv},
        {"poses", m.pose_csv},
        {"frames", m.frames_csv},
        {"latents_clean", m.clean_latents},
        {"latents_noisy", m.noisy_latents}}},
      {"frames", m.frames},
      {"dims", m.dims},
      {"seed", m.spec.seed},
      {"profile", to_string(m.spec.profile)},
      {"duration_s", m.spec.duration},
      {"gyro_rate_hz", m.spec.gyro_rate_hz},
      {"frame_rate_hz", m.spec.frame_rate_hz},
      {"kernel", to_string(m.kernel.kind)},
      {"gamma2", m.kernel.main.gamma2},
      {"ell", m.kernel.main.ell},
      {"noise_sigma", m.noise_sigma},
  };
  if (m.kernel.kind == KernelKind::ProductTimeGyro) {
    j["gamma2_t"] = m.kernel.time_factor.gamma2;
    j["ell_t"] = m.kernel.time_factor.ell;
  }
  return j;
}

// Generates a trajectory, samples latents from the requested kernel's prior,
// adds white Gaussian noise, and writes everything in the io formats.
inline DatasetManifest make_dataset(const TrajectorySpec& spec, const KernelSpec& kernel,
                                    double noise_sigma, int dims,
                                    const std::filesystem::path& dir,
                                    const GyroIntervalOptions& opt = {}) {
  validate(spec);
  validate(kernel);
  if (!(noise_sigma >= 0.0)) throw validation_error("make_dataset: noise sigma must be >= 0");
  if (dims < 1) throw validation_error("make_dataset: dims must be >= 1");

  std::filesystem::create_directories(dir);
  Trajectory traj = gen_trajectory(spec);
  Eigen::MatrixXd c = build_covariance(kernel, traj.frames, &traj.gyro, &traj.poses, opt);

  Eigen::MatrixXd clean = sample_gp(c, dims, spec.seed + 0x9e3779b97f4a7c15ull);
  detail::Rng noise_rng(spec.seed + 0xd1b54a32d192ed03ull);
  Eigen::MatrixXd noisy = clean;
  for (Eigen::Index i = 0; i < noisy.rows(); ++i)
    for (Eigen::Index j = 0; j < noisy.cols(); ++j) noisy(i, j) += noise_sigma * noise_rng.normal();

  LatentSequence clean_seq{traj.frames.t, clean};
  LatentSequence noisy_seq{traj.frames.t, noisy};

  DatasetManifest man;
  man.dir = dir;
  man.frames = traj.frames.size();
  man.dims = dims;
  man.spec = spec;
  man.kernel = kernel;
  man.noise_sigma = noise_sigma;

  io::write_gyro_csv(dir / man.gyro_csv, traj.gyro);
  io::write_pose_csv(dir / man.pose_csv, traj.poses);
  io::write_frames_csv(dir / man.frames_csv, traj.frames);
  io::write_latents(dir / man.clean_latents, clean_seq);
  io::write_latents(dir / man.noisy_latents, noisy_seq);
  io::detail::write_file(dir / man.manifest_json, to_json(man).dump(2) + "\n");
  return man;
}

}  // namespace synth
}  // namespace mp
