#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cmath>
#include <filesystem>

#include "mp/io.hpp"
#include "mp/synth.hpp"
#include "test_util.hpp"

using namespace mp;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("mp_synth_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("gen_trajectory") {
  SECTION("constant profile: quats_to_gyro recovers the rate") {
    synth::TrajectorySpec spec;
    spec.seed = 5;
    spec.duration = 2.0;
    spec.gyro_rate_hz = 100.0;
    spec.frame_rate_hz = 10.0;
    spec.profile = synth::MotionProfile::ConstantOmega;
    spec.omega_min = 0.4;
    spec.omega_max = 0.9;
    synth::Trajectory traj = synth::gen_trajectory(spec);

    GyroLog recovered = quats_to_gyro(traj.poses);
    for (std::size_t k = 0; k < recovered.size(); ++k) {
      REQUIRE((recovered[k].omega - traj.gyro[k].omega).cwiseAbs().maxCoeff() < 1e-4);
    }
  }

  SECTION("zero rates: distances vanish") {
    synth::TrajectorySpec spec;
    spec.seed = 6;
    spec.duration = 1.0;
    spec.profile = synth::MotionProfile::ConstantOmega;
    spec.omega_min = 0.0;
    spec.omega_max = 0.0;
    synth::Trajectory traj = synth::gen_trajectory(spec);
    for (const GyroSample& s : traj.gyro) REQUIRE(s.omega.isZero(0.0));
    Eigen::VectorXd s = cumulative_arclength(traj.frames, traj.gyro);
    REQUIRE(s.isZero(0.0));
    // rotation term of the pose distance vanishes too
    PoseSample a = traj.poses.front(), b = traj.poses.back();
    double trans = (a.p - b.p).norm();
    REQUIRE(pose_distance(a, b) == Catch::Approx(trans).margin(1e-12));
  }

  SECTION("same seed, same output; different seed differs") {
    synth::TrajectorySpec spec;
    spec.seed = 7;
    spec.duration = 1.5;
    synth::Trajectory a = synth::gen_trajectory(spec);
    synth::Trajectory b = synth::gen_trajectory(spec);
    REQUIRE(a.gyro.size() == b.gyro.size());
    for (std::size_t k = 0; k < a.gyro.size(); ++k) {
      REQUIRE(a.gyro[k].t == b.gyro[k].t);
      REQUIRE((a.gyro[k].omega - b.gyro[k].omega).cwiseAbs().maxCoeff() == 0.0);
      REQUIRE(a.poses[k].q.w == b.poses[k].q.w);
      REQUIRE(a.poses[k].q.x == b.poses[k].q.x);
      REQUIRE(a.poses[k].q.y == b.poses[k].q.y);
      REQUIRE(a.poses[k].q.z == b.poses[k].q.z);
    }
    spec.seed = 8;
    synth::Trajectory c = synth::gen_trajectory(spec);
    REQUIRE((a.gyro[10].omega - c.gyro[10].omega).cwiseAbs().maxCoeff() > 0.0);
  }

  SECTION("gyro and pose modalities agree on the arclength") {
    for (auto profile : {synth::MotionProfile::ConstantOmega, synth::MotionProfile::StopAndGo,
                         synth::MotionProfile::SmoothRandom}) {
      synth::TrajectorySpec spec;
      spec.seed = 9;
      spec.duration = 4.0;
      spec.profile = profile;
      synth::Trajectory traj = synth::gen_trajectory(spec);
      Eigen::VectorXd s = cumulative_arclength(traj.frames, traj.gyro);

      // arclength from the pose log's relative rotations
      PoseLog at = poses_at_frames(traj.frames, traj.poses);
      double acc = 0.0;
      for (std::size_t i = 1; i < at.size(); ++i) {
        acc += rot_distance(quat_to_rot(at[i - 1].q), quat_to_rot(at[i].q));
        REQUIRE(s(static_cast<Eigen::Index>(i)) == Catch::Approx(acc).margin(1e-6));
      }
    }
  }

  SECTION("stop-and-go stalls the arclength while time advances") {
    synth::TrajectorySpec spec;
    spec.seed = 10;
    spec.duration = 4.0;
    spec.profile = synth::MotionProfile::StopAndGo;
    synth::Trajectory traj = synth::gen_trajectory(spec);
    Eigen::VectorXd s = cumulative_arclength(traj.frames, traj.gyro);
    // frames land every 0.1 s; second 1..2 is an off segment
    bool stalled = false;
    for (std::size_t i = 1; i < traj.frames.size(); ++i) {
      if (traj.frames.t[i - 1] >= 1.0 && traj.frames.t[i] <= 2.0) {
        REQUIRE(s(static_cast<Eigen::Index>(i)) == s(static_cast<Eigen::Index>(i - 1)));
        stalled = true;
      }
    }
    REQUIRE(stalled);
    REQUIRE(s(s.size() - 1) > 0.0);
  }
}

TEST_CASE("sample_gp") {
  SECTION("identity covariance: column variance near 1") {
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(2000, 2000);
    Eigen::MatrixXd draw = synth::sample_gp(c, 1, 42);
    double mu = draw.col(0).mean();
    double var = (draw.col(0).array() - mu).square().mean();
    REQUIRE(var == Catch::Approx(1.0).epsilon(0.15));
  }

  SECTION("empirical covariance of many draws matches C") {
    Eigen::MatrixXd c(4, 4);
    c << 1.0, 0.7, 0.3, 0.1,
         0.7, 1.0, 0.7, 0.3,
         0.3, 0.7, 1.0, 0.7,
         0.1, 0.3, 0.7, 1.0;
    // 5000 independent draws live in the columns of one call
    Eigen::MatrixXd draws = synth::sample_gp(c, 5000, 43);
    Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(4, 4);
    for (int j = 0; j < draws.cols(); ++j) {
      emp += draws.col(j) * draws.col(j).transpose();
    }
    emp /= static_cast<double>(draws.cols());
    REQUIRE((emp - c).cwiseAbs().maxCoeff() < 0.1);
  }

  SECTION("seed determinism") {
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(8, 8);
    Eigen::MatrixXd a = synth::sample_gp(c, 3, 11);
    REQUIRE((a - synth::sample_gp(c, 3, 11)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a - synth::sample_gp(c, 3, 12)).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("make_dataset") {
  synth::TrajectorySpec spec;
  spec.seed = 21;
  spec.duration = 12.0;
  spec.gyro_rate_hz = 50.0;
  spec.frame_rate_hz = 10.0;
  spec.profile = synth::MotionProfile::SmoothRandom;

  KernelSpec kernel{KernelKind::Gyro, {1.0, 0.5}, {}};

  SECTION("round trip and residual variance") {
    auto dir = temp_dir("roundtrip");
    double sigma = 0.3;
    synth::DatasetManifest man = synth::make_dataset(spec, kernel, sigma, 100, dir);
    REQUIRE(man.frames == 121);

    GyroLog gyro = io::read_gyro_csv(dir / man.gyro_csv);
    REQUIRE(gyro.size() == 601);
    FrameTimeline frames = io::read_frames_csv(dir / man.frames_csv);
    REQUIRE(frames.size() == man.frames);
    LatentSequence clean = io::read_latents(dir / man.clean_latents);
    LatentSequence noisy = io::read_latents(dir / man.noisy_latents);
    REQUIRE(clean.Y.rows() == static_cast<Eigen::Index>(man.frames));
    REQUIRE(clean.Y.cols() == 100);
    REQUIRE(clean.timestamps == frames.t);

    // N*D = 12100 residuals; variance within 10% of sigma^2
    Eigen::MatrixXd resid = noisy.Y - clean.Y;
    double var = resid.array().square().mean();
    REQUIRE(var == Catch::Approx(sigma * sigma).epsilon(0.10));

    // writing what was read back reproduces the payload bit-exactly
    io::write_latents(dir / "clean2.lseq", clean);
    REQUIRE(io::detail::read_file(dir / man.clean_latents) ==
            io::detail::read_file(dir / "clean2.lseq"));
    std::filesystem::remove_all(dir);
  }

  SECTION("stationary spec writes an all-zero gyro log") {
    auto dir = temp_dir("still");
    synth::TrajectorySpec still = spec;
    still.duration = 2.0;
    still.profile = synth::MotionProfile::ConstantOmega;
    still.omega_min = 0.0;
    still.omega_max = 0.0;
    synth::make_dataset(still, kernel, 0.1, 4, dir);
    GyroLog gyro = io::read_gyro_csv(dir / "gyro.csv");
    for (const GyroSample& s : gyro) REQUIRE(s.omega.isZero(0.0));
    std::filesystem::remove_all(dir);
  }

  SECTION("manifest file exists and parses") {
    auto dir = temp_dir("manifest");
    synth::TrajectorySpec small = spec;
    small.duration = 1.0;
    synth::make_dataset(small, kernel, 0.2, 3, dir);
    std::string text = io::detail::read_file(dir / "manifest.json");
    auto j = nlohmann::json::parse(text);
    REQUIRE(j["dims"] == 3);
    REQUIRE(j["kernel"] == "gyro");
    std::filesystem::remove_all(dir);
  }
}
