// Command-line front end for the movement-induced GP fusion library.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mp/mp.hpp"

namespace {

using nlohmann::json;

struct KernelFlags {
  std::string kind = "time";
  double gamma2 = 1.0;
  double ell = 1.0;
  double gamma2_t = 1.0;
  double ell_t = 1.0;
  CLI::Option* gamma2_opt = nullptr;
  CLI::Option* ell_opt = nullptr;
  CLI::Option* gamma2_t_opt = nullptr;
  CLI::Option* ell_t_opt = nullptr;

  void add_kind(CLI::App* cmd, bool with_product) {
    std::vector<std::string> kinds = {"time", "gyro", "pose"};
    if (with_product) kinds.push_back("product");
    cmd->add_option("--kernel,--kind", kind, "kernel kind")
        ->required()
        ->check(CLI::IsMember(kinds));
  }

  void add_params(CLI::App* cmd) {
    gamma2_opt = cmd->add_option("--gamma2", gamma2, "kernel magnitude (gyro factor for product)");
    ell_opt = cmd->add_option("--ell", ell, "kernel length-scale (gyro factor for product)");
    gamma2_t_opt = cmd->add_option("--gamma2-t", gamma2_t, "time-factor magnitude (product kernel)");
    ell_t_opt = cmd->add_option("--ell-t", ell_t, "time-factor length-scale (product kernel)");
  }

  mp::KernelKind parsed_kind() const { return *mp::kernel_kind_from_string(kind); }

  void require_params() const {
    if (!gamma2_opt->count() || !ell_opt->count())
      throw CLI::ValidationError("kernel parameters", "--gamma2 and --ell are required");
    if (parsed_kind() == mp::KernelKind::ProductTimeGyro &&
        (!gamma2_t_opt->count() || !ell_t_opt->count()))
      throw CLI::ValidationError("kernel parameters",
                                 "the product kernel also requires --gamma2-t and --ell-t");
  }

  mp::KernelSpec spec() const {
    mp::KernelSpec k;
    k.kind = parsed_kind();
    k.main = {gamma2, ell};
    if (k.kind == mp::KernelKind::ProductTimeGyro) k.time_factor = {gamma2_t, ell_t};
    return k;
  }
};

struct StreamFlags {
  std::string frames_path;
  std::string gyro_path;
  std::string poses_path;
  double max_gap = 0.5;

  void add(CLI::App* cmd) {
    cmd->add_option("--frames", frames_path, "frame timeline CSV")->required();
    cmd->add_option("--gyro", gyro_path, "gyro log CSV (t,wx,wy,wz)");
    cmd->add_option("--poses", poses_path, "pose log CSV (t,px,py,pz,qw,qx,qy,qz)");
    cmd->add_option("--max-gap", max_gap, "largest tolerated gyro sample gap in seconds")
        ->capture_default_str();
  }

  // Flag-presence check for the requested kernel; missing sensor flags are
  // usage errors, not data errors.
  void require_for(mp::KernelKind kind) const {
    bool needs_gyro = kind == mp::KernelKind::Gyro || kind == mp::KernelKind::ProductTimeGyro;
    if (needs_gyro && gyro_path.empty())
      throw CLI::ValidationError("--gyro", "required for the '" +
                                               std::string(mp::to_string(kind)) + "' kernel");
    if (kind == mp::KernelKind::Pose && poses_path.empty())
      throw CLI::ValidationError("--poses", "required for the 'pose' kernel");
  }

  mp::FrameTimeline load_frames() const { return mp::io::read_frames_csv(frames_path); }
  std::optional<mp::GyroLog> load_gyro() const {
    if (gyro_path.empty()) return std::nullopt;
    return mp::io::read_gyro_csv(gyro_path);
  }
  std::optional<mp::PoseLog> load_poses() const {
    if (poses_path.empty()) return std::nullopt;
    return mp::io::read_pose_csv(poses_path);
  }
  mp::GyroIntervalOptions gyro_opts() const { return {max_gap}; }
};

int g_threads = 0;

void apply_threads() {
  if (g_threads > 0) mp::set_thread_limit(g_threads);
}

// JSON has no infinity; the identical-image PSNR sentinel becomes "inf".
json json_number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

json hyper_json(const mp::GPHyper& h) {
  json j{{"kernel", mp::to_string(h.kernel.kind)},
         {"gamma2", h.kernel.main.gamma2},
         {"ell", h.kernel.main.ell},
         {"sigma2", h.sigma2}};
  if (h.kernel.kind == mp::KernelKind::ProductTimeGyro) {
    j["gamma2_t"] = h.kernel.time_factor.gamma2;
    j["ell_t"] = h.kernel.time_factor.ell;
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motionprior: movement-induced Gaussian-process priors for temporal latent fusion"};
  app.require_subcommand(1);
  app.add_option("--threads", g_threads,
                 "worker-thread cap (default: MOTIONPRIOR_THREADS or hardware)");

  // --- distances ---
  auto* cmd_dist = app.add_subcommand("distances", "write the N x N kernel distance matrix");
  static KernelFlags dist_kernel;
  static StreamFlags dist_streams;
  static std::string dist_out;
  dist_kernel.add_kind(cmd_dist, /*with_product=*/false);
  dist_streams.add(cmd_dist);
  cmd_dist->add_option("--out", dist_out, "output CSV path")->required();
  cmd_dist->callback([] {
    apply_threads();
    mp::KernelKind kind = dist_kernel.parsed_kind();
    dist_streams.require_for(kind);
    auto frames = dist_streams.load_frames();
    auto gyro = dist_streams.load_gyro();
    auto poses = dist_streams.load_poses();
    Eigen::MatrixXd d = mp::distance_matrix(kind, frames, gyro ? &*gyro : nullptr,
                                            poses ? &*poses : nullptr, dist_streams.gyro_opts());
    mp::io::write_matrix_csv(dist_out, d);
  });

  // --- covariance ---
  auto* cmd_cov = app.add_subcommand("covariance", "write the N x N kernel covariance matrix");
  static KernelFlags cov_kernel;
  static StreamFlags cov_streams;
  static std::string cov_out;
  cov_kernel.add_kind(cmd_cov, /*with_product=*/true);
  cov_kernel.add_params(cmd_cov);
  cov_streams.add(cmd_cov);
  cmd_cov->add_option("--out", cov_out, "output CSV path")->required();
  cmd_cov->callback([] {
    apply_threads();
    cov_kernel.require_params();
    mp::KernelKind kind = cov_kernel.parsed_kind();
    cov_streams.require_for(kind);
    auto frames = cov_streams.load_frames();
    auto gyro = cov_streams.load_gyro();
    auto poses = cov_streams.load_poses();
    Eigen::MatrixXd c = mp::build_covariance(cov_kernel.spec(), frames, gyro ? &*gyro : nullptr,
                                             poses ? &*poses : nullptr, cov_streams.gyro_opts());
    mp::io::write_matrix_csv(cov_out, c);
  });

  // --- fuse ---
  auto* cmd_fuse = app.add_subcommand("fuse", "fuse a latent sequence with a movement prior");
  static KernelFlags fuse_kernel;
  static StreamFlags fuse_streams;
  static std::string fuse_latents, fuse_out, fuse_report, fuse_solver = "auto";
  static double fuse_sigma2 = 0.0;
  static bool fuse_fit = false;
  static int fuse_window = 0, fuse_lag = -1;
  fuse_kernel.add_kind(cmd_fuse, /*with_product=*/true);
  fuse_kernel.add_params(cmd_fuse);
  fuse_streams.add(cmd_fuse);
  cmd_fuse->add_option("--latents", fuse_latents, "input latent sequence (.lseq)")->required();
  CLI::Option* fuse_sigma2_opt = cmd_fuse->add_option("--sigma2", fuse_sigma2, "noise variance");
  cmd_fuse->add_flag("--fit", fuse_fit, "fit hyperparameters by marginal likelihood");
  cmd_fuse->add_option("--solver", fuse_solver, "solver")
      ->check(CLI::IsMember({"auto", "batch", "statespace"}));
  CLI::Option* fuse_window_opt =
      cmd_fuse->add_option("--window", fuse_window, "sliding-window size (emit center frame)");
  CLI::Option* fuse_lag_opt =
      cmd_fuse->add_option("--lag", fuse_lag, "fixed-lag streaming horizon");
  fuse_window_opt->excludes(fuse_lag_opt);
  cmd_fuse->add_option("--out", fuse_out, "output latent sequence (.lseq)")->required();
  cmd_fuse->add_option("--report", fuse_report, "write the run report JSON here");
  cmd_fuse->callback([fuse_sigma2_opt, fuse_window_opt, fuse_lag_opt] {
    apply_threads();
    mp::KernelKind kind = fuse_kernel.parsed_kind();
    fuse_streams.require_for(kind);

    mp::fusion::FusionConfig cfg;
    cfg.hyper.kernel.kind = kind;
    if (fuse_fit) {
      if (fuse_kernel.gamma2_opt->count() || fuse_kernel.ell_opt->count() ||
          fuse_kernel.gamma2_t_opt->count() || fuse_kernel.ell_t_opt->count() ||
          fuse_sigma2_opt->count())
        throw CLI::ValidationError("--fit", "give either --fit or explicit hyperparameters");
      cfg.fit = true;
    } else {
      fuse_kernel.require_params();
      if (!fuse_sigma2_opt->count())
        throw CLI::ValidationError("--sigma2", "required unless --fit is given");
      cfg.hyper.kernel = fuse_kernel.spec();
      cfg.hyper.sigma2 = fuse_sigma2;
    }
    cfg.solver = *mp::fusion::solver_from_string(fuse_solver);
    cfg.gyro_opts = fuse_streams.gyro_opts();

    bool markov = kind == mp::KernelKind::TimeDecay || kind == mp::KernelKind::Gyro;
    if (cfg.solver == mp::fusion::Solver::StateSpace && !markov)
      throw CLI::ValidationError(
          "--solver", "unsupported combination: the statespace solver requires a Markovian "
                      "kernel (time or gyro)");
    if (fuse_window_opt->count()) {
      if (fuse_window < 2) throw CLI::ValidationError("--window", "must be >= 2");
      cfg.mode = mp::fusion::Mode::SlidingWindow;
      cfg.window = fuse_window;
    }
    if (fuse_lag_opt->count()) {
      if (fuse_lag < 0) throw CLI::ValidationError("--lag", "must be >= 0");
      if (!markov)
        throw CLI::ValidationError("--lag", "unsupported combination: fixed-lag streaming "
                                            "requires a Markovian kernel (time or gyro)");
      cfg.mode = mp::fusion::Mode::FixedLag;
      cfg.lag = fuse_lag;
    }

    mp::fusion::FusionInput input;
    input.frames = fuse_streams.load_frames();
    input.latents = mp::io::read_latents(fuse_latents);
    input.gyro = fuse_streams.load_gyro();
    input.poses = fuse_streams.load_poses();

    mp::fusion::FusionOutput out;
    if (cfg.mode == mp::fusion::Mode::FixedLag) {
      if (cfg.fit) {
        mp::gp::FitOptions fopt;
        fopt.gyro_opts = cfg.gyro_opts;
        auto fit = mp::gp::fit_hyperparams(input.frames, input.gyro ? &*input.gyro : nullptr,
                                           input.poses ? &*input.poses : nullptr, input.latents.Y,
                                           kind, std::nullopt, fopt);
        cfg.hyper = fit.hyper;
        cfg.fit = false;
        out = mp::fusion::fuse_streaming(input, cfg);
        out.report.fitted = true;
        out.report.fit_converged = fit.converged;
      } else {
        out = mp::fusion::fuse_streaming(input, cfg);
      }
    } else {
      out = mp::fusion::fuse_sequence(input, cfg);
    }

    mp::io::write_latents(fuse_out, out.fused);
    json rep = mp::fusion::to_json(out.report);
    if (!fuse_report.empty())
      mp::io::detail::write_file(fuse_report, rep.dump(2) + "\n");
    else
      std::cout << rep.dump(2) << "\n";
  });

  // --- fit ---
  auto* cmd_fit = app.add_subcommand("fit", "fit kernel hyperparameters by marginal likelihood");
  static KernelFlags fit_kernel;
  static StreamFlags fit_streams;
  static std::string fit_latents;
  fit_kernel.add_kind(cmd_fit, /*with_product=*/true);
  fit_streams.add(cmd_fit);
  cmd_fit->add_option("--latents", fit_latents, "input latent sequence (.lseq)")->required();
  cmd_fit->callback([] {
    apply_threads();
    mp::KernelKind kind = fit_kernel.parsed_kind();
    fit_streams.require_for(kind);
    auto frames = fit_streams.load_frames();
    auto gyro = fit_streams.load_gyro();
    auto poses = fit_streams.load_poses();
    mp::LatentSequence latents = mp::io::read_latents(fit_latents);
    mp::gp::FitOptions fopt;
    fopt.gyro_opts = fit_streams.gyro_opts();
    mp::gp::FitResult fit =
        mp::gp::fit_hyperparams(frames, gyro ? &*gyro : nullptr, poses ? &*poses : nullptr,
                                latents.Y, kind, std::nullopt, fopt);
    json j = hyper_json(fit.hyper);
    j["nlml"] = fit.nlml;
    j["grad_norm"] = fit.grad_norm;
    j["converged"] = fit.converged;
    std::cout << j.dump(2) << "\n";
  });

  // --- quat2gyro ---
  auto* cmd_q2g = app.add_subcommand("quat2gyro",
                                     "recover angular velocities from an orientation track");
  static std::string q2g_poses, q2g_out;
  cmd_q2g->add_option("--poses", q2g_poses, "pose log CSV")->required();
  cmd_q2g->add_option("--out", q2g_out, "output gyro CSV")->required();
  cmd_q2g->callback([] {
    apply_threads();
    mp::PoseLog poses = mp::io::read_pose_csv(q2g_poses);
    mp::io::write_gyro_csv(q2g_out, mp::quats_to_gyro(poses));
  });

  // --- sample ---
  auto* cmd_sample = app.add_subcommand("sample", "draw latent sequences from the kernel prior");
  static KernelFlags sample_kernel;
  static StreamFlags sample_streams;
  static std::string sample_out;
  static int sample_dims = 1;
  static std::uint64_t sample_seed = 0;
  sample_kernel.add_kind(cmd_sample, /*with_product=*/true);
  sample_kernel.add_params(cmd_sample);
  sample_streams.add(cmd_sample);
  cmd_sample->add_option("--dims", sample_dims, "latent dimension count")->required();
  cmd_sample->add_option("--seed", sample_seed, "RNG seed")->capture_default_str();
  cmd_sample->add_option("--out", sample_out, "output latent sequence (.lseq)")->required();
  cmd_sample->callback([] {
    apply_threads();
    sample_kernel.require_params();
    mp::KernelKind kind = sample_kernel.parsed_kind();
    sample_streams.require_for(kind);
    auto frames = sample_streams.load_frames();
    auto gyro = sample_streams.load_gyro();
    auto poses = sample_streams.load_poses();
    Eigen::MatrixXd c = mp::build_covariance(sample_kernel.spec(), frames,
                                             gyro ? &*gyro : nullptr, poses ? &*poses : nullptr,
                                             sample_streams.gyro_opts());
    mp::LatentSequence seq{frames.t, mp::synth::sample_gp(c, sample_dims, sample_seed)};
    mp::io::write_latents(sample_out, seq);
  });

  // --- synth ---
  auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  static KernelFlags synth_kernel;
  static std::string synth_profile, synth_out;
  static mp::synth::TrajectorySpec synth_spec;
  static double synth_noise = 0.0;
  static int synth_dims = 8;
  static double synth_max_gap = 0.5;
  cmd_synth->add_option("--profile", synth_profile, "motion profile")
      ->required()
      ->check(CLI::IsMember({"constant", "stopgo", "random"}));
  cmd_synth->add_option("--duration", synth_spec.duration, "seconds")->capture_default_str();
  cmd_synth->add_option("--gyro-rate", synth_spec.gyro_rate_hz, "Hz")->capture_default_str();
  cmd_synth->add_option("--frame-rate", synth_spec.frame_rate_hz, "Hz")->capture_default_str();
  cmd_synth->add_option("--omega-min", synth_spec.omega_min, "rad/s")->capture_default_str();
  cmd_synth->add_option("--omega-max", synth_spec.omega_max, "rad/s")->capture_default_str();
  cmd_synth->add_option("--seed", synth_spec.seed, "RNG seed")->capture_default_str();
  synth_kernel.add_kind(cmd_synth, /*with_product=*/true);
  synth_kernel.add_params(cmd_synth);
  cmd_synth->add_option("--noise", synth_noise, "observation noise stddev")->capture_default_str();
  cmd_synth->add_option("--dims", synth_dims, "latent dimension count")->capture_default_str();
  cmd_synth->add_option("--max-gap", synth_max_gap, "largest tolerated gyro gap (s)")
      ->capture_default_str();
  cmd_synth->add_option("--out", synth_out, "output directory")->required();
  cmd_synth->callback([] {
    apply_threads();
    synth_kernel.require_params();
    synth_spec.profile = *mp::synth::motion_profile_from_string(synth_profile);
    mp::synth::DatasetManifest man = mp::synth::make_dataset(
        synth_spec, synth_kernel.spec(), synth_noise, synth_dims, synth_out, {synth_max_gap});
    std::cout << mp::synth::to_json(man).dump(2) << "\n";
  });

  // --- eval-disparity ---
  auto* cmd_evald = app.add_subcommand("eval-disparity",
                                       "disparity error metrics against ground truth");
  static std::string evald_pred, evald_gt;
  cmd_evald->add_option("--pred", evald_pred, "predicted disparity (PFM or 16-bit PGM)")->required();
  cmd_evald->add_option("--gt", evald_gt, "ground-truth disparity")->required();
  cmd_evald->callback([] {
    apply_threads();
    mp::DisparityMap pred = mp::io::read_disparity(evald_pred);
    mp::DisparityMap gt = mp::io::read_disparity(evald_gt);
    std::size_t valid = 0;
    for (auto v : gt.valid) valid += v != 0;
    json j{{"epe", mp::metrics::epe(pred, gt)},
           {"d1_all", mp::metrics::d1_all(pred, gt)},
           {"valid_pixels", valid}};
    std::cout << j.dump(2) << "\n";
  });

  // --- eval-warp ---
  auto* cmd_evalw = app.add_subcommand(
      "eval-warp", "ground-truth-free metrics via disparity-driven view synthesis");
  static std::string evalw_left, evalw_right, evalw_disp;
  static double evalw_sign = 1.0;
  cmd_evalw->add_option("--left", evalw_left, "left image (8-bit PGM)")->required();
  cmd_evalw->add_option("--right", evalw_right, "right image (8-bit PGM)")->required();
  cmd_evalw->add_option("--disp", evalw_disp, "left disparity (PFM or 16-bit PGM)")->required();
  cmd_evalw->add_option("--sign", evalw_sign, "warp direction sign")->capture_default_str();
  cmd_evalw->callback([] {
    apply_threads();
    mp::GrayImage left = mp::io::read_gray_image(evalw_left);
    mp::GrayImage right = mp::io::read_gray_image(evalw_right);
    mp::DisparityMap disp = mp::io::read_disparity(evalw_disp);
    mp::metrics::WarpResult warped = mp::metrics::warp_right_to_left(right, disp, evalw_sign);
    std::size_t valid = 0;
    for (auto v : warped.valid) valid += v != 0;
    json j{{"ssim", mp::metrics::ssim(warped.image, left, &warped.valid)},
           {"psnr", json_number(mp::metrics::psnr(warped.image, left, &warped.valid))},
           {"valid_fraction", static_cast<double>(valid) / static_cast<double>(warped.valid.size())}};
    std::cout << j.dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const mp::numerical_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const mp::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
