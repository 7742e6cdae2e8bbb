#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mp/errors.hpp"
#include "mp/parallel.hpp"

namespace mp {

// Per-pixel disparity in pixels with a validity mask. Loaders mark pixels
// invalid per the source format's convention (NaN for float sources, raw 0
// for 16-bit PGM).
struct DisparityMap {
  int width = 0, height = 0;
  std::vector<float> values;       // row-major
  std::vector<std::uint8_t> valid; // row-major, 1 = valid

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool is_valid(int x, int y) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
};

// Grayscale image with intensities normalized to [0, 1].
struct GrayImage {
  int width = 0, height = 0;
  std::vector<double> values;  // row-major

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

using PixelMask = std::vector<std::uint8_t>;  // row-major, 1 = valid

namespace metrics {

namespace detail {

inline void require_same_size(int wa, int ha, int wb, int hb, const char* what) {
  if (wa != wb || ha != hb)
    throw validation_error(std::string(what) + ": dimension mismatch (" + std::to_string(wa) + "x" +
                           std::to_string(ha) + " vs " + std::to_string(wb) + "x" +
                           std::to_string(hb) + ")");
}

}  // namespace detail

// Mean absolute disparity error over pixels valid in the ground truth.
inline double epe(const DisparityMap& pred, const DisparityMap& gt) {
  detail::require_same_size(pred.width, pred.height, gt.width, gt.height, "epe");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.valid[i]) continue;
    sum += std::abs(static_cast<double>(pred.values[i]) - static_cast<double>(gt.values[i]));
    ++count;
  }
  if (count == 0) throw validation_error("epe: ground truth has no valid pixels");
  return sum / static_cast<double>(count);
}

// Percentage of valid ground-truth pixels whose error exceeds both 3 px and
// 5% of the ground-truth disparity.
inline double d1_all(const DisparityMap& pred, const DisparityMap& gt) {
  detail::require_same_size(pred.width, pred.height, gt.width, gt.height, "d1_all");
  std::size_t outliers = 0, count = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.valid[i]) continue;
    double err = std::abs(static_cast<double>(pred.values[i]) - static_cast<double>(gt.values[i]));
    if (err > 3.0 && err > 0.05 * static_cast<double>(gt.values[i])) ++outliers;
    ++count;
  }
  if (count == 0) throw validation_error("d1_all: ground truth has no valid pixels");
  return 100.0 * static_cast<double>(outliers) / static_cast<double>(count);
}

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;  // constants for unit dynamic range
  double c2 = 0.03 * 0.03;
};

// Mean of the per-window SSIM over all fully interior sliding windows,
// weighted by a Gaussian window. When a mask is given, windows containing
// any invalid pixel are skipped.
inline double ssim(const GrayImage& x, const GrayImage& y, const PixelMask* mask = nullptr,
                   const SsimOptions& opt = {}) {
  detail::require_same_size(x.width, x.height, y.width, y.height, "ssim");
  const int w = x.width, h = x.height, win = opt.window;
  if (w < win || h < win)
    throw validation_error("ssim: image " + std::to_string(w) + "x" + std::to_string(h) +
                           " smaller than the " + std::to_string(win) + "x" + std::to_string(win) +
                           " window");
  if (mask && mask->size() != x.values.size())
    throw validation_error("ssim: mask size mismatch");

  std::vector<double> kernel(win);
  {
    double sum = 0.0;
    double c = (win - 1) / 2.0;
    for (int i = 0; i < win; ++i) {
      kernel[i] = std::exp(-0.5 * (i - c) * (i - c) / (opt.sigma * opt.sigma));
      sum += kernel[i];
    }
    for (double& k : kernel) k /= sum;
  }

  // Invalid pixels are zeroed; every window touching one is skipped, so the
  // zeros never reach an accepted window.
  std::vector<double> xv(x.values), yv(y.values);
  std::vector<std::uint32_t> bad;  // per-pixel invalid indicator
  if (mask) {
    bad.assign(x.values.size(), 0);
    for (std::size_t i = 0; i < mask->size(); ++i) {
      if (!(*mask)[i]) {
        bad[i] = 1;
        xv[i] = 0.0;
        yv[i] = 0.0;
      }
    }
  }

  const int ow = w - win + 1, oh = h - win + 1;

  // Separable Gaussian filtering, valid mode: horizontal then vertical.
  auto hfilter = [&](const std::vector<double>& src, std::vector<double>& dst,
                     auto&& f) {
    // dst has ow columns, h rows
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
      const double* s = src.data() + row * w;
      double* d = dst.data() + row * ow;
      for (int cx = 0; cx < ow; ++cx) {
        double acc = 0.0;
        for (int k = 0; k < win; ++k) acc += kernel[k] * f(s[cx + k]);
        d[cx] = acc;
      }
    });
  };
  auto vfilter = [&](const std::vector<double>& src, std::vector<double>& dst) {
    // src is h x ow, dst is oh x ow
    parallel_for(static_cast<std::size_t>(oh), [&](std::size_t row) {
      double* d = dst.data() + row * ow;
      for (int cx = 0; cx < ow; ++cx) {
        double acc = 0.0;
        for (int k = 0; k < win; ++k) acc += kernel[k] * src[(row + k) * ow + cx];
        d[cx] = acc;
      }
    });
  };

  std::size_t mid = static_cast<std::size_t>(h) * ow;
  std::size_t out_sz = static_cast<std::size_t>(oh) * ow;
  std::vector<double> tmp(mid), mu_x(out_sz), mu_y(out_sz), xx(out_sz), yy(out_sz), xy(out_sz);

  auto run = [&](const std::vector<double>& a, const std::vector<double>* b,
                 std::vector<double>& out) {
    if (!b) {
      hfilter(a, tmp, [](double v) { return v; });
    } else {
      const std::vector<double>& bb = *b;
      parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
        const double* sa = a.data() + row * w;
        const double* sb = bb.data() + row * w;
        double* d = tmp.data() + row * ow;
        for (int cx = 0; cx < ow; ++cx) {
          double acc = 0.0;
          for (int k = 0; k < win; ++k) acc += kernel[k] * sa[cx + k] * sb[cx + k];
          d[cx] = acc;
        }
      });
    }
    vfilter(tmp, out);
  };

  run(xv, nullptr, mu_x);
  run(yv, nullptr, mu_y);
  run(xv, &xv, xx);
  run(yv, &yv, yy);
  run(xv, &yv, xy);

  // Window validity: count of invalid pixels inside each window via a
  // summed-area table.
  std::vector<std::uint32_t> skip;
  if (mask) {
    std::vector<std::uint64_t> sat((w + 1) * (h + 1), 0);
    for (int row = 0; row < h; ++row)
      for (int cx = 0; cx < w; ++cx)
        sat[(row + 1) * (w + 1) + cx + 1] = bad[row * w + cx] + sat[row * (w + 1) + cx + 1] +
                                            sat[(row + 1) * (w + 1) + cx] -
                                            sat[row * (w + 1) + cx];
    skip.assign(out_sz, 0);
    for (int row = 0; row < oh; ++row)
      for (int cx = 0; cx < ow; ++cx) {
        std::uint64_t cnt = sat[(row + win) * (w + 1) + cx + win] - sat[row * (w + 1) + cx + win] -
                            sat[(row + win) * (w + 1) + cx] + sat[row * (w + 1) + cx];
        skip[row * ow + cx] = cnt != 0;
      }
  }

  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t i = 0; i < out_sz; ++i) {
    if (mask && skip[i]) continue;
    double mx = mu_x[i], my = mu_y[i];
    double sx = xx[i] - mx * mx;
    double sy = yy[i] - my * my;
    double sxy = xy[i] - mx * my;
    double val = ((2.0 * mx * my + opt.c1) * (2.0 * sxy + opt.c2)) /
                 ((mx * mx + my * my + opt.c1) * (sx + sy + opt.c2));
    total += val;
    ++windows;
  }
  if (windows == 0) throw validation_error("ssim: no fully valid windows");
  return total / static_cast<double>(windows);
}

// Peak signal-to-noise ratio on the 0-255 scale: 20 log10(255 / sqrt(MSE)).
// Identical inputs return +infinity.
inline double psnr(const GrayImage& x, const GrayImage& y, const PixelMask* mask = nullptr) {
  detail::require_same_size(x.width, x.height, y.width, y.height, "psnr");
  if (mask && mask->size() != x.values.size())
    throw validation_error("psnr: mask size mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    double diff = 255.0 * (x.values[i] - y.values[i]);
    sum += diff * diff;
    ++count;
  }
  if (count == 0) throw validation_error("psnr: no valid pixels");
  double mse = sum / static_cast<double>(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(255.0 / std::sqrt(mse));
}

struct WarpResult {
  GrayImage image;
  PixelMask valid;
};

// Synthesizes the left view from the right image and a left-referenced
// disparity map: out(x, y) = right(x - d(x, y), y), linear interpolation
// along x. Out-of-image samples and invalid disparities are masked out.
// `sign` flips the sampling direction for datasets with the opposite
// rectification convention.
inline WarpResult warp_right_to_left(const GrayImage& right, const DisparityMap& disp,
                                     double sign = 1.0) {
  detail::require_same_size(right.width, right.height, disp.width, disp.height,
                            "warp_right_to_left");
  const int w = right.width, h = right.height;
  WarpResult out;
  out.image.width = w;
  out.image.height = h;
  out.image.values.assign(static_cast<std::size_t>(w) * h, 0.0);
  out.valid.assign(static_cast<std::size_t>(w) * h, 0);

  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    for (int xpix = 0; xpix < w; ++xpix) {
      std::size_t i = row * w + xpix;
      if (!disp.valid[i]) continue;
      double xs = xpix - sign * static_cast<double>(disp.values[i]);
      if (xs < 0.0 || xs > w - 1.0) continue;
      int x0 = static_cast<int>(std::floor(xs));
      double f = xs - x0;
      double v;
      if (x0 >= w - 1) {
        v = right.values[row * w + (w - 1)];
      } else {
        v = (1.0 - f) * right.values[row * w + x0] + f * right.values[row * w + x0 + 1];
      }
      out.image.values[i] = v;
      out.valid[i] = 1;
    }
  });
  return out;
}

}  // namespace metrics
}  // namespace mp
