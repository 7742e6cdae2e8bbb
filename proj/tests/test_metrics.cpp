#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "mp/metrics.hpp"
#include "test_util.hpp"

using namespace mp;
using test_util::Rng;

namespace {

DisparityMap const_disp(int w, int h, float value) {
  DisparityMap m;
  m.width = w;
  m.height = h;
  m.values.assign(static_cast<std::size_t>(w) * h, value);
  m.valid.assign(static_cast<std::size_t>(w) * h, 1);
  return m;
}

GrayImage const_image(int w, int h, double value) {
  GrayImage img;
  img.width = w;
  img.height = h;
  img.values.assign(static_cast<std::size_t>(w) * h, value);
  return img;
}

GrayImage random_image(Rng& rng, int w, int h) {
  GrayImage img = const_image(w, h, 0.0);
  for (double& v : img.values) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("epe") {
  DisparityMap gt = const_disp(4, 2, 10.0f);
  REQUIRE(metrics::epe(gt, gt) == 0.0);

  DisparityMap pred = const_disp(4, 2, 11.0f);
  REQUIRE(metrics::epe(pred, gt) == Catch::Approx(1.0).margin(1e-12));

  SECTION("only gt-valid pixels count") {
    DisparityMap gt2 = const_disp(2, 1, 10.0f);
    gt2.valid[1] = 0;
    DisparityMap pred2 = gt2;
    pred2.values[0] = 11.0f;  // error 1 at the valid pixel
    pred2.values[1] = 13.0f;  // error 3 at the invalid pixel, ignored
    pred2.valid.assign(2, 1);
    REQUIRE(metrics::epe(pred2, gt2) == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("errors") {
    REQUIRE_THROWS_AS(metrics::epe(const_disp(3, 2, 1.0f), const_disp(2, 3, 1.0f)),
                      validation_error);
    DisparityMap empty = const_disp(2, 2, 1.0f);
    empty.valid.assign(4, 0);
    REQUIRE_THROWS_AS(metrics::epe(const_disp(2, 2, 1.0f), empty), validation_error);
  }
}

TEST_CASE("d1_all counts the 3px AND 5% conjunction") {
  SECTION("exact prediction") {
    DisparityMap gt = const_disp(4, 1, 50.0f);
    REQUIRE(metrics::d1_all(gt, gt) == 0.0);
  }

  SECTION("error 4 at gt 100 exceeds 3px but not 5%: not an outlier") {
    DisparityMap gt = const_disp(4, 1, 100.0f);
    DisparityMap pred = gt;
    pred.values[2] = 104.0f;
    REQUIRE(metrics::d1_all(pred, gt) == 0.0);
    DisparityMap all = const_disp(4, 1, 104.0f);
    REQUIRE(metrics::d1_all(all, gt) == 0.0);
  }

  SECTION("error 4 at gt 10 fires both clauses") {
    DisparityMap gt = const_disp(4, 1, 10.0f);
    DisparityMap quarter = gt;
    quarter.values[1] = 14.0f;  // 4 > 3 and 4 > 0.5
    REQUIRE(metrics::d1_all(quarter, gt) == 25.0);
    DisparityMap all = const_disp(4, 1, 14.0f);
    REQUIRE(metrics::d1_all(all, gt) == 100.0);
  }

  SECTION("error 6 at gt 100 fires both clauses") {
    DisparityMap gt = const_disp(2, 1, 100.0f);
    DisparityMap pred = gt;
    pred.values[0] = 106.0f;  // 6 > 3 and 6 > 5
    REQUIRE(metrics::d1_all(pred, gt) == 50.0);
  }

  SECTION("small errors below 3px never count") {
    DisparityMap gt = const_disp(3, 1, 4.0f);
    DisparityMap pred = const_disp(3, 1, 6.5f);  // err 2.5 > 5% but < 3px
    REQUIRE(metrics::d1_all(pred, gt) == 0.0);
  }
}

TEST_CASE("epe and d1_all are pure per-pixel reductions") {
  Rng rng(299);
  const int n = 64;
  DisparityMap gt = const_disp(n, 1, 0.0f);
  DisparityMap pred = gt;
  for (int i = 0; i < n; ++i) {
    gt.values[i] = static_cast<float>(rng.uniform(1.0, 80.0));
    pred.values[i] = gt.values[i] + static_cast<float>(rng.uniform(-6.0, 6.0));
    gt.valid[i] = rng.uniform() < 0.8;
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 eng(1);
  std::shuffle(perm.begin(), perm.end(), eng);
  DisparityMap gt_p = gt, pred_p = pred;
  for (int i = 0; i < n; ++i) {
    gt_p.values[i] = gt.values[perm[i]];
    gt_p.valid[i] = gt.valid[perm[i]];
    pred_p.values[i] = pred.values[perm[i]];
    pred_p.valid[i] = pred.valid[perm[i]];
  }
  REQUIRE(metrics::epe(pred_p, gt_p) == Catch::Approx(metrics::epe(pred, gt)).margin(1e-12));
  REQUIRE(metrics::d1_all(pred_p, gt_p) == metrics::d1_all(pred, gt));
}

TEST_CASE("ssim") {
  Rng rng(301);

  SECTION("identical images give 1") {
    GrayImage img = random_image(rng, 32, 24);
    REQUIRE(metrics::ssim(img, img) == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("constant 0 vs constant 1") {
    GrayImage zeros = const_image(16, 16, 0.0);
    GrayImage ones = const_image(16, 16, 1.0);
    // (c1 c2) / ((1 + c1) c2) = 1e-4 / 1.0001
    double expected = 1e-4 / 1.0001;
    REQUIRE(metrics::ssim(zeros, ones) == Catch::Approx(expected).margin(1e-12));
  }

  SECTION("symmetry") {
    GrayImage a = random_image(rng, 20, 20);
    GrayImage b = random_image(rng, 20, 20);
    REQUIRE(metrics::ssim(a, b) == Catch::Approx(metrics::ssim(b, a)).margin(1e-13));
  }

  SECTION("less similar images score lower") {
    GrayImage a = random_image(rng, 24, 24);
    GrayImage noisy = a;
    for (double& v : noisy.values) v = std::clamp(v + 0.2 * (rng.uniform() - 0.5), 0.0, 1.0);
    double s_self = metrics::ssim(a, a);
    double s_noisy = metrics::ssim(a, noisy);
    REQUIRE(s_noisy < s_self);
    REQUIRE(s_noisy > 0.0);
  }

  SECTION("image smaller than the window is rejected") {
    GrayImage tiny = const_image(8, 8, 0.5);
    REQUIRE_THROWS_AS(metrics::ssim(tiny, tiny), validation_error);
  }

  SECTION("masked windows are skipped") {
    GrayImage a = random_image(rng, 24, 24);
    GrayImage b = a;
    // corrupt one pixel and mask it out: SSIM over the mask stays 1
    b.values[5 * 24 + 7] = 0.0;
    PixelMask mask(24 * 24, 1);
    mask[5 * 24 + 7] = 0;
    REQUIRE(metrics::ssim(a, b, &mask) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("psnr") {
  Rng rng(302);
  GrayImage img = random_image(rng, 16, 8);
  REQUIRE(std::isinf(metrics::psnr(img, img)));

  SECTION("single pixel differing by 255 in an N-pixel image") {
    for (int w : {4, 16}) {
      int h = w / 2 + 1;
      GrayImage a = const_image(w, h, 0.0);
      GrayImage b = a;
      b.values[0] = 1.0;  // 255 on the 8-bit scale
      double n = static_cast<double>(w) * h;
      REQUIRE(metrics::psnr(a, b) == Catch::Approx(10.0 * std::log10(n)).margin(1e-9));
    }
  }

  SECTION("uniform difference of one 8-bit step") {
    GrayImage a = const_image(10, 10, 0.0);
    GrayImage b = const_image(10, 10, 1.0 / 255.0);
    REQUIRE(metrics::psnr(a, b) == Catch::Approx(20.0 * std::log10(255.0)).margin(1e-9));
  }

  SECTION("maxima at equality") {
    GrayImage a = random_image(rng, 12, 12);
    GrayImage b = a;
    b.values[7] += 0.01;
    REQUIRE(metrics::psnr(a, a) > metrics::psnr(a, b));
    REQUIRE(metrics::ssim(a, a) > metrics::ssim(a, b));
  }
}

TEST_CASE("warp_right_to_left") {
  SECTION("zero disparity is the identity warp") {
    Rng rng(303);
    GrayImage right = random_image(rng, 12, 6);
    metrics::WarpResult out = metrics::warp_right_to_left(right, const_disp(12, 6, 0.0f));
    REQUIRE(out.image.values == right.values);
    for (auto v : out.valid) REQUIRE(v == 1);
  }

  SECTION("unit disparity shifts a ramp by one pixel") {
    const int w = 16, h = 4;
    GrayImage ramp = const_image(w, h, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) ramp.values[y * w + x] = static_cast<double>(x) / w;
    metrics::WarpResult out = metrics::warp_right_to_left(ramp, const_disp(w, h, 1.0f));
    for (int y = 0; y < h; ++y) {
      REQUIRE(out.valid[y * w + 0] == 0);  // samples at x = -1
      for (int x = 1; x < w; ++x) {
        REQUIRE(out.valid[y * w + x] == 1);
        REQUIRE(out.image.values[y * w + x] ==
                Catch::Approx(static_cast<double>(x - 1) / w).margin(1e-12));
      }
    }
  }

  SECTION("fully out-of-range disparity empties the mask") {
    GrayImage right = const_image(8, 3, 0.5);
    metrics::WarpResult out = metrics::warp_right_to_left(right, const_disp(8, 3, 9.0f));
    for (auto v : out.valid) REQUIRE(v == 0);
  }

  SECTION("synthetic rectified pair: warp + metrics recover near-perfect scores") {
    Rng rng(304);
    const int w = 64, h = 32, d = 5;
    GrayImage right = random_image(rng, w, h);
    // smooth the columns a little so linear interpolation is exact at integer shifts
    GrayImage left = const_image(w, h, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        left.values[y * w + x] = right.values[y * w + std::max(0, x - d)];
    metrics::WarpResult out = metrics::warp_right_to_left(right, const_disp(w, h, float(d)));
    double s = metrics::ssim(out.image, left, &out.valid);
    REQUIRE(s >= 0.999);
    REQUIRE(std::isinf(metrics::psnr(out.image, left, &out.valid)));
  }
}
