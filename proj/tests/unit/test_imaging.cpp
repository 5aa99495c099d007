#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../support/oracles.hpp"
#include "../support/stain_fixtures.hpp"
#include "mito/datapipe/synth.hpp"
#include "mito/error.hpp"
#include "mito/imaging.hpp"
#include "mito/random.hpp"

using namespace mito;
using namespace mito::imaging;

namespace {

Image solid(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
  Image img(w, h);
  for (size_t p = 0; p < img.rgb.pixel_count(); ++p) {
    img.rgb.data[3 * p] = r;
    img.rgb.data[3 * p + 1] = g;
    img.rgb.data[3 * p + 2] = b;
  }
  return img;
}

BinaryMask random_mask(Rng& rng, int w, int h, double p) {
  BinaryMask m(w, h, 1, 0);
  for (auto& v : m.data) v = rng.bernoulli(p) ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("optical density of known pixels") {
  Image img(3, 1);
  img.rgb.at(0, 0, 0) = 255;
  img.rgb.at(0, 0, 1) = 255;
  img.rgb.at(0, 0, 2) = 255;
  img.rgb.at(1, 0, 0) = 51;
  img.rgb.at(2, 0, 0) = 0;
  const auto od = rgb_to_od(img);
  CHECK(od.at(0, 0, 0) == 0.0f);
  CHECK(od.at(0, 0, 2) == 0.0f);
  CHECK(od.at(1, 0, 0) == doctest::Approx(0.69897).epsilon(1e-5));
  CHECK(od.at(2, 0, 0) == doctest::Approx(std::log10(255.0)).epsilon(1e-6));
}

TEST_CASE("optical density is monotone and round-trips") {
  Image img(256, 1);
  for (int i = 0; i < 256; ++i)
    for (int c = 0; c < 3; ++c) img.rgb.at(i, 0, c) = static_cast<uint8_t>(i);
  const auto od = rgb_to_od(img);
  for (int i = 1; i < 256; ++i) CHECK(od.at(i, 0, 0) <= od.at(i - 1, 0, 0));
  Image back(256, 1);
  od_to_rgb(od, back);
  for (int i = 1; i < 256; ++i) CHECK(std::abs(int(back.rgb.at(i, 0, 1)) - i) <= 1);
}

TEST_CASE("Macenko recovers a known two-stain basis") {
  const auto fx = fixtures::two_stain_image(7, 64, 0.01);
  const auto s = estimate_stain_matrix(fx.od, PseudoMaskParams{});
  CHECK(fixtures::angle_deg(s.h, fx.truth.h) < 2.0);
  CHECK(fixtures::angle_deg(s.e, fx.truth.e) < 2.0);

  SUBCASE("pixel permutation does not move the estimate") {
    auto shuffled = fx.od;
    Rng rng(3);
    const size_t n = shuffled.pixel_count();
    for (size_t i = n - 1; i > 0; --i) {
      const size_t j = rng.next() % (i + 1);
      for (int c = 0; c < 3; ++c) std::swap(shuffled.data[3 * i + c], shuffled.data[3 * j + c]);
    }
    const auto t = estimate_stain_matrix(shuffled, PseudoMaskParams{});
    CHECK(fixtures::angle_deg(s.h, t.h) < 2.0);
    CHECK(fixtures::angle_deg(s.e, t.e) < 2.0);
  }
}

TEST_CASE("Macenko failure modes") {
  CHECK_THROWS_WITH_AS(estimate_stain_matrix(rgb_to_od(solid(32, 32, 255, 255, 255)), {}), doctest::Contains("od_beta"),
                       Error);
  try {
    estimate_stain_matrix(rgb_to_od(solid(32, 32, 255, 255, 255)), {});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientTissue);
  }
  OdImage parallel(20, 20, 3);
  Rng rng(1);
  const Vec3 h = fixtures::unit({0.65, 0.70, 0.29});
  for (size_t p = 0; p < parallel.pixel_count(); ++p) {
    const double m = rng.uniform(0.3, 1.5);
    for (int c = 0; c < 3; ++c) parallel.data[3 * p + c] = static_cast<float>(m * h[c]);
  }
  try {
    estimate_stain_matrix(parallel, {});
    FAIL("expected StainDegenerate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StainDegenerate);
  }
}

TEST_CASE("stain concentrations") {
  const StainMatrix s{fixtures::unit({0.65, 0.70, 0.29}), fixtures::unit({0.07, 0.99, 0.11})};
  const Vec3 pure{1.3 * s.h[0], 1.3 * s.h[1], 1.3 * s.h[2]};
  const auto c = stain_concentrations(pure, s);
  CHECK(c[0] == doctest::Approx(1.3).epsilon(1e-9));
  CHECK(c[1] == doctest::Approx(0.0).epsilon(1e-9));
  const auto z = stain_concentrations({0, 0, 0}, s);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);

  SUBCASE("matches grid-search minimiser") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      Vec3 od{};
      for (auto& v : od) v = rng.uniform(0.0, 1.0);
      const auto got = stain_concentrations(od, s);
      auto residual = [&](double ch, double ce) {
        double r = 0.0;
        for (int k = 0; k < 3; ++k) r += std::pow(s.h[k] * ch + s.e[k] * ce - od[k], 2);
        return std::sqrt(r);
      };
      double best = 1e9;
      for (int i = 0; i <= 3000; ++i)
        for (int j = 0; j <= 3000; ++j) best = std::min(best, residual(i * 1e-3, j * 1e-3));
      CHECK(std::abs(residual(got[0], got[1]) - best) < 1e-3);
      CHECK(got[0] >= 0.0);
      CHECK(got[1] >= 0.0);
    }
  }
}

TEST_CASE("gaussian blur") {
  ScalarImage constant(20, 15, 1, 0.37f);
  const auto b = gaussian_blur(constant, 2.0);
  for (float v : b.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-6));

  ScalarImage noise(9, 9, 1);
  Rng rng(4);
  for (auto& v : noise.data) v = static_cast<float>(rng.unit());
  CHECK(gaussian_blur(noise, 0.0).data == noise.data);

  ScalarImage impulse(21, 21, 1, 0.0f);
  impulse.at(10, 10) = 1.0f;
  const auto r = gaussian_blur(impulse, 1.0);
  std::vector<double> k;
  double sum = 0.0;
  for (int i = -3; i <= 3; ++i) {
    k.push_back(std::exp(-i * i / 2.0));
    sum += k.back();
  }
  for (auto& v : k) v /= sum;
  double max_diff = 0.0;
  for (int y = 0; y < 21; ++y) {
    for (int x = 0; x < 21; ++x) {
      const int dx = x - 10, dy = y - 10;
      const double expect = (std::abs(dx) <= 3 && std::abs(dy) <= 3) ? k[dx + 3] * k[dy + 3] : 0.0;
      max_diff = std::max(max_diff, std::abs(expect - r.at(x, y)));
    }
  }
  CHECK(max_diff < 1e-6);
}

TEST_CASE("Otsu threshold") {
  std::vector<float> bimodal(100, 0.0f);
  bimodal.insert(bimodal.end(), 100, 200.0f);
  const auto t = otsu_threshold(std::span<const float>(bimodal));
  CHECK(t.threshold > 0.0);
  CHECK(t.threshold < 200.0);
  for (float v : bimodal) CHECK(t.is_foreground(v) == (v == 200.0f));

  std::vector<float> constant(50, 3.0f);
  try {
    otsu_threshold(std::span<const float>(constant));
    FAIL("expected DegenerateHistogram");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateHistogram);
  }

  SUBCASE("equals the exhaustive scan on random 8-bit data") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<float> v(1000);
      for (auto& x : v) x = static_cast<float>(rng.uniform_int(0, 255));
      CHECK(otsu_threshold(std::span<const float>(v)).bin == oracle::otsu_bin(v));
    }
  }
}

TEST_CASE("morphology") {
  BinaryMask dot(9, 9, 1, 0);
  dot.at(4, 4) = 1;
  const auto opened = morphological_open(dot, 1);
  CHECK(std::accumulate(opened.data.begin(), opened.data.end(), 0) == 0);
  BinaryMask empty(9, 9, 1, 0);
  CHECK(morphological_open(empty, 2).data == empty.data);

  BinaryMask disk(64, 64, 1, 0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) disk.at(x, y) = (x - 30) * (x - 30) + (y - 33) * (y - 33) <= 100;
  CHECK(morphological_open(disk, 3).data == oracle::naive_open(disk, 3).data);

  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_mask(rng, 40, 33, 0.6);
    const int r = rng.uniform_int(1, 3);
    CHECK(erode(m, r).data == oracle::naive_morph(m, r, true).data);
    CHECK(dilate(m, r).data == oracle::naive_morph(m, r, false).data);
    const auto once = morphological_open(m, r);
    CHECK(morphological_open(once, r).data == once.data);
  }
}

TEST_CASE("connected components and small-object removal") {
  BinaryMask m(8, 6, 1, 0);
  m.at(1, 1) = m.at(2, 2) = 1;  // diagonal neighbours join under 8-connectivity
  m.at(6, 4) = m.at(6, 5) = m.at(5, 5) = 1;
  const auto c = connected_components(m);
  CHECK(c.count == 2);
  CHECK(c.areas == std::vector<int>{2, 3});
  CHECK(c.labels.at(1, 1) == c.labels.at(2, 2));
  const auto kept = remove_small_objects(m, 3);
  CHECK(kept.at(1, 1) == 0);
  CHECK(kept.at(6, 4) == 1);
}

TEST_CASE("classical pseudo-mask") {
  datapipe::SynthConfig cfg;
  cfg.seed = 21;
  cfg.n_cases = 1;
  const auto sc = datapipe::render_case(cfg, 0, 0, datapipe::DomainStyle{});
  const auto res = classical_pseudomask(sc.image, PseudoMaskParams{});
  CHECK_FALSE(res.warning);
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < res.mask.data.size(); ++i) {
    const bool a = res.mask.data[i] != 0, b = sc.truth.data[i] != Label::kBackground;
    inter += a && b;
    uni += a || b;
  }
  const double iou = static_cast<double>(inter) / static_cast<double>(uni);
  MESSAGE("pseudo-mask IoU " << iou);
  CHECK(iou >= 0.7);
  CHECK(classical_pseudomask(sc.image, PseudoMaskParams{}).mask.data == res.mask.data);

  const auto blank = classical_pseudomask(solid(64, 64, 255, 255, 255), {});
  CHECK(blank.warning);
  CHECK(std::accumulate(blank.mask.data.begin(), blank.mask.data.end(), 0) == 0);

  const auto blob = classical_pseudomask(solid(64, 64, 90, 40, 140), {});
  CHECK(blob.warning);
  CHECK(std::accumulate(blob.mask.data.begin(), blob.mask.data.end(), 0) == 0);
}
