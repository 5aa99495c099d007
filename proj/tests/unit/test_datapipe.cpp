#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>

#include "mito/datapipe/annotation.hpp"
#include "mito/datapipe/augment.hpp"
#include "mito/datapipe/dataset.hpp"
#include "mito/datapipe/splits.hpp"
#include "mito/datapipe/synth.hpp"
#include "mito/datapipe/tiling.hpp"
#include "mito/error.hpp"
#include "mito/random.hpp"

using namespace mito;
using namespace mito::datapipe;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

Annotation mitosis(double x, double y) {
  Annotation a;
  a.x = x;
  a.y = y;
  a.kind = AnnotationKind::Mitosis;
  a.subtype = Subtype::Normal;
  return a;
}

Annotation hard_negative(double x, double y) {
  Annotation a;
  a.x = x;
  a.y = y;
  a.kind = AnnotationKind::HardNegative;
  return a;
}

}  // namespace

TEST_CASE("tile grid") {
  const auto g = tile_region(1024, 1024);
  CHECK(g.origins.size() == 9);
  CHECK(axis_origins(1024, 512, 256) == std::vector<int>{0, 256, 512});
  CHECK(tile_region(512, 512).origins == std::vector<TileOrigin>{{0, 0}});
  CHECK(axis_origins(700, 512, 256) == std::vector<int>{0, 188});
  CHECK(tile_region(700, 700).origins.size() == 4);
  CHECK(kind_of([] { tile_region(300, 600); }) == ErrorKind::RegionTooSmall);

  SUBCASE("coverage") {
    std::vector<int> cover(1024 * 1024, 0);
    for (const auto& o : g.origins)
      for (int y = o.y; y < o.y + 512; ++y)
        for (int x = o.x; x < o.x + 512; ++x) ++cover[y * 1024 + x];
    CHECK(*std::min_element(cover.begin(), cover.end()) >= 1);
    for (int y = 256; y < 768; ++y)
      for (int x = 256; x < 768; ++x) REQUIRE(cover[y * 1024 + x] == 4);
  }

  SUBCASE("every annotation sits well inside some tile") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      const int w = rng.uniform_int(512, 1500), h = rng.uniform_int(512, 1500);
      const auto grid = tile_region(w, h);
      const double ax = rng.uniform(0, w), ay = rng.uniform(0, h);
      // Distance to the border of the tile, or to the region edge where the
      // tile touches it (no content beyond the edge can be truncated).
      bool ok = false;
      for (const auto& o : grid.origins) {
        const double left = o.x == 0 ? 1e9 : ax - o.x, right = o.x + 512 == w ? 1e9 : o.x + 512 - ax;
        const double top = o.y == 0 ? 1e9 : ay - o.y, bottom = o.y + 512 == h ? 1e9 : o.y + 512 - ay;
        if (ax >= o.x && ax < o.x + 512 && ay >= o.y && ay < o.y + 512 &&
            std::min({left, right, top, bottom}) >= 128)
          ok = true;
      }
      REQUIRE(ok);
    }
  }
}

TEST_CASE("annotation rasterisation") {
  const auto m = rasterize_targets({mitosis(256, 256)}, {0, 0}, 512, 512, 12.0);
  const auto area = std::count(m.data.begin(), m.data.end(), Label::kMitosis);
  CHECK(std::abs(area - std::numbers::pi * 144) / (std::numbers::pi * 144) < 0.02);
  CHECK(m.at(256, 256) == Label::kMitosis);
  CHECK(m.at(256 + 13, 256) == Label::kBackground);

  const auto both = rasterize_targets({mitosis(100, 100), hard_negative(110, 100)}, {0, 0}, 256, 256, 12.0);
  CHECK(both.at(105, 100) == Label::kMitosis);
  CHECK(both.at(120, 100) == Label::kHardNegative);

  const auto outside = rasterize_targets({mitosis(-20, 50)}, {0, 0}, 128, 128, 12.0);
  CHECK(std::all_of(outside.data.begin(), outside.data.end(), [](uint8_t v) { return v == 0; }));

  const auto shifted = rasterize_targets({mitosis(300, 300)}, {256, 256}, 128, 128, 12.0);
  CHECK(shifted.at(44, 44) == Label::kMitosis);
}

TEST_CASE("annotation JSON round trip") {
  auto a = mitosis(12.5, 40.25);
  a.subtype = Subtype::Atypical;
  a.case_id = "case_001";
  a.domain_id = 2;
  const auto b = hard_negative(3, 4);
  const auto dir = std::filesystem::temp_directory_path() / "mito_ann_test";
  std::filesystem::create_directories(dir);
  write_annotations(dir / "a.json", {a, b});
  const auto back = read_annotations(dir / "a.json");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
  nlohmann::json j = b;
  CHECK(j["kind"] == "hard_negative");
  CHECK(j["subtype"].is_null());
  CHECK(kind_of([&] { validate(mitosis(600, 3), 512, 512); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("augmentation pair") {
  Image patch(363, 363);
  Rng rng(8);
  for (auto& v : patch.rgb.data) v = static_cast<uint8_t>(rng.uniform_int(0, 255));
  MultiClassMask mask(363, 363, 1, 0);
  for (int y = 100; y < 200; ++y)
    for (int x = 150; x < 220; ++x) mask.at(x, y) = Label::kMitosis;

  SUBCASE("identity geometry") {
    AugmentConfig cfg;
    cfg.photometric = false;
    cfg.angle_deg = 0.0;
    const auto p = make_pair(patch, mask, 1, cfg);
    const int off = (363 - 256) / 2;
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x)
        for (int c = 0; c < 3; ++c) REQUIRE(p.weak.rgb.at(x, y, c) == patch.rgb.at(x + off, y + off, c));
    CHECK(p.strong.rgb.data == p.weak.rgb.data);
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x) REQUIRE(p.mask.at(x, y) == mask.at(x + off, y + off));
  }

  SUBCASE("determinism") {
    const auto a = make_pair(patch, mask, 77);
    const auto b = make_pair(patch, mask, 77);
    CHECK(a.weak.rgb.data == b.weak.rgb.data);
    CHECK(a.strong.rgb.data == b.strong.rgb.data);
    CHECK(a.mask.data == b.mask.data);
  }

  SUBCASE("label set preserved and photometric ops drawn") {
    for (uint64_t s = 0; s < 20; ++s) {
      const auto p = make_pair(patch, mask, s);
      const std::set<uint8_t> labels(p.mask.data.begin(), p.mask.data.end());
      for (auto l : labels) CHECK((l == 0 || l == Label::kMitosis));
      CHECK((p.ops.jitter || p.ops.blur || p.ops.sharpen));
    }
  }

  SUBCASE("rotation never samples outside the crop") {
    // Sentinel-filled 400x400 patch with the crop window at (20, 20).
    Image big(400, 400);
    for (auto& v : big.rgb.data) v = 255;
    for (int y = 20; y < 383; ++y)
      for (int x = 20; x < 383; ++x)
        for (int c = 0; c < 3; ++c) big.rgb.at(x, y, c) = 10;
    MultiClassMask bm(400, 400, 1, 0);
    AugmentConfig cfg;
    cfg.photometric = false;
    cfg.crop_x = 20;
    cfg.crop_y = 20;
    for (int deg = 0; deg < 360; deg += 17) {
      cfg.angle_deg = deg;
      const auto p = make_pair(big, bm, 3, cfg);
      CHECK(std::all_of(p.weak.rgb.data.begin(), p.weak.rgb.data.end(), [](uint8_t v) { return v == 10; }));
    }
  }

  SUBCASE("errors") {
    Image small(300, 300);
    MultiClassMask sm(300, 300, 1, 0);
    CHECK(kind_of([&] { make_pair(small, sm, 1); }) == ErrorKind::PatchTooSmall);
    MultiClassMask wrong(363, 300, 1, 0);
    CHECK(kind_of([&] { make_pair(patch, wrong, 1); }) == ErrorKind::ShapeMismatch);
  }

  SUBCASE("geometry maps are inverse") {
    Geometry g;
    g.crop_x = 5;
    g.crop_y = 9;
    g.angle_rad = 1.1;
    const auto p = g.to_patch(40.5, 100.25);
    const auto q = g.to_output(p[0], p[1]);
    CHECK(q[0] == doctest::Approx(40.5));
    CHECK(q[1] == doctest::Approx(100.25));
  }
}

TEST_CASE("patient splits") {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("c" + std::to_string(i));
  const auto s = split_patients(ids, 4);
  CHECK(s.test_cases.size() == 15);
  CHECK(s.val_cases.size() == 17);
  CHECK(s.train_cases.size() == 68);
  std::set<std::string> all(s.train_cases.begin(), s.train_cases.end());
  all.insert(s.val_cases.begin(), s.val_cases.end());
  all.insert(s.test_cases.begin(), s.test_cases.end());
  CHECK(all.size() == 100);

  const auto again = split_patients(ids, 4);
  CHECK(again.train_cases == s.train_cases);
  CHECK(again.test_cases == s.test_cases);

  const auto five = split_patients({"a", "b", "c", "d", "e"}, 1);
  CHECK(five.test_cases.size() == 1);
  CHECK(five.val_cases.size() == 1);
  CHECK(five.train_cases.size() == 3);
  CHECK(kind_of([] { split_patients({"a", "b", "c", "d"}, 1); }) == ErrorKind::TooFewCases);
}

TEST_CASE("synthetic generator") {
  SynthConfig cfg;
  cfg.n_cases = 4;
  cfg.seed = 12;
  const auto cases = synth_dataset(cfg);
  for (const auto& c : cases) {
    CHECK(std::count_if(c.annotations.begin(), c.annotations.end(),
                        [](const Annotation& a) { return a.kind == AnnotationKind::Mitosis; }) == 3);
    for (const auto& a : c.annotations) CHECK(c.truth.at(int(a.x), int(a.y)) != Label::kBackground);
  }
  CHECK(cases[0].domain_id == 0);
  CHECK(cases[1].domain_id == 1);

  SUBCASE("rendered areas follow the analytic shapes") {
    for (const auto& c : cases) {
      for (const auto& b : c.blobs) {
        const int r = static_cast<int>(std::ceil(b.extent())) + 1;
        int n = 0;
        for (int y = int(b.cy) - r; y <= int(b.cy) + r; ++y)
          for (int x = int(b.cx) - r; x <= int(b.cx) + r; ++x) n += b.contains(x + 0.5, y + 0.5);
        CHECK(std::abs(n - b.analytic_area()) / b.analytic_area() < 0.05);
      }
    }
  }

  SUBCASE("domain shift shows in mean intensity") {
    DomainStyle plain;
    DomainStyle shifted;
    shifted.rgb_offset = {8.0, -6.0, 4.0};
    const auto a = render_case(cfg, 0, 0, plain);
    const auto b = render_case(cfg, 0, 1, shifted);
    for (int c = 0; c < 3; ++c) {
      double ma = 0, mb = 0;
      for (size_t p = 0; p < a.image.rgb.pixel_count(); ++p) {
        ma += a.image.rgb.data[3 * p + c];
        mb += b.image.rgb.data[3 * p + c];
      }
      const double n = static_cast<double>(a.image.rgb.pixel_count());
      CHECK(std::abs((mb - ma) / n - shifted.rgb_offset[c]) <= 1.0);
    }
    CHECK(a.truth.data == b.truth.data);
  }
}

TEST_CASE("dataset directory round trip") {
  SynthConfig cfg;
  cfg.n_cases = 2;
  cfg.seed = 3;
  cfg.width = cfg.height = 128;
  cfg.nuclei_per_image = 4;
  cfg.mitosis_per_image = 1;
  cfg.hard_negative_per_image = 1;
  const auto cases = synth_dataset(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "mito_ds_test";
  std::filesystem::remove_all(dir);
  write_dataset(dir, cases, cfg);
  const auto back = read_dataset(dir);
  REQUIRE(back.size() == 2);
  CHECK(back[1].case_id == cases[1].case_id);
  CHECK(back[1].image.rgb.data == cases[1].image.rgb.data);
  CHECK(back[1].truth->data == cases[1].truth.data);
  CHECK(back[1].annotations == cases[1].annotations);
  CHECK(back[1].image.spacing_um == doctest::Approx(0.25));
  const auto manifest = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
  CHECK(manifest["files"]["annotations.json"] == sha256_file(dir / "annotations.json"));
}
