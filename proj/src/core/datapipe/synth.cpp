#include "mito/datapipe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mito/error.hpp"
#include "mito/random.hpp"

namespace mito::datapipe {

namespace {

constexpr double kPi = std::numbers::pi;

std::array<double, 3> unit(std::array<double, 3> v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  for (auto& c : v) c /= n;
  return v;
}

// Angle difference folded to [-pi, pi].
double wrap(double a) { return std::remainder(a, 2.0 * kPi); }

struct LobeGeometry {
  double x, y, r;
};

// Lobes of an atypical figure; layout is a pure function of the blob.
std::vector<LobeGeometry> lobes(const Blob& b) {
  std::vector<LobeGeometry> out;
  const int n = std::max(2, b.spikes);
  for (int k = 0; k < n; ++k) {
    // Irregular spacing and radii give the broken, asymmetric look.
    const double phase = b.angle + 2.0 * kPi * k / n + 0.25 * std::sin(3.1 * k + b.angle);
    const double r = b.r0 * (0.36 + 0.12 * ((k * 7 + static_cast<int>(b.angle * 10)) % 3) / 2.0);
    out.push_back({b.cx + b.r1 * std::cos(phase), b.cy + b.r1 * std::sin(phase), r});
  }
  // Central fragment, disjoint from the lobes, so the figure covers its own centroid.
  out.push_back({b.cx, b.cy, 0.3 * b.r0});
  return out;
}

}  // namespace

std::array<double, 3> reference_h() { return unit({0.65, 0.70, 0.29}); }
std::array<double, 3> reference_e() { return unit({0.07, 0.99, 0.11}); }

void SynthConfig::validate() const {
  if (n_cases < 1) throw Error(ErrorKind::InvalidConfig, "n_cases must be >= 1");
  if (n_domains < 1) throw Error(ErrorKind::InvalidConfig, "n_domains must be >= 1");
  if (width < 64 || height < 64) throw Error(ErrorKind::InvalidConfig, "regions must be at least 64x64");
  if (!(spacing_um > 0.0)) throw Error(ErrorKind::InvalidConfig, "spacing_um must be > 0");
  if (nuclei_per_image < 0 || mitosis_per_image < 0 || hard_negative_per_image < 0) {
    throw Error(ErrorKind::InvalidConfig, "object counts must be >= 0");
  }
  if (!(atypical_fraction >= 0.0 && atypical_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "atypical_fraction must lie in [0, 1]");
  }
  if (!domains.empty() && static_cast<int>(domains.size()) != n_domains) {
    throw Error(ErrorKind::InvalidConfig, "domains must list one style per domain");
  }
}

bool Blob::contains(double x, double y) const {
  const double dx = x - cx, dy = y - cy;
  switch (shape) {
    case BlobShape::Ellipse: {
      const double c = std::cos(angle), s = std::sin(angle);
      const double u = c * dx + s * dy, v = -s * dx + c * dy;
      return (u * u) / (r0 * r0) + (v * v) / (r1 * r1) <= 1.0;
    }
    case BlobShape::Star: {
      const double d = std::sqrt(dx * dx + dy * dy);
      const double theta = std::atan2(dy, dx);
      return d <= r0 * (1.0 + amplitude * std::cos(spikes * wrap(theta - angle)));
    }
    case BlobShape::Lobed: {
      for (const auto& l : lobes(*this)) {
        const double ex = x - l.x, ey = y - l.y;
        if (ex * ex + ey * ey <= l.r * l.r) return true;
      }
      return false;
    }
  }
  return false;
}

double Blob::analytic_area() const {
  switch (shape) {
    case BlobShape::Ellipse: return kPi * r0 * r1;
    case BlobShape::Star: return kPi * r0 * r0 * (1.0 + amplitude * amplitude / 2.0);
    case BlobShape::Lobed: {
      double a = 0.0;
      for (const auto& l : lobes(*this)) a += kPi * l.r * l.r;
      return a;
    }
  }
  return 0.0;
}

double Blob::extent() const {
  switch (shape) {
    case BlobShape::Ellipse: return std::max(r0, r1);
    case BlobShape::Star: return r0 * (1.0 + amplitude);
    case BlobShape::Lobed: {
      double e = 0.0;
      for (const auto& l : lobes(*this)) e = std::max(e, std::hypot(l.x - cx, l.y - cy) + l.r);
      return e;
    }
  }
  return 0.0;
}

DomainStyle domain_style(const SynthConfig& cfg, int domain_id) {
  if (!cfg.domains.empty()) return cfg.domains.at(domain_id);
  Rng rng(mix_seed(cfg.seed, 0xD0, static_cast<uint64_t>(domain_id)));
  DomainStyle s;
  s.h_scale = rng.uniform(0.75, 1.25);
  s.e_scale = rng.uniform(0.75, 1.25);
  for (auto& o : s.rgb_offset) o = rng.uniform(-10.0, 10.0);
  s.contrast = rng.uniform(0.9, 1.1);
  return s;
}

SynthCase render_case(const SynthConfig& cfg, int case_index, int domain_id, const DomainStyle& style) {
  Rng rng(mix_seed(cfg.seed, 0xCA5E, static_cast<uint64_t>(case_index)));
  SynthCase out;
  char id[32];
  std::snprintf(id, sizeof id, "case_%03d", case_index);
  out.case_id = id;
  out.domain_id = domain_id;

  auto place = [&](Blob b, bool required) {
    const double margin = b.extent() + 3.0;
    for (int attempt = 0; attempt < 2000; ++attempt) {
      b.cx = rng.uniform(margin, cfg.width - margin);
      b.cy = rng.uniform(margin, cfg.height - margin);
      const bool clear = std::all_of(out.blobs.begin(), out.blobs.end(), [&](const Blob& o) {
        return std::hypot(o.cx - b.cx, o.cy - b.cy) > o.extent() + b.extent() + 4.0;
      });
      if (clear) {
        out.blobs.push_back(b);
        return true;
      }
    }
    if (required) throw Error(ErrorKind::InvalidConfig, "cannot place all annotated objects; region too crowded");
    return false;
  };

  for (int i = 0; i < cfg.mitosis_per_image; ++i) {
    Blob b;
    b.label = Label::kMitosis;
    b.angle = rng.uniform(0.0, 2.0 * kPi);
    b.h_conc = rng.uniform(1.15, 1.4);
    b.e_conc = 0.05;
    const bool atypical = rng.bernoulli(cfg.atypical_fraction);
    if (atypical) {
      b.shape = BlobShape::Lobed;
      b.r0 = rng.uniform(9.0, 11.0);
      b.r1 = 0.75 * b.r0;
      b.spikes = rng.uniform_int(2, 3);
    } else {
      b.shape = BlobShape::Star;
      b.r0 = rng.uniform(8.0, 10.0);
      b.amplitude = rng.uniform(0.22, 0.32);
      b.spikes = rng.uniform_int(7, 9);
    }
    place(b, true);
    Annotation a;
    a.x = out.blobs.back().cx;
    a.y = out.blobs.back().cy;
    a.kind = AnnotationKind::Mitosis;
    a.subtype = atypical ? Subtype::Atypical : Subtype::Normal;
    a.case_id = out.case_id;
    a.domain_id = domain_id;
    out.annotations.push_back(a);
  }
  for (int i = 0; i < cfg.hard_negative_per_image; ++i) {
    Blob b;
    b.label = Label::kHardNegative;
    b.shape = BlobShape::Ellipse;
    b.r0 = rng.uniform(8.0, 11.0);
    b.r1 = b.r0 * rng.uniform(0.7, 0.95);
    b.angle = rng.uniform(0.0, kPi);
    b.h_conc = rng.uniform(0.8, 0.95);
    b.e_conc = 0.35;
    place(b, true);
    Annotation a;
    a.x = out.blobs.back().cx;
    a.y = out.blobs.back().cy;
    a.kind = AnnotationKind::HardNegative;
    a.case_id = out.case_id;
    a.domain_id = domain_id;
    out.annotations.push_back(a);
  }
  for (int i = 0; i < cfg.nuclei_per_image; ++i) {
    Blob b;
    b.label = Label::kNucleus;
    b.shape = BlobShape::Ellipse;
    b.r0 = rng.uniform(7.0, 10.0);
    b.r1 = b.r0 * rng.uniform(0.65, 0.9);
    b.angle = rng.uniform(0.0, kPi);
    b.h_conc = rng.uniform(0.45, 0.65);
    b.e_conc = 0.1;
    place(b, false);
  }

  // Low-frequency eosin field for the background.
  std::array<double, 6> wave{};
  for (auto& w : wave) w = rng.uniform(0.0, 2.0 * kPi);
  const double fx = rng.uniform(0.01, 0.03), fy = rng.uniform(0.01, 0.03);

  const auto h = reference_h();
  const auto e = reference_e();
  out.truth = MultiClassMask(cfg.width, cfg.height, 1, Label::kBackground);
  out.image = Image(cfg.width, cfg.height, cfg.spacing_um, domain_id);

  std::vector<double> conc_h(out.truth.pixel_count(), 0.0), conc_e(out.truth.pixel_count(), 0.0);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const size_t p = static_cast<size_t>(y) * cfg.width + x;
      conc_e[p] = 0.28 + 0.05 * std::sin(fx * x + wave[0]) * std::cos(fy * y + wave[1]);
    }
  }
  for (const auto& b : out.blobs) {
    const int r = static_cast<int>(std::ceil(b.extent())) + 1;
    const int x0 = std::max(0, static_cast<int>(b.cx) - r), x1 = std::min(cfg.width - 1, static_cast<int>(b.cx) + r);
    const int y0 = std::max(0, static_cast<int>(b.cy) - r), y1 = std::min(cfg.height - 1, static_cast<int>(b.cy) + r);
    const bool textured = b.label == Label::kNucleus || b.shape != BlobShape::Ellipse;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!b.contains(x + 0.5, y + 0.5)) continue;
        const size_t p = static_cast<size_t>(y) * cfg.width + x;
        out.truth.at(x, y) = b.label;
        const double tex = textured ? 1.0 + 0.12 * std::sin(0.9 * x + wave[2]) * std::sin(0.8 * y + wave[3]) : 1.0;
        conc_h[p] = b.h_conc * tex;
        conc_e[p] = b.e_conc;
      }
    }
  }

  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const size_t p = static_cast<size_t>(y) * cfg.width + x;
      const double ch = style.h_scale * conc_h[p];
      const double ce = style.e_scale * conc_e[p];
      for (int c = 0; c < 3; ++c) {
        const double od = std::max(0.0, h[c] * ch + e[c] * ce + rng.normal(0.0, 0.01));
        const double v = 255.0 * std::pow(10.0, -od);
        const double styled = style.contrast * (v - 128.0) + 128.0 + style.rgb_offset[c];
        out.image.rgb.at(x, y, c) = static_cast<uint8_t>(std::clamp(std::lround(styled), 0L, 255L));
      }
    }
  }
  return out;
}

std::vector<SynthCase> synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<DomainStyle> styles;
  for (int d = 0; d < cfg.n_domains; ++d) styles.push_back(domain_style(cfg, d));
  std::vector<SynthCase> cases;
  cases.reserve(cfg.n_cases);
  for (int i = 0; i < cfg.n_cases; ++i) {
    const int domain = i % cfg.n_domains;
    cases.push_back(render_case(cfg, i, domain, styles[domain]));
  }
  return cases;
}

}  // namespace mito::datapipe
