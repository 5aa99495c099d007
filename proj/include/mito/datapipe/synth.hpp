#pragma once

// Synthetic multi-domain H&E-like regions with exact ground truth.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mito/datapipe/annotation.hpp"
#include "mito/raster.hpp"

namespace mito::datapipe {

struct DomainStyle {
  double h_scale = 1.0;
  double e_scale = 1.0;
  std::array<double, 3> rgb_offset{0.0, 0.0, 0.0};
  double contrast = 1.0;
};

struct SynthConfig {
  int n_cases = 8;
  int n_domains = 2;
  int width = 512;
  int height = 512;
  double spacing_um = 0.25;
  int nuclei_per_image = 18;
  int mitosis_per_image = 3;
  int hard_negative_per_image = 2;
  double atypical_fraction = 0.4;
  /// Explicit per-domain styles; generated from the seed when empty.
  std::vector<DomainStyle> domains;
  uint64_t seed = 0;

  void validate() const;
};

enum class BlobShape { Ellipse, Star, Lobed };

struct Blob {
  BlobShape shape = BlobShape::Ellipse;
  double cx = 0.0;
  double cy = 0.0;
  double r0 = 8.0;       // ellipse semi-axis a / star base radius / lobe radius
  double r1 = 6.0;       // ellipse semi-axis b / lobe offset
  double angle = 0.0;
  double amplitude = 0.0;  // star spike amplitude
  int spikes = 0;          // star spikes / lobe count
  uint8_t label = Label::kNucleus;
  double h_conc = 0.5;
  double e_conc = 0.0;

  bool contains(double x, double y) const;
  double analytic_area() const;
  double extent() const;  // bounding radius
};

struct SynthCase {
  std::string case_id;
  int domain_id = 0;
  Image image;
  MultiClassMask truth;
  std::vector<Annotation> annotations;
  std::vector<Blob> blobs;
};

DomainStyle domain_style(const SynthConfig& cfg, int domain_id);
/// Content depends on (seed, case_index) only; style decides the colours.
SynthCase render_case(const SynthConfig& cfg, int case_index, int domain_id, const DomainStyle& style);
std::vector<SynthCase> synth_dataset(const SynthConfig& cfg);

/// Reference H&E OD vectors (unit norm) used by the renderer and stain jitter.
std::array<double, 3> reference_h();
std::array<double, 3> reference_e();

}  // namespace mito::datapipe
