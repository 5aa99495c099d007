#pragma once

#include "mito/raster.hpp"

namespace mito::teacher {

/// Per pixel: annotated mitosis > annotated hard-negative > pseudo nucleus >
/// pseudo ignore > background. Throws Error{ShapeMismatch}.
MultiClassMask assemble_targets(const MultiClassMask& annotated, const MultiClassMask& pseudo);

/// Classical fallback labels: foreground -> nucleus, else background.
MultiClassMask pseudo_from_binary(const BinaryMask& mask);

}  // namespace mito::teacher
