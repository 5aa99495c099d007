#include "mito/targets.hpp"

#include "mito/error.hpp"

namespace mito::teacher {

MultiClassMask assemble_targets(const MultiClassMask& annotated, const MultiClassMask& pseudo) {
  if (annotated.width != pseudo.width || annotated.height != pseudo.height) {
    throw Error(ErrorKind::ShapeMismatch, "annotated and pseudo masks differ in size");
  }
  MultiClassMask out(annotated.width, annotated.height, 1, Label::kBackground);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const uint8_t a = annotated.data[i];
    const uint8_t p = pseudo.data[i];
    if (a == Label::kMitosis || a == Label::kHardNegative) {
      out.data[i] = a;
    } else if (p == Label::kNucleus || p == Label::kIgnore) {
      out.data[i] = p;
    }
  }
  return out;
}

MultiClassMask pseudo_from_binary(const BinaryMask& mask) {
  MultiClassMask out(mask.width, mask.height, 1, Label::kBackground);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = mask.data[i] ? Label::kNucleus : Label::kBackground;
  return out;
}

}  // namespace mito::teacher
