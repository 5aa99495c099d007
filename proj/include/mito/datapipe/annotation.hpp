#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mito::datapipe {

enum class AnnotationKind { Mitosis, HardNegative };
enum class Subtype { Normal, Atypical };

struct Annotation {
  double x = 0.0;
  double y = 0.0;
  AnnotationKind kind = AnnotationKind::Mitosis;
  std::optional<Subtype> subtype;
  std::string case_id;
  int domain_id = 0;

  bool operator==(const Annotation&) const = default;
};

/// Throws Error{InvalidArgument} when out of bounds or subtype is set on a
/// hard negative.
void validate(const Annotation& a, int region_width, int region_height);

void to_json(nlohmann::json& j, const Annotation& a);
void from_json(const nlohmann::json& j, Annotation& a);

std::vector<Annotation> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const std::vector<Annotation>& anns);

}  // namespace mito::datapipe
