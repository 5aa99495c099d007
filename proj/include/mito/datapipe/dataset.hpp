#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mito/datapipe/annotation.hpp"
#include "mito/datapipe/synth.hpp"

namespace mito::datapipe {

/// One region of an on-disk dataset.
struct DatasetCase {
  std::string case_id;
  int domain_id = 0;
  Image image;
  std::optional<MultiClassMask> truth;
  std::vector<Annotation> annotations;
};

/// Writes images/, masks/, annotations.json and manifest.json (with SHA-256
/// of every listed file).
void write_dataset(const std::filesystem::path& dir, const std::vector<SynthCase>& cases,
                   const SynthConfig& cfg);
std::vector<DatasetCase> read_dataset(const std::filesystem::path& dir);

std::string sha256_file(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const DomainStyle& s);
void from_json(const nlohmann::json& j, DomainStyle& s);
void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

DatasetCase to_dataset_case(const SynthCase& c);

}  // namespace mito::datapipe
