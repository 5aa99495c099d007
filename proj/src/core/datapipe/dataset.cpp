#include "mito/datapipe/dataset.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "mito/error.hpp"
#include "mito/image_io.hpp"

namespace mito::datapipe {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const DomainStyle& s) {
  j = json{{"h_scale", s.h_scale}, {"e_scale", s.e_scale}, {"rgb_offset", s.rgb_offset}, {"contrast", s.contrast}};
}

void from_json(const json& j, DomainStyle& s) {
  s = DomainStyle{};
  s.h_scale = j.value("h_scale", s.h_scale);
  s.e_scale = j.value("e_scale", s.e_scale);
  s.rgb_offset = j.value("rgb_offset", s.rgb_offset);
  s.contrast = j.value("contrast", s.contrast);
}

void to_json(json& j, const SynthConfig& c) {
  j = json{{"n_cases", c.n_cases},
           {"n_domains", c.n_domains},
           {"width", c.width},
           {"height", c.height},
           {"spacing_um", c.spacing_um},
           {"nuclei_per_image", c.nuclei_per_image},
           {"mitosis_per_image", c.mitosis_per_image},
           {"hard_negative_per_image", c.hard_negative_per_image},
           {"atypical_fraction", c.atypical_fraction},
           {"domains", c.domains},
           {"seed", c.seed}};
}

void from_json(const json& j, SynthConfig& c) {
  c = SynthConfig{};
  c.n_cases = j.value("n_cases", c.n_cases);
  c.n_domains = j.value("n_domains", c.n_domains);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.spacing_um = j.value("spacing_um", c.spacing_um);
  c.nuclei_per_image = j.value("nuclei_per_image", c.nuclei_per_image);
  c.mitosis_per_image = j.value("mitosis_per_image", c.mitosis_per_image);
  c.hard_negative_per_image = j.value("hard_negative_per_image", c.hard_negative_per_image);
  c.atypical_fraction = j.value("atypical_fraction", c.atypical_fraction);
  if (j.contains("domains")) c.domains = j["domains"].get<std::vector<DomainStyle>>();
  c.seed = j.value("seed", c.seed);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

void write_dataset(const fs::path& dir, const std::vector<SynthCase>& cases, const SynthConfig& cfg) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");

  json manifest;
  manifest["version"] = 1;
  manifest["spacing_um"] = cfg.spacing_um;
  manifest["seed"] = cfg.seed;
  manifest["n_domains"] = cfg.n_domains;
  json styles = json::array();
  for (int d = 0; d < cfg.n_domains; ++d) styles.push_back(domain_style(cfg, d));
  manifest["domains"] = styles;
  manifest["config"] = cfg;

  std::vector<Annotation> all;
  json entries = json::array();
  std::map<std::string, std::string> files;
  for (const auto& c : cases) {
    const std::string img_rel = "images/" + c.case_id + ".png";
    const std::string mask_rel = "masks/" + c.case_id + ".png";
    io::write_rgb(dir / img_rel, c.image);
    io::write_gray(dir / mask_rel, c.truth);
    files[img_rel] = sha256_file(dir / img_rel);
    files[mask_rel] = sha256_file(dir / mask_rel);
    entries.push_back({{"case_id", c.case_id},
                       {"domain_id", c.domain_id},
                       {"image", img_rel},
                       {"mask", mask_rel},
                       {"width", c.image.width()},
                       {"height", c.image.height()}});
    all.insert(all.end(), c.annotations.begin(), c.annotations.end());
  }
  write_annotations(dir / "annotations.json", all);
  files["annotations.json"] = sha256_file(dir / "annotations.json");
  manifest["cases"] = entries;
  manifest["files"] = files;

  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

std::vector<DatasetCase> read_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorKind::Io, "missing manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, "manifest.json: " + std::string(e.what()));
  }
  const double spacing = manifest.value("spacing_um", 0.25);

  std::map<std::string, std::vector<Annotation>> by_case;
  if (fs::exists(dir / "annotations.json")) {
    for (auto& a : read_annotations(dir / "annotations.json")) by_case[a.case_id].push_back(a);
  }

  std::vector<DatasetCase> cases;
  for (const auto& e : manifest.at("cases")) {
    DatasetCase c;
    c.case_id = e.at("case_id").get<std::string>();
    c.domain_id = e.value("domain_id", 0);
    c.image = io::read_rgb(dir / e.at("image").get<std::string>(), spacing, c.domain_id);
    if (e.contains("mask") && fs::exists(dir / e["mask"].get<std::string>())) {
      c.truth = io::read_gray(dir / e["mask"].get<std::string>());
    }
    c.annotations = by_case[c.case_id];
    for (const auto& a : c.annotations) validate(a, c.image.width(), c.image.height());
    cases.push_back(std::move(c));
  }
  return cases;
}

DatasetCase to_dataset_case(const SynthCase& c) {
  return DatasetCase{c.case_id, c.domain_id, c.image, c.truth, c.annotations};
}

}  // namespace mito::datapipe
