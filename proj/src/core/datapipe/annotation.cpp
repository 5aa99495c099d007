#include "mito/datapipe/annotation.hpp"

#include <fstream>

#include "mito/error.hpp"

namespace mito::datapipe {

void validate(const Annotation& a, int region_width, int region_height) {
  if (!(a.x >= 0.0 && a.y >= 0.0 && a.x <= region_width && a.y <= region_height)) {
    throw Error(ErrorKind::InvalidArgument, "annotation outside region in case " + a.case_id);
  }
  if (a.subtype && a.kind != AnnotationKind::Mitosis) {
    throw Error(ErrorKind::InvalidArgument, "subtype set on a hard negative in case " + a.case_id);
  }
}

void to_json(nlohmann::json& j, const Annotation& a) {
  j = nlohmann::json{{"x", a.x},
                     {"y", a.y},
                     {"kind", a.kind == AnnotationKind::Mitosis ? "mitosis" : "hard_negative"},
                     {"subtype", nullptr},
                     {"case_id", a.case_id},
                     {"domain_id", a.domain_id}};
  if (a.subtype) j["subtype"] = *a.subtype == Subtype::Atypical ? "atypical" : "normal";
}

void from_json(const nlohmann::json& j, Annotation& a) {
  a.x = j.at("x").get<double>();
  a.y = j.at("y").get<double>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "mitosis") {
    a.kind = AnnotationKind::Mitosis;
  } else if (kind == "hard_negative") {
    a.kind = AnnotationKind::HardNegative;
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown annotation kind '" + kind + "'");
  }
  a.subtype.reset();
  if (j.contains("subtype") && !j["subtype"].is_null()) {
    const auto st = j["subtype"].get<std::string>();
    if (st == "atypical") {
      a.subtype = Subtype::Atypical;
    } else if (st == "normal") {
      a.subtype = Subtype::Normal;
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown subtype '" + st + "'");
    }
  }
  a.case_id = j.at("case_id").get<std::string>();
  a.domain_id = j.at("domain_id").get<int>();
}

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in).get<std::vector<Annotation>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, path.string() + ": " + e.what());
  }
}

void write_annotations(const std::filesystem::path& path, const std::vector<Annotation>& anns) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << nlohmann::json(anns).dump(1) << '\n';
}

}  // namespace mito::datapipe
