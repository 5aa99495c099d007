// Python bindings for the torch-free core: imaging, synthetic data, tiling,
// metrics, the learning-rate schedule and loss combination.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "mito/config.hpp"
#include "mito/datapipe/dataset.hpp"
#include "mito/datapipe/synth.hpp"
#include "mito/datapipe/tiling.hpp"
#include "mito/error.hpp"
#include "mito/evaluation.hpp"
#include "mito/imaging.hpp"
#include "mito/loss_combine.hpp"
#include "mito/schedule.hpp"
#include "mito/targets.hpp"

namespace py = pybind11;
using namespace mito;

namespace {

using U8Array = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const U8Array& a, double spacing) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an H x W x 3 uint8 array");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), spacing);
  std::memcpy(img.rgb.data.data(), a.data(), img.rgb.data.size());
  return img;
}

Raster<uint8_t> to_mask(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected an H x W uint8 array");
  Raster<uint8_t> m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(m.data.data(), a.data(), m.data.size());
  return m;
}

py::array_t<uint8_t> to_numpy(const Raster<uint8_t>& r) {
  std::vector<py::ssize_t> shape{r.height, r.width};
  if (r.channels > 1) shape.push_back(r.channels);
  py::array_t<uint8_t> out(shape);
  std::memcpy(out.mutable_data(), r.data.data(), r.data.size());
  return out;
}

template <typename T>
T from_dict(const py::dict& d) {
  T value{};
  if (d.size() == 0) return value;
  const auto text = py::module_::import("json").attr("dumps")(d).cast<std::string>();
  from_json(nlohmann::json::parse(text), value);
  return value;
}

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mitotic figure pipeline core (imaging, data, metrics)";

  // Messages carry the error kind as a prefix, e.g. "InvalidConfig: ...".
  py::register_exception<Error>(m, "MitoError", PyExc_RuntimeError);

  m.def(
      "otsu_threshold",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> values) {
        const auto r = imaging::otsu_threshold(std::span<const float>(values.data(), values.size()));
        return py::make_tuple(r.bin, r.lo, r.hi);
      },
      py::arg("values"), "256-bin Otsu: returns (bin, lo, hi); foreground is bins above `bin`.");

  m.def(
      "morphological_open",
      [](const U8Array& mask, int radius) { return to_numpy(imaging::morphological_open(to_mask(mask), radius)); },
      py::arg("mask"), py::arg("radius"));

  m.def(
      "classical_pseudomask",
      [](const U8Array& rgb, const py::dict& params, double spacing) {
        const auto p = from_dict<imaging::PseudoMaskParams>(params);
        const auto r = imaging::classical_pseudomask(to_image(rgb, spacing), p);
        return py::make_tuple(to_numpy(r.mask), r.warning, r.message);
      },
      py::arg("rgb"), py::arg("params") = py::dict(), py::arg("spacing_um") = 0.25,
      "Nuclei mask from the H channel: returns (mask, warning, message).");

  m.def(
      "synth_dataset",
      [](const py::dict& config) {
        const auto cfg = from_dict<datapipe::SynthConfig>(config);
        py::list out;
        for (const auto& c : datapipe::synth_dataset(cfg)) {
          py::list anns;
          for (const auto& a : c.annotations) {
            nlohmann::json j;
            datapipe::to_json(j, a);
            anns.append(to_py(j));
          }
          py::dict d;
          d["case_id"] = c.case_id;
          d["domain_id"] = c.domain_id;
          d["image"] = to_numpy(c.image.rgb);
          d["truth"] = to_numpy(c.truth);
          d["annotations"] = anns;
          out.append(d);
        }
        return out;
      },
      py::arg("config") = py::dict());

  m.def(
      "tile_region",
      [](int width, int height, int tile_size, double overlap) {
        std::vector<std::pair<int, int>> origins;
        for (const auto& o : datapipe::tile_region(width, height, tile_size, overlap).origins) origins.emplace_back(o.x, o.y);
        return origins;
      },
      py::arg("width"), py::arg("height"), py::arg("tile_size") = 512, py::arg("overlap") = 0.5);

  m.def(
      "match_detections",
      [](const std::vector<std::pair<double, double>>& preds, const std::vector<std::pair<double, double>>& gts,
         double spacing_um, double radius_um) {
        std::vector<eval::Detection> p;
        for (const auto& [x, y] : preds) p.push_back({x, y, 1.0, ""});
        std::vector<eval::Point> g;
        for (const auto& [x, y] : gts) g.push_back({x, y});
        const auto r = eval::match_detections(p, g, spacing_um, radius_um);
        std::vector<std::tuple<int, int, double>> pairs;
        for (const auto& q : r.pairs) pairs.emplace_back(q.pred, q.gt, q.distance_um);
        py::dict d;
        d["tp"] = r.tp;
        d["fp"] = r.fp;
        d["fn"] = r.fn;
        d["pairs"] = pairs;
        return d;
      },
      py::arg("preds"), py::arg("gts"), py::arg("spacing_um") = 0.25, py::arg("radius_um") = eval::kHitRadiusUm);

  m.def(
      "micro_f1",
      [](const std::vector<std::tuple<int, int, int>>& counts) {
        std::vector<eval::MatchResult> rs;
        for (const auto& [tp, fp, fn] : counts) rs.push_back({tp, fp, fn, {}});
        nlohmann::json j;
        eval::to_json(j, eval::micro_f1(rs));
        return to_py(j);
      },
      py::arg("counts"), "Pooled precision/recall/F1 from per-case (tp, fp, fn).");

  m.def(
      "balanced_accuracy",
      [](const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
        nlohmann::json j;
        eval::to_json(j, eval::balanced_accuracy(scores, labels, threshold));
        return to_py(j);
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.590);

  m.def(
      "threshold_sweep",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        const auto s = eval::threshold_sweep(scores, labels);
        py::dict d;
        d["threshold"] = s.best_threshold;
        d["ba"] = s.best_ba;
        d["curve"] = s.curve;
        return d;
      },
      py::arg("scores"), py::arg("labels"));

  m.def("lr_at",
        py::overload_cast<long, long, long, double, double>(&training::lr_at),
        py::arg("step"), py::arg("total_steps"), py::arg("warmup_steps"), py::arg("lr_init") = 4e-4,
        py::arg("lr_final") = 1e-6);

  m.def(
      "combine_losses",
      [](const py::dict& parts, int track) {
        losses::LossParts p;
        auto get = [&](const char* k) { return parts.contains(k) ? parts[k].cast<double>() : 0.0; };
        p.ce = get("ce");
        p.adice = get("adice");
        p.focal = get("focal");
        p.point_ce = get("point_ce");
        p.cont = get("cont");
        p.domain = get("domain");
        p.cls = get("cls");
        nlohmann::json j;
        losses::to_json(j, losses::combine(p, track));
        return to_py(j);
      },
      py::arg("parts"), py::arg("track") = 1);

  m.def(
      "assemble_targets",
      [](const U8Array& annotated, const U8Array& pseudo) {
        return to_numpy(teacher::assemble_targets(to_mask(annotated), to_mask(pseudo)));
      },
      py::arg("annotated"), py::arg("pseudo"));

  m.def(
      "default_run_config",
      [](int track) {
        nlohmann::json j;
        to_json(j, RunConfig::for_track(track));
        return to_py(j);
      },
      py::arg("track") = 1);
}
