#include "oanav/bench.hpp"
#include "oanav/geometry.hpp"
#include "oanav/icp.hpp"
#include "oanav/scene.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>

namespace py = pybind11;
using namespace oanav;

namespace {

// (cx, cy, cz, sx, sy, sz, yaw)
using BoxTuple = std::array<double, 7>;

OrientedBox3 to_box(const BoxTuple& b) { return {Vec3(b[0], b[1], b[2]), Vec3(b[3], b[4], b[5]), b[6]}; }

py::dict metrics_dict(const EpisodeMetrics& m) {
  py::dict d;
  d["scene"] = m.scene;
  d["variant"] = m.variant;
  d["seed"] = m.seed;
  d["success"] = m.success;
  d["t_g"] = m.t_g;
  d["t_r"] = m.t_r;
  d["d_g"] = m.d_g;
  d["failure"] = m.failure;
  d["replans"] = m.replans;
  return d;
}

}  // namespace

PYBIND11_MODULE(_oanav, m) {
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  m.def(
      "box_giou", [](const BoxTuple& a, const BoxTuple& b) { return box_giou3d(to_box(a), to_box(b)); },
      py::arg("a"), py::arg("b"), "GIoU of two yaw-rotated boxes given as (cx, cy, cz, sx, sy, sz, yaw).");
  m.def(
      "box_iou", [](const BoxTuple& a, const BoxTuple& b) { return box_iou3d(to_box(a), to_box(b)); }, py::arg("a"),
      py::arg("b"));
  m.def("existence_probability", &existence_probability, py::arg("e_icp"), py::arg("e_min") = 0.01,
        py::arg("e_max") = 0.1);

  m.def("variants", [] {
    std::vector<std::string> names;
    for (const Variant v : all_variants()) names.push_back(to_string(v));
    return names;
  });

  m.def(
      "generate_scene",
      [](const std::string& density, std::uint64_t seed) {
        return scene_to_json(randomize_scene(density_preset(density, seed))).dump();
      },
      py::arg("density") = "medium", py::arg("seed") = 0, "Random scene as a JSON string.");

  m.def(
      "run_episode",
      [](const std::string& scene_json, const std::string& variant, std::uint64_t seed, const std::string& config) {
        const Scene scene = scene_from_json(nlohmann::json::parse(scene_json));
        const BenchConfig cfg = config.empty() ? BenchConfig{} : config_from_json(nlohmann::json::parse(config));
        EpisodeMetrics metrics;
        {
          py::gil_scoped_release release;
          metrics = run_episode(scene, variant_from_string(variant), cfg, seed);
        }
        return metrics_dict(metrics);
      },
      py::arg("scene_json"), py::arg("variant") = "Ours", py::arg("seed") = 1, py::arg("config") = "",
      "Closed-loop episode; returns the metrics row as a dict.");
}
