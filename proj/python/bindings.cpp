#include <memory>
#include <optional>
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fpmap/config.hpp"
#include "fpmap/error.hpp"
#include "fpmap/localization.hpp"
#include "fpmap/pdr.hpp"
#include "fpmap/radiomap.hpp"
#include "fpmap/sensors.hpp"
#include "fpmap/sim.hpp"

namespace py = pybind11;
using namespace fpmap;

namespace {

PipelineConfig make_config(const std::vector<std::string>& overrides) {
    PipelineConfig cfg;
    for (const auto& o : overrides) apply_override(cfg, o);
    cfg.validate();
    return cfg;
}

py::dict pose_dict(const Pose& p) {
    py::dict d;
    d["t"] = p.t;
    d["x"] = p.x;
    d["y"] = p.y;
    d["floor"] = p.level;
    d["segment"] = p.segment;
    d["kind"] = p.kind == PoseKind::Start ? "start" : p.kind == PoseKind::Step ? "step" : "snap";
    if (p.landmark) d["landmark"] = *p.landmark;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Landmark-calibrated PDR, radio map construction and fingerprint localization";

    py::register_exception<Error>(m, "FpmapError", PyExc_RuntimeError);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

    py::class_<SensorTrace>(m, "Trace")
        .def_property_readonly("accel_count", [](const SensorTrace& t) { return t.accel.size(); })
        .def_property_readonly("scan_count", [](const SensorTrace& t) { return t.wifi.size(); })
        .def_property_readonly("truth_count", [](const SensorTrace& t) { return t.truth.size(); })
        .def("save", [](const SensorTrace& t, const std::filesystem::path& p) { save_trace(t, p); })
        .def("__len__", &SensorTrace::size);
    m.def("load_trace", [](const std::filesystem::path& p) { return load_trace(p); });

    m.def(
        "detect_steps",
        [](const SensorTrace& t, const std::vector<std::string>& overrides) {
            std::vector<std::pair<double, std::optional<double>>> out;
            for (const auto& s : detect_steps(t, make_config(overrides).sensors)) out.emplace_back(s.t, s.periodicity);
            return out;
        },
        py::arg("trace"), py::arg("overrides") = std::vector<std::string>{},
        "Step peaks as (time, periodicity) pairs.");

    py::class_<SimulatedWalk>(m, "Simulation")
        .def_readonly("trace", &SimulatedWalk::trace)
        .def_readonly("scripted_steps", &SimulatedWalk::scripted_steps)
        .def_property_readonly("initial", [](const SimulatedWalk& w) { return pose_dict(w.initial); });

    py::class_<Scenario>(m, "Scenario")
        .def_property_readonly("landmarks",
                               [](const Scenario& s) {
                                   std::vector<std::string> ids;
                                   for (const auto& n : s.env.graph.nodes()) ids.push_back(n.id);
                                   return ids;
                               })
        .def(
            "simulate",
            [](const Scenario& s, std::optional<std::uint64_t> seed) {
                NoiseModel noise = s.noise;
                if (seed) noise.seed = *seed;
                return generate_trace(s.env, s.script, noise);
            },
            py::arg("seed") = py::none())
        .def(
            "queries",
            [](const Scenario& s, std::optional<std::uint64_t> seed) {
                NoiseModel noise = s.noise;
                if (seed) noise.seed = *seed;
                return generate_test_queries(s.env, query_positions(s), noise);
            },
            py::arg("seed") = py::none());
    m.def("load_scenario", [](const std::filesystem::path& p) { return load_scenario(p); });

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("poses",
                               [](const Trajectory& t) {
                                   py::list l;
                                   for (const auto& p : t.poses) l.append(pose_dict(p));
                                   return l;
                               })
        .def_property_readonly("segment_count", [](const Trajectory& t) { return t.segments.size(); })
        .def_property_readonly("landmark_visits",
                               [](const Trajectory& t) {
                                   std::vector<std::pair<double, std::string>> v;
                                   for (const auto& x : t.landmark_visits) v.emplace_back(x.t, x.id);
                                   return v;
                               })
        .def("save", [](const Trajectory& t, const std::filesystem::path& p) { save_trajectory(t, p); });

    m.def(
        "track",
        [](const SensorTrace& trace, const Scenario& scenario, const SimulatedWalk& walk, const std::string& mode,
           const std::vector<std::string>& overrides) {
            auto cfg = make_config(overrides);
            cfg.pdr.heading_source = parse_heading_source(mode);
            return run_pdr(trace, scenario.env.graph, walk.initial, cfg.pdr, cfg.sensors, cfg.landmarks);
        },
        py::arg("trace"), py::arg("scenario"), py::arg("walk"), py::arg("mode") = "landmark",
        py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "position_errors",
        [](const Trajectory& t, const SensorTrace& trace) { return position_errors(t, trace.truth); });

    py::class_<TestQuery>(m, "Query")
        .def_readonly("x", &TestQuery::x)
        .def_readonly("y", &TestQuery::y)
        .def_readonly("floor", &TestQuery::floor)
        .def_readonly("fingerprint", &TestQuery::fingerprint);

    py::class_<RadioMap>(m, "RadioMap")
        .def("__len__", [](const RadioMap& r) { return r.entries.size(); })
        .def_property_readonly("beliefs",
                               [](const RadioMap& r) {
                                   std::vector<double> b;
                                   for (const auto& e : r.entries) b.push_back(e.belief);
                                   return b;
                               })
        .def("save", [](const RadioMap& r, const std::filesystem::path& p) { save_radio_map(r, p); });
    m.def("load_radio_map", [](const std::filesystem::path& p) { return load_radio_map(p); });

    m.def(
        "build_radio_map",
        [](const Trajectory& t, const SensorTrace& trace, const std::vector<std::string>& overrides) {
            return build_radio_map(t, trace.wifi, make_config(overrides).radiomap);
        },
        py::arg("trajectory"), py::arg("trace"), py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "segment_belief",
        [](const std::vector<double>& periods, const std::vector<std::string>& overrides) {
            return segment_belief(std::span<const double>(periods), make_config(overrides).radiomap);
        },
        py::arg("periodicities"), py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "to_positive",
        [](const Fingerprint& fp, const std::vector<std::string>& universe, double tau, double min_rss) {
            return to_positive(fp, std::make_shared<const ApUniverse>(universe), tau, min_rss).values;
        },
        py::arg("fingerprint"), py::arg("universe"), py::arg("tau"), py::arg("min_rss"));

    m.def(
        "knn_localize",
        [](const Fingerprint& fp, const RadioMap& map, const std::vector<std::string>& overrides) {
            const auto r = knn_localize(fp, map, make_config(overrides).localization);
            py::dict d;
            d["x"] = r.x;
            d["y"] = r.y;
            d["floor"] = r.floor;
            std::vector<std::pair<std::size_t, std::optional<double>>> n;
            for (const auto& x : r.neighbors) n.emplace_back(x.entry, x.distance);
            d["neighbors"] = n;
            return d;
        },
        py::arg("fingerprint"), py::arg("map"), py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "evaluate",
        [](const std::vector<TestQuery>& queries, const RadioMap& map, const std::vector<std::string>& overrides) {
            const auto r = evaluate(queries, map, make_config(overrides).localization);
            py::dict d;
            d["floor_accuracy"] = r.floor_accuracy;
            d["mean_error_m"] = r.mean_error;
            d["p50"] = r.p50;
            d["p90"] = r.p90;
            d["errors"] = r.error_cdf;
            return d;
        },
        py::arg("queries"), py::arg("map"), py::arg("overrides") = std::vector<std::string>{});

    m.def("config_keys", &config_keys);
    m.def("default_config_json", [] { return config_to_json(PipelineConfig{}); });
}
