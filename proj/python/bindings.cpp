#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ablab/electric_ab.hpp"
#include "ablab/errors.hpp"
#include "ablab/flux_recovery.hpp"
#include "ablab/gauge_field.hpp"
#include "ablab/geometry.hpp"
#include "ablab/go_engine.hpp"
#include "ablab/tdse.hpp"

namespace py = pybind11;
using namespace ablab;

namespace {

Vec2 to_vec(const py::handle& h) {
    const auto s = py::cast<py::sequence>(h);
    if (py::len(s) != 2) throw py::value_error("expected a pair (x, y)");
    return {py::cast<double>(s[0]), py::cast<double>(s[1])};
}

py::tuple to_tuple(const Vec2& v) { return py::make_tuple(v.x, v.y); }

Scene make_scene(const std::vector<std::tuple<py::object, double, double>>& obstacles, py::object lo,
                 py::object hi) {
    std::vector<Disk> disks;
    for (const auto& [c, r, f] : obstacles) disks.push_back(Disk{to_vec(c), r, f});
    return Scene(std::move(disks), Box{to_vec(lo), to_vec(hi)});
}

BeamSpec make_beam(py::object anchor, py::object direction, double transverse_width, double longitudinal_width,
                   double wavenumber, int max_reflections) {
    BeamSpec b;
    b.anchor = to_vec(anchor);
    b.direction = normalized(to_vec(direction));
    b.transverse_width = transverse_width;
    b.longitudinal_width = longitudinal_width;
    b.wavenumber = wavenumber;
    b.max_reflections = max_reflections;
    b.validate();
    return b;
}

py::dict prediction_dict(const GOPrediction& p) {
    py::dict d;
    d["I1"] = p.phase_1;
    d["I2"] = p.phase_2;
    d["I3"] = p.closing_correction;
    d["alpha"] = p.alpha;
    d["intensity"] = p.intensity;
    d["winding"] = p.winding;
    d["meeting_point"] = to_tuple(p.meeting_point);
    return d;
}

py::dict estimate_dict(const FluxEstimate& e) {
    py::dict d;
    d["alphas"] = e.alphas;
    d["ambiguity"] = e.ambiguity;
    d["solutions"] = e.solutions;
    d["max_residual"] = e.max_residual;
    return d;
}

py::array_t<double> density_array(const Field& f) {
    py::array_t<double> out({f.ny, f.nx});
    auto v = out.mutable_unchecked<2>();
    for (int j = 0; j < f.ny; ++j)
        for (int i = 0; i < f.nx; ++i) v(j, i) = std::norm(f.values[static_cast<std::size_t>(j) * f.nx + i]);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Aharonov-Bohm laboratory core";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
    py::register_exception<ReflectionBudgetError>(m, "ReflectionBudgetError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<RankDeficientError>(m, "RankDeficientError", base.ptr());
    py::register_exception<AmbiguityError>(m, "AmbiguityError", base.ptr());
    py::register_exception<ConsistencyError>(m, "ConsistencyError", base.ptr());
    py::register_exception<DesignFailureError>(m, "DesignFailureError", base.ptr());
    py::register_exception<ExperimentDesignError>(m, "ExperimentDesignError", base.ptr());

    py::class_<Scene>(m, "Scene")
        .def(py::init(&make_scene), py::arg("obstacles"), py::arg("bound_min"), py::arg("bound_max"),
             "obstacles: list of ((x, y), radius, flux)")
        .def_property_readonly("fluxes", &Scene::fluxes)
        .def("__len__", &Scene::size)
        .def("with_fluxes", &Scene::with_fluxes)
        .def("clearance", [](const Scene& s, py::object p) { return s.clearance(to_vec(p)); });

    py::class_<BeamSpec>(m, "Beam")
        .def(py::init(&make_beam), py::arg("anchor"), py::arg("direction"), py::arg("transverse_width") = 1.0,
             py::arg("longitudinal_width") = 1.0, py::arg("wavenumber") = 1.0, py::arg("max_reflections") = 0)
        .def_property_readonly("anchor", [](const BeamSpec& b) { return to_tuple(b.anchor); })
        .def_property_readonly("direction", [](const BeamSpec& b) { return to_tuple(b.direction); });

    m.def(
        "trace",
        [](py::object start, py::object direction, const Scene& scene, int max_reflections) {
            const BrokenRay r = trace_broken_ray(to_vec(start), normalized(to_vec(direction)), scene, max_reflections);
            py::list legs;
            for (const Leg& l : r.legs) legs.append(py::make_tuple(to_tuple(l.start), to_tuple(l.end())));
            return py::make_tuple(legs, r.escaped);
        },
        py::arg("start"), py::arg("direction"), py::arg("scene"), py::arg("max_reflections") = 16,
        "Broken ray as ([(start, end), ...], escaped).");

    m.def(
        "loop_flux",
        [](const Scene& scene, const std::vector<py::object>& polygon, double rel_tol) {
            std::vector<Vec2> v;
            for (const auto& p : polygon) v.push_back(to_vec(p));
            return loop_flux(ab_potential(scene), Loop::polygon(v), rel_tol);
        },
        py::arg("scene"), py::arg("polygon"), py::arg("rel_tol") = 1e-10);

    m.def(
        "winding_numbers",
        [](const Scene& scene, const std::vector<py::object>& polygon) {
            std::vector<Vec2> v;
            for (const auto& p : polygon) v.push_back(to_vec(p));
            return winding_numbers(Loop::polygon(v), scene);
        },
        py::arg("scene"), py::arg("polygon"));

    m.def("interference_intensity", &interference_intensity, py::arg("alpha"));

    m.def(
        "predict_two_beam",
        [](const Scene& scene, const BeamSpec& b1, const BeamSpec& b2, double rel_tol) {
            return prediction_dict(predict_two_beam(scene, ab_potential(scene), b1, b2, rel_tol));
        },
        py::arg("scene"), py::arg("beam1"), py::arg("beam2"), py::arg("rel_tol") = 1e-8);

    m.def("invert_intensity", &invert_intensity, py::arg("intensity"));

    m.def(
        "solve_mod2pi",
        [](const IntMatrix& n, const std::vector<double>& betas, double noise_bound, double tolerance) {
            FluxSystem s;
            s.winding = n;
            for (double b : betas) s.betas.push_back(Measurement::phase(b));
            s.noise_bound = noise_bound;
            return estimate_dict(solve_mod2pi(s, tolerance));
        },
        py::arg("winding"), py::arg("betas"), py::arg("noise_bound") = 0.0, py::arg("tolerance") = 1e-8);

    m.def(
        "recover",
        [](const Scene& scene, const std::string& oracle, std::uint64_t seed) {
            DesignOptions opt;
            opt.seed = seed;
            if (oracle != "go-phase" && oracle != "go-intensity") throw py::value_error("oracle is go-phase or go-intensity");
            const auto o = oracle == "go-phase" ? go_phase_oracle(scene) : go_intensity_oracle(scene);
            return estimate_dict(recover(scene, o, opt));
        },
        py::arg("scene"), py::arg("oracle") = "go-phase", py::arg("seed") = 1);

    m.def(
        "design_measurements",
        [](const Scene& scene, std::uint64_t seed) {
            DesignOptions opt;
            opt.seed = seed;
            const MeasurementDesign d = design_measurements(scene, opt);
            py::list circuits;
            for (const Circuit& c : d.circuits) {
                py::list verts;
                for (const Vec2& v : c.vertices) verts.append(to_tuple(v));
                py::dict e;
                e["vertices"] = verts;
                e["winding"] = c.winding;
                e["broken"] = c.broken;
                circuits.append(e);
            }
            return circuits;
        },
        py::arg("scene"), py::arg("seed") = 1);

    m.def(
        "tdse_evolve",
        [](const Scene& scene, int n, double spacing, double dt, const BeamSpec& packet, int steps) {
            LatticeSpec spec;
            spec.nx = spec.ny = n;
            spec.spacing = spacing;
            spec.origin = {-0.5 * (n - 1) * spacing, -0.5 * (n - 1) * spacing};
            spec.dt = dt;
            const Lattice lat = build_lattice(scene, ab_potential(scene), spec);
            const Field u0 = init_packet(lat, packet).field;
            Field u;
            {
                py::gil_scoped_release release;
                u = evolve(lat, u0, steps).field;
            }
            return py::make_tuple(density_array(u), total_probability(u0), total_probability(u));
        },
        py::arg("scene"), py::arg("n"), py::arg("spacing"), py::arg("dt"), py::arg("packet"), py::arg("steps"),
        "Square lattice centered at the origin; returns (density[ny, nx], initial norm, final norm).");

    m.def(
        "electric_discrepancy",
        [](double delta, const std::string& mode) {
            const ElectricReference ref = electric_reference();
            const ElectricMode md = mode == "analytic" ? ElectricMode::AnalyticPhase : ElectricMode::FullNumeric;
            py::gil_scoped_release release;
            const auto zero = run_electric_ab(ref.schedule, SplitPotential::zero(), ref.u0, ref.spec, md);
            const auto h = run_electric_ab(ref.schedule, ref.potential_for(delta), ref.u0, ref.spec, md);
            return density_discrepancy(h, zero, ref.schedule.split_end(), ref.schedule.total_duration());
        },
        py::arg("delta"), py::arg("mode") = "full",
        "Post-merge density discrepancy of the reference configuration against the zero-potential run.");
}
