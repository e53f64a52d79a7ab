// ablab: command-line driver for the Aharonov-Bohm laboratory.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "ablab/electric_ab.hpp"
#include "ablab/errors.hpp"
#include "ablab/flux_recovery.hpp"
#include "ablab/gauge_field.hpp"
#include "ablab/geometry.hpp"
#include "ablab/go_engine.hpp"
#include "ablab/io.hpp"
#include "ablab/tdse.hpp"

namespace fs = std::filesystem;
using ablab::io::Json;
using namespace ablab;

namespace {

// A parameter block: reads values, echoes every value (given or defaulted) and rejects
// keys nobody asked for.
class Block {
public:
    Block(const Json& src, Json& echo, std::string path) : src_(src), echo_(echo), path_(std::move(path)) {
        if (!src_.is_null() && !src_.is_object()) throw ConfigError(path_ + " must be an object");
        if (!echo_.is_object()) echo_ = Json::object();
    }

    bool has(const std::string& key) const { return src_.is_object() && src_.contains(key); }

    template <class T>
    T get(const std::string& key, T fallback) {
        used_.insert(key);
        T v = has(key) ? convert<T>(key) : fallback;
        echo_[key] = v;
        return v;
    }

    template <class T>
    T need(const std::string& key) {
        used_.insert(key);
        if (!has(key)) throw ConfigError(where(key) + " is required");
        T v = convert<T>(key);
        echo_[key] = v;
        return v;
    }

    Vec2 vec(const std::string& key, std::optional<Vec2> fallback = std::nullopt) {
        used_.insert(key);
        Vec2 v;
        if (has(key)) v = io::vec2_from_json(src_.at(key), where(key));
        else if (fallback) v = *fallback;
        else throw ConfigError(where(key) + " is required");
        echo_[key] = io::to_json(v);
        return v;
    }

    Block child(const std::string& key) {
        used_.insert(key);
        static const Json empty;
        return Block(has(key) ? src_.at(key) : empty, echo_[key], where(key));
    }

    const Json& raw(const std::string& key) {
        used_.insert(key);
        if (!has(key)) throw ConfigError(where(key) + " is required");
        echo_[key] = src_.at(key);
        return src_.at(key);
    }

    void finish() const {
        if (!src_.is_object()) return;
        for (auto it = src_.begin(); it != src_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError("unknown key " + where(it.key()));
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    template <class T>
    T convert(const std::string& key) const {
        try {
            return src_.at(key).get<T>();
        } catch (const Json::exception&) {
            throw ConfigError(where(key) + " has the wrong type");
        }
    }

    const Json& src_;
    Json& echo_;
    std::string path_;
    std::set<std::string> used_;
};

struct Run {
    Json config;
    fs::path config_dir;
    fs::path out;
    std::uint64_t seed{0};
    double tolerance{1e-8};
    Json echo;
};

// Turns library validation failures raised while assembling inputs into config errors.
template <class F>
auto validated(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

Scene read_scene(Run& run, Block& top) {
    const Json& s = top.raw("scene");
    if (s.is_string()) {
        fs::path p = s.get<std::string>();
        if (p.is_relative()) p = run.config_dir / p;
        if (!fs::exists(p)) throw ConfigError("scene file " + p.string() + " does not exist");
        const Scene scene = io::load_scene(p);
        run.echo["scene_resolved"] = io::to_json(scene);
        return scene;
    }
    return io::scene_from_json(s);
}

PhysicalConstants read_constants(Block& top) {
    Block b = top.child("constants");
    PhysicalConstants c;
    c.hbar = b.get("hbar", 1.0);
    c.mass = b.get("mass", 1.0);
    c.charge = b.get("charge", 1.0);
    c.light_speed = b.get("light_speed", 1.0);
    b.finish();
    validated([&] { c.validate(); return 0; });
    return c;
}

BeamSpec read_beam(Block b) {
    BeamSpec beam;
    beam.anchor = b.vec("anchor");
    const Vec2 d = b.vec("direction");
    if (!(norm(d) > 0.0)) throw ConfigError(b.where("direction") + " must be nonzero");
    beam.direction = normalized(d);
    beam.transverse_width = b.get("transverse_width", 1.0);
    beam.longitudinal_width = b.get("longitudinal_width", 1.0);
    beam.wavenumber = b.get("wavenumber", 1.0);
    beam.max_reflections = b.get("max_reflections", 0);
    b.finish();
    validated([&] { beam.validate(); return 0; });
    return beam;
}

LatticeSpec read_lattice(Block b, const PhysicalConstants& constants) {
    LatticeSpec spec;
    spec.nx = b.need<int>("nx");
    spec.ny = b.need<int>("ny");
    spec.spacing = b.get("spacing", 1.0);
    spec.origin = b.vec("origin", Vec2{-0.5 * (spec.nx - 1) * spec.spacing, -0.5 * (spec.ny - 1) * spec.spacing});
    spec.dt = b.need<double>("dt");
    const std::string order = b.get<std::string>("stencil", "fourth");
    if (order == "fourth") spec.stencil = StencilOrder::Fourth;
    else if (order == "second") spec.stencil = StencilOrder::Second;
    else throw ConfigError(b.where("stencil") + " must be \"second\" or \"fourth\"");
    spec.constants = constants;
    b.finish();
    validated([&] { spec.validate(); return 0; });
    return spec;
}

Loop read_loop(const Json& j, const std::string& where) {
    if (j.contains("polygon")) {
        std::vector<Vec2> v;
        for (const Json& p : j.at("polygon")) v.push_back(io::vec2_from_json(p, where + ".polygon[]"));
        if (v.size() < 3) throw ConfigError(where + ".polygon needs at least 3 vertices");
        return Loop::polygon(v);
    }
    if (j.contains("circle")) {
        const Json& c = j.at("circle");
        if (!c.contains("radius") || !c.at("radius").is_number()) throw ConfigError(where + ".circle.radius is required");
        return Loop::circle(io::vec2_from_json(c.at("center"), where + ".circle.center"), c.at("radius").get<double>(),
                            c.value("counterclockwise", true));
    }
    throw ConfigError(where + " must be {polygon: [...]} or {circle: {center, radius}}");
}

std::string join(const std::vector<int>& v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
    return s;
}

std::ofstream open_csv(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    out << std::setprecision(17);
    return out;
}

// --- modes -----------------------------------------------------------------

Json mode_trace(Run& run, Block& top, io::Manifest& m) {
    const Scene scene = read_scene(run, top);
    Block block = top.child("trace");
    const Json& rays = block.raw("rays");
    if (!rays.is_array() || rays.empty()) throw ConfigError("trace.rays must be a nonempty array");
    struct RaySpec {
        Vec2 anchor, direction;
        int reflections;
    };
    std::vector<RaySpec> specs;
    Json echo_rays = Json::array();
    for (std::size_t k = 0; k < rays.size(); ++k) {
        Json e;
        Block r(rays[k], e, "trace.rays[" + std::to_string(k) + "]");
        RaySpec s{r.vec("anchor"), r.vec("direction"), r.get("max_reflections", 16)};
        r.finish();
        if (!(norm(s.direction) > 0.0)) throw ConfigError(r.where("direction") + " must be nonzero");
        s.direction = normalized(s.direction);
        specs.push_back(s);
        echo_rays.push_back(e);
    }
    run.echo["trace"]["rays"] = echo_rays;
    block.finish();

    const fs::path csv = run.out / "trace.csv";
    auto out = open_csv(csv);
    out << "ray,leg,x0,y0,x1,y1,end_obstacle,escaped\n";
    Json summary = Json::array();
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const BrokenRay br = trace_broken_ray(specs[k].anchor, specs[k].direction, scene, specs[k].reflections);
        for (std::size_t l = 0; l < br.legs.size(); ++l) {
            const Leg& leg = br.legs[l];
            const Vec2 e = leg.end();
            out << k << ',' << l << ',' << leg.start.x << ',' << leg.start.y << ',' << e.x << ',' << e.y << ',';
            if (l < br.reflecting_obstacles.size()) out << br.reflecting_obstacles[l];
            else out << -1;
            out << ',' << (br.escaped ? 1 : 0) << '\n';
        }
        summary.push_back({{"legs", br.legs.size()}, {"reflections", br.reflection_points.size()},
                           {"length", br.total_length}, {"escaped", br.escaped}});
    }
    out.close();
    m.add_output(csv);
    return {{"rays", summary}};
}

Json mode_flux(Run& run, Block& top, io::Manifest& m) {
    const Scene scene = read_scene(run, top);
    const PhysicalConstants c = read_constants(top);
    Block block = top.child("flux");
    const Json& loops = block.raw("loops");
    if (!loops.is_array() || loops.empty()) throw ConfigError("flux.loops must be a nonempty array");
    std::vector<Loop> parsed;
    for (std::size_t k = 0; k < loops.size(); ++k) parsed.push_back(read_loop(loops[k], "flux.loops[" + std::to_string(k) + "]"));
    block.finish();

    const VectorPotential a = ab_potential(scene, c);
    const fs::path csv = run.out / "flux.csv";
    auto out = open_csv(csv);
    out << "loop,flux,winding\n";
    Json values = Json::array();
    for (std::size_t k = 0; k < parsed.size(); ++k) {
        const double f = loop_flux(a, parsed[k], run.tolerance);
        const auto w = winding_numbers(parsed[k], scene);
        out << k << ',' << f << ',' << join(w, ';') << '\n';
        values.push_back({{"flux", f}, {"winding", w}});
    }
    out.close();
    m.add_output(csv);
    return {{"loops", values}};
}

Json mode_go_predict(Run& run, Block& top, io::Manifest& m) {
    const Scene scene = read_scene(run, top);
    const PhysicalConstants c = read_constants(top);
    Block block = top.child("go-predict");
    const BeamSpec b1 = read_beam(block.child("beam1"));
    const BeamSpec b2 = read_beam(block.child("beam2"));
    block.finish();
    const GOPrediction p = predict_two_beam(scene, ab_potential(scene, c), b1, b2, run.tolerance);
    const Json rec = io::to_json(p);
    const fs::path path = run.out / "prediction.json";
    io::write_json(path, rec);
    m.add_output(path);
    return {{"alpha", p.alpha}, {"intensity", p.intensity}, {"winding", p.winding}};
}

std::vector<Probe> read_probes(Block& block, const LatticeSpec& spec) {
    std::vector<Probe> probes;
    const Json& list = block.raw("probes");
    if (!list.is_array()) throw ConfigError("probes must be an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
        Json e;
        Block p(list[k], e, "probes[" + std::to_string(k) + "]");
        Probe probe;
        probe.name = p.need<std::string>("name");
        if (probe.name.find_first_of(",\n\"") != std::string::npos) throw ConfigError("probe names may not contain , or quotes");
        const Vec2 center = p.vec("center");
        const double radius = p.get("radius", spec.spacing);
        p.finish();
        for (int j = 0; j < spec.ny; ++j)
            for (int i = 0; i < spec.nx; ++i)
                if (norm(spec.site(i, j) - center) <= radius) probe.sites.push_back(static_cast<std::size_t>(spec.index(i, j)));
        if (probe.sites.empty()) throw ConfigError("probe " + probe.name + " covers no lattice site");
        probes.push_back(std::move(probe));
    }
    return probes;
}

io::FieldDump dump_of(const std::string& kind, const LatticeSpec& spec, const Field& f) {
    return kind == "complex" ? io::complex_dump(spec, f) : io::density_dump(spec, f);
}

Json mode_tdse_run(Run& run, Block& top, io::Manifest& m) {
    const Scene scene = read_scene(run, top);
    const PhysicalConstants c = read_constants(top);
    Block block = top.child("tdse-run");
    const LatticeSpec spec = read_lattice(block.child("lattice"), c);
    const BeamSpec packet = read_beam(block.child("packet"));
    const int steps = block.need<int>("steps");
    if (steps < 0) throw ConfigError("tdse-run.steps must be nonnegative");
    std::vector<Probe> probes;
    if (block.has("probes")) probes = read_probes(block, spec);
    const std::string kind = block.get<std::string>("dump", "density");
    if (kind != "density" && kind != "complex") throw ConfigError("tdse-run.dump must be \"density\" or \"complex\"");
    block.finish();

    const VectorPotential a = ab_potential(scene, c);
    const Lattice lattice = validated([&] { return build_lattice(scene, a, spec); });
    const PacketInit init = validated([&] { return init_packet(lattice, packet); });
    const Evolution ev = evolve(lattice, init.field, steps, probes);

    for (const auto& p : io::write_field(run.out / "final", dump_of(kind, spec, ev.field))) m.add_output(p);
    const fs::path csv = run.out / "probes.csv";
    io::write_probes(csv, ev.records);
    m.add_output(csv);
    const double norm1 = total_probability(ev.field);
    return {{"initial_norm", total_probability(init.field)}, {"final_norm", norm1},
            {"clipped_fraction", init.clipped_fraction}, {"final_time", ev.field.time}};
}

Json mode_two_beam(Run& run, Block& top, io::Manifest& m) {
    const Scene scene = read_scene(run, top);
    const PhysicalConstants c = read_constants(top);
    Block block = top.child("two-beam");
    const LatticeSpec spec = read_lattice(block.child("lattice"), c);
    const BeamSpec b1 = read_beam(block.child("beam1"));
    const BeamSpec b2 = read_beam(block.child("beam2"));
    const int steps = block.need<int>("steps");
    if (steps < 1) throw ConfigError("two-beam.steps must be positive");
    Block sb = block.child("screen");
    ScreenSpec screen;
    screen.center = sb.vec("center");
    screen.direction = sb.vec("direction", Vec2{1.0, 0.0});
    if (!(norm(screen.direction) > 0.0)) throw ConfigError("screen.direction must be nonzero");
    screen.direction = normalized(screen.direction);
    screen.half_length = sb.get("half_length", 20.0);
    screen.samples = sb.get("samples", 161);
    screen.fit_half_window = sb.get("fit_half_window", 0.0);
    sb.finish();
    const std::string kind = block.get<std::string>("dump", "density");
    if (kind != "density" && kind != "complex") throw ConfigError("two-beam.dump must be \"density\" or \"complex\"");
    block.finish();

    const VectorPotential a = ab_potential(scene, c);
    const FringeRecord rec = two_beam_experiment(scene, a, b1, b2, spec, steps, screen);

    for (const auto& p : io::write_field(run.out / "final", dump_of(kind, spec, rec.final_field))) m.add_output(p);
    const fs::path csv = run.out / "screen.csv";
    {
        auto out = open_csv(csv);
        out << "s,density\n";
        for (std::size_t k = 0; k < rec.screen_positions.size(); ++k)
            out << rec.screen_positions[k] << ',' << rec.screen_density[k] << '\n';
    }
    m.add_output(csv);
    Json go = nullptr;
    try {
        go = predict_two_beam(scene, a, b1, b2, run.tolerance).alpha;
    } catch (const Error&) {
        // Beams that only overlap as packets have no GO meeting point.
    }
    const Json fringe = {{"fringe_phase", rec.fringe_phase},
                         {"go_alpha", go},
                         {"fit", {{"offset", rec.fit.offset}, {"amplitude", rec.fit.amplitude}, {"kappa", rec.fit.kappa},
                                  {"phase", rec.fit.phase}, {"residual_rms", rec.fit.residual_rms}}},
                         {"overlap", rec.overlap},
                         {"clipped_fraction", rec.clipped_fraction},
                         {"final_norm", total_probability(rec.final_field)}};
    const fs::path fj = run.out / "fringe.json";
    io::write_json(fj, fringe);
    m.add_output(fj);
    return fringe;
}

std::function<double(double)> read_potential_series(const Json& j, const std::string& where) {
    if (j.is_number()) {
        const double v = j.get<double>();
        return [v](double) { return v; };
    }
    if (j.is_array()) {
        std::vector<std::pair<double, double>> table;
        for (const Json& row : j) {
            const Vec2 p = io::vec2_from_json(row, where + "[]");
            table.emplace_back(p.x, p.y);
        }
        const SplitPotential tab = validated([&] { return SplitPotential::tabulated(table, table, 0.0, 0.0); });
        return tab.v1;
    }
    throw ConfigError(where + " must be a number or a [[t, V], ...] table");
}

Json mode_electric_ab(Run& run, Block& top, io::Manifest& m) {
    const PhysicalConstants c = read_constants(top);
    Block block = top.child("electric-ab");
    ElectricReference ref = electric_reference();
    ref.spec.constants = c;
    DomainSchedule& s = ref.schedule;
    s.geometry.slab_half_width = block.get("slab_half_width", s.geometry.slab_half_width);
    s.geometry.tau_max = block.get("tau_max", s.geometry.tau_max);
    s.grow_duration = block.get("grow_duration", s.grow_duration);
    s.hold_duration = block.get("hold_duration", s.hold_duration);
    s.retract_duration = block.get("retract_duration", s.retract_duration);
    s.post_merge_duration = block.get("post_merge_duration", s.post_merge_duration);
    validated([&] { s.validate(); return 0; });

    SplitPotential split;
    if (block.has("delta")) {
        if (block.has("V1") || block.has("V2")) throw ConfigError("give either electric-ab.delta or V1/V2, not both");
        split = ref.potential_for(block.get("delta", 0.0));
        run.echo["electric-ab"]["window"] = {split.window_start, split.window_end};
    } else {
        const SplitPotential def = ref.potential_for(0.0);
        split.v1 = block.has("V1") ? read_potential_series(block.raw("V1"), "electric-ab.V1") : [](double) { return 0.0; };
        split.v2 = block.has("V2") ? read_potential_series(block.raw("V2"), "electric-ab.V2") : [](double) { return 0.0; };
        if (!block.has("V1")) run.echo["electric-ab"]["V1"] = 0.0;
        if (!block.has("V2")) run.echo["electric-ab"]["V2"] = 0.0;
        const Vec2 w = block.vec("window", Vec2{def.window_start, def.window_end});
        split.window_start = w.x;
        split.window_end = w.y;
    }
    const std::string mode_name = block.get<std::string>("mode", "full");
    ElectricMode mode;
    if (mode_name == "full") mode = ElectricMode::FullNumeric;
    else if (mode_name == "analytic") mode = ElectricMode::AnalyticPhase;
    else throw ConfigError("electric-ab.mode must be \"full\" or \"analytic\"");
    const int dump_every = block.get("dump_every", 0);
    if (dump_every < 0) throw ConfigError("electric-ab.dump_every must be nonnegative");
    const bool compare_zero = block.get("compare_zero", true);
    block.finish();

    const DensityHistory h = [&] {
        try {
            return run_electric_ab(s, split, ref.u0, ref.spec, mode);
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
    }();

    const fs::path csv = run.out / "history.csv";
    {
        auto out = open_csv(csv);
        out << "step,time,total_probability,mask_loss,tau\n";
        for (std::size_t k = 0; k < h.times.size(); ++k) {
            double tot = 0.0;
            for (double d : h.densities[k]) tot += d;
            out << k << ',' << h.times[k] << ',' << tot << ',' << h.mask_loss[k] << ',' << s.tau(h.times[k]) << '\n';
        }
    }
    m.add_output(csv);
    Json index = Json::array();
    for (std::size_t k = 0; k < h.times.size(); ++k) {
        const bool last = k + 1 == h.times.size();
        if (!last && (dump_every == 0 || k % static_cast<std::size_t>(dump_every) != 0)) continue;
        std::ostringstream name;
        name << "density_" << std::setw(5) << std::setfill('0') << k;
        io::FieldDump d{ref.spec.nx, ref.spec.ny, ref.spec.spacing, ref.spec.origin, h.times[k], io::FieldKind::Density,
                        h.densities[k]};
        for (const auto& p : io::write_field(run.out / name.str(), d)) m.add_output(p);
        index.push_back({{"step", k}, {"time", h.times[k]}, {"stem", name.str()}});
    }
    const fs::path idx = run.out / "history_index.json";
    io::write_json(idx, index);
    m.add_output(idx);

    Json result = {{"electric_flux", electric_flux(split, c)},
                   {"split_probabilities", {h.split_probabilities.first, h.split_probabilities.second}},
                   {"split_start", h.split_start},
                   {"split_end", h.split_end},
                   {"mask_loss", h.mask_loss.empty() ? 0.0 : h.mask_loss.back()}};
    if (compare_zero) {
        const DensityHistory z = run_electric_ab(s, SplitPotential::zero(), ref.u0, ref.spec, ElectricMode::FullNumeric);
        result["discrepancy_vs_zero"] = density_discrepancy(h, z, s.split_end(), s.total_duration());
    }
    const fs::path rj = run.out / "electric.json";
    io::write_json(rj, result);
    m.add_output(rj);
    return result;
}

Json mode_recover(Run& run, Block& top, io::Manifest& m) {
    Block block = top.child("recover");
    const double residual_tol = block.get("residual_tolerance", 1e-8);
    if (block.has("system")) {
        const FluxSystem sys = io::flux_system_from_json(block.raw("system"));
        block.finish();
        const FluxEstimate e = solve_measurements(sys, residual_tol);
        const fs::path ej = run.out / "estimate.json";
        io::write_json(ej, io::to_json(e));
        m.add_output(ej);
        return io::to_json(e);
    }
    const Scene scene = read_scene(run, top);
    const std::string oracle_name = block.get<std::string>("oracle", "go-phase");
    DesignOptions opt;
    opt.clearance_fraction = block.get("clearance_fraction", opt.clearance_fraction);
    opt.broken_candidates = block.get("broken_candidates", opt.broken_candidates);
    opt.seed = run.seed;
    if (oracle_name != "go-phase" && oracle_name != "go-intensity")
        throw ConfigError("recover.oracle must be \"go-phase\" or \"go-intensity\"");
    block.finish();

    const MeasurementDesign design = design_measurements(scene, opt);
    const MeasurementOracle oracle =
        oracle_name == "go-phase" ? go_phase_oracle(scene, run.tolerance) : go_intensity_oracle(scene, run.tolerance);
    FluxSystem sys;
    sys.winding = design.winding;
    Json circuits = Json::array();
    for (const Circuit& cir : design.circuits) {
        sys.betas.push_back(oracle(cir));
        circuits.push_back(io::to_json(cir));
    }
    const fs::path cj = run.out / "circuits.json";
    io::write_json(cj, circuits);
    m.add_output(cj);
    const fs::path sj = run.out / "flux_system.json";
    io::write_json(sj, io::to_json(sys));
    m.add_output(sj);
    const FluxEstimate e = solve_measurements(sys, residual_tol);
    const fs::path ej = run.out / "estimate.json";
    io::write_json(ej, io::to_json(e));
    m.add_output(ej);
    return io::to_json(e);
}

// --- compare ---------------------------------------------------------------

Json compare_runs(const fs::path& a, const fs::path& b, const fs::path& out_dir, io::Manifest& m) {
    const Json ma = io::read_json(a / "manifest.json");
    const Json mb = io::read_json(b / "manifest.json");
    if (ma.at("mode") != mb.at("mode"))
        throw ConfigError("runs have different modes: " + ma.at("mode").get<std::string>() + " vs " +
                          mb.at("mode").get<std::string>());
    std::set<std::string> files_b;
    for (const Json& o : mb.at("outputs")) files_b.insert(o.at("file").get<std::string>());

    const fs::path csv = out_dir / "compare.csv";
    auto out = open_csv(csv);
    out << "quantity,max_abs_diff,l2_diff\n";
    Json report = Json::object();
    for (const Json& o : ma.at("outputs")) {
        const std::string file = o.at("file").get<std::string>();
        if (file.size() < 5 || file.substr(file.size() - 5) != ".json" || !files_b.count(file)) continue;
        const Json side = io::read_json(a / file);
        if (!side.is_object() || !side.contains("kind")) continue;
        const std::string stem = file.substr(0, file.size() - 5);
        const io::FieldDump da = io::read_field(a / stem);
        const io::FieldDump db = io::read_field(b / stem);
        if (da.nx != db.nx || da.ny != db.ny || da.kind != db.kind || std::abs(da.spacing - db.spacing) > 0.0)
            throw GridMismatchError(stem + " lives on different grids");
        auto density = [](const io::FieldDump& d, std::size_t i) {
            return d.kind == io::FieldKind::Density ? d.data[i] : d.data[2 * i] * d.data[2 * i] + d.data[2 * i + 1] * d.data[2 * i + 1];
        };
        double max_diff = 0.0, l2 = 0.0;
        const std::size_t n = static_cast<std::size_t>(da.nx) * static_cast<std::size_t>(da.ny);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = density(da, i) - density(db, i);
            max_diff = std::max(max_diff, std::abs(d));
            l2 += d * d;
        }
        l2 = std::sqrt(l2);
        out << stem << "_density," << max_diff << ',' << l2 << '\n';
        report[stem + "_density"] = {{"max_abs_diff", max_diff}, {"l2_diff", l2}};
    }
    if (fs::exists(a / "fringe.json") && fs::exists(b / "fringe.json")) {
        const double pa = io::read_json(a / "fringe.json").at("fringe_phase").get<double>();
        const double pb = io::read_json(b / "fringe.json").at("fringe_phase").get<double>();
        const double d = std::remainder(pb - pa, 2.0 * std::numbers::pi);
        out << "fringe_phase_delta," << std::abs(d) << ',' << std::abs(d) << '\n';
        report["fringe_phase_delta"] = d;
    }
    out.close();
    m.add_output(csv);
    return report;
}

// --- error records ---------------------------------------------------------

std::string error_type(const std::exception& e) {
#define ABLAB_NAME(T) \
    if (dynamic_cast<const T*>(&e)) return #T;
    ABLAB_NAME(ConfigError)
    ABLAB_NAME(DomainError)
    ABLAB_NAME(GrazingRayError)
    ABLAB_NAME(ReflectionBudgetError)
    ABLAB_NAME(GeometryError)
    ABLAB_NAME(ConvergenceError)
    ABLAB_NAME(ResolutionError)
    ABLAB_NAME(SolverError)
    ABLAB_NAME(ExperimentDesignError)
    ABLAB_NAME(ScheduleTooFastError)
    ABLAB_NAME(LabelingError)
    ABLAB_NAME(GridMismatchError)
    ABLAB_NAME(DataError)
    ABLAB_NAME(RankDeficientError)
    ABLAB_NAME(AmbiguityError)
    ABLAB_NAME(ConsistencyError)
    ABLAB_NAME(DesignFailureError)
    ABLAB_NAME(Error)
#undef ABLAB_NAME
    return "InternalError";
}

int report_error(const std::exception& e, int code, const fs::path& out) {
    Json rec = {{"status", "error"}, {"exit_code", code}, {"error_type", error_type(e)}, {"message", e.what()}};
    if (const auto* amb = dynamic_cast<const AmbiguityError*>(&e)) {
        rec["coset_size"] = amb->coset_size();
        rec["solutions"] = amb->solutions();
    }
    if (const auto* con = dynamic_cast<const ConsistencyError*>(&e)) rec["residual"] = con->residual();
    if (const auto* cv = dynamic_cast<const ConvergenceError*>(&e)) rec["best_estimate"] = cv->best_estimate();
    std::cerr << rec.dump() << '\n';
    std::error_code ec;
    if (!out.empty() && fs::is_directory(out, ec)) {
        std::ofstream f(out / "error.json");
        f << std::setw(2) << rec << '\n';
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Aharonov-Bohm laboratory: ray geometry, GO predictions, lattice TDSE, electric AB, flux recovery"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = "ablab-out";
    std::uint64_t seed = 0;
    double tolerance = 1e-8;
    app.add_option("--config", config_path, "experiment config (JSON)");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", seed, "seed for randomized sampling")->capture_default_str();
    app.add_option("--tolerance", tolerance, "quadrature relative tolerance")->capture_default_str();

    const std::vector<std::string> modes = {"trace", "flux", "go-predict", "tdse-run", "two-beam", "electric-ab", "recover"};
    for (const auto& name : modes) app.add_subcommand(name)->fallthrough();
    auto* cmp = app.add_subcommand("compare", "compare two run directories")->fallthrough();
    std::string run_a, run_b;
    cmp->add_option("run_a", run_a)->required();
    cmp->add_option("run_b", run_b)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error(ConfigError(e.what()), 2, {});
    }
    const std::string mode = app.get_subcommands().front()->get_name();
    const fs::path out = out_dir;

    try {
        if (!(tolerance > 0.0)) throw ConfigError("--tolerance must be positive");
        fs::create_directories(out);
        Run run;
        run.out = out;
        run.seed = seed;
        run.tolerance = tolerance;
        run.echo = {{"mode", mode}, {"out", out_dir}, {"seed", seed}, {"tolerance", tolerance}};
        Json result;
        if (mode == "compare") {
            run.echo["run_a"] = run_a;
            run.echo["run_b"] = run_b;
            io::Manifest manifest(mode, run.echo);
            result = compare_runs(run_a, run_b, out, manifest);
            manifest.set_result(result);
            manifest.write(out);
        } else {
            if (config_path.empty()) throw ConfigError("--config is required for " + mode);
            if (!fs::exists(config_path)) throw ConfigError("config file " + config_path + " does not exist");
            run.config = io::read_json(config_path);
            run.config_dir = fs::path(config_path).parent_path();
            run.echo["config_file"] = config_path;
            if (!run.config.is_object()) throw ConfigError("config must be a JSON object");
            if (run.config.contains("mode") && run.config.at("mode") != mode)
                throw ConfigError("config is for mode " + run.config.at("mode").dump());
            const std::set<std::string> allowed = {"mode", "scene", "constants", mode};
            for (auto it = run.config.begin(); it != run.config.end(); ++it)
                if (!allowed.count(it.key())) throw ConfigError("unknown key " + it.key() + " for mode " + mode);
            Block top(run.config, run.echo, "");
            if (top.has("mode")) top.raw("mode");
            io::Manifest manifest(mode, Json::object());
            if (mode == "trace") result = mode_trace(run, top, manifest);
            else if (mode == "flux") result = mode_flux(run, top, manifest);
            else if (mode == "go-predict") result = mode_go_predict(run, top, manifest);
            else if (mode == "tdse-run") result = mode_tdse_run(run, top, manifest);
            else if (mode == "two-beam") result = mode_two_beam(run, top, manifest);
            else if (mode == "electric-ab") result = mode_electric_ab(run, top, manifest);
            else result = mode_recover(run, top, manifest);
            manifest.set_config(run.echo);
            manifest.set_result(result);
            manifest.write(out);
        }
        std::cout << Json{{"status", "ok"}, {"mode", mode}, {"out", out_dir}, {"result", result}}.dump() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        return report_error(e, 2, out);
    } catch (const std::exception& e) {
        return report_error(e, 1, out);
    }
}
