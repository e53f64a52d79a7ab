#include "ablab/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Core>
#include <openssl/evp.h>

#include "ablab/errors.hpp"

namespace ablab::io {

namespace {

double number(const Json& j, const char* key, const std::string& what) {
    if (!j.contains(key) || !j.at(key).is_number()) throw ConfigError(what + "." + key + " must be a number");
    return j.at(key).get<double>();
}

const char* kind_name(FieldKind k) { return k == FieldKind::Density ? "density" : "complex-interleaved"; }

}  // namespace

std::string version() { return "0.1.0"; }

Vec2 vec2_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(what + " must be [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

Json to_json(const Vec2& v) { return Json::array({v.x, v.y}); }

Scene scene_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("obstacles") || !j.at("obstacles").is_array())
        throw ConfigError("scene needs an obstacles array");
    if (!j.contains("bound")) throw ConfigError("scene needs a bound");
    std::vector<Disk> disks;
    for (std::size_t k = 0; k < j.at("obstacles").size(); ++k) {
        const Json& o = j.at("obstacles")[k];
        const std::string what = "obstacles[" + std::to_string(k) + "]";
        if (!o.contains("center")) throw ConfigError(what + ".center is missing");
        Disk d;
        d.center = vec2_from_json(o.at("center"), what + ".center");
        d.radius = number(o, "radius", what);
        d.flux = o.contains("flux") ? number(o, "flux", what) : 0.0;
        disks.push_back(d);
    }
    const Json& b = j.at("bound");
    if (!b.contains("min") || !b.contains("max")) throw ConfigError("bound needs min and max");
    const Box box{vec2_from_json(b.at("min"), "bound.min"), vec2_from_json(b.at("max"), "bound.max")};
    try {
        return Scene(std::move(disks), box);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid scene: ") + e.what());
    }
}

Json to_json(const Scene& scene) {
    Json obs = Json::array();
    for (const Disk& d : scene.obstacles())
        obs.push_back({{"center", to_json(d.center)}, {"radius", d.radius}, {"flux", d.flux}});
    return {{"obstacles", obs}, {"bound", {{"min", to_json(scene.bound().min)}, {"max", to_json(scene.bound().max)}}}};
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << std::setw(2) << j << '\n';
}

Scene load_scene(const fs::path& path) { return scene_from_json(read_json(path)); }

std::vector<fs::path> write_field(const fs::path& stem, const FieldDump& dump) {
    const std::size_t expected =
        static_cast<std::size_t>(dump.nx) * static_cast<std::size_t>(dump.ny) * (dump.kind == FieldKind::Density ? 1 : 2);
    if (dump.data.size() != expected) throw GridMismatchError("field dump size does not match its shape");
    fs::path bin = stem;
    bin += ".bin";
    fs::path side = stem;
    side += ".json";
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw Error("cannot write " + bin.string());
    for (double v : dump.data) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    write_json(side, {{"shape", {dump.ny, dump.nx}},
                      {"spacing", dump.spacing},
                      {"origin", to_json(dump.origin)},
                      {"time", dump.time},
                      {"kind", kind_name(dump.kind)},
                      {"layout", "row-major, x fastest"},
                      {"dtype", "<f8"}});
    return {bin, side};
}

FieldDump read_field(const fs::path& stem) {
    fs::path side = stem;
    side += ".json";
    fs::path bin = stem;
    bin += ".bin";
    const Json h = read_json(side);
    FieldDump d;
    d.ny = h.at("shape")[0].get<int>();
    d.nx = h.at("shape")[1].get<int>();
    d.spacing = h.at("spacing").get<double>();
    d.origin = vec2_from_json(h.at("origin"), "origin");
    d.time = h.at("time").get<double>();
    const std::string kind = h.at("kind").get<std::string>();
    if (kind == "density") d.kind = FieldKind::Density;
    else if (kind == "complex-interleaved") d.kind = FieldKind::ComplexInterleaved;
    else throw ConfigError("unknown field kind " + kind);
    const std::size_t n = static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny) *
                          (d.kind == FieldKind::Density ? 1 : 2);
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + bin.string());
    d.data.resize(n);
    for (double& v : d.data) {
        std::uint64_t bits = 0;
        if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw ConfigError(bin.string() + " is truncated");
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        v = std::bit_cast<double>(bits);
    }
    return d;
}

FieldDump density_dump(const LatticeSpec& spec, const Field& field) {
    FieldDump d{spec.nx, spec.ny, spec.spacing, spec.origin, field.time, FieldKind::Density, {}};
    d.data.reserve(field.values.size());
    for (const Complex& z : field.values) d.data.push_back(std::norm(z));
    return d;
}

FieldDump complex_dump(const LatticeSpec& spec, const Field& field) {
    FieldDump d{spec.nx, spec.ny, spec.spacing, spec.origin, field.time, FieldKind::ComplexInterleaved, {}};
    d.data.reserve(2 * field.values.size());
    for (const Complex& z : field.values) {
        d.data.push_back(z.real());
        d.data.push_back(z.imag());
    }
    return d;
}

void write_probes(const fs::path& path, const std::vector<ProbeRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "step,time,probe_name,value\n" << std::setprecision(17);
    for (const auto& r : records) out << r.step << ',' << r.time << ',' << r.probe_name << ',' << r.value << '\n';
}

Json to_json(const GOPrediction& p) {
    Json legs = Json::array();
    for (const Leg& l : p.beam_1_path.legs) legs.push_back({to_json(l.start), to_json(l.end())});
    return {{"I1", p.phase_1},          {"I2", p.phase_2},
            {"I3", p.closing_correction}, {"alpha", p.alpha},
            {"intensity", p.intensity},   {"winding", p.winding},
            {"meeting_point", to_json(p.meeting_point)}, {"beam_1_legs", legs}};
}

Json to_json(const FluxSystem& system) {
    Json betas = Json::array();
    for (const auto& b : system.betas)
        betas.push_back({{b.kind == Measurement::Kind::Phase ? "phase" : "intensity", b.value}});
    return {{"N", system.winding}, {"betas", betas}, {"noise_bound", system.noise_bound}};
}

Json to_json(const FluxEstimate& e) {
    return {{"alphas", e.alphas},
            {"ambiguity", e.ambiguity},
            {"solutions", e.solutions},
            {"max_residual", e.max_residual}};
}

Json to_json(const Circuit& c) {
    Json v = Json::array();
    for (const Vec2& p : c.vertices) v.push_back(to_json(p));
    return {{"vertices", v}, {"winding", c.winding}, {"broken", c.broken},
            {"beam1", {{"anchor", to_json(c.beam1.anchor)}, {"direction", to_json(c.beam1.direction)},
                       {"max_reflections", c.beam1.max_reflections}}},
            {"beam2", {{"anchor", to_json(c.beam2.anchor)}, {"direction", to_json(c.beam2.direction)}}}};
}

FluxSystem flux_system_from_json(const Json& j) {
    if (!j.contains("N") || !j.contains("betas")) throw ConfigError("flux system needs N and betas");
    FluxSystem s;
    const Json& n = j.at("N");
    if (!n.is_array()) throw ConfigError("N must be an integer matrix");
    for (const Json& row : n) {
        if (!row.is_array()) throw ConfigError("N must be an integer matrix");
        for (const Json& v : row)
            if (!v.is_number_integer()) throw ConfigError("N must be an integer matrix");
    }
    try {
        s.winding = n.get<IntMatrix>();
    } catch (const Json::exception&) {
        throw ConfigError("N must be an integer matrix");
    }
    for (const Json& b : j.at("betas")) {
        if (b.is_number()) s.betas.push_back(Measurement::phase(b.get<double>()));
        else if (b.contains("phase")) s.betas.push_back(Measurement::phase(number(b, "phase", "betas")));
        else if (b.contains("intensity")) s.betas.push_back(Measurement::intensity(number(b, "intensity", "betas")));
        else throw ConfigError("each beta is {phase: v} or {intensity: v}");
    }
    s.noise_bound = j.value("noise_bound", 0.0);
    try {
        s.validate();
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

Manifest::Manifest(std::string mode, Json resolved_config)
    : mode_(std::move(mode)), config_(std::move(resolved_config)), start_(std::chrono::steady_clock::now()) {}

void Manifest::add_output(const fs::path& path) { outputs_.push_back(path); }

fs::path Manifest::write(const fs::path& dir) const {
    Json outputs = Json::array();
    for (const auto& p : outputs_)
        outputs.push_back({{"file", p.filename().string()}, {"sha256", sha256_file(p)}});
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const fs::path path = dir / "manifest.json";
    write_json(path, {{"mode", mode_},
                      {"version", version()},
                      {"compiler", __VERSION__},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
                      {"config", config_},
                      {"result", result_},
                      {"outputs", outputs},
                      {"wall_time_s", wall}});
    return path;
}

}  // namespace ablab::io
