#pragma once

/**
 * @file cli.hpp
 * @brief Batch front end: one JSON configuration document in, reports out.
 *
 *     kkl <config.json> [--output DIR] [--format json,csv]
 *
 * Exit status is 0 when every asserted check passes, 2 when any fails and 1
 * on input or numeric errors. Every default the run relies on is written
 * back into the report under "config".
 */

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kkl/diagnostics.hpp"
#include "kkl/errors.hpp"
#include "kkl/intersection.hpp"
#include "kkl/kernels.hpp"
#include "kkl/measures.hpp"
#include "kkl/sobolev.hpp"

namespace kkl::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFail = 2;

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names{"validate-kernel", "classify",     "equivalences",
                                                "sobolev-verify",  "intersect-sim", "holder"};
    return names;
}

// -- number formatting -------------------------------------------------------

/// JSON value for a double; non-finite values become "Infinity", "-Infinity" or "NaN".
inline json number(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
    return v;
}

inline json numbers(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

/// Reads a number written by number().
inline double read_number(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "Infinity") return kInf;
        if (s == "-Infinity") return -kInf;
        if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    }
    throw InputError("expected a number");
}

/// 17 significant digits, '.' decimal separator regardless of locale.
inline std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    for (char& c : s)
        if (c == ',') c = '.';
    return s;
}

// -- configuration reading ---------------------------------------------------

/// Parse failure with a 1-based line and column.
class ParseError : public InputError {
public:
    ParseError(const std::string& source, std::size_t line, std::size_t column, const std::string& what)
        : InputError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_, column_;
};

inline json parse_document(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // e.byte is the 1-based offset of the offending character.
        const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i < at; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        std::string what = e.what();
        if (const auto pos = what.find("parse error"); pos != std::string::npos) what = what.substr(pos);
        throw ParseError(source, line, column, what);
    }
}

/// Reads fields of one JSON object, records the values actually used
/// (including defaults) and rejects fields nobody asked for.
class Fields {
public:
    Fields(const json& src, std::string path) : src_(src), path_(std::move(path)) {
        if (!src_.is_null() && !src_.is_object()) fail("", "must be an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw InputError((key.empty() ? path_ : field(key)) + ": " + msg);
    }
    bool has(const std::string& key) const { return src_.is_object() && src_.contains(key); }

    double number(const std::string& key, std::optional<double> def = {}) {
        used_.push_back(key);
        if (!has(key)) {
            if (!def) fail(key, "is required");
            resolved_[key] = cli::number(*def);
            return *def;
        }
        try {
            const double v = read_number(src_.at(key));
            resolved_[key] = cli::number(v);
            return v;
        } catch (const InputError&) {
            fail(key, "must be a number");
        }
    }

    long integer(const std::string& key, std::optional<long> def = {}) {
        const double v = number(key, def ? std::optional<double>(static_cast<double>(*def)) : std::nullopt);
        if (v != std::floor(v) || std::fabs(v) > 9.0e15) fail(key, "must be an integer");
        resolved_[key] = static_cast<long>(v);
        return static_cast<long>(v);
    }

    std::uint64_t seed(const std::string& key, std::uint64_t def) {
        used_.push_back(key);
        if (!has(key)) {
            resolved_[key] = def;
            return def;
        }
        const json& j = src_.at(key);
        if (!j.is_number_unsigned()) fail(key, "must be a nonnegative integer");
        resolved_[key] = j.get<std::uint64_t>();
        return j.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool def) {
        used_.push_back(key);
        if (!has(key)) {
            resolved_[key] = def;
            return def;
        }
        if (!src_.at(key).is_boolean()) fail(key, "must be true or false");
        resolved_[key] = src_.at(key).get<bool>();
        return src_.at(key).get<bool>();
    }

    std::string string(const std::string& key, std::optional<std::string> def = {}) {
        used_.push_back(key);
        if (!has(key)) {
            if (!def) fail(key, "is required");
            resolved_[key] = *def;
            return *def;
        }
        if (!src_.at(key).is_string()) fail(key, "must be a string");
        resolved_[key] = src_.at(key);
        return src_.at(key).get<std::string>();
    }

    std::vector<double> list(const std::string& key, std::optional<std::vector<double>> def = {}) {
        used_.push_back(key);
        if (!has(key)) {
            if (!def) fail(key, "is required");
            resolved_[key] = numbers(*def);
            return *def;
        }
        const json& j = src_.at(key);
        if (!j.is_array()) fail(key, "must be a list of numbers");
        std::vector<double> v;
        for (const auto& x : j) {
            try {
                v.push_back(read_number(x));
            } catch (const InputError&) {
                fail(key, "must be a list of numbers");
            }
        }
        resolved_[key] = numbers(v);
        return v;
    }

    std::vector<Point> points(const std::string& key, std::optional<std::vector<Point>> def = {}) {
        used_.push_back(key);
        std::vector<Point> out;
        if (!has(key)) {
            if (!def) fail(key, "is required");
            out = *def;
        } else {
            const json& j = src_.at(key);
            if (!j.is_array()) fail(key, "must be a list of points");
            for (const auto& p : j) {
                if (!p.is_array()) fail(key, "must be a list of points");
                Point x;
                for (const auto& c : p) {
                    if (!c.is_number()) fail(key, "point coordinates must be numbers");
                    x.push_back(c.get<double>());
                }
                out.push_back(x);
            }
        }
        json a = json::array();
        for (const auto& p : out) a.push_back(numbers(p));
        resolved_[key] = a;
        return out;
    }

    /// Nested object (null when absent); the caller stores its resolution.
    const json& object(const std::string& key) {
        used_.push_back(key);
        static const json null;
        if (!has(key)) return null;
        if (!src_.at(key).is_object()) fail(key, "must be an object");
        return src_.at(key);
    }
    const json& raw(const std::string& key) {
        used_.push_back(key);
        static const json null;
        return has(key) ? src_.at(key) : null;
    }
    void set_resolved(const std::string& key, json value) { resolved_[key] = std::move(value); }

    /// Resolved values; throws on any field that was never read.
    json finish() const {
        if (src_.is_object())
            for (const auto& [k, v] : src_.items())
                if (std::find(used_.begin(), used_.end(), k) == used_.end()) fail(k, "unknown field");
        return resolved_;
    }

    void ensure(const std::string& key, bool ok, const std::string& msg) const {
        if (!ok) fail(key, msg);
    }

private:
    const json& src_;
    std::string path_;
    std::vector<std::string> used_;
    json resolved_ = json::object();
};

struct RunConfig {
    std::string command;
    json kernel;
    json measure;
    json parameters;
    std::string output = "kkl-out";
    std::vector<std::string> formats{"json", "csv"};
    /// Directory of the configuration file; relative paths resolve against it.
    std::filesystem::path base_dir;
};

inline std::vector<std::string> split_formats(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

inline void check_formats(const std::vector<std::string>& formats) {
    require(!formats.empty(), "formats: at least one of json, csv is needed");
    for (const auto& f : formats) require(f == "json" || f == "csv", "formats: unknown format '" + f + "'");
}

inline RunConfig read_config(const json& doc, const std::filesystem::path& base_dir = {}) {
    Fields top(doc, "");
    RunConfig rc;
    rc.base_dir = base_dir;
    rc.command = top.string("command");
    if (std::find(commands().begin(), commands().end(), rc.command) == commands().end())
        top.fail("command", "must be one of validate-kernel, classify, equivalences, sobolev-verify, "
                            "intersect-sim, holder");
    rc.kernel = top.raw("kernel");
    rc.measure = top.raw("measure");
    rc.parameters = top.raw("parameters");
    if (rc.parameters.is_null()) rc.parameters = json::object();
    rc.output = top.string("output", rc.output);
    if (top.has("formats")) {
        const json& f = top.raw("formats");
        if (!f.is_array()) top.fail("formats", "must be a list of strings");
        rc.formats.clear();
        for (const auto& x : f) {
            if (!x.is_string()) top.fail("formats", "must be a list of strings");
            rc.formats.push_back(x.get<std::string>());
        }
    } else {
        top.raw("formats");
    }
    check_formats(rc.formats);
    top.finish();
    return rc;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open configuration file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return read_config(parse_document(ss.str(), path.string()), path.parent_path());
}

// -- model builders ----------------------------------------------------------

inline HeatKernelModel build_kernel(const json& src, json& resolved) {
    if (src.is_null()) throw InputError("kernel: is required");
    Fields k(src, "kernel");
    const std::string kind = k.string("kind");
    std::optional<HeatKernelModel> model;
    try {
        if (kind == "gaussian") {
            const long d = k.integer("d", 1);
            k.ensure("d", d >= 1 && d <= 8, "d must be between 1 and 8");
            model = HeatKernelModel::gaussian(static_cast<int>(d));
        } else if (kind == "killed_half_line") {
            model = HeatKernelModel::killed_half_line();
        } else if (kind == "sub_gaussian") {
            const double c3 = k.number("c3", 1.0), c4 = k.number("c4", 1.0);
            const double df = k.number("d_f"), dw = k.number("d_w");
            model = HeatKernelModel::sub_gaussian(c3, c4, df, dw);
        } else if (kind == "jump") {
            const double c3 = k.number("c3", 1.0);
            const double df = k.number("d_f"), dw = k.number("d_w");
            model = HeatKernelModel::jump(c3, df, dw);
        } else {
            k.fail("kind", "must be one of gaussian, killed_half_line, sub_gaussian, jump");
        }
    } catch (const InputError& e) {
        const std::string what = e.what();
        if (what.rfind("kernel", 0) == 0) throw;
        throw InputError("kernel: " + what);
    }
    resolved = k.finish();
    return *model;
}

inline Lattice read_lattice(Fields& f, const std::string& key) {
    Fields g(f.object(key), f.field(key));
    Lattice l;
    l.lower = g.list("lower");
    l.upper = g.list("upper");
    for (double s : g.list("shape")) {
        g.ensure("shape", s >= 1 && s == std::floor(s), "shape entries must be positive integers");
        l.shape.push_back(static_cast<int>(s));
    }
    g.ensure("lower", l.lower.size() == l.shape.size() && l.upper.size() == l.shape.size(),
             "lower, upper and shape must have the same length");
    for (std::size_t k = 0; k < l.shape.size(); ++k)
        g.ensure("upper", l.upper[k] > l.lower[k], "upper must exceed lower on every axis");
    f.set_resolved(key, g.finish());
    return l;
}

inline MeasureModel build_measure(const json& src, const HeatKernelModel& model,
                                  const std::filesystem::path& base, json& resolved) {
    Fields m(src, "measure");
    const int dim = model.is_exact() ? model.dimension() : 1;
    const std::string kind = m.string("kind", src.is_null() && model.is_envelope() ? "volume_growth" : "lebesgue");
    std::optional<MeasureModel> mu;
    try {
        if (kind == "lebesgue") {
            mu = MeasureModel::lebesgue(static_cast<int>(m.integer("d", dim)));
        } else if (kind == "power_law") {
            const double beta = m.number("beta"), radius = m.number("radius", 1.0);
            mu = MeasureModel::power_law(beta, radius, static_cast<int>(m.integer("d", dim)));
        } else if (kind == "atomic") {
            const json& atoms = m.raw("atoms");
            if (!atoms.is_array() || atoms.empty()) m.fail("atoms", "must be a non-empty list");
            std::vector<Atom> list;
            json res = json::array();
            for (std::size_t i = 0; i < atoms.size(); ++i) {
                Fields a(atoms[i], m.field("atoms") + "[" + std::to_string(i) + "]");
                Atom at;
                at.x = a.list("x");
                at.weight = a.number("weight", 1.0);
                res.push_back(a.finish());
                list.push_back(at);
            }
            m.set_resolved("atoms", res);
            mu = MeasureModel::atomic(list);
        } else if (kind == "grid") {
            if (m.has("csv")) {
                std::filesystem::path p = m.string("csv");
                if (p.is_relative()) p = base / p;
                if (!std::filesystem::exists(p)) m.fail("csv", "file does not exist: " + p.string());
                mu = load_grid_density_csv(p.string());
            } else {
                const Lattice l = read_lattice(m, "lattice");
                mu = MeasureModel::grid(l, m.list("values"));
            }
        } else if (kind == "volume_growth") {
            mu = MeasureModel::volume_growth(m.number("d_f", model.is_envelope() ? model.dimension() : 1.0),
                                             m.number("c", 1.0));
        } else {
            m.fail("kind", "must be one of lebesgue, power_law, atomic, grid, volume_growth");
        }
    } catch (const InputError& e) {
        const std::string what = e.what();
        if (what.rfind("measure", 0) == 0) throw;
        throw InputError("measure: " + what);
    }
    resolved = m.finish();
    return *mu;
}

inline QuadratureConfig read_quadrature(Fields& params) {
    Fields f(params.object("quadrature"), params.field("quadrature"));
    QuadratureConfig q;
    q.rel_tol = f.number("rel_tol", q.rel_tol);
    q.abs_tol = f.number("abs_tol", q.abs_tol);
    q.max_subdivisions = static_cast<int>(f.integer("max_subdivisions", q.max_subdivisions));
    q.t_split = f.number("t_split", q.t_split);
    params.set_resolved("quadrature", f.finish());
    try {
        q.validate();
    } catch (const InputError& e) {
        throw InputError(params.field("quadrature") + ": " + e.what());
    }
    return q;
}

inline Point default_probe(const HeatKernelModel& model) {
    if (std::holds_alternative<KilledHalfLine>(model.kind())) return {1.0};
    return Point(static_cast<std::size_t>(model.is_exact() ? model.dimension() : 1), 0.0);
}

inline ProbeSet read_probes(Fields& params, const HeatKernelModel& model, const MeasureModel& mu) {
    Fields f(params.object("probes"), params.field("probes"));
    ProbeSet p;
    p.points = f.points("points", std::vector<Point>{default_probe(model)});
    p.refine = f.boolean("refine", false);
    p.translation_invariant = f.boolean("translation_invariant", detail::homogeneous(model, mu));
    p.refine_radius = f.number("refine_radius", p.refine_radius);
    f.ensure("refine_radius", p.refine_radius > 0, "refine_radius must be positive");
    params.set_resolved("probes", f.finish());
    return p;
}

inline double read_p(Fields& params, std::optional<double> def = {}) {
    const double p = params.number("p", def);
    params.ensure("p", std::isfinite(p) && p >= 1.0, "p must be ≥ 1");
    return p;
}

inline std::vector<double> read_grid(Fields& params, const std::string& key, std::vector<double> def) {
    const auto g = params.list(key, std::move(def));
    params.ensure(key, !g.empty(), key + " must not be empty");
    for (std::size_t i = 0; i < g.size(); ++i) {
        params.ensure(key, std::isfinite(g[i]) && g[i] > 0, key + " entries must be positive");
        if (i > 0) params.ensure(key, g[i] > g[i - 1], key + " must be increasing");
    }
    return g;
}

inline VerdictThresholds read_thresholds(Fields& params) {
    Fields f(params.object("thresholds"), params.field("thresholds"));
    VerdictThresholds th;
    th.decay_factor = f.number("decay_factor", th.decay_factor);
    th.min_slope = f.number("min_slope", th.min_slope);
    th.min_r_squared = f.number("min_r_squared", th.min_r_squared);
    th.max_failure_fraction = f.number("max_failure_fraction", th.max_failure_fraction);
    f.ensure("decay_factor", th.decay_factor > 0 && th.decay_factor < 1, "decay_factor must lie in (0, 1)");
    f.ensure("min_r_squared", th.min_r_squared >= 0 && th.min_r_squared <= 1, "min_r_squared must lie in [0, 1]");
    f.ensure("max_failure_fraction", th.max_failure_fraction >= 0 && th.max_failure_fraction <= 1,
             "max_failure_fraction must lie in [0, 1]");
    params.set_resolved("thresholds", f.finish());
    return th;
}

// -- outcomes ----------------------------------------------------------------

struct Check {
    std::string id;
    bool pass = false;
    std::string detail;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string render() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out;
    }
};

struct Outcome {
    std::string command;
    json config;
    json result = json::object();
    std::vector<Check> checks;
    std::map<std::string, CsvTable> tables;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    void check(std::string id, bool pass, std::string detail = {}) {
        checks.push_back({std::move(id), pass, std::move(detail)});
    }

    json report() const {
        json r;
        r["schema_version"] = kSchemaVersion;
        r["command"] = command;
        r["config"] = config;
        r["result"] = result;
        json cs = json::array();
        for (const auto& c : checks) cs.push_back({{"id", c.id}, {"pass", c.pass}, {"detail", c.detail}});
        r["checks"] = cs;
        r["status"] = passed() ? "pass" : "fail";
        return r;
    }
};

inline json curve_json(const Curve& c) {
    json a = json::array();
    for (const auto& p : c) {
        json e{{"x", number(p.x)}, {"value", number(p.value)}, {"argmax", numbers(p.argmax)}};
        if (!p.ok()) e["error"] = p.error;
        a.push_back(e);
    }
    return a;
}

inline CsvTable curve_table(const Curve& c, const std::string& x, const std::string& y) {
    CsvTable t{{x, y}, {}};
    for (const auto& p : c) t.rows.push_back({csv_number(p.x), csv_number(p.value)});
    return t;
}

inline json fit_json(const std::optional<DecayFit>& f) {
    if (!f) return nullptr;
    return {{"delta", number(f->delta)},
            {"intercept", number(f->intercept)},
            {"r_squared", number(f->r_squared)},
            {"points", f->points}};
}

inline json thresholds_json(const VerdictThresholds& th) {
    return {{"decay_factor", number(th.decay_factor)},
            {"min_slope", number(th.min_slope)},
            {"min_r_squared", number(th.min_r_squared)},
            {"max_failure_fraction", number(th.max_failure_fraction)}};
}

// -- commands ----------------------------------------------------------------

inline Outcome run_validate_kernel(const RunConfig& rc) {
    Outcome out;
    json kres;
    const auto model = build_kernel(rc.kernel, kres);
    Fields params(rc.parameters, "parameters");
    const QuadratureConfig q = read_quadrature(params);
    const double tol = params.number("tolerance", 1e-8);
    params.ensure("tolerance", tol > 0, "tolerance must be positive");
    params.ensure("tolerance", model.is_exact(), "validation needs an exact kernel, not an envelope");
    const int d = model.dimension();
    const bool half = std::holds_alternative<KilledHalfLine>(model.kind());
    auto at = [&](double v) { return Point(static_cast<std::size_t>(d), v); };
    std::vector<KernelProbe> defaults = half ? std::vector<KernelProbe>{{0.5, 0.25, {0.5}, {1.0}},
                                                                        {1.0, 1.0, {0.2}, {2.0}},
                                                                        {0.1, 2.0, {1.5}, {0.3}}}
                                             : std::vector<KernelProbe>{{0.5, 0.25, at(0.0), at(0.3)},
                                                                        {1.0, 1.0, at(0.0), at(1.0)},
                                                                        {0.1, 2.0, at(0.2), at(-0.5)}};
    std::vector<KernelProbe> probes;
    json pres = json::array();
    const json& src = params.raw("kernel_probes");
    if (src.is_null()) {
        probes = defaults;
        for (const auto& p : probes)
            pres.push_back({{"t", p.t}, {"s", p.s}, {"x", numbers(p.x)}, {"y", numbers(p.y)}});
    } else {
        params.ensure("kernel_probes", src.is_array() && !src.empty(), "kernel_probes must be a non-empty list");
        for (std::size_t i = 0; i < src.size(); ++i) {
            Fields f(src[i], params.field("kernel_probes") + "[" + std::to_string(i) + "]");
            KernelProbe p{f.number("t"), f.number("s"), f.list("x"), f.list("y")};
            f.ensure("t", p.t > 0 && p.s > 0, "t and s must be positive");
            f.ensure("x", p.x.size() == static_cast<std::size_t>(d) && p.y.size() == p.x.size(),
                     "x and y must have d coordinates");
            probes.push_back(p);
            pres.push_back(f.finish());
        }
    }
    params.set_resolved("kernel_probes", pres);
    const auto rep = validate_kernel(model, q, probes);
    out.config = {{"kernel", kres}, {"parameters", params.finish()}};
    json pv = json::array();
    for (const auto& v : rep.probes)
        pv.push_back({{"symmetry", number(v.symmetry)}, {"chapman_kolmogorov", number(v.chapman_kolmogorov)}});
    out.result = {{"model", rep.model},
                  {"probes", pv},
                  {"max_symmetry_violation", number(rep.max_symmetry_violation)},
                  {"max_chapman_kolmogorov_violation", number(rep.max_chapman_kolmogorov_violation)}};
    out.check("symmetry", rep.max_symmetry_violation <= tol, "max " + csv_number(rep.max_symmetry_violation));
    out.check("chapman_kolmogorov", rep.max_chapman_kolmogorov_violation <= tol,
              "max " + csv_number(rep.max_chapman_kolmogorov_violation));
    CsvTable t{{"probe", "symmetry", "chapman_kolmogorov"}, {}};
    for (std::size_t i = 0; i < rep.probes.size(); ++i)
        t.rows.push_back({std::to_string(i), csv_number(rep.probes[i].symmetry),
                          csv_number(rep.probes[i].chapman_kolmogorov)});
    out.tables["validation.csv"] = t;
    return out;
}

inline Outcome run_classify(const RunConfig& rc) {
    Outcome out;
    json kres, mres;
    const auto model = build_kernel(rc.kernel, kres);
    const auto mu = build_measure(rc.measure, model, rc.base_dir, mres);
    Fields params(rc.parameters, "parameters");
    const double p = read_p(params);
    const QuadratureConfig q = read_quadrature(params);
    const ProbeSet probes = read_probes(params, model, mu);
    const auto alphas = read_grid(params, "alpha_grid", log_grid(0.5, 512.0, 11));
    const auto ts = read_grid(params, "t_grid", log_grid(1e-4, 1e-1, 7));
    const VerdictThresholds th = read_thresholds(params);
    std::optional<double> weighted_a;
    if (params.has("weighted_window_a")) {
        weighted_a = params.number("weighted_window_a");
        params.ensure("weighted_window_a", *weighted_a >= 0 && *weighted_a <= 1, "weighted_window_a must lie in [0, 1]");
    } else {
        params.raw("weighted_window_a");
    }
    Fields expect(params.object("expect"), params.field("expect"));
    std::optional<bool> want_dp, want_kp;
    std::optional<double> want_delta;
    double delta_tol = 0.05;
    if (expect.has("verdict_Dp")) want_dp = expect.boolean("verdict_Dp", false);
    if (expect.has("verdict_Kp")) want_kp = expect.boolean("verdict_Kp", false);
    if (expect.has("delta")) {
        want_delta = expect.number("delta");
        delta_tol = expect.number("delta_tolerance", delta_tol);
    }
    params.set_resolved("expect", expect.finish());

    const auto rep = classify(model, mu, p, probes, alphas, ts, q, th);
    out.config = {{"kernel", kres}, {"measure", mres}, {"parameters", params.finish()}};
    json probes_used = json::array();
    for (const auto& x : rep.probes) probes_used.push_back(numbers(x));
    out.result = {{"p", number(rep.p)},
                  {"gamma_curve", curve_json(rep.gamma_curve)},
                  {"eta_curve", curve_json(rep.eta_curve)},
                  {"delta_fit", fit_json(rep.delta_fit)},
                  {"verdict_Dp", rep.verdict_Dp},
                  {"verdict_Kp", rep.verdict_Kp},
                  {"verdict_Kpdelta", rep.verdict_Kpdelta ? number(*rep.verdict_Kpdelta) : json(nullptr)},
                  {"withheld", rep.withheld},
                  {"thresholds", thresholds_json(rep.thresholds)},
                  {"probes", probes_used},
                  {"notes", rep.notes}};
    if (!rep.gamma_curve.empty()) out.tables["gamma_curve.csv"] = curve_table(rep.gamma_curve, "alpha", "gamma");
    out.tables["eta_curve.csv"] = curve_table(rep.eta_curve, "t", "eta");
    if (weighted_a) {
        const auto g = guneysu_diagnostic(model, mu, *weighted_a, ts, probes, q, th);
        out.result["weighted_window"] = {{"a", number(g.a)},
                                         {"curve", curve_json(g.curve)},
                                         {"fit", fit_json(g.fit)},
                                         {"verdict", g.verdict},
                                         {"withheld", g.withheld},
                                         {"notes", g.notes}};
        out.tables["weighted_window_curve.csv"] = curve_table(g.curve, "t", "value");
    }
    if (want_dp) out.check("verdict_Dp", rep.verdict_Dp == *want_dp, rep.verdict_Dp ? "true" : "false");
    if (want_kp) out.check("verdict_Kp", rep.verdict_Kp == *want_kp, rep.verdict_Kp ? "true" : "false");
    if (want_delta) {
        const bool ok = rep.delta_fit && std::fabs(rep.delta_fit->delta - *want_delta) <= delta_tol;
        out.check("delta", ok, rep.delta_fit ? "fitted " + csv_number(rep.delta_fit->delta) : "no fit");
    }
    return out;
}

inline std::vector<EquivalenceSample> default_equivalence_samples() {
    std::vector<EquivalenceSample> s;
    for (double a : {0.5, 1.0, 2.0})
        for (double b : {1.0, 4.0})
            for (double t : {0.2, 2.0}) s.push_back({a, a * b, t, std::nullopt});
    return s;
}

inline Outcome run_equivalences(const RunConfig& rc) {
    Outcome out;
    json kres, mres;
    const auto model = build_kernel(rc.kernel, kres);
    const auto mu = build_measure(rc.measure, model, rc.base_dir, mres);
    Fields params(rc.parameters, "parameters");
    const double p = read_p(params);
    const QuadratureConfig q = read_quadrature(params);
    const ProbeSet probes = read_probes(params, model, mu);
    const double tol = params.number("tolerance", 1e-9);
    params.ensure("tolerance", tol >= 0, "tolerance must be nonnegative");
    std::vector<EquivalenceSample> samples;
    const json& src = params.raw("samples");
    if (src.is_null()) {
        samples = default_equivalence_samples();
    } else {
        params.ensure("samples", src.is_array() && !src.empty(), "samples must be a non-empty list");
        for (std::size_t i = 0; i < src.size(); ++i) {
            Fields f(src[i], params.field("samples") + "[" + std::to_string(i) + "]");
            EquivalenceSample s;
            s.alpha = f.number("alpha");
            s.beta = f.number("beta");
            s.t = f.number("t");
            if (f.has("shift")) s.shift = f.number("shift");
            else f.raw("shift");
            f.ensure("beta", s.alpha > 0 && s.beta >= s.alpha, "need 0 < alpha ≤ beta");
            f.ensure("t", s.t > 0, "t must be positive");
            f.finish();
            samples.push_back(s);
        }
    }
    json sres = json::array();
    for (const auto& s : samples)
        sres.push_back({{"alpha", number(s.alpha)}, {"beta", number(s.beta)}, {"t", number(s.t)},
                        {"shift", number(s.shift.value_or(s.t))}});
    params.set_resolved("samples", sres);

    const auto rep = equivalence_suite(model, mu, p, samples, probes, q, tol);
    out.config = {{"kernel", kres}, {"measure", mres}, {"parameters", params.finish()}};
    json results = json::array();
    CsvTable t{{"sample", "alpha", "beta", "t", "shift", "check", "lhs", "rhs", "margin", "holds", "vacuous"}, {}};
    static const char* tags[] = {"a", "b", "c", "d"};
    for (std::size_t i = 0; i < rep.results.size(); ++i) {
        const auto& r = rep.results[i];
        json checks = json::array();
        for (std::size_t k = 0; k < r.checks.size(); ++k) {
            const auto& c = r.checks[k];
            checks.push_back({{"name", c.name}, {"lhs", number(c.lhs)}, {"rhs", number(c.rhs)},
                              {"margin", number(c.margin)}, {"holds", c.holds}, {"vacuous", c.vacuous}});
            out.check("sample" + std::to_string(i) + "." + tags[k % 4], c.holds,
                      c.vacuous ? "vacuous" : "margin " + csv_number(c.margin));
            t.rows.push_back({std::to_string(i), csv_number(r.sample.alpha), csv_number(r.sample.beta),
                              csv_number(r.sample.t), csv_number(r.sample.shift.value_or(r.sample.t)), tags[k % 4],
                              csv_number(c.lhs), csv_number(c.rhs), csv_number(c.margin), c.holds ? "1" : "0",
                              c.vacuous ? "1" : "0"});
        }
        results.push_back({{"alpha", number(r.sample.alpha)}, {"beta", number(r.sample.beta)},
                           {"t", number(r.sample.t)}, {"shift", number(r.sample.shift.value_or(r.sample.t))},
                           {"checks", checks}, {"notes", r.notes}});
    }
    out.result = {{"p", number(rep.p)}, {"tolerance", number(rep.tolerance)}, {"results", results},
                  {"all_hold", rep.all_hold}};
    out.tables["equivalences.csv"] = t;
    return out;
}

inline std::vector<TestFunction> read_battery(Fields& params, int d) {
    const json& src = params.raw("battery");
    if (src.is_null() || (src.is_string() && src.get<std::string>() == "standard")) {
        params.ensure("battery", d == 1, "the standard battery lives in d = 1");
        params.set_resolved("battery", "standard");
        return standard_battery();
    }
    params.ensure("battery", src.is_array() && !src.empty(), "battery must be \"standard\" or a non-empty list");
    std::vector<TestFunction> out;
    json res = json::array();
    for (std::size_t i = 0; i < src.size(); ++i) {
        Fields f(src[i], params.field("battery") + "[" + std::to_string(i) + "]");
        const std::string kind = f.string("kind");
        const Point center = f.list("center", std::vector<double>(static_cast<std::size_t>(d), 0.0));
        f.ensure("center", center.size() == static_cast<std::size_t>(d), "center must have d coordinates");
        const double amp = f.number("amplitude", 1.0);
        try {
            if (kind == "gaussian") out.push_back(TestFunction::gaussian(f.number("sigma"), center).scaled(amp));
            else if (kind == "cosine") out.push_back(TestFunction::cosine(f.number("radius"), center).scaled(amp));
            else f.fail("kind", "must be gaussian or cosine");
        } catch (const InputError& e) {
            const std::string what = e.what();
            if (what.rfind("parameters", 0) == 0) throw;
            throw InputError(params.field("battery") + "[" + std::to_string(i) + "]: " + what);
        }
        res.push_back(f.finish());
    }
    params.set_resolved("battery", res);
    return out;
}

inline Outcome run_sobolev(const RunConfig& rc) {
    Outcome out;
    json kres, mres;
    const auto model = build_kernel(rc.kernel, kres);
    const auto mu = build_measure(rc.measure, model, rc.base_dir, mres);
    Fields params(rc.parameters, "parameters");
    const double p = read_p(params);
    const QuadratureConfig q = read_quadrature(params);
    const ProbeSet probes = read_probes(params, model, mu);
    const auto alphas = read_grid(params, "alphas", {0.5, 1.0, 2.0, 4.0});
    const double tol = params.number("tolerance", 1e-6);
    params.ensure("tolerance", tol >= 0, "tolerance must be nonnegative");
    params.ensure("p", model.is_exact(), "sobolev-verify needs an exact kernel");
    const auto battery = read_battery(params, model.dimension());

    json emb = json::array();
    CsvTable et{{"function", "alpha", "lhs", "rhs", "ratio"}, {}};
    for (std::size_t i = 0; i < battery.size(); ++i)
        for (double a : alphas) {
            const auto r = verify_embedding(battery[i], mu, p, a, model, probes, q, tol);
            emb.push_back({{"function", r.function}, {"alpha", number(a)}, {"lhs", number(r.lhs)},
                           {"rhs", number(r.rhs)}, {"gamma", number(r.gamma)}, {"energy", number(r.energy)},
                           {"ratio", number(r.ratio)}, {"holds", r.holds}, {"notes", r.notes}});
            et.rows.push_back({std::to_string(i), csv_number(a), csv_number(r.lhs), csv_number(r.rhs),
                               csv_number(r.ratio)});
            out.check("embedding.f" + std::to_string(i) + ".alpha" + csv_number(a), r.holds,
                      r.function + " ratio " + csv_number(r.ratio));
        }
    out.result["embedding"] = emb;
    out.tables["embedding.csv"] = et;

    const json& isrc = params.object("interpolation");
    if (!isrc.is_null()) {
        Fields f(isrc, params.field("interpolation"));
        const double theta = f.number("theta");
        f.ensure("theta", theta > 0 && theta <= 1, "theta must lie in (0, 1]");
        // The constant B may come from a different exponent than the one tested,
        // which is how a wrong exponent is exposed by the scaling sweep.
        const double constant_theta = f.number("constant_theta", theta);
        f.ensure("constant_theta", constant_theta > 0 && constant_theta <= 1, "constant_theta must lie in (0, 1]");
        const auto grid = f.list("alpha_grid", log_grid(1e-3, 1e3, 25));
        const auto sigmas = f.list("sigmas", log_grid(0.1, 10.0, 9));
        const std::string expect = f.string("expect", "holds");
        f.ensure("expect", expect == "holds" || expect == "violated", "expect must be holds or violated");
        params.set_resolved("interpolation", f.finish());
        const auto c = derive_interpolation_constant(model, mu, p, constant_theta, probes, grid, q);
        json rows = json::array();
        CsvTable t{{"sigma", "ratio"}, {}};
        double worst = 0.0;
        for (double s : sigmas) {
            const auto r = verify_interpolation(TestFunction::gaussian(s, Point(static_cast<std::size_t>(model.dimension()), 0.0)),
                                                mu, p, theta, c.B, q, tol);
            worst = std::max(worst, r.ratio);
            rows.push_back({{"sigma", number(s)}, {"lhs", number(r.lhs)}, {"rhs", number(r.rhs)},
                            {"ratio", number(r.ratio)}, {"holds", r.holds}});
            t.rows.push_back({csv_number(s), csv_number(r.ratio)});
        }
        const bool holds = worst <= 1 + tol;
        out.result["interpolation"] = {{"theta", number(theta)}, {"constant_theta", number(constant_theta)}, {"C", number(c.C)}, {"B", number(c.B)},
                                       {"A", number(c.A)}, {"at_grid_edge", c.at_grid_edge},
                                       {"sweep", rows}, {"max_ratio", number(worst)}, {"holds", holds}};
        out.tables["interpolation.csv"] = t;
        out.check("interpolation.theta" + csv_number(theta), holds == (expect == "holds"),
                  "max ratio " + csv_number(worst) + ", expected " + expect);
    }

    const json& ksrc = params.object("k_epsilon");
    if (!ksrc.is_null()) {
        Fields f(ksrc, params.field("k_epsilon"));
        const auto eps = f.list("epsilons", log_grid(1e-3, 1e-1, 9));
        const double amin = f.number("alpha_min", 1e-3), amax = f.number("alpha_max", 1e8);
        std::optional<double> slope_target;
        double slope_tol = 0.05;
        if (f.has("expect_slope")) {
            slope_target = f.number("expect_slope");
            slope_tol = f.number("slope_tolerance", slope_tol);
        }
        params.set_resolved("k_epsilon", f.finish());
        const auto kc = k_epsilon_curve(model, mu, p, eps, probes, amin, amax, q);
        json pts = json::array();
        CsvTable t{{"epsilon", "K"}, {}};
        std::vector<std::pair<double, double>> fit_pts;
        for (const auto& k : kc.points) {
            pts.push_back({{"epsilon", number(k.epsilon)}, {"alpha", number(k.alpha)}, {"K", number(k.K)},
                           {"reachable", k.reachable}});
            t.rows.push_back({csv_number(k.epsilon), csv_number(k.K)});
            if (k.reachable) fit_pts.emplace_back(k.epsilon, k.K);
        }
        json kj{{"points", pts}, {"monotone", kc.monotone}};
        std::optional<double> slope;
        if (fit_pts.size() >= 5) {
            const auto fit = fit_decay_order(fit_pts, fit_pts.front().first, fit_pts.back().first);
            slope = fit.delta;
            kj["slope"] = number(fit.delta);
            kj["r_squared"] = number(fit.r_squared);
        }
        out.result["k_epsilon"] = kj;
        out.tables["k_epsilon.csv"] = t;
        if (slope_target)
            out.check("k_epsilon.slope", slope && std::fabs(*slope - *slope_target) <= slope_tol,
                      slope ? "fitted " + csv_number(*slope) : "too few reachable points");
    }
    out.config = {{"kernel", kres}, {"measure", mres}, {"parameters", params.finish()}};
    return out;
}

inline SimConfig read_simulation(Fields& params) {
    Fields f(params.object("simulation"), params.field("simulation"));
    SimConfig c;
    c.d = static_cast<int>(f.integer("d", 1));
    c.p = static_cast<int>(f.integer("p", 2));
    f.ensure("d", c.d == 1 || c.d == 2, "d must be 1 or 2");
    f.ensure("p", c.p >= 2, "p must be an integer ≥ 2");
    c.starts = f.points("starts", std::vector<Point>(static_cast<std::size_t>(c.p),
                                                      Point(static_cast<std::size_t>(c.d), 0.0)));
    c.h = f.number("h", 0.01);
    c.T = f.number("T", 1.0);
    c.epsilon = f.number("epsilon", 0.05);
    f.ensure("epsilon", c.epsilon > 0, "epsilon must be positive");
    f.ensure("T", c.T > 0, "T must be positive");
    f.ensure("starts", c.starts.size() == static_cast<std::size_t>(c.p), "starts must list p points");
    for (const auto& s : c.starts)
        f.ensure("starts", s.size() == static_cast<std::size_t>(c.d), "each start must have d coordinates");
    if (f.has("grid")) {
        c.grid = read_lattice(f, "grid");
    } else {
        // Smallest box with the required margin, cells just fine enough for ε.
        f.raw("grid");
        const double margin = 3.0 * std::sqrt(c.T);
        const double cell = c.epsilon / 2 / std::sqrt(static_cast<double>(c.d));
        c.grid.lower.assign(static_cast<std::size_t>(c.d), kInf);
        c.grid.upper.assign(static_cast<std::size_t>(c.d), -kInf);
        for (const auto& s : c.starts)
            for (std::size_t k = 0; k < s.size(); ++k) {
                c.grid.lower[k] = std::min(c.grid.lower[k], s[k] - margin);
                c.grid.upper[k] = std::max(c.grid.upper[k], s[k] + margin);
            }
        for (int k = 0; k < c.d; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            c.grid.shape.push_back(static_cast<int>(std::ceil((c.grid.upper[ku] - c.grid.lower[ku]) / cell - 1e-9)));
        }
        f.set_resolved("grid", {{"lower", numbers(c.grid.lower)}, {"upper", numbers(c.grid.upper)},
                                {"shape", c.grid.shape}});
    }
    c.seed = f.seed("seed", 1);
    c.replicas = static_cast<int>(f.integer("replicas", 2000));
    params.set_resolved("simulation", f.finish());
    try {
        validate(c);
    } catch (const InputError& e) {
        throw InputError(params.field("simulation") + ": " + e.what());
    }
    return c;
}

inline PairingFunction read_pairing(Fields& params, int d) {
    Fields f(params.object("f"), params.field("f"));
    const std::string kind = f.string("kind", "indicator");
    f.ensure("kind", kind == "indicator", "only indicator functions of boxes are supported");
    const auto lo = f.list("lower", std::vector<double>(static_cast<std::size_t>(d), -2.0));
    const auto hi = f.list("upper", std::vector<double>(static_cast<std::size_t>(d), 2.0));
    const double level = f.number("level", 1.0);
    f.ensure("lower", lo.size() == static_cast<std::size_t>(d) && hi.size() == lo.size(),
             "lower and upper must have d coordinates");
    for (std::size_t k = 0; k < lo.size(); ++k)
        f.ensure("upper", std::isfinite(lo[k]) && std::isfinite(hi[k]) && hi[k] > lo[k],
                 "f must have compact support (finite lower < upper)");
    params.set_resolved("f", f.finish());
    return PairingFunction::indicator({lo, hi}, level);
}

inline Outcome run_intersect_sim(const RunConfig& rc) {
    Outcome out;
    Fields params(rc.parameters, "parameters");
    const SimConfig cfg = read_simulation(params);
    const PairingFunction f = read_pairing(params, cfg.d);
    const QuadratureConfig q = read_quadrature(params);
    const auto t = params.list("t", std::vector<double>(static_cast<std::size_t>(cfg.p), cfg.T));
    const long k = params.integer("k", 1);
    params.ensure("k", k == 1 || k == 2, "k must be 1 or 2");
    params.ensure("k", k == 1 || cfg.d == 1, "k = 2 needs d = 1");
    const auto eps = params.list("epsilons", std::vector<double>{cfg.epsilon});
    params.ensure("epsilons", !eps.empty(), "epsilons must not be empty");
    for (std::size_t i = 1; i < eps.size(); ++i)
        params.ensure("epsilons", eps[i] < eps[i - 1], "epsilons must be decreasing");
    params.ensure("epsilons", eps.back() >= cfg.h, "h must not exceed the smallest epsilon");
    params.ensure("t", t.size() == static_cast<std::size_t>(cfg.p), "t must list p times");
    for (double ti : t) params.ensure("t", ti >= 0 && ti <= cfg.T, "t entries must lie in [0, T]");
    params.ensure("simulation", cfg.replicas >= 2, "replicas must be at least 2");
    SimConfig run = cfg;
    run.epsilon = eps.back();
    try {
        detail::check_grid_resolution(run, eps.back());
    } catch (const InputError& e) {
        throw InputError(params.field("simulation") + ".grid: " + e.what());
    }
    const auto rep = moment_check(run, f, t, static_cast<int>(k), eps, cfg.replicas, q);
    out.config = {{"parameters", params.finish()}};
    json rows = json::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"epsilon", number(r.epsilon)}, {"mean", number(r.mean)},
                        {"standard_error", number(r.standard_error)}, {"bias", number(r.bias)},
                        {"discretized_mean", number(r.discretized_mean)}, {"within_3se", r.within_3se},
                        {"all_nonnegative", r.all_nonnegative}});
    out.result = {{"k", rep.k}, {"oracle", number(rep.oracle)}, {"t", numbers(rep.t_vec)},
                  {"replicas", rep.replicas}, {"rows", rows}, {"bias_monotone", rep.bias_monotone},
                  {"agrees", rep.agrees}};
    CsvTable t_rep{{"replica", "epsilon", "pairing"}, {}};
    for (std::size_t r = 0; r < rep.samples.size(); ++r)
        for (std::size_t e = 0; e < eps.size(); ++e)
            t_rep.rows.push_back({std::to_string(r), csv_number(eps[e]), csv_number(rep.samples[r][e])});
    out.tables["replicas.csv"] = t_rep;
    const auto& last = rep.rows.back();
    out.check("moment.agreement", rep.agrees,
              "mean " + csv_number(last.mean) + " oracle " + csv_number(rep.oracle) + " se " +
                  csv_number(last.standard_error));
    if (eps.size() >= 2) out.check("moment.bias_monotone", rep.bias_monotone);
    if (k == 1) {
        bool nonneg = true;
        for (const auto& r : rep.rows) nonneg = nonneg && r.all_nonnegative;
        out.check("moment.nonnegative", nonneg);
    }
    return out;
}

inline Outcome run_holder(const RunConfig& rc) {
    Outcome out;
    Fields params(rc.parameters, "parameters");
    const SimConfig cfg = read_simulation(params);
    const PairingFunction f = read_pairing(params, cfg.d);
    const QuadratureConfig q = read_quadrature(params);
    std::vector<double> def;
    for (double s : {0.25, 0.26, 0.28, 0.32, 0.40, 0.56, 0.88}) def.push_back(s * cfg.T);
    const auto times = params.list("times", def);
    params.ensure("times", times.size() >= 3, "times needs at least 3 entries");
    for (std::size_t i = 0; i < times.size(); ++i) {
        params.ensure("times", times[i] >= 0 && times[i] <= cfg.T, "times must lie in [0, T]");
        if (i > 0) params.ensure("times", times[i] > times[i - 1], "times must be increasing");
    }
    HolderOptions opt;
    opt.bootstrap_resamples = static_cast<std::size_t>(params.integer("bootstrap_resamples", 400));
    params.ensure("bootstrap_resamples", opt.bootstrap_resamples >= 10, "bootstrap_resamples must be ≥ 10");
    opt.confidence = params.number("confidence", opt.confidence);
    params.ensure("confidence", opt.confidence > 0 && opt.confidence < 1, "confidence must lie in (0, 1)");
    opt.tolerance = params.number("tolerance", opt.tolerance);
    params.ensure("tolerance", opt.tolerance > 0, "tolerance must be positive");
    params.ensure("simulation", cfg.replicas >= 2, "replicas must be at least 2");
    const auto rep = holder_estimate(cfg, f, times, cfg.replicas, opt, q);
    out.config = {{"parameters", params.finish()}};
    json gaps = json::array();
    CsvTable gt{{"gap", "second_moment", "bound"}, {}};
    for (const auto& g : rep.gaps) {
        gaps.push_back({{"t_from", number(g.t_from)}, {"t_to", number(g.t_to)}, {"gap", number(g.gap)},
                        {"second_moment", number(g.second_moment)}, {"bound", number(g.bound)},
                        {"bound_holds", g.bound_holds}});
        gt.rows.push_back({csv_number(g.gap), csv_number(g.second_moment), csv_number(g.bound)});
    }
    out.result = {{"exponent", rep.exponent ? number(*rep.exponent) : json(nullptr)},
                  {"ci", {number(rep.ci_low), number(rep.ci_high)}},
                  {"r_squared", number(rep.r_squared)},
                  {"delta", number(rep.delta)},
                  {"tolerance", number(rep.tolerance)},
                  {"within_tolerance", rep.within_tolerance},
                  {"bound_constant", number(rep.bound_constant)},
                  {"eta_T", number(rep.eta_T)},
                  {"eta_ratio_sup", number(rep.eta_ratio_sup)},
                  {"bound_holds", rep.bound_holds},
                  {"degenerate", rep.degenerate},
                  {"epsilon", number(rep.epsilon)},
                  {"replicas", rep.replicas},
                  {"times", numbers(rep.times)},
                  {"gaps", gaps},
                  {"notes", rep.notes}};
    CsvTable rt{{"replica", "t_index", "pairing"}, {}};
    for (std::size_t r = 0; r < rep.pairings.size(); ++r)
        for (std::size_t j = 0; j < rep.pairings[r].size(); ++j)
            rt.rows.push_back({std::to_string(r), std::to_string(j), csv_number(rep.pairings[r][j])});
    out.tables["replicas.csv"] = rt;
    out.tables["gaps.csv"] = gt;
    out.check("holder.exponent", rep.within_tolerance,
              rep.exponent ? "estimate " + csv_number(*rep.exponent) + " target " + csv_number(rep.delta)
                           : "withheld");
    for (std::size_t j = 0; j < rep.gaps.size(); ++j)
        out.check("holder.bound.gap" + std::to_string(j), rep.gaps[j].bound_holds,
                  "second moment " + csv_number(rep.gaps[j].second_moment) + " bound " +
                      csv_number(rep.gaps[j].bound));
    return out;
}

inline Outcome dispatch(const RunConfig& rc) {
    Outcome out;
    if (rc.command == "validate-kernel") out = run_validate_kernel(rc);
    else if (rc.command == "classify") out = run_classify(rc);
    else if (rc.command == "equivalences") out = run_equivalences(rc);
    else if (rc.command == "sobolev-verify") out = run_sobolev(rc);
    else if (rc.command == "intersect-sim") out = run_intersect_sim(rc);
    else if (rc.command == "holder") out = run_holder(rc);
    else throw InputError("command: unknown command " + rc.command);
    out.command = rc.command;
    out.config["command"] = rc.command;
    out.config["formats"] = rc.formats;
    return out;
}

// -- emission ----------------------------------------------------------------

/// Writes through a temporary file in the same directory, then renames.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) throw InputError("cannot write " + tmp.string());
        o << content;
        o.flush();
        if (!o) throw InputError("cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw InputError("cannot write " + path.string());
    }
}

inline std::vector<std::filesystem::path> emit(const Outcome& out, const std::vector<std::string>& formats,
                                               const std::filesystem::path& dir) {
    check_formats(formats);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw InputError("output: cannot create directory " + dir.string());
    std::vector<std::filesystem::path> written;
    for (const auto& fmt : formats) {
        if (fmt == "json") {
            const auto p = dir / (out.command + ".json");
            write_atomic(p, out.report().dump(2) + "\n");
            written.push_back(p);
        } else {
            for (const auto& [name, table] : out.tables) {
                const auto p = dir / name;
                write_atomic(p, table.render());
                written.push_back(p);
            }
        }
    }
    return written;
}

/// Whole run from parsed arguments; returns the exit status.
inline int run(const std::filesystem::path& config_path, const std::optional<std::string>& output,
               const std::optional<std::string>& formats, std::ostream& out, std::ostream& err) {
    try {
        RunConfig rc = load_config(config_path);
        if (output) rc.output = *output;
        if (formats) {
            rc.formats = split_formats(*formats);
            check_formats(rc.formats);
        }
        const std::filesystem::path dir = rc.output;
        Outcome result = dispatch(rc);
        emit(result, rc.formats, dir);
        for (const auto& c : result.checks)
            out << "CHECK " << c.id << ' ' << (c.pass ? "PASS" : "FAIL") << (c.detail.empty() ? "" : " ")
                << c.detail << '\n';
        out << "STATUS " << (result.passed() ? "PASS" : "FAIL") << '\n';
        return result.passed() ? kExitPass : kExitFail;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << " (partial " << csv_number(e.partial_value()) << ", estimate "
            << csv_number(e.error_estimate()) << ")\n";
        return kExitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace kkl::cli
