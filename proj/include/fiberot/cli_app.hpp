#pragma once

// Command-line front end: JSON measure ingestion, command dispatch, and report
// emission. The document schema is strict (unknown keys are errors) and the
// emitter is deterministic: fixed key order, floats at 17 significant digits,
// so identical run configurations produce byte-identical reports and emitted
// documents parse back to equal objects.
//
// Exit codes: 0 success, 2 validation or schema error, 3 transport table cap
// exceeded, 4 subgradient solver stopped above the requested gap (the gap
// bound is reported on stdout).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fiberot/barycenter.hpp"
#include "fiberot/errors.hpp"
#include "fiberot/geodesic.hpp"
#include "fiberot/measure.hpp"
#include "fiberot/metric.hpp"
#include "fiberot/sliced.hpp"
#include "fiberot/transport.hpp"

namespace fiberot::cli {

using ojson = nlohmann::ordered_json;

// Weight lists in documents must sum to one within this tolerance; the
// constructors then renormalize exactly.
inline constexpr double kWeightSumTol = 1e-9;

// ---------------------------------------------------------------------------
// Serialization. nlohmann's dump() emits shortest-round-trip digits; reports
// pin 17 significant digits instead, so the writer is spelled out here.

inline std::string format_double(double v) {
    if (!std::isfinite(v)) throw ValidationError("cannot serialize a non-finite number");
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

namespace detail {

inline void append_escaped(std::string& out, const std::string& s) {
    out.push_back('"');
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    out.push_back('"');
}

inline void dump_value(const ojson& j, std::string& out) {
    switch (j.type()) {
        case ojson::value_t::object: {
            out.push_back('{');
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out.push_back(',');
                first = false;
                append_escaped(out, it.key());
                out.push_back(':');
                dump_value(it.value(), out);
            }
            out.push_back('}');
            break;
        }
        case ojson::value_t::array: {
            out.push_back('[');
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i > 0) out.push_back(',');
                dump_value(j[i], out);
            }
            out.push_back(']');
            break;
        }
        case ojson::value_t::string:
            append_escaped(out, j.get<std::string>());
            break;
        case ojson::value_t::boolean:
            out += j.get<bool>() ? "true" : "false";
            break;
        case ojson::value_t::number_integer:
            out += std::to_string(j.get<std::int64_t>());
            break;
        case ojson::value_t::number_unsigned:
            out += std::to_string(j.get<std::uint64_t>());
            break;
        case ojson::value_t::number_float:
            out += format_double(j.get<double>());
            break;
        default:
            out += "null";
            break;
    }
}

} // namespace detail

inline std::string dump_document(const ojson& j) {
    std::string out;
    detail::dump_value(j, out);
    out.push_back('\n');
    return out;
}

// Flattened two-column form of a report: one "path,value" row per scalar.
inline std::string to_csv(const ojson& report) {
    std::string out = "field,value\n";
    const auto cell = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string quoted = "\"";
        for (char c : s) {
            if (c == '"') quoted += "\"\"";
            else quoted.push_back(c);
        }
        quoted.push_back('"');
        return quoted;
    };
    const std::function<void(const ojson&, const std::string&)> walk = [&](const ojson& j,
                                                                           const std::string& path) {
        if (j.is_object()) {
            for (auto it = j.begin(); it != j.end(); ++it)
                walk(it.value(), path.empty() ? it.key() : path + "." + it.key());
        } else if (j.is_array()) {
            for (std::size_t i = 0; i < j.size(); ++i) walk(j[i], path + "[" + std::to_string(i) + "]");
        } else {
            out += cell(path);
            out.push_back(',');
            if (j.is_string()) out += cell(j.get<std::string>());
            else if (j.is_boolean()) out += j.get<bool>() ? "true" : "false";
            else if (j.is_number_integer()) out += std::to_string(j.get<std::int64_t>());
            else if (j.is_number_unsigned()) out += std::to_string(j.get<std::uint64_t>());
            else if (j.is_number_float()) out += format_double(j.get<double>());
            out.push_back('\n');
        }
    };
    walk(report, "");
    return out;
}

// ---------------------------------------------------------------------------
// Schema layer. Every helper carries the field path so failures read like
// "input.json: fibers[1].weights: ...".

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& path, const std::string& what) {
    throw SchemaError(path + ": " + what);
}

// Re-labels a library-level failure with the document location.
template <class Fn>
auto with_context(const std::string& path, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const SchemaError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline void check_object(const ojson& j, const std::string& path) {
    if (!j.is_object()) schema_fail(path, "expected an object");
}

inline const ojson& member(const ojson& obj, const char* key, const std::string& path) {
    check_object(obj, path);
    auto it = obj.find(key);
    if (it == obj.end()) schema_fail(path, "missing required key '" + std::string(key) + "'");
    return *it;
}

inline void check_keys(const ojson& obj, std::initializer_list<const char*> allowed,
                       const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known) schema_fail(path, "unexpected key '" + it.key() + "'");
    }
}

inline double number_at(const ojson& j, const std::string& path) {
    if (!j.is_number()) schema_fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) schema_fail(path, "number is not finite");
    return v;
}

inline std::size_t index_at(const ojson& j, const std::string& path) {
    const double v = number_at(j, path);
    if (v != std::floor(v) || v < 0.0) schema_fail(path, "expected a nonnegative integer");
    return static_cast<std::size_t>(v);
}

inline std::string string_at(const ojson& j, const std::string& path) {
    if (!j.is_string()) schema_fail(path, "expected a string");
    return j.get<std::string>();
}

inline std::vector<double> number_list(const ojson& j, const std::string& path) {
    if (!j.is_array()) schema_fail(path, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(number_at(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::vector<std::string> string_list(const ojson& j, const std::string& path) {
    if (!j.is_array()) schema_fail(path, "expected an array of strings");
    std::vector<std::string> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(string_at(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::vector<double> weight_list(const ojson& j, std::size_t count, const std::string& path) {
    auto w = number_list(j, path);
    if (w.size() != count)
        schema_fail(path, "expected " + std::to_string(count) + " weights, got " + std::to_string(w.size()));
    long double total = 0.0L;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] < 0.0) schema_fail(path + "[" + std::to_string(i) + "]", "weights must be nonnegative");
        total += static_cast<long double>(w[i]);
    }
    if (std::abs(static_cast<double>(total) - 1.0) > kWeightSumTol)
        schema_fail(path, "weights sum to " + format_double(static_cast<double>(total)) + ", expected 1");
    return w;
}

} // namespace detail

inline FiberSpace parse_space(const ojson& j, const std::string& path) {
    using namespace detail;
    check_object(j, path);
    const std::string kind = string_at(member(j, "kind", path), path + ".kind");
    if (kind == "real1d") {
        check_keys(j, {"kind", "y0"}, path);
        return FiberSpace::real1d(number_at(member(j, "y0", path), path + ".y0"));
    }
    if (kind == "euclidean") {
        check_keys(j, {"kind", "dim", "y0"}, path);
        const std::size_t dim = index_at(member(j, "dim", path), path + ".dim");
        if (dim == 0) schema_fail(path + ".dim", "dimension must be >= 1");
        auto y0 = number_list(member(j, "y0", path), path + ".y0");
        if (y0.size() != dim)
            schema_fail(path + ".y0", "expected " + std::to_string(dim) + " coordinates");
        return with_context(path, [&] { return FiberSpace::euclidean(dim, std::move(y0)); });
    }
    if (kind == "matrix") {
        check_keys(j, {"kind", "distances", "y0"}, path);
        const ojson& rows = member(j, "distances", path);
        if (!rows.is_array() || rows.empty())
            schema_fail(path + ".distances", "expected a nonempty array of rows");
        std::vector<std::vector<double>> d;
        d.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            d.push_back(number_list(rows[i], path + ".distances[" + std::to_string(i) + "]"));
        const std::size_t y0 = index_at(member(j, "y0", path), path + ".y0");
        return with_context(path + ".distances", [&] { return FiberSpace::matrix(std::move(d), y0); });
    }
    detail::schema_fail(path + ".kind", "unknown fiber space kind '" + kind + "'");
}

// Point encoding follows the space: bare number on the line, coordinate array
// in Euclidean space, integer site index on an explicit matrix.
inline Point parse_point(const FiberSpace& space, const ojson& j, const std::string& path) {
    using namespace detail;
    switch (space.kind()) {
        case FiberKind::Real1D:
            return real_point(number_at(j, path));
        case FiberKind::EuclideanD: {
            auto coords = number_list(j, path);
            if (coords.size() != space.dim())
                schema_fail(path, "expected " + std::to_string(space.dim()) + " coordinates");
            return coords;
        }
        case FiberKind::ExplicitMatrix: {
            const std::size_t s = index_at(j, path);
            if (s >= space.site_count())
                schema_fail(path, "site index " + std::to_string(s) + " is out of range");
            return site_point(s);
        }
    }
    return {};
}

namespace detail {

inline DiscreteMeasure parse_support(const FiberSpace& space, const ojson& j, const std::string& path) {
    check_object(j, path);
    check_keys(j, {"points", "weights"}, path);
    const ojson& pj = member(j, "points", path);
    if (!pj.is_array() || pj.empty()) schema_fail(path + ".points", "expected a nonempty array");
    std::vector<Point> pts;
    pts.reserve(pj.size());
    for (std::size_t i = 0; i < pj.size(); ++i)
        pts.push_back(parse_point(space, pj[i], path + ".points[" + std::to_string(i) + "]"));
    auto wts = weight_list(member(j, "weights", path), pts.size(), path + ".weights");
    return with_context(path, [&] { return make_measure(space, std::move(pts), std::move(wts)); });
}

inline FiberIsometry parse_isometry(const FiberSpace& space, const ojson& j, const std::string& path) {
    check_object(j, path);
    const std::string kind = string_at(member(j, "kind", path), path + ".kind");
    if (kind == "identity") {
        check_keys(j, {"kind"}, path);
        return FiberIsometry::identity();
    }
    if (kind == "reflection") {
        check_keys(j, {"kind", "center", "sign"}, path);
        const double center = number_at(member(j, "center", path), path + ".center");
        const double sign = number_at(member(j, "sign", path), path + ".sign");
        if (sign != 1.0 && sign != -1.0) schema_fail(path + ".sign", "expected 1 or -1");
        return FiberIsometry::reflection(center, static_cast<int>(sign));
    }
    if (kind == "orthogonal") {
        check_keys(j, {"kind", "matrix"}, path);
        const ojson& rows = member(j, "matrix", path);
        if (!rows.is_array()) schema_fail(path + ".matrix", "expected an array of rows");
        std::vector<std::vector<double>> q;
        q.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            q.push_back(number_list(rows[i], path + ".matrix[" + std::to_string(i) + "]"));
        return with_context(path + ".matrix", [&] { return FiberIsometry::orthogonal(std::move(q)); });
    }
    if (kind == "permutation") {
        check_keys(j, {"kind", "perm"}, path);
        const ojson& pj = member(j, "perm", path);
        if (!pj.is_array()) schema_fail(path + ".perm", "expected an array of site indices");
        std::vector<std::size_t> perm;
        perm.reserve(pj.size());
        for (std::size_t i = 0; i < pj.size(); ++i)
            perm.push_back(index_at(pj[i], path + ".perm[" + std::to_string(i) + "]"));
        return with_context(path + ".perm", [&] { return FiberIsometry::permutation(std::move(perm), space); });
    }
    schema_fail(path + ".kind", "unknown isometry kind '" + kind + "'");
}

} // namespace detail

// Either a disintegrated measure or a plain one with its space; a document's
// layout decides which ("base" selects the fibered form, "points" the plain).
struct ParsedInput {
    std::optional<FiberedMeasure> fibered;
    std::optional<DiscreteMeasure> plain;
    std::optional<FiberSpace> plain_space;

    bool is_fibered() const { return fibered.has_value(); }
    const FiberSpace& space() const { return fibered ? fibered->space() : *plain_space; }
};

inline ParsedInput parse_document(const ojson& doc, const std::string& origin) {
    using namespace detail;
    check_object(doc, origin);
    if (doc.contains("base")) {
        check_keys(doc, {"base", "fiber_space", "fibers", "chart_id", "atlas"}, origin);
        const FiberSpace space = parse_space(member(doc, "fiber_space", origin), origin + ".fiber_space");
        const ojson& bj = member(doc, "base", origin);
        check_keys(bj, {"atoms", "weights"}, origin + ".base");
        auto atoms = string_list(member(bj, "atoms", origin + ".base"), origin + ".base.atoms");
        if (atoms.empty()) schema_fail(origin + ".base.atoms", "expected a nonempty array");
        auto bw = weight_list(member(bj, "weights", origin + ".base"), atoms.size(), origin + ".base.weights");
        auto base = with_context(origin + ".base", [&] { return BaseMeasure::make(std::move(atoms), std::move(bw)); });

        const ojson& fj = member(doc, "fibers", origin);
        if (!fj.is_array()) schema_fail(origin + ".fibers", "expected an array");
        if (fj.size() != base.size())
            schema_fail(origin + ".fibers", "expected one fiber per base atom (" + std::to_string(base.size()) +
                                               " atoms, " + std::to_string(fj.size()) + " fibers)");
        std::vector<DiscreteMeasure> fibers;
        fibers.reserve(fj.size());
        for (std::size_t i = 0; i < fj.size(); ++i)
            fibers.push_back(parse_support(space, fj[i], origin + ".fibers[" + std::to_string(i) + "]"));

        std::string chart = "default";
        if (doc.contains("chart_id")) chart = string_at(doc["chart_id"], origin + ".chart_id");
        auto m = with_context(origin, [&] {
            return FiberedMeasure::make(std::move(base), space, std::move(fibers), std::move(chart));
        });

        // A document atlas translates its coordinates into the default chart.
        if (doc.contains("atlas")) {
            const ojson& aj = doc["atlas"];
            check_object(aj, origin + ".atlas");
            ChartAtlas atlas;
            for (auto it = aj.begin(); it != aj.end(); ++it)
                atlas.emplace(it.key(), parse_isometry(space, it.value(), origin + ".atlas." + it.key()));
            m = with_context(origin + ".atlas", [&] { return apply_chart_change(m, atlas, "default"); });
        }
        ParsedInput out;
        out.fibered = std::move(m);
        return out;
    }
    if (doc.contains("points")) {
        check_keys(doc, {"fiber_space", "points", "weights"}, origin);
        const FiberSpace space = parse_space(member(doc, "fiber_space", origin), origin + ".fiber_space");
        const ojson& pj = member(doc, "points", origin);
        if (!pj.is_array() || pj.empty()) schema_fail(origin + ".points", "expected a nonempty array");
        std::vector<Point> pts;
        pts.reserve(pj.size());
        for (std::size_t i = 0; i < pj.size(); ++i)
            pts.push_back(parse_point(space, pj[i], origin + ".points[" + std::to_string(i) + "]"));
        auto wts = weight_list(member(doc, "weights", origin), pts.size(), origin + ".weights");
        ParsedInput out;
        out.plain = detail::with_context(origin, [&] { return make_measure(space, std::move(pts), std::move(wts)); });
        out.plain_space = space;
        return out;
    }
    detail::schema_fail(origin, "expected a fibered document (key 'base') or a plain measure (key 'points')");
}

// Text-level entry: JSON syntax errors are relabeled with line and column.
inline ojson parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw SchemaError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": " + e.what());
    }
}

inline ParsedInput parse_input(const std::string& text, const std::string& origin = "<input>") {
    return parse_document(parse_json_text(text, origin), origin);
}

// ---------------------------------------------------------------------------
// Emission, the inverse layout of parse_document.

inline ojson emit_point(const FiberSpace& space, const Point& p) {
    switch (space.kind()) {
        case FiberKind::Real1D:
            return ojson(p[0]);
        case FiberKind::EuclideanD: {
            ojson arr = ojson::array();
            for (double c : p) arr.push_back(c);
            return arr;
        }
        case FiberKind::ExplicitMatrix:
            return ojson(static_cast<std::uint64_t>(p[0]));
    }
    return ojson();
}

inline ojson emit_space(const FiberSpace& space) {
    ojson out;
    switch (space.kind()) {
        case FiberKind::Real1D:
            out["kind"] = "real1d";
            out["y0"] = space.basepoint()[0];
            break;
        case FiberKind::EuclideanD:
            out["kind"] = "euclidean";
            out["dim"] = static_cast<std::uint64_t>(space.dim());
            out["y0"] = emit_point(space, space.basepoint());
            break;
        case FiberKind::ExplicitMatrix: {
            out["kind"] = "matrix";
            ojson rows = ojson::array();
            for (const auto& row : space.distance_matrix()) {
                ojson r = ojson::array();
                for (double d : row) r.push_back(d);
                rows.push_back(std::move(r));
            }
            out["distances"] = std::move(rows);
            out["y0"] = static_cast<std::uint64_t>(space.basepoint()[0]);
            break;
        }
    }
    return out;
}

inline ojson emit_support(const FiberSpace& space, const DiscreteMeasure& mu) {
    ojson out;
    ojson pts = ojson::array();
    for (const auto& p : mu.points()) pts.push_back(emit_point(space, p));
    out["points"] = std::move(pts);
    out["weights"] = mu.weights();
    return out;
}

inline ojson emit_fibered(const FiberedMeasure& m) {
    ojson doc;
    ojson base;
    base["atoms"] = m.base().atoms();
    base["weights"] = m.base().weights();
    doc["base"] = std::move(base);
    doc["fiber_space"] = emit_space(m.space());
    ojson fibers = ojson::array();
    for (const auto& f : m.fibers()) fibers.push_back(emit_support(m.space(), f));
    doc["fibers"] = std::move(fibers);
    doc["chart_id"] = m.chart_id();
    return doc;
}

inline ojson emit_plain(const DiscreteMeasure& mu, const FiberSpace& space) {
    ojson doc;
    doc["fiber_space"] = emit_space(space);
    ojson support = emit_support(space, mu);
    doc["points"] = support["points"];
    doc["weights"] = support["weights"];
    return doc;
}

inline std::string emit_input(const ParsedInput& in) {
    return dump_document(in.is_fibered() ? emit_fibered(*in.fibered) : emit_plain(*in.plain, *in.plain_space));
}

// ---------------------------------------------------------------------------
// Run configuration and command handlers.

struct RunConfig {
    std::string command;
    std::vector<std::string> inputs;
    double p = 2.0;
    std::string q_text = "2";    // "inf" selects the essential supremum
    std::string kappa_text;      // empty: kappa = p
    std::vector<double> lambdas; // empty: uniform
    std::size_t directions = 16;
    bool random_directions = false;
    std::uint64_t seed = 0;
    std::size_t iterations = 3000;
    double step_a = 1.0;
    double step_b = 10.0;
    double gap_tol = std::numeric_limits<double>::infinity();
    std::size_t entry_cap = kDefaultEntryCap;
    std::string output_path;
    bool csv = false;
    int threads = -1; // -1: unset, fall back to FIBEROT_THREADS, then all cores
    double tau = 0.5;
    std::string mode = "fiberwise";
    std::string grid_path;
    std::string certificate_path;
    std::string candidate_path;
    std::string scenario;
    std::size_t demo_atoms = 200;
    std::size_t demo_copies = 4;
};

inline double parse_q_text(const std::string& s) {
    if (s == "inf") return kInfiniteQ;
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size() || s.empty())
        throw ValidationError("exponent '" + s + "' is not a number or \"inf\"");
    check_q(v);
    return v;
}

inline double resolve_kappa(const RunConfig& cfg) {
    if (cfg.kappa_text.empty()) return cfg.p;
    const double v = parse_q_text(cfg.kappa_text);
    if (std::isinf(v)) throw ValidationError("outer exponent kappa must be finite");
    return v;
}

inline int resolve_threads(const RunConfig& cfg) {
    if (cfg.threads >= 0) return cfg.threads;
    if (const char* env = std::getenv("FIBEROT_THREADS")) {
        const std::string s(env);
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != s.size() || s.empty() || v < 0)
            throw ValidationError("FIBEROT_THREADS is set to '" + s + "', expected a nonnegative integer");
        return v;
    }
    return 0;
}

inline ojson emit_q(double q) {
    if (std::isinf(q)) return ojson("inf");
    return ojson(q);
}

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open input file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ParsedInput load_input(const std::string& path) {
    return parse_input(read_file(path), path);
}

inline FiberedMeasure load_fibered(const std::string& path) {
    auto in = load_input(path);
    if (!in.is_fibered())
        throw ValidationError(path + ": this command needs a fibered document (keys base, fiber_space, fibers)");
    return std::move(*in.fibered);
}

inline std::pair<DiscreteMeasure, FiberSpace> load_plain(const std::string& path) {
    auto in = load_input(path);
    if (in.is_fibered())
        throw ValidationError(path + ": this command needs a plain measure document (keys fiber_space, points, weights)");
    return {std::move(*in.plain), std::move(*in.plain_space)};
}

// Distances between measures written in different charts are not defined
// until both are moved to a common one (a document-level atlas does that).
inline void check_common_chart(const FiberedMeasure& a, const FiberedMeasure& b) {
    if (a.chart_id() != b.chart_id())
        throw ValidationError("measures are expressed in different charts ('" + a.chart_id() + "' vs '" +
                              b.chart_id() + "'); supply atlases mapping both into one chart");
}

inline void need_inputs(const RunConfig& cfg, std::size_t count) {
    if (cfg.inputs.size() != count)
        throw ValidationError(cfg.command + " takes exactly " + std::to_string(count) + " input documents");
}

inline std::vector<double> resolve_lambdas(const RunConfig& cfg, std::size_t count) {
    if (cfg.lambdas.empty())
        return std::vector<double>(count, 1.0 / static_cast<double>(count));
    if (cfg.lambdas.size() != count)
        throw ValidationError("expected " + std::to_string(count) + " mixing weights, got " +
                              std::to_string(cfg.lambdas.size()));
    return cfg.lambdas;
}

// Grid file layout: {"grids": [[point, ...] per fiber]}.
inline SupportGrid load_grids(const std::string& path, const FiberSpace& space) {
    const std::string origin = path;
    const ojson doc = parse_json_text(read_file(path), origin);
    check_object(doc, origin);
    check_keys(doc, {"grids"}, origin);
    const ojson& gj = member(doc, "grids", origin);
    if (!gj.is_array()) schema_fail(origin + ".grids", "expected an array of point lists");
    SupportGrid grids;
    grids.reserve(gj.size());
    for (std::size_t i = 0; i < gj.size(); ++i) {
        const std::string gp = origin + ".grids[" + std::to_string(i) + "]";
        if (!gj[i].is_array() || gj[i].empty()) schema_fail(gp, "expected a nonempty array of points");
        std::vector<Point> pts;
        pts.reserve(gj[i].size());
        for (std::size_t v = 0; v < gj[i].size(); ++v)
            pts.push_back(parse_point(space, gj[i][v], gp + "[" + std::to_string(v) + "]"));
        grids.push_back(std::move(pts));
    }
    return grids;
}

// Default candidate support: the union of the input atoms, fiber by fiber.
inline SupportGrid union_support_grids(const BarycenterProblem& prob) {
    SupportGrid grids(prob.fiber_count());
    for (std::size_t i = 0; i < prob.fiber_count(); ++i) {
        std::map<Point, bool, PointBitLess> seen;
        for (std::size_t k = 0; k < prob.count(); ++k)
            for (const auto& pt : prob.inputs[k].fiber(i).points())
                if (seen.try_emplace(pt, true).second) grids[i].push_back(pt);
    }
    return grids;
}

inline ojson emit_grid(const FiberSpace& space, const SupportGrid& grids) {
    ojson out = ojson::array();
    for (const auto& grid : grids) {
        ojson pts = ojson::array();
        for (const auto& pt : grid) pts.push_back(emit_point(space, pt));
        out.push_back(std::move(pts));
    }
    return out;
}

inline ojson emit_certificate(const FiberSpace& space, const BarycenterDualCertificate& cert) {
    ojson out;
    out["eval_points"] = emit_grid(space, cert.eval_points);
    out["zeta"] = cert.zeta;
    out["xi"] = cert.xi;
    return out;
}

} // namespace detail

inline ojson run_distance(const RunConfig& cfg) {
    detail::need_inputs(cfg, 2);
    const auto a = detail::load_fibered(cfg.inputs[0]);
    const auto b = detail::load_fibered(cfg.inputs[1]);
    detail::check_common_chart(a, b);
    const double q = parse_q_text(cfg.q_text);
    const auto rep = fibered_distance(a, b, cfg.p, q, cfg.entry_cap, resolve_threads(cfg));
    ojson out;
    out["command"] = "distance";
    out["p"] = cfg.p;
    out["q"] = emit_q(q);
    out["value"] = rep.value;
    out["base_atoms"] = a.base().atoms();
    out["per_fiber"] = rep.per_fiber;
    return out;
}

inline ojson run_couple(const RunConfig& cfg) {
    detail::need_inputs(cfg, 2);
    const auto a = detail::load_fibered(cfg.inputs[0]);
    const auto b = detail::load_fibered(cfg.inputs[1]);
    detail::check_common_chart(a, b);
    std::vector<LpSolution> sols(a.fiber_count());
    parallel_for(
        a.fiber_count(),
        [&](std::size_t i) {
            sols[i] = transport_lp(a.fiber(i), b.fiber(i), a.space(), cfg.p, cfg.entry_cap);
        },
        resolve_threads(cfg));
    ojson out;
    out["command"] = "couple";
    out["p"] = cfg.p;
    long double total = 0.0L;
    ojson fibers = ojson::array();
    for (std::size_t i = 0; i < a.fiber_count(); ++i) {
        total += static_cast<long double>(a.base().sigma(i)) * sols[i].cost;
        ojson f;
        f["atom"] = a.base().atoms()[i];
        f["cost"] = sols[i].cost;
        ojson plan = ojson::array();
        for (const auto& e : sols[i].plan.entries) {
            ojson entry;
            entry["row"] = static_cast<std::uint64_t>(e.row);
            entry["col"] = static_cast<std::uint64_t>(e.col);
            entry["mass"] = e.mass;
            plan.push_back(std::move(entry));
        }
        f["plan"] = std::move(plan);
        f["phi"] = sols[i].duals.phi;
        f["psi"] = sols[i].duals.psi;
        fibers.push_back(std::move(f));
    }
    out["coupling_cost"] = static_cast<double>(total);
    out["fibers"] = std::move(fibers);
    return out;
}

inline ojson run_cp_cost(const RunConfig& cfg) {
    detail::need_inputs(cfg, 2);
    const auto a = detail::load_fibered(cfg.inputs[0]);
    const auto b = detail::load_fibered(cfg.inputs[1]);
    detail::check_common_chart(a, b);
    const auto plan = coupling_cost(a, b, cfg.p, cfg.entry_cap);
    ojson out;
    out["command"] = "cp-cost";
    out["p"] = cfg.p;
    out["cost"] = plan.cost;
    out["equivalent_distance"] = std::pow(plan.cost, 1.0 / cfg.p);
    ojson entries = ojson::array();
    for (const auto& e : plan.entries) {
        ojson entry;
        entry["fiber"] = static_cast<std::uint64_t>(e.fiber);
        entry["row"] = static_cast<std::uint64_t>(e.row);
        entry["col"] = static_cast<std::uint64_t>(e.col);
        entry["mass"] = e.mass;
        entries.push_back(std::move(entry));
    }
    out["entries"] = std::move(entries);
    return out;
}

inline ojson run_geodesic(const RunConfig& cfg) {
    detail::need_inputs(cfg, 2);
    const auto a = detail::load_fibered(cfg.inputs[0]);
    const auto b = detail::load_fibered(cfg.inputs[1]);
    detail::check_common_chart(a, b);
    const double q = parse_q_text(cfg.q_text);
    const auto rho = geodesic_point(a, b, cfg.tau, cfg.p, cfg.entry_cap);
    ojson out;
    out["command"] = "geodesic";
    out["p"] = cfg.p;
    out["q"] = emit_q(q);
    out["tau"] = cfg.tau;
    out["endpoint_distance"] = fibered_distance(a, b, cfg.p, q, cfg.entry_cap, resolve_threads(cfg)).value;
    out["measure"] = emit_fibered(rho);
    return out;
}

inline ojson run_barycenter(const RunConfig& cfg) {
    if (cfg.inputs.size() < 2) throw ValidationError("barycenter needs at least two input documents");
    std::vector<FiberedMeasure> inputs;
    inputs.reserve(cfg.inputs.size());
    for (const auto& path : cfg.inputs) inputs.push_back(detail::load_fibered(path));
    for (std::size_t k = 1; k < inputs.size(); ++k) detail::check_common_chart(inputs.front(), inputs[k]);
    const double q = parse_q_text(cfg.q_text);
    const double kappa = resolve_kappa(cfg);
    const auto lambdas = detail::resolve_lambdas(cfg, inputs.size());
    const FiberSpace space = inputs.front().space();
    auto prob = BarycenterProblem::make(std::move(inputs), lambdas, cfg.p, q, kappa);

    ojson out;
    out["command"] = "barycenter";
    out["mode"] = cfg.mode;
    out["p"] = cfg.p;
    out["q"] = emit_q(q);
    out["kappa"] = kappa;
    out["lambdas"] = lambdas;
    if (cfg.mode == "fiberwise") {
        SupportGrid grids;
        if (!cfg.grid_path.empty()) grids = detail::load_grids(cfg.grid_path, space);
        const auto res = solve_fiberwise(prob, grids);
        out["value"] = res.value;
        out["measure"] = emit_fibered(res.solution);
        return out;
    }
    if (cfg.mode == "subgradient") {
        const SupportGrid grids = cfg.grid_path.empty() ? detail::union_support_grids(prob)
                                                        : detail::load_grids(cfg.grid_path, space);
        SubgradientOptions options;
        options.iterations = cfg.iterations;
        options.step_a = cfg.step_a;
        options.step_b = cfg.step_b;
        options.gap_tol = cfg.gap_tol;
        options.entry_cap = cfg.entry_cap;
        const auto res = solve_general_q(prob, grids, options);
        out["converged"] = true;
        out["value"] = res.value;
        out["gap_bound"] = res.dual_gap_bound;
        out["dual_value"] = res.value - res.dual_gap_bound;
        out["measure"] = emit_fibered(res.solution);
        out["certificate"] = detail::emit_certificate(space, res.certificate);
        return out;
    }
    throw ValidationError("unknown barycenter mode '" + cfg.mode + "', expected fiberwise or subgradient");
}

inline ojson run_dual_check(const RunConfig& cfg) {
    using namespace detail;
    if (cfg.certificate_path.empty()) throw ValidationError("dual-check needs --certificate");
    const std::string origin = cfg.certificate_path;
    const ojson doc = parse_json_text(read_file(cfg.certificate_path), origin);
    check_object(doc, origin);
    ojson out;
    out["command"] = "dual-check";

    if (doc.contains("zeta")) {
        // Fibered layout: one zeta row and one xi table per input measure.
        check_keys(doc, {"eval_points", "zeta", "xi"}, origin);
        if (cfg.inputs.size() < 2) throw ValidationError("dual-check needs the problem's input documents");
        std::vector<FiberedMeasure> inputs;
        inputs.reserve(cfg.inputs.size());
        for (const auto& path : cfg.inputs) inputs.push_back(load_fibered(path));
        const double q = parse_q_text(cfg.q_text);
        const double kappa = resolve_kappa(cfg);
        const auto lambdas = resolve_lambdas(cfg, inputs.size());
        const FiberSpace space = inputs.front().space();
        const std::size_t K = inputs.size();
        const std::size_t fibers = inputs.front().fiber_count();
        auto prob = BarycenterProblem::make(std::move(inputs), lambdas, cfg.p, q, kappa);

        BarycenterDualCertificate cert;
        const ojson& ej = member(doc, "eval_points", origin);
        if (!ej.is_array() || ej.size() != fibers)
            schema_fail(origin + ".eval_points", "expected one point list per fiber (" + std::to_string(fibers) + ")");
        for (std::size_t i = 0; i < fibers; ++i) {
            const std::string ep = origin + ".eval_points[" + std::to_string(i) + "]";
            if (!ej[i].is_array() || ej[i].empty()) schema_fail(ep, "expected a nonempty array of points");
            std::vector<Point> pts;
            for (std::size_t v = 0; v < ej[i].size(); ++v)
                pts.push_back(parse_point(space, ej[i][v], ep + "[" + std::to_string(v) + "]"));
            cert.eval_points.push_back(std::move(pts));
        }
        const ojson& zj = member(doc, "zeta", origin);
        if (!zj.is_array() || zj.size() != K)
            schema_fail(origin + ".zeta", "expected one row per input measure (" + std::to_string(K) + ")");
        for (std::size_t k = 0; k < K; ++k) {
            auto row = number_list(zj[k], origin + ".zeta[" + std::to_string(k) + "]");
            if (row.size() != fibers)
                schema_fail(origin + ".zeta[" + std::to_string(k) + "]", "expected one entry per fiber");
            cert.zeta.push_back(std::move(row));
        }
        const ojson& xj = member(doc, "xi", origin);
        if (!xj.is_array() || xj.size() != K)
            schema_fail(origin + ".xi", "expected one table per input measure (" + std::to_string(K) + ")");
        for (std::size_t k = 0; k < K; ++k) {
            const std::string xp = origin + ".xi[" + std::to_string(k) + "]";
            if (!xj[k].is_array() || xj[k].size() != fibers) schema_fail(xp, "expected one row per fiber");
            std::vector<std::vector<double>> table;
            for (std::size_t i = 0; i < fibers; ++i) {
                auto row = number_list(xj[k][i], xp + "[" + std::to_string(i) + "]");
                if (row.size() != cert.eval_points[i].size())
                    schema_fail(xp + "[" + std::to_string(i) + "]", "expected one entry per evaluation point");
                table.push_back(std::move(row));
            }
            cert.xi.push_back(std::move(table));
        }

        const double value = dual_objective(prob, cert);
        out["kind"] = "barycenter";
        out["p"] = cfg.p;
        out["q"] = emit_q(q);
        out["kappa"] = kappa;
        out["valid"] = true;
        out["value"] = value;
        if (!cfg.candidate_path.empty())
            out["candidate_objective"] = objective(prob, load_fibered(cfg.candidate_path), cfg.entry_cap);
        return out;
    }

    if (doc.contains("phis")) {
        // Classical layout: potentials summing to zero on a shared support.
        check_keys(doc, {"eval_points", "phis"}, origin);
        if (cfg.inputs.size() < 2) throw ValidationError("dual-check needs the problem's input documents");
        std::vector<DiscreteMeasure> mus;
        std::optional<FiberSpace> space;
        for (const auto& path : cfg.inputs) {
            auto [mu, sp] = load_plain(path);
            if (space && !space->same_structure(sp))
                throw ValidationError(path + ": inputs live on different fiber spaces");
            if (!space) space = sp;
            mus.push_back(std::move(mu));
        }
        const auto lambdas = resolve_lambdas(cfg, mus.size());
        const ojson& ej = member(doc, "eval_points", origin);
        if (!ej.is_array() || ej.empty()) schema_fail(origin + ".eval_points", "expected a nonempty array of points");
        std::vector<Point> eval;
        for (std::size_t v = 0; v < ej.size(); ++v)
            eval.push_back(parse_point(*space, ej[v], origin + ".eval_points[" + std::to_string(v) + "]"));
        const ojson& pj = member(doc, "phis", origin);
        if (!pj.is_array() || pj.size() != mus.size())
            schema_fail(origin + ".phis", "expected one potential table per input measure");
        std::vector<std::vector<double>> phis;
        for (std::size_t k = 0; k < pj.size(); ++k) {
            auto row = number_list(pj[k], origin + ".phis[" + std::to_string(k) + "]");
            if (row.size() != eval.size())
                schema_fail(origin + ".phis[" + std::to_string(k) + "]", "expected one entry per evaluation point");
            phis.push_back(std::move(row));
        }
        const double value = classical_dual(mus, *space, lambdas, cfg.p, eval, phis);
        out["kind"] = "classical";
        out["p"] = cfg.p;
        out["valid"] = true;
        out["value"] = value;
        if (!cfg.candidate_path.empty()) {
            auto [cand, cs] = load_plain(cfg.candidate_path);
            if (!space->same_structure(cs))
                throw ValidationError(cfg.candidate_path + ": candidate lives on a different fiber space");
            long double obj = 0.0L;
            for (std::size_t k = 0; k < mus.size(); ++k)
                obj += static_cast<long double>(lambdas[k]) *
                       std::pow(wasserstein(mus[k], cand, *space, cfg.p, cfg.entry_cap), cfg.p);
            out["candidate_objective"] = static_cast<double>(obj);
        }
        return out;
    }

    schema_fail(origin, "certificate must contain 'zeta' (fibered layout) or 'phis' (classical layout)");
}

inline ojson run_slice(const RunConfig& cfg) {
    detail::need_inputs(cfg, 2);
    auto [mu, sa] = detail::load_plain(cfg.inputs[0]);
    auto [nu, sb] = detail::load_plain(cfg.inputs[1]);
    if (!sa.same_structure(sb)) throw ValidationError("slice inputs live on different fiber spaces");
    const double q = parse_q_text(cfg.q_text);
    const bool circle = sa.kind() == FiberKind::EuclideanD && sa.dim() == 2 && !cfg.random_directions;
    const DirectionSet dirs = circle ? uniform_circle_directions(cfg.directions)
                                     : random_sphere_directions(sa.dim(), cfg.directions, cfg.seed);
    const int threads = resolve_threads(cfg);
    const auto ea = slice_embed(mu, sa, dirs);
    const auto eb = slice_embed(nu, sb, dirs);
    const auto rep = fibered_distance(ea, eb, cfg.p, q, cfg.entry_cap, threads);
    const double direct = sliced_mk(mu, nu, sa, cfg.p, q, dirs, threads);
    ojson out;
    out["command"] = "slice";
    out["p"] = cfg.p;
    out["q"] = emit_q(q);
    out["direction_rule"] = circle ? "uniform-circle" : "seeded-sphere";
    if (!circle) out["seed"] = cfg.seed;
    ojson dj = ojson::array();
    for (const auto& omega : dirs.directions()) {
        ojson v = ojson::array();
        for (double c : omega) v.push_back(c);
        dj.push_back(std::move(v));
    }
    out["directions"] = std::move(dj);
    out["direction_weights"] = dirs.weights();
    out["value"] = direct;
    out["embedded_value"] = rep.value;
    out["per_direction"] = rep.per_fiber;
    return out;
}

inline ojson run_demo(const RunConfig& cfg) {
    if (cfg.scenario != "nonunique-3-2")
        throw ValidationError("unknown demo scenario '" + cfg.scenario + "', expected nonunique-3-2");
    const auto demo = make_nonunique_demo(cfg.demo_copies, cfg.demo_atoms);
    const auto& space = demo.problem.inputs.front().space();
    const double obj0 = objective(demo.problem, demo.cand0);
    const double obj1 = objective(demo.problem, demo.cand1);
    const double classical =
        classical_dual(demo.mus, space, demo.lambdas, 1.0, demo.eval_points, demo.phis);

    BarycenterDualCertificate cert;
    const std::size_t fibers = demo.problem.fiber_count();
    cert.eval_points.assign(fibers, demo.eval_points);
    cert.zeta.assign(demo.mus.size(), std::vector<double>(fibers, 1.0));
    for (std::size_t k = 0; k < demo.mus.size(); ++k)
        cert.xi.push_back(std::vector<std::vector<double>>(fibers, demo.phis[k]));
    const double lifted = dual_objective(demo.problem, cert);
    const double w1 = wasserstein(demo.nu0, demo.nu1, space, 1.0);

    ojson out;
    out["command"] = "demo";
    out["scenario"] = cfg.scenario;
    out["copies"] = static_cast<std::uint64_t>(cfg.demo_copies);
    out["atoms_per_interval"] = static_cast<std::uint64_t>(cfg.demo_atoms);
    out["objective_first_interval"] = obj0;
    out["objective_second_interval"] = obj1;
    out["classical_dual"] = classical;
    out["lifted_dual"] = lifted;
    out["mk1_between_candidates"] = w1;
    return out;
}

inline void write_report(const ojson& report, const RunConfig& cfg, std::ostream& fallback) {
    const std::string text = cfg.csv ? to_csv(report) : dump_document(report);
    if (cfg.output_path.empty()) {
        fallback << text;
        return;
    }
    std::ofstream f(cfg.output_path, std::ios::binary);
    if (!f) throw ValidationError("cannot open output file '" + cfg.output_path + "'");
    f << text;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"disintegrated optimal transport over a finite base"};
    app.name("fiberot");
    app.require_subcommand(1);

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--threads", cfg.threads, "worker cap, 0 means all cores (FIBEROT_THREADS as fallback)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--output", cfg.output_path, "write the report to this file instead of stdout");
        sub->add_flag("--csv", cfg.csv, "flattened field,value rows instead of JSON");
        sub->add_option("--entry-cap", cfg.entry_cap, "largest allowed transport table (arc count)");
    };
    const auto add_pq = [&](CLI::App* sub) {
        sub->add_option("--p", cfg.p, "fiber transport exponent, >= 1");
        sub->add_option("--q", cfg.q_text, "base reduction exponent, >= 1 or \"inf\"");
    };

    auto* dist = app.add_subcommand("distance", "disintegrated distance with the per-fiber vector");
    dist->add_option("inputs", cfg.inputs, "two fibered measure documents")->expected(2)->required();
    add_pq(dist);
    add_common(dist);

    auto* couple = app.add_subcommand("couple", "per-fiber optimal plans and dual potentials");
    couple->add_option("inputs", cfg.inputs, "two fibered measure documents")->expected(2)->required();
    couple->add_option("--p", cfg.p, "fiber transport exponent, >= 1");
    add_common(couple);

    auto* cp = app.add_subcommand("cp-cost", "joint coupling cost with fiber-diagonal support");
    cp->add_option("inputs", cfg.inputs, "two fibered measure documents")->expected(2)->required();
    cp->add_option("--p", cfg.p, "fiber transport exponent, >= 1");
    add_common(cp);

    auto* geo = app.add_subcommand("geodesic", "constant-speed interpolation at a given time");
    geo->add_option("inputs", cfg.inputs, "two fibered measure documents")->expected(2)->required();
    geo->add_option("--tau", cfg.tau, "interpolation time in [0, 1]");
    add_pq(geo);
    add_common(geo);

    auto* bary = app.add_subcommand("barycenter", "weighted barycenter of fibered measures");
    bary->add_option("inputs", cfg.inputs, "two or more fibered measure documents")->required();
    bary->add_option("--mode", cfg.mode, "fiberwise (exact, q = p) or subgradient (finite q >= p)");
    bary->add_option("--lambda", cfg.lambdas, "mixing weights, one per input (default uniform)")
        ->expected(1)
        ->delimiter(',');
    bary->add_option("--kappa", cfg.kappa_text, "outer exponent (default p)");
    bary->add_option("--grid", cfg.grid_path, "candidate support file {\"grids\": [[point, ...] per fiber]}");
    bary->add_option("--iterations", cfg.iterations, "subgradient step budget");
    bary->add_option("--step-a", cfg.step_a, "step size numerator a in a/(b+t)");
    bary->add_option("--step-b", cfg.step_b, "step size offset b in a/(b+t)");
    bary->add_option("--gap-tol", cfg.gap_tol, "fail with exit 4 when the certificate gap exceeds this");
    add_pq(bary);
    add_common(bary);

    auto* dual = app.add_subcommand("dual-check", "validate a certificate file and evaluate its bound");
    dual->add_option("inputs", cfg.inputs, "the problem's input measure documents")->required();
    dual->add_option("--certificate", cfg.certificate_path, "certificate file")->required();
    dual->add_option("--candidate", cfg.candidate_path, "optional candidate to price against the bound");
    dual->add_option("--lambda", cfg.lambdas, "mixing weights, one per input (default uniform)")
        ->expected(1)
        ->delimiter(',');
    dual->add_option("--kappa", cfg.kappa_text, "outer exponent (default p)");
    add_pq(dual);
    add_common(dual);

    auto* slice = app.add_subcommand("slice", "project to lines, embed, and compare sliced distances");
    slice->add_option("inputs", cfg.inputs, "two plain Euclidean measure documents")->expected(2)->required();
    slice->add_option("--directions", cfg.directions, "number of projection directions");
    slice->add_flag("--random-directions", cfg.random_directions,
                    "seeded sphere sample even in the plane (always used when dim > 2)");
    slice->add_option("--seed", cfg.seed, "seed for the sphere sample");
    add_pq(slice);
    add_common(slice);

    auto* demo = app.add_subcommand("demo", "reproduce a built-in scenario end to end");
    demo->add_option("scenario", cfg.scenario, "scenario name (nonunique-3-2)")->required();
    demo->add_option("--n", cfg.demo_atoms, "atoms per interval");
    demo->add_option("--copies", cfg.demo_copies, "number of input copies (even)");
    add_common(demo);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "argument error: " << e.what() << "\n";
        return 2;
    }

    try {
        cfg.command = app.get_subcommands().front()->get_name();
        ojson report;
        if (cfg.command == "distance") report = run_distance(cfg);
        else if (cfg.command == "couple") report = run_couple(cfg);
        else if (cfg.command == "cp-cost") report = run_cp_cost(cfg);
        else if (cfg.command == "geodesic") report = run_geodesic(cfg);
        else if (cfg.command == "barycenter") report = run_barycenter(cfg);
        else if (cfg.command == "dual-check") report = run_dual_check(cfg);
        else if (cfg.command == "slice") report = run_slice(cfg);
        else report = run_demo(cfg);
        write_report(report, cfg, out);
        return 0;
    } catch (const NotConverged& e) {
        // the gap bound goes to stdout so scripted callers can read it
        ojson rep;
        rep["command"] = cfg.command;
        rep["converged"] = false;
        rep["value"] = e.value;
        rep["gap_bound"] = e.gap;
        out << (cfg.csv ? to_csv(rep) : dump_document(rep));
        return 4;
    } catch (const SizeCapExceeded& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace fiberot::cli
