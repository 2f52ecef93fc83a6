#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhi/characteristic.hpp"
#include "nhi/error.hpp"
#include "nhi/model.hpp"
#include "nhi/observables.hpp"
#include "nhi/oracle.hpp"
#include "nhi/parallel.hpp"
#include "nhi/ssh.hpp"
#include "nhi/winding.hpp"

namespace nhi::sweep {

inline constexpr const char* kToolVersion = "1.0.0";

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Formatting

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double x) {
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    if (x == 0.0)
        x = 0.0; // drop the sign of negative zero
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4)
        out[i] = digits[v & 0xf];
    return out;
}

// ---------------------------------------------------------------------------
// Configuration

enum class ModelKind { HN, SSH };

/// "5", "log:start:stop:count" or "lin:start:stop:count".
struct GridSpec {
    enum class Kind { Single, Log, Linear };
    Kind kind = Kind::Single;
    double start = 0.0;
    double stop = 0.0;
    int count = 1;

    std::vector<double> values() const {
        switch (kind) {
        case Kind::Single: return {start};
        case Kind::Log: return log_grid(start, stop, count);
        case Kind::Linear: {
            std::vector<double> out(count);
            for (int i = 0; i < count; ++i)
                out[i] = start + (stop - start) * i / (count - 1);
            return out;
        }
        }
        return {};
    }

    std::string text() const {
        if (kind == Kind::Single)
            return format_double(start);
        return std::string(kind == Kind::Log ? "log:" : "lin:") + format_double(start) + ":" + format_double(stop) +
               ":" + std::to_string(count);
    }
};

inline double parse_number(const std::string& s, const std::string& field) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == '+')
        ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || s.empty())
        throw Error(ErrorKind::InvalidInput, field + ": cannot parse number '" + s + "'");
    return v;
}

inline GridSpec parse_grid(const std::string& text, const std::string& field) {
    GridSpec g;
    if (text.rfind("log:", 0) == 0 || text.rfind("lin:", 0) == 0) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ':'))
            parts.push_back(item);
        if (parts.size() != 4)
            throw Error(ErrorKind::InvalidInput, field + ": grid spec must be kind:start:stop:count");
        g.kind = parts[0] == "log" ? GridSpec::Kind::Log : GridSpec::Kind::Linear;
        g.start = parse_number(parts[1], field);
        g.stop = parse_number(parts[2], field);
        const double count = parse_number(parts[3], field);
        if (count != std::floor(count) || count < 2 || count > 1e6)
            throw Error(ErrorKind::InvalidInput, field + ": grid count must be an integer >= 2");
        g.count = static_cast<int>(count);
        if (!(g.start < g.stop))
            throw Error(ErrorKind::InvalidInput, field + ": grid start must be below stop");
        if (g.kind == GridSpec::Kind::Log && !(g.start > 0.0))
            throw Error(ErrorKind::InvalidInput, field + ": log grid needs a positive start");
        return g;
    }
    g.start = g.stop = parse_number(text, field);
    return g;
}

inline cplx parse_complex(const std::string& text, const std::string& field) {
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        return {parse_number(text, field), 0.0};
    return {parse_number(text.substr(0, comma), field), parse_number(text.substr(comma + 1), field)};
}

struct SweepConfig {
    ModelKind model = ModelKind::HN;
    std::optional<int> N;
    std::optional<double> g;
    std::optional<double> tPrime;
    std::optional<GridSpec> v0;
    std::optional<cplx> er;
    std::optional<GridSpec> tPrimeGrid;
    ResponseElement element = ResponseElement::ImpurityNeighbours;
    bool includeBound = false;
    int nK = 256;
    double relStep = 1e-3;
    int threads = 1;
    std::string out;
};

inline const char* to_string(ModelKind m) { return m == ModelKind::HN ? "hn" : "ssh"; }

inline ModelKind parse_model(const std::string& s) {
    if (s == "hn" || s == "HN")
        return ModelKind::HN;
    if (s == "ssh" || s == "SSH")
        return ModelKind::SSH;
    throw Error(ErrorKind::InvalidInput, "model: expected 'hn' or 'ssh', got '" + s + "'");
}

inline ResponseElement parse_element(const std::string& s) {
    if (s == "impurity-neighbours")
        return ResponseElement::ImpurityNeighbours;
    if (s == "corner")
        return ResponseElement::Corner;
    throw Error(ErrorKind::InvalidInput, "element: expected 'impurity-neighbours' or 'corner', got '" + s + "'");
}

/// Reads a configuration document. Unknown keys and wrong types are
/// rejected with the offending field named.
inline SweepConfig config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object())
        throw Error(ErrorKind::InvalidInput, "config: top level must be an object");
    SweepConfig c;
    auto number = [](const nlohmann::json& v, const std::string& key) {
        if (!v.is_number())
            throw Error(ErrorKind::InvalidInput, "config field '" + key + "': expected a number");
        return v.get<double>();
    };
    auto text = [](const nlohmann::json& v, const std::string& key) {
        if (!v.is_string())
            throw Error(ErrorKind::InvalidInput, "config field '" + key + "': expected a string");
        return v.get<std::string>();
    };
    auto integer = [&](const nlohmann::json& v, const std::string& key) {
        const double d = number(v, key);
        if (d != std::floor(d) || std::abs(d) > 1e9)
            throw Error(ErrorKind::InvalidInput, "config field '" + key + "': expected an integer");
        return static_cast<int>(d);
    };
    for (const auto& [key, v] : doc.items()) {
        if (key == "model")
            c.model = parse_model(text(v, key));
        else if (key == "n")
            c.N = integer(v, key);
        else if (key == "g")
            c.g = number(v, key);
        else if (key == "t_prime")
            c.tPrime = number(v, key);
        else if (key == "v0")
            c.v0 = v.is_number() ? GridSpec{GridSpec::Kind::Single, v.get<double>(), v.get<double>(), 1}
                                 : parse_grid(text(v, key), key);
        else if (key == "er") {
            if (v.is_array()) {
                if (v.size() != 2)
                    throw Error(ErrorKind::InvalidInput, "config field 'er': expected [re, im]");
                c.er = cplx(number(v[0], key), number(v[1], key));
            } else {
                c.er = parse_complex(text(v, key), key);
            }
        } else if (key == "t_prime_grid")
            c.tPrimeGrid = parse_grid(text(v, key), key);
        else if (key == "element")
            c.element = parse_element(text(v, key));
        else if (key == "include_bound") {
            if (!v.is_boolean())
                throw Error(ErrorKind::InvalidInput, "config field 'include_bound': expected a boolean");
            c.includeBound = v.get<bool>();
        } else if (key == "nk")
            c.nK = integer(v, key);
        else if (key == "rel_step")
            c.relStep = number(v, key);
        else if (key == "threads")
            c.threads = integer(v, key);
        else if (key == "out")
            c.out = text(v, key);
        else
            throw Error(ErrorKind::InvalidInput, "config: unknown field '" + key + "'");
    }
    return c;
}

inline SweepConfig parse_config_text(const std::string& textDoc) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(textDoc);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::InvalidInput, std::string("config: JSON parse error: ") + e.what(),
                    static_cast<double>(e.byte));
    }
    return config_from_json(doc);
}

enum class Command { Spectrum, IprSweep, Critical, GapScan, Winding, NuSweep, Flow, Validate };

inline const char* to_string(Command c) {
    switch (c) {
    case Command::Spectrum: return "spectrum";
    case Command::IprSweep: return "ipr-sweep";
    case Command::Critical: return "critical";
    case Command::GapScan: return "gap-scan";
    case Command::Winding: return "winding";
    case Command::NuSweep: return "nu-sweep";
    case Command::Flow: return "flow";
    case Command::Validate: return "validate";
    }
    return "unknown";
}

/// Configuration with command defaults filled in and ranges checked.
struct ResolvedConfig {
    SweepConfig raw;
    Model model;
    std::vector<double> v0Grid;
    std::vector<std::string> assumptions;
};

inline ResolvedConfig resolve(const SweepConfig& c, Command cmd) {
    ResolvedConfig r;
    r.raw = c;
    SweepConfig& f = r.raw;
    const bool responseStudy = cmd == Command::NuSweep || cmd == Command::Winding || cmd == Command::Flow;
    if (!f.N)
        f.N = 14;
    if (!f.g)
        f.g = 1.0;
    if (!f.tPrime && f.model == ModelKind::SSH) {
        f.tPrime = responseStudy ? 2.0 : 1.0;
    }
    if (responseStudy)
        r.assumptions.push_back(
            "reference-energy study without explicit lattice parameters; defaults N=14, g=1 (and t'=2 for SSH) "
            "are assumed");
    if (!f.v0) {
        switch (cmd) {
        case Command::IprSweep: f.v0 = parse_grid("log:1e-2:1e12:141", "v0"); break;
        case Command::NuSweep: f.v0 = parse_grid("log:1:1e12:301", "v0"); break;
        case Command::Flow: f.v0 = parse_grid("log:1e-3:1e12:301", "v0"); break;
        default: f.v0 = GridSpec{}; break;
        }
    }
    if (cmd == Command::GapScan && !f.tPrimeGrid)
        f.tPrimeGrid = parse_grid("lin:-3:3:600", "t_prime_grid");

    if (*f.N < 2)
        throw Error(ErrorKind::InvalidParameter, "n: must be >= 2");
    const int maxN = f.model == ModelKind::HN ? 64 : 32;
    if (*f.N > maxN)
        throw Error(ErrorKind::InvalidParameter, "n: above the supported maximum " + std::to_string(maxN));
    if (f.threads < 1 || f.threads > 256)
        throw Error(ErrorKind::InvalidInput, "threads: must be in [1, 256]");
    if (f.nK < 8)
        throw Error(ErrorKind::InvalidInput, "nk: must be >= 8");
    if (!(f.relStep > 0.0 && f.relStep < 1.0))
        throw Error(ErrorKind::InvalidInput, "rel_step: must be in (0, 1)");

    if (f.model == ModelKind::HN) {
        r.model = HNParams{*f.N, 1.0, *f.g, 0.0};
    } else {
        if (*f.tPrime == 0.0)
            throw Error(ErrorKind::InvalidParameter, "t_prime: must be nonzero");
        r.model = SSHParams{*f.N, 1.0, *f.tPrime, *f.g, 0.0};
    }
    validate(r.model);
    r.v0Grid = f.v0->values();
    const bool needsSingle = cmd == Command::Spectrum || cmd == Command::GapScan;
    if (needsSingle && f.v0->kind != GridSpec::Kind::Single)
        throw Error(ErrorKind::InvalidInput, std::string("v0: '") + to_string(cmd) + "' takes a single value");
    if ((cmd == Command::IprSweep || cmd == Command::NuSweep || cmd == Command::Flow) &&
        f.v0->kind == GridSpec::Kind::Single)
        throw Error(ErrorKind::InvalidInput, std::string("v0: '") + to_string(cmd) + "' needs a grid spec");
    if ((cmd == Command::NuSweep || cmd == Command::Winding) && !f.er)
        throw Error(ErrorKind::InvalidInput, "er: required for this command");
    return r;
}

/// Canonical JSON of the resolved configuration; its hash identifies a run.
inline json config_json(const ResolvedConfig& r, Command cmd) {
    const SweepConfig& f = r.raw;
    json j;
    j["command"] = to_string(cmd);
    j["model"] = to_string(f.model);
    j["n"] = *f.N;
    j["g"] = *f.g;
    if (f.model == ModelKind::SSH)
        j["t_prime"] = *f.tPrime;
    j["v0"] = f.v0->text();
    if (f.er)
        j["er"] = json::array({f.er->real(), f.er->imag()});
    if (f.tPrimeGrid)
        j["t_prime_grid"] = f.tPrimeGrid->text();
    j["element"] = to_string(f.element);
    j["include_bound"] = f.includeBound;
    j["nk"] = f.nK;
    j["rel_step"] = f.relStep;
    return j;
}

struct Metadata {
    std::vector<std::pair<std::string, std::string>> entries;
    void add(std::string k, std::string v) { entries.emplace_back(std::move(k), std::move(v)); }
};

inline Metadata base_metadata(const ResolvedConfig& r, Command cmd) {
    Metadata m;
    const std::string cfg = config_json(r, cmd).dump();
    m.add("tool", std::string("nhi-sweep ") + kToolVersion);
    m.add("command", to_string(cmd));
    m.add("config", cfg);
    m.add("config_hash", hex64(fnv1a(cfg)));
    for (const auto& a : r.assumptions)
        m.add("assumption", a);
    return m;
}

/// CSV with '#'-prefixed metadata lines above the header row.
class CsvWriter {
public:
    explicit CsvWriter(const Metadata& meta) {
        for (const auto& [k, v] : meta.entries)
            out_ << "# " << k << ": " << v << '\n';
    }
    void header(const std::vector<std::string>& cols) { row(cols); }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

inline std::string cell(double v) { return format_double(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "true" : "false"; }
inline std::string cell(const char* v) { return v; }

inline json json_document(const Metadata& meta, json result) {
    json m = json::object();
    for (const auto& [k, v] : meta.entries) {
        if (k == "config")
            m[k] = json::parse(v);
        else if (k == "assumption")
            m["assumptions"].push_back(v);
        else
            m[k] = v;
    }
    json doc;
    doc["metadata"] = m;
    doc["result"] = std::move(result);
    return doc;
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Output {
    std::string text;
    bool passed = true; ///< false only for a failing validate run
};

// ---------------------------------------------------------------------------
// Per-point evaluation shared by the commands.

struct PointSummary {
    double avgIpr = 0.0;
    SpectrumReport report;
    std::string solver;
};

inline PointSummary oracle_point(const Model& m, bool includeBound) {
    const LatticeMatrix lm = build_matrix(m);
    const auto dec = dense_eigensolve(lm, true);
    const cplx V0 = impurity(m);
    const int n = lm.dim();
    int boundIndex = -1;
    if (V0.imag() == 0.0 && V0.real() != 0.0) {
        boundIndex = 0;
        for (int i = 1; i < n; ++i)
            if (V0.real() > 0.0 ? dec.values(i).real() > dec.values(boundIndex).real()
                                : dec.values(i).real() < dec.values(boundIndex).real())
                boundIndex = i;
    }
    std::vector<cplx> e(n);
    std::vector<bool> bound(n, false);
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
        e[i] = dec.values(i);
        bound[i] = i == boundIndex;
        if (bound[i] && !includeBound)
            continue;
        sum += ipr(dec.vectors->col(i));
        ++count;
    }
    return {sum / count, classify_energies(e, bound), "oracle"};
}

inline PointSummary exact_point(const Model& m, bool includeBound) {
    if (const auto* hn = std::get_if<HNParams>(&m)) {
        try {
            const auto sol = solve_hn(*hn);
            return {average_ipr(sol.modes, includeBound), classify_spectrum(sol.modes), "exact"};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NumericalFailure)
                throw;
            return oracle_point(m, includeBound);
        }
    }
    const auto sol = solve_ssh_exact(std::get<SSHParams>(m));
    return {average_ipr(sol.modes, includeBound), classify_spectrum(sol.modes), sol.denseFallback ? "oracle" : "exact"};
}

// ---------------------------------------------------------------------------
// Commands

inline Output cmd_spectrum(const ResolvedConfig& r) {
    const Model m = with_impurity(r.model, r.v0Grid.front());
    Metadata meta = base_metadata(r, Command::Spectrum);
    struct Row {
        cplx E, theta;
        const char* cls;
        double ipr;
        const char* solver;
        double residual;
    };
    std::vector<Row> rows;
    std::vector<cplx> energies;
    if (const auto* hn = std::get_if<HNParams>(&m)) {
        try {
            const auto sol = solve_hn(*hn);
            for (const auto& w : sol.warnings)
                meta.add("warning", w);
            for (const auto& md : sol.modes) {
                rows.push_back({md.energy, md.root.theta, to_string(md.root.kind), ipr(md.amplitudes), "exact",
                                md.matrixResidual});
                energies.push_back(md.energy);
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NumericalFailure)
                throw;
            meta.add("warning", std::string("exact solver failed, oracle rows: ") + e.what());
        }
    } else {
        const auto sol = solve_ssh_exact(std::get<SSHParams>(m));
        for (const auto& w : sol.warnings)
            meta.add("warning", w);
        for (const auto& md : sol.modes) {
            CVector psi(2 * md.amplitudesA.size());
            for (Eigen::Index n = 0; n < md.amplitudesA.size(); ++n) {
                psi(2 * n) = md.amplitudesA(n);
                psi(2 * n + 1) = md.amplitudesB(n);
            }
            rows.push_back({md.energy, md.theta, to_string(md.kind), ipr(psi), md.fromOracle ? "oracle" : "exact",
                            md.residual});
            energies.push_back(md.energy);
        }
    }
    const LatticeMatrix lm = build_matrix(m);
    const auto dec = dense_eigensolve(lm, rows.empty());
    if (rows.empty()) {
        for (Eigen::Index i = 0; i < dec.values.size(); ++i) {
            const cplx E = dec.values(i);
            rows.push_back({E, cplx(std::nan(""), std::nan("")), "bulk", ipr(dec.vectors->col(i)), "oracle",
                            dec.maxResidual});
        }
    } else {
        meta.add("oracle_max_distance", format_double(match_spectra(energies, to_std(dec.values)).maxDistance));
    }
    CsvWriter csv(meta);
    csv.header({"index", "re_e", "im_e", "re_theta", "im_theta", "class", "ipr", "solver", "residual"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& x = rows[i];
        csv.row({cell(static_cast<int>(i)), cell(x.E.real()), cell(x.E.imag()), cell(x.theta.real()),
                 cell(x.theta.imag()), x.cls, cell(x.ipr), x.solver, cell(x.residual)});
    }
    return {csv.str()};
}

inline double closed_form_critical(const Model& m) {
    return std::visit(
        [](const auto& p) {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HNParams>)
                return critical_v0_hn(p.N, p.g);
            else
                return critical_v0_ssh(p.N, p.g, p.tPrime);
        },
        m);
}

inline Output cmd_ipr_sweep(const ResolvedConfig& r) {
    Metadata meta = base_metadata(r, Command::IprSweep);
    const double crit = closed_form_critical(r.model);
    const auto points = parallel_map(r.v0Grid.size(), r.raw.threads, [&](std::size_t i) {
        return exact_point(with_impurity(r.model, r.v0Grid[i]), r.raw.includeBound);
    });
    CsvWriter csv(meta);
    csv.header({"v0", "avg_ipr", "n_real", "fully_real", "max_imag_abs", "critical_closed_form", "solver"});
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        csv.row({cell(r.v0Grid[i]), cell(p.avgIpr), cell(p.report.nReal), cell(p.report.fullyReal),
                 cell(p.report.maxImagAbs), cell(crit), p.solver});
    }
    return {csv.str()};
}

inline Output cmd_critical(const ResolvedConfig& r) {
    Metadata meta = base_metadata(r, Command::Critical);
    const double g = *r.raw.g;
    if (g == 0.0)
        throw Error(ErrorKind::InvalidParameter, "g must be nonzero");
    json res;
    const double closed = closed_form_critical(r.model);
    res["closed_form"] = closed;
    if (const auto* hn = std::get_if<HNParams>(&r.model)) {
        const auto ex = exact_critical_v0(hn->N, hn->g);
        res["exact"] = ex.value;
        res["exact_bracket"] = json::array({ex.lower, ex.upper});
        res["ratio_exact_to_closed_form"] = ex.value / closed;
    } else {
        res["exact"] = nullptr;
    }
    try {
        const auto b = oracle_full_realness_threshold(r.model, closed * 1e-3, closed * 2.0);
        res["oracle_realness_bracket"] = json::array({b.lower, b.upper});
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NumericalFailure)
            throw;
        res["oracle_realness_bracket"] = nullptr;
        meta.add("warning", e.what());
    }
    return {json_document(meta, res).dump(2) + "\n"};
}

inline Output cmd_gap_scan(const ResolvedConfig& r) {
    if (r.raw.model != ModelKind::SSH)
        throw Error(ErrorKind::InvalidInput, "gap-scan: requires --model ssh");
    Metadata meta = base_metadata(r, Command::GapScan);
    SSHParams base = std::get<SSHParams>(r.model);
    base.V0 = r.v0Grid.front();
    const auto scan = gap_scan(base, r.raw.tPrimeGrid->values(), r.raw.threads);
    CsvWriter csv(meta);
    csv.header({"kind", "t_prime", "min_abs_e", "closing", "zero_mode_excluded"});
    for (const auto& row : scan.rows)
        csv.row({"grid", cell(row.tPrime), cell(row.minAbsE), cell(row.closing), cell(row.zeroModeExcluded)});
    for (const auto& mn : scan.minima) {
        SSHParams p = base;
        p.tPrime = mn.tPrime;
        csv.row({"minimum", cell(mn.tPrime), cell(mn.minAbsE), cell(mn.closing), cell(chiral_zero_mode_excluded(p))});
    }
    return {csv.str()};
}

inline Output cmd_winding(const ResolvedConfig& r) {
    Metadata meta = base_metadata(r, Command::Winding);
    const auto w = pbc_winding(r.model, *r.raw.er, r.raw.nK);
    json res;
    res["er"] = json::array({w.Er.real(), w.Er.imag()});
    res["winding"] = w.winding;
    res["raw_winding"] = w.rawWinding;
    res["nk_used"] = w.nKUsed;
    return {json_document(meta, res).dump(2) + "\n"};
}

inline Output cmd_nu_sweep(const ResolvedConfig& r) {
    Metadata meta = base_metadata(r, Command::NuSweep);
    const auto s = nu_sweep(r.model, *r.raw.er, r.v0Grid, r.raw.threads, r.raw.element, r.raw.relStep);
    meta.add("element", to_string(s.element));
    meta.add("vc_closed_form", format_double(s.vcClosedForm.real()) + "," + format_double(s.vcClosedForm.imag()));
    meta.add("vc_abs", format_double(std::abs(s.vcClosedForm)));
    meta.add("jump_v0", format_double(s.jumpV0));
    meta.add("ill_conditioned_points", std::to_string(s.failedPoints));
    CsvWriter csv(meta);
    csv.header({"v0", "re_nu", "im_nu"});
    for (std::size_t i = 0; i < s.v0Grid.size(); ++i)
        csv.row({cell(s.v0Grid[i]), cell(s.nuValues[i].real()), cell(s.nuValues[i].imag())});
    return {csv.str()};
}

inline Output cmd_flow(const ResolvedConfig& r) {
    Metadata meta = base_metadata(r, Command::Flow);
    std::vector<double> grid{0.0};
    grid.insert(grid.end(), r.v0Grid.begin(), r.v0Grid.end());
    const auto flow = spectral_flow(r.model, grid, r.raw.threads);
    std::string amb;
    for (std::size_t i = 0; i < flow.ambiguities.size(); ++i)
        amb += (i ? ";" : "") + format_double(flow.ambiguities[i]);
    meta.add("branch_ambiguities", amb.empty() ? "none" : amb);
    CsvWriter csv(meta);
    csv.header({"v0", "track", "re_e", "im_e"});
    for (std::size_t i = 0; i < flow.v0Grid.size(); ++i)
        for (std::size_t k = 0; k < flow.energies[i].size(); ++k)
            csv.row({cell(flow.v0Grid[i]), cell(static_cast<int>(k)), cell(flow.energies[i][k].real()),
                     cell(flow.energies[i][k].imag())});
    return {csv.str()};
}

// ---------------------------------------------------------------------------
// Oracle-equivalence suite

struct EquivalenceCheck {
    int N = 0;
    double g = 0.0;
    double V0 = 0.0;
    double maxDistance = 0.0;
    double minOverlap = 1.0;
    double traceError = 0.0;     ///< |sum E - V0| / max(1, |V0|)
    double conjugationGap = 0.0; ///< matched distance between the spectrum and its conjugate
    bool passed = false;
};

/// Exact HN eigensystem against the dense oracle at one point.
inline EquivalenceCheck check_hn_equivalence(int N, double g, double V0) {
    EquivalenceCheck c;
    c.N = N;
    c.g = g;
    c.V0 = V0;
    const HNParams p{N, 1.0, g, V0};
    const auto sol = solve_hn(p);
    const auto dec = dense_eigensolve(build_hn_matrix(p), true);
    std::vector<cplx> exact;
    for (const auto& m : sol.modes)
        exact.push_back(m.energy);
    const auto oracle = to_std(dec.values);
    const auto match = match_spectra(exact, oracle);
    c.maxDistance = match.maxDistance;
    cplx sum = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        sum += exact[i];
        const CVector a = sol.modes[i].amplitudes;
        const CVector b = dec.vectors->col(match.pairing[i]);
        c.minOverlap = std::min(c.minOverlap, std::abs(a.dot(b)));
    }
    c.traceError = std::abs(sum - V0) / std::max(1.0, std::abs(V0));
    std::vector<cplx> conj(exact.size());
    std::transform(exact.begin(), exact.end(), conj.begin(), [](cplx z) { return std::conj(z); });
    c.conjugationGap = match_spectra(exact, conj).maxDistance;
    // The conjugation gap is compared relative to the spectral scale.
    const double scale = std::max(1.0, std::abs(V0));
    c.passed = c.maxDistance < 1e-7 && c.minOverlap > 1.0 - 1e-6 && c.traceError < 1e-6 &&
               c.conjugationGap <= 1e-9 * scale;
    return c;
}

inline std::vector<EquivalenceCheck> default_equivalence_suite(int threads = 1) {
    struct Point {
        int N;
        double g;
        double V0;
    };
    std::vector<Point> pts;
    for (int N : {6, 10, 14})
        for (double g : {0.3, 1.0}) {
            const double c = critical_v0_hn(N, g);
            for (double V0 : {0.5, 50.0, c, 10.0 * c})
                pts.push_back({N, g, V0});
        }
    return parallel_map(pts.size(), threads,
                        [&](std::size_t i) { return check_hn_equivalence(pts[i].N, pts[i].g, pts[i].V0); });
}

inline Output cmd_validate(const ResolvedConfig& r) {
    Metadata meta = base_metadata(r, Command::Validate);
    const auto checks = default_equivalence_suite(r.raw.threads);
    json points = json::array();
    bool all = true;
    double worst = 0.0;
    for (const auto& c : checks) {
        all = all && c.passed;
        worst = std::max(worst, c.maxDistance);
        json j;
        j["n"] = c.N;
        j["g"] = c.g;
        j["v0"] = c.V0;
        j["max_distance"] = c.maxDistance;
        j["min_overlap"] = c.minOverlap;
        j["trace_error"] = c.traceError;
        j["conjugation_gap"] = c.conjugationGap;
        j["passed"] = c.passed;
        points.push_back(j);
    }
    json res;
    res["passed"] = all;
    res["max_eigenvalue_distance"] = worst;
    res["points"] = points;
    return {json_document(meta, res).dump(2) + "\n", all};
}

inline Output run(Command cmd, const SweepConfig& cfg) {
    const ResolvedConfig r = resolve(cfg, cmd);
    switch (cmd) {
    case Command::Spectrum: return cmd_spectrum(r);
    case Command::IprSweep: return cmd_ipr_sweep(r);
    case Command::Critical: return cmd_critical(r);
    case Command::GapScan: return cmd_gap_scan(r);
    case Command::Winding: return cmd_winding(r);
    case Command::NuSweep: return cmd_nu_sweep(r);
    case Command::Flow: return cmd_flow(r);
    case Command::Validate: return cmd_validate(r);
    }
    throw Error(ErrorKind::InvalidInput, "unknown command");
}

/// 1 for input/parameter errors, 2 for numerical failures.
inline int exit_code(ErrorKind k) {
    return (k == ErrorKind::InvalidParameter || k == ErrorKind::InvalidInput) ? 1 : 2;
}

inline std::string error_json(const Error& e) {
    json j;
    j["error"] = to_string(e.kind());
    j["message"] = e.what();
    j["value"] = number_or_null(e.value());
    return j.dump();
}

} // namespace nhi::sweep
