#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eigen_fixedpoint.hpp"
#include "eigen_operator.hpp"
#include "error.hpp"
#include "params.hpp"
#include "profile.hpp"

namespace plasmid {

using json = nlohmann::json;

struct NamedKernel {
    std::string name;
    Phi phi;
};

struct InitialData {
    std::string kind = "bump";  // bump: z^p (z0 - z)^p; box: indicator of [lo, hi]; tabulated
    double p = 2.0;
    double lo = 0.3, hi = 0.6;
    std::vector<double> z, values;

    // Unnormalized density on [0, z0].
    double operator()(double x, double z0) const {
        if (kind == "box") return x >= lo && x <= hi ? 1.0 : 0.0;
        if (kind == "tabulated") {
            if (x <= z.front() || x >= z.back()) return 0.0;
            auto it = std::upper_bound(z.begin(), z.end(), x);
            const std::size_t k = static_cast<std::size_t>(it - z.begin()) - 1;
            const double s = (x - z[k]) / (z[k + 1] - z[k]);
            return (1.0 - s) * values[k] + s * values[k + 1];
        }
        if (x <= 0.0 || x >= z0) return 0.0;
        return std::pow(x, p) * std::pow(z0 - x, p);
    }
};

struct PdeConfig {
    std::size_t cells = 512;
    double t_end = 60.0;
    double window = 0.25;
    double variance_tol = 1e-6;
    std::size_t stride = 0;
    InitialData initial{};
};

// Refinement study h = cutoff / n for each threshold n. The study cutoff
// defaults to the model's m; tiny m makes the bin count explode.
struct DiscreteConfig {
    double cutoff = 0.0;
    std::vector<double> n{5, 10, 20};
    double t_end = 2.0;
    std::size_t reference_cells = 2048;
    std::size_t stride = 0;
    InitialData initial{};
};

struct CompareConfig {
    double lambda_tol = 0.02;
    double profile_tol = 0.05;
    double lo = 0.01, hi = 0.95;
    double ratio_lo = 1.6, ratio_hi = 2.4;
    bool discrete = true;
};

struct OutputConfig {
    std::string dir = "out";
    std::size_t samples = 400;
    double normalization_lower = 0.005;
};

struct RunConfig {
    json canonical;  // fully expanded configuration, hashed into every output
    ModelParameters params;
    std::vector<NamedKernel> kernels;
    FixedPointConfig fixedpoint;
    OperatorOptions op;
    std::size_t spectrum_cells = 256;
    PdeConfig pde;
    DiscreteConfig discrete;
    CompareConfig compare;
    OutputConfig output;

    ModelParameters params_for(const NamedKernel& k) const {
        return params.with_kernel(SegregationKernel(k.phi, params.m(), params.z0(), params.kernel().allow_oracle_kernel()));
    }
};

// FNV-1a over the compact dump of the canonical config.
inline std::string config_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Two-column CSV (z, value); '#' lines and a non-numeric header are skipped.
inline std::pair<std::vector<double>, std::vector<double>> read_two_column_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ConfigError, "cannot open table " + path.string());
    std::vector<double> x, y;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a, b;
        if (!(ss >> a >> b)) {
            if (x.empty()) continue;  // header
            fail(ErrorKind::ConfigError, path.string() + ":" + std::to_string(lineno) + ": expected two numbers");
        }
        if (!x.empty() && !(a > x.back()))
            fail(ErrorKind::ConfigError, path.string() + ": first column must be strictly increasing");
        x.push_back(a);
        y.push_back(b);
    }
    if (x.size() < 2) fail(ErrorKind::ConfigError, path.string() + ": need at least two rows");
    return {x, y};
}

namespace detail {

class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail(ErrorKind::ConfigError, where_ + " must be an object");
    }
    ~Reader() = default;

    bool has(const std::string& k) const { return j_.contains(k); }

    double number(const std::string& k, double def, double lo = -1e300, double hi = 1e300) {
        seen_.insert(k);
        if (!j_.contains(k)) return def;
        if (!j_[k].is_number()) fail(ErrorKind::ConfigError, where_ + "." + k + " must be a number");
        const double v = j_[k].get<double>();
        if (!(v >= lo && v <= hi))
            fail(ErrorKind::ConfigError, where_ + "." + k + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return v;
    }
    std::size_t count(const std::string& k, std::size_t def, std::size_t lo, std::size_t hi) {
        const double v = number(k, static_cast<double>(def), static_cast<double>(lo), static_cast<double>(hi));
        if (v != std::floor(v)) fail(ErrorKind::ConfigError, where_ + "." + k + " must be an integer");
        return static_cast<std::size_t>(v);
    }
    std::string string(const std::string& k, const std::string& def) {
        seen_.insert(k);
        if (!j_.contains(k)) return def;
        if (!j_[k].is_string()) fail(ErrorKind::ConfigError, where_ + "." + k + " must be a string");
        return j_[k].get<std::string>();
    }
    bool boolean(const std::string& k, bool def) {
        seen_.insert(k);
        if (!j_.contains(k)) return def;
        if (!j_[k].is_boolean()) fail(ErrorKind::ConfigError, where_ + "." + k + " must be true or false");
        return j_[k].get<bool>();
    }
    std::vector<double> numbers(const std::string& k, std::vector<double> def) {
        seen_.insert(k);
        if (!j_.contains(k)) return def;
        if (!j_[k].is_array()) fail(ErrorKind::ConfigError, where_ + "." + k + " must be an array");
        std::vector<double> out;
        for (const auto& e : j_[k]) {
            if (!e.is_number()) fail(ErrorKind::ConfigError, where_ + "." + k + " must hold numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    const json& child(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k) ? j_[k] : empty();
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(ErrorKind::ConfigError, "unknown key " + where_ + "." + it.key());
    }
    const std::string& where() const { return where_; }

private:
    static const json& empty() {
        static const json e = json::object();
        return e;
    }
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline std::pair<std::vector<double>, std::vector<double>> table_from(Reader& r, const std::filesystem::path& base) {
    if (r.has("file")) {
        const std::string f = r.string("file", "");
        std::filesystem::path p(f);
        if (p.is_relative()) p = base / p;
        return read_two_column_csv(p);
    }
    auto x = r.numbers("z", {});
    auto y = r.numbers("values", {});
    if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::ConfigError, r.where() + ": z and values must match, n >= 2");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) fail(ErrorKind::ConfigError, r.where() + ".z must be strictly increasing");
    return {x, y};
}

inline RateFunction parse_rate(const json& j, const std::string& where, double z0, const std::filesystem::path& base) {
    Reader r(j, where);
    const std::string kind = r.string("kind", "");
    RateFunction out = RateFunction::constant(0.0);
    if (kind == "constant") {
        out = RateFunction::constant(r.number("value", 0.0, 0.0));
    } else if (kind == "logistic") {
        out = RateFunction::logistic(r.number("b0", 1.0, 1e-12), z0);
    } else if (kind == "polynomial") {
        out = RateFunction::polynomial(r.numbers("coeffs", {}));
    } else if (kind == "tabulated") {
        auto [x, y] = table_from(r, base);
        out = RateFunction::tabulated(std::move(x), std::move(y));
    } else {
        fail(ErrorKind::ConfigError, where + ".kind must be constant, logistic, polynomial or tabulated");
    }
    r.finish();
    return out;
}

inline Phi parse_phi(const json& j, const std::string& where, const std::filesystem::path& base) {
    Reader r(j, where);
    const std::string kind = r.string("kind", "");
    std::optional<Phi> out;
    try {
        if (kind == "uniform")
            out = Phi::uniform();
        else if (kind == "symmetric_beta")
            out = Phi::symmetric_beta(r.number("a", 2.0));
        else if (kind == "bimodal")
            out = Phi::bimodal(r.number("p", 0.8), r.number("w", 0.15));
        else if (kind == "tabulated") {
            auto [x, y] = table_from(r, base);
            out = Phi::tabulated(std::move(x), std::move(y));
        } else
            fail(ErrorKind::ConfigError, where + ".kind must be uniform, symmetric_beta, bimodal or tabulated");
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::DomainError) fail(ErrorKind::ConfigError, where + ": " + e.what());
        throw;
    }
    r.finish();
    return *out;
}

inline InitialData parse_initial(const json& j, const std::string& where, InitialData def, const std::filesystem::path& base) {
    if (j.empty()) return def;
    Reader r(j, where);
    InitialData d;
    d.kind = r.string("kind", def.kind);
    if (d.kind == "bump") {
        d.p = r.number("p", def.p, 0.0, 50.0);
    } else if (d.kind == "box") {
        d.lo = r.number("lo", def.lo, 0.0);
        d.hi = r.number("hi", def.hi, 0.0);
        if (!(d.hi > d.lo)) fail(ErrorKind::ConfigError, where + ": need lo < hi");
    } else if (d.kind == "tabulated") {
        auto [x, y] = table_from(r, base);
        for (double v : y)
            if (v < 0.0) fail(ErrorKind::ConfigError, where + ": initial data must be nonnegative");
        d.z = std::move(x);
        d.values = std::move(y);
    } else {
        fail(ErrorKind::ConfigError, where + ".kind must be bump, box or tabulated");
    }
    r.finish();
    return d;
}

}  // namespace detail

// Figure-1 parameters: beta = 0.4, mu = 0.1, b = z(1 - z), m = 0.005 and
// three kernels.
inline json fig1_preset() {
    return json::parse(R"({
      "model": {
        "z0": 1.0, "m": 0.005, "allow_oracle_kernel": true,
        "b": {"kind": "logistic", "b0": 1.0},
        "beta": {"kind": "constant", "value": 0.4},
        "mu": {"kind": "constant", "value": 0.1},
        "kernels": [
          {"name": "uniform", "phi": {"kind": "uniform"}},
          {"name": "unimodal", "phi": {"kind": "symmetric_beta", "a": 4}},
          {"name": "bimodal", "phi": {"kind": "bimodal", "p": 0.8, "w": 0.15}}
        ]
      },
      "solver": {"discrete": {"m": 0.1}}
    })");
}

// Merge `over` into `base` recursively. Objects merge unless the override
// names its own "kind"; everything else replaces.
inline void merge_into(json& base, const json& over) {
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object() && !it.value().contains("kind"))
            merge_into(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

inline RunConfig parse_config(json j, const std::filesystem::path& base = ".", const std::string& preset = "") {
    if (!j.is_object()) fail(ErrorKind::ConfigError, "config must be a JSON object");
    std::string pre = preset;
    if (j.contains("preset")) {
        if (!j["preset"].is_string()) fail(ErrorKind::ConfigError, "preset must be a string");
        if (pre.empty()) pre = j["preset"].get<std::string>();
        j.erase("preset");
    }
    if (!pre.empty()) {
        if (pre != "fig1") fail(ErrorKind::ConfigError, "unknown preset '" + pre + "'");
        json full = fig1_preset();
        merge_into(full, j);
        j = std::move(full);
    }

    detail::Reader top(j, "config");
    detail::Reader model(top.child("model"), "model");
    const double z0 = model.number("z0", 1.0, 1e-12);
    const double m = model.number("m", 0.005);
    const double eps = model.number("epsilon", 0.0, 0.0);
    const bool oracle = model.boolean("allow_oracle_kernel", false);
    if (!model.has("b") || !model.has("beta") || !model.has("mu"))
        fail(ErrorKind::ConfigError, "model needs b, beta and mu");
    RateFunction b = detail::parse_rate(model.child("b"), "model.b", z0, base);
    RateFunction beta = detail::parse_rate(model.child("beta"), "model.beta", z0, base);
    RateFunction mu = detail::parse_rate(model.child("mu"), "model.mu", z0, base);

    std::vector<NamedKernel> kernels;
    if (model.has("kernels")) {
        const json& ks = model.child("kernels");
        if (!ks.is_array() || ks.empty()) fail(ErrorKind::ConfigError, "model.kernels must be a non-empty array");
        std::set<std::string> names;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const std::string where = "model.kernels[" + std::to_string(i) + "]";
            detail::Reader kr(ks[i], where);
            NamedKernel k{kr.string("name", "kernel" + std::to_string(i)), detail::parse_phi(kr.child("phi"), where + ".phi", base)};
            kr.finish();
            if (k.name.empty() || k.name.find_first_of("/\\ ") != std::string::npos || !names.insert(k.name).second)
                fail(ErrorKind::ConfigError, where + ".name must be unique and file-name safe");
            kernels.push_back(std::move(k));
        }
    }
    if (model.has("kernel")) {
        if (!kernels.empty()) fail(ErrorKind::ConfigError, "give either model.kernel or model.kernels");
        kernels.push_back({"kernel", detail::parse_phi(model.child("kernel"), "model.kernel", base)});
    }
    if (kernels.empty()) fail(ErrorKind::ConfigError, "model needs a kernel");
    model.finish();

    // DomainError (m >= z0 and friends) propagates unchanged.
    ModelParameters params(b, beta, mu, SegregationKernel(kernels.front().phi, m, z0, oracle), eps);

    RunConfig cfg{json{}, params, kernels, {}, {}, 256, {}, {}, {}, {}};
    detail::Reader solver(top.child("solver"), "solver");
    {
        detail::Reader r(solver.child("fixedpoint"), "solver.fixedpoint");
        cfg.fixedpoint.inner_tol = r.number("inner_tol", 1e-6, 1e-15, 1.0);
        cfg.fixedpoint.inner_max_iter = r.count("inner_max_iter", 100, 1, 100000);
        cfg.fixedpoint.outer_max_steps = r.count("outer_max_steps", 1000, 1, 1000000);
        cfg.fixedpoint.min_samples = r.count("min_samples", 16, 4, 100000);
        cfg.fixedpoint.alpha = r.number("alpha", 0.0, 0.0);
        r.finish();
    }
    {
        detail::Reader r(solver.child("operator"), "solver.operator");
        cfg.op.cells = r.count("cells", 512, 8, 2048);
        cfg.op.epsilon_schedule = r.numbers("epsilon_schedule", {1e-2, 1e-3, 1e-4});
        if (cfg.op.epsilon_schedule.size() < 2) fail(ErrorKind::ConfigError, "solver.operator.epsilon_schedule needs >= 2 values");
        for (std::size_t i = 0; i < cfg.op.epsilon_schedule.size(); ++i)
            if (!(cfg.op.epsilon_schedule[i] > 0.0) || (i > 0 && !(cfg.op.epsilon_schedule[i] < cfg.op.epsilon_schedule[i - 1])))
                fail(ErrorKind::ConfigError, "solver.operator.epsilon_schedule must be positive and decreasing");
        cfg.op.lambda_tol = r.number("lambda_tol", 1e-8, 1e-14, 1e-2);
        r.finish();
    }
    {
        detail::Reader r(solver.child("spectrum"), "solver.spectrum");
        cfg.spectrum_cells = r.count("cells", 256, 8, 2048);
        r.finish();
    }
    {
        detail::Reader r(solver.child("pde"), "solver.pde");
        cfg.pde.cells = r.count("cells", 512, 8, 8192);
        cfg.pde.t_end = r.number("t_end", 60.0, 0.0, 1e6);
        cfg.pde.window = r.number("window", 0.25, 1e-3, 1.0);
        cfg.pde.variance_tol = r.number("variance_tol", 1e-6, 0.0);
        cfg.pde.stride = r.count("stride", 0, 0, 100000000);
        cfg.pde.initial = detail::parse_initial(r.child("initial"), "solver.pde.initial", cfg.pde.initial, base);
        r.finish();
    }
    {
        detail::Reader r(solver.child("discrete"), "solver.discrete");
        cfg.discrete.cutoff = r.number("m", m, 1e-12, z0);
        if (!(cfg.discrete.cutoff < z0)) fail(ErrorKind::DomainError, "solver.discrete.m must be below z0");
        cfg.discrete.n = r.numbers("n", cfg.discrete.n);
        if (cfg.discrete.n.empty()) fail(ErrorKind::ConfigError, "solver.discrete.n must not be empty");
        for (double n : cfg.discrete.n)
            if (!(n >= 2.0) || n != std::floor(n) || n * z0 / cfg.discrete.cutoff > 20000.0)
                fail(ErrorKind::ConfigError, "solver.discrete.n entries must be integers >= 2 with z0 n / m <= 20000");
        cfg.discrete.t_end = r.number("t_end", 2.0, 0.0, 1e6);
        cfg.discrete.reference_cells = r.count("reference_cells", 2048, 8, 8192);
        cfg.discrete.stride = r.count("stride", 0, 0, 100000000);
        cfg.discrete.initial = detail::parse_initial(r.child("initial"), "solver.discrete.initial", cfg.discrete.initial, base);
        r.finish();
    }
    solver.finish();
    {
        detail::Reader r(top.child("compare"), "compare");
        cfg.compare.lambda_tol = r.number("lambda_tol", 0.02, 0.0);
        cfg.compare.profile_tol = r.number("profile_tol", 0.05, 0.0);
        cfg.compare.lo = r.number("lo", 0.01, 0.0, z0);
        cfg.compare.hi = r.number("hi", 0.95 * z0, 0.0, z0);
        cfg.compare.ratio_lo = r.number("ratio_lo", 1.6);
        cfg.compare.ratio_hi = r.number("ratio_hi", 2.4);
        cfg.compare.discrete = r.boolean("discrete", true);
        if (!(cfg.compare.hi > cfg.compare.lo)) fail(ErrorKind::ConfigError, "compare.lo must be below compare.hi");
        r.finish();
    }
    {
        detail::Reader r(top.child("output"), "output");
        cfg.output.dir = r.string("dir", "out");
        cfg.output.samples = r.count("samples", 400, 2, 1000000);
        cfg.output.normalization_lower = r.number("normalization_lower", 0.005, 0.0, z0);
        r.finish();
    }
    top.finish();
    cfg.fixedpoint.normalization_lower = std::max(cfg.output.normalization_lower, m);
    cfg.op.normalization_lower = cfg.output.normalization_lower;
    cfg.canonical = std::move(j);
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path, const std::string& preset = "") {
    if (path.empty()) {
        if (preset.empty()) fail(ErrorKind::ConfigError, "need --config or --preset");
        return parse_config(json::object(), ".", preset);
    }
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ConfigError, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigError, "invalid JSON in " + path.string() + ": " + e.what());
    }
    return parse_config(std::move(j), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path(), preset);
}

}  // namespace plasmid
