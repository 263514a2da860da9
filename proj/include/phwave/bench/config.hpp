#pragma once

#include "phwave/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace phwave::bench {

/// Parameters of the two-oscillator Duffing/linear benchmark. Defaults are the `table1` profile.
struct BenchmarkConfig {
    double m1 = 8.0;
    double m2 = 4.0;
    double k1 = 100.0;
    double k2 = 50.0;
    double k12 = 120.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c12 = 0.05;
    double k_nl = 8000.0;
    double q1_0 = 0.4;
    double q2_0 = 0.0;
    double v1_0 = 0.0;
    double v2_0 = 0.0;
    double dt = 0.01;
    double T = 10.0;
    double gamma = 0.4;
    std::vector<int> budgets{0, 3, 8, 20, 35, 50};
    double eps = 1e-12;
    std::uint64_t seed = 20260116;

    long steps() const { return std::lround(T / dt); }

    void validate() const {
        auto positive = [](double v, const char* name) {
            require(std::isfinite(v) && v > 0.0, std::string("config: ") + name + " must be positive");
        };
        auto non_negative = [](double v, const char* name) {
            require(std::isfinite(v) && v >= 0.0, std::string("config: ") + name + " must be non-negative");
        };
        positive(m1, "m1");
        positive(m2, "m2");
        positive(k1, "k1");
        positive(k2, "k2");
        positive(k12, "k12");
        positive(dt, "dt");
        positive(T, "T");
        positive(gamma, "gamma");
        positive(eps, "eps");
        non_negative(c1, "c1");
        non_negative(c2, "c2");
        non_negative(c12, "c12");
        non_negative(k_nl, "k_nl");
        for (double v : {q1_0, q2_0, v1_0, v2_0}) require(std::isfinite(v), "config: initial data must be finite");
        require(!budgets.empty(), "config: budgets must be non-empty");
        for (int k : budgets) require(k >= 0, "config: budgets must be non-negative");
        require(std::abs(static_cast<double>(steps()) * dt - T) <= 1e-9 * T,
                "config: T must be an integer multiple of dt");
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ContractViolation("config: '" + key + "' expects a number, got '" + value + "'");
    }
    if (used != value.size()) throw ContractViolation("config: '" + key + "' has trailing text: '" + value + "'");
    return v;
}

inline std::vector<int> parse_budgets(const std::string& value) {
    std::vector<int> out;
    std::string token;
    std::istringstream in(value);
    while (std::getline(in, token, ',')) {
        std::istringstream words(token);
        std::string w;
        while (words >> w) {
            std::size_t used = 0;
            int k = 0;
            try {
                k = std::stoi(w, &used);
            } catch (const std::exception&) {
                throw ContractViolation("config: budgets expects integers, got '" + w + "'");
            }
            if (used != w.size()) throw ContractViolation("config: budgets expects integers, got '" + w + "'");
            out.push_back(k);
        }
    }
    return out;
}

}  // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are rejected.
inline BenchmarkConfig parse_config(std::string_view text) {
    BenchmarkConfig cfg;
    std::map<std::string, double*> scalars{
        {"m1", &cfg.m1},     {"m2", &cfg.m2},     {"k1", &cfg.k1},     {"k2", &cfg.k2},
        {"k12", &cfg.k12},   {"c1", &cfg.c1},     {"c2", &cfg.c2},     {"c12", &cfg.c12},
        {"k_nl", &cfg.k_nl}, {"q1_0", &cfg.q1_0}, {"q2_0", &cfg.q2_0}, {"v1_0", &cfg.v1_0},
        {"v2_0", &cfg.v2_0}, {"dt", &cfg.dt},     {"T", &cfg.T},       {"gamma", &cfg.gamma},
        {"eps", &cfg.eps},
    };
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ContractViolation("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        if (auto it = scalars.find(key); it != scalars.end()) {
            *it->second = detail::parse_double(key, value);
        } else if (key == "budgets") {
            cfg.budgets = detail::parse_budgets(value);
        } else if (key == "seed") {
            try {
                cfg.seed = std::stoull(value);
            } catch (const std::exception&) {
                throw ContractViolation("config: seed expects an unsigned integer, got '" + value + "'");
            }
        } else {
            throw ContractViolation("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

/// Canonical text form; parse_config(to_text(c)) reproduces c exactly.
inline std::string to_text(const BenchmarkConfig& c) {
    using detail::format_double;
    std::ostringstream out;
    out << "m1 = " << format_double(c.m1) << "\n"
        << "m2 = " << format_double(c.m2) << "\n"
        << "k1 = " << format_double(c.k1) << "\n"
        << "k2 = " << format_double(c.k2) << "\n"
        << "k12 = " << format_double(c.k12) << "\n"
        << "c1 = " << format_double(c.c1) << "\n"
        << "c2 = " << format_double(c.c2) << "\n"
        << "c12 = " << format_double(c.c12) << "\n"
        << "k_nl = " << format_double(c.k_nl) << "\n"
        << "q1_0 = " << format_double(c.q1_0) << "\n"
        << "q2_0 = " << format_double(c.q2_0) << "\n"
        << "v1_0 = " << format_double(c.v1_0) << "\n"
        << "v2_0 = " << format_double(c.v2_0) << "\n"
        << "dt = " << format_double(c.dt) << "\n"
        << "T = " << format_double(c.T) << "\n"
        << "gamma = " << format_double(c.gamma) << "\n"
        << "budgets = ";
    for (std::size_t i = 0; i < c.budgets.size(); ++i) out << (i ? ", " : "") << c.budgets[i];
    out << "\neps = " << format_double(c.eps) << "\n"
        << "seed = " << c.seed << "\n";
    return out.str();
}

/// FNV-1a over the canonical text.
inline std::uint64_t config_hash(const BenchmarkConfig& c) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : to_text(c)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

/// Shipped profile names resolve without touching the filesystem.
inline bool is_builtin_profile(std::string_view name) { return name == "table1"; }

/// Loads `table1` or a config file. Throws std::runtime_error naming the path when unreadable.
inline BenchmarkConfig load_config(const std::string& path_or_profile) {
    if (is_builtin_profile(path_or_profile)) return BenchmarkConfig{};
    std::ifstream in(path_or_profile);
    if (!in) throw std::runtime_error("cannot open config file '" + path_or_profile + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace phwave::bench
