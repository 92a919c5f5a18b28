#pragma once

// Field files: CSV with header `t,x1[,x2],value`, row-major by time then node.
// Readers validate rectangularity against the expected grid and reject
// anything that does not match it exactly.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "grid.hpp"

namespace hjlab {

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, int lineno) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("CSV: bad number '" + s + "' at line " + std::to_string(lineno));
    }
}

}  // namespace detail

inline void write_scalar_csv(const ScalarField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const GridSpec& g = f.grid();
    out << (g.d == 1 ? "t,x1,value\n" : "t,x1,x2,value\n");
    for (int k = 0; k < g.nt; ++k) {
        double t = g.time(k);
        for (int n = 0; n < g.npoints(); ++n) {
            Vec x = g.point(n);
            out << detail::fmt_double(t) << ',' << detail::fmt_double(x[0]);
            if (g.d == 2) out << ',' << detail::fmt_double(x[1]);
            out << ',' << detail::fmt_double(f.at(k, n)) << '\n';
        }
    }
}

// Read a full space-time field laid out exactly on `g`. Coordinates must
// match the grid nodes row-major by time then node.
inline ScalarField read_scalar_csv(const std::string& path, const GridSpec& g) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("CSV: empty file " + path);
    auto header = detail::split_csv_line(line);
    size_t expected_cols = static_cast<size_t>(g.d) + 2;
    if (header.size() != expected_cols)
        throw std::runtime_error("CSV: header of " + path + " does not match grid dimension");

    ScalarField f(g);
    const double tol_t = 1e-9 * std::max(1.0, std::abs(g.t_hi));
    const double tol_x = 1e-9 * std::max(1.0, std::abs(g.x_hi[0]) + std::abs(g.x_lo[0]));
    long row = 0;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cols = detail::split_csv_line(line);
        if (cols.size() != expected_cols)
            throw std::runtime_error("CSV: non-rectangular row at line " +
                                     std::to_string(lineno) + " of " + path);
        if (row >= g.total_values())
            throw std::runtime_error("CSV: too many rows in " + path);
        int k = static_cast<int>(row / g.npoints());
        int n = static_cast<int>(row % g.npoints());
        double t = detail::parse_double(cols[0], lineno);
        Vec x{detail::parse_double(cols[1], lineno), 0.0};
        if (g.d == 2) x[1] = detail::parse_double(cols[2], lineno);
        Vec xn = g.point(n);
        if (std::abs(t - g.time(k)) > tol_t || std::abs(x[0] - xn[0]) > tol_x ||
            (g.d == 2 && std::abs(x[1] - xn[1]) > tol_x))
            throw std::runtime_error("CSV: coordinates at line " + std::to_string(lineno) +
                                     " of " + path + " do not match the configured grid");
        f.at(k, n) = detail::parse_double(cols[g.d + 1], lineno);
        ++row;
    }
    if (row != g.total_values())
        throw std::runtime_error("CSV: row count of " + path + " does not match the grid");
    f.check_finite();
    return f;
}

// Read a single-time-level (spatial) field; the file carries one row per node.
inline std::vector<double> read_spatial_csv(const std::string& path, const GridSpec& g) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("CSV: empty file " + path);
    auto header = detail::split_csv_line(line);
    size_t expected_cols = static_cast<size_t>(g.d) + 2;
    if (header.size() != expected_cols)
        throw std::runtime_error("CSV: header of " + path + " does not match grid dimension");
    std::vector<double> vals;
    vals.reserve(g.npoints());
    const double tol_x = 1e-9 * std::max(1.0, std::abs(g.x_hi[0]) + std::abs(g.x_lo[0]));
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cols = detail::split_csv_line(line);
        if (cols.size() != expected_cols)
            throw std::runtime_error("CSV: non-rectangular row at line " +
                                     std::to_string(lineno) + " of " + path);
        long n = static_cast<long>(vals.size());
        if (n >= g.npoints()) throw std::runtime_error("CSV: too many rows in " + path);
        Vec xn = g.point(static_cast<int>(n));
        double x1 = detail::parse_double(cols[1], lineno);
        if (std::abs(x1 - xn[0]) > tol_x ||
            (g.d == 2 && std::abs(detail::parse_double(cols[2], lineno) - xn[1]) > tol_x))
            throw std::runtime_error("CSV: coordinates at line " + std::to_string(lineno) +
                                     " of " + path + " do not match the configured grid");
        double v = detail::parse_double(cols[g.d + 1], lineno);
        if (!std::isfinite(v)) throw std::runtime_error("CSV: non-finite value in " + path);
        vals.push_back(v);
    }
    if (static_cast<long>(vals.size()) != g.npoints())
        throw std::runtime_error("CSV: row count of " + path + " does not match the grid");
    return vals;
}

inline void write_spatial_csv(const GridSpec& g, double t, const std::vector<double>& vals,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << (g.d == 1 ? "t,x1,value\n" : "t,x1,x2,value\n");
    for (int n = 0; n < g.npoints(); ++n) {
        Vec x = g.point(n);
        out << detail::fmt_double(t) << ',' << detail::fmt_double(x[0]);
        if (g.d == 2) out << ',' << detail::fmt_double(x[1]);
        out << ',' << detail::fmt_double(vals[n]) << '\n';
    }
}

}  // namespace hjlab
