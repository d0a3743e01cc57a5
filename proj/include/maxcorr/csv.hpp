#pragma once

#include <Eigen/Dense>

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "maxcorr/types.hpp"

namespace maxcorr::csv {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_number(const std::string& cell, const std::string& where) {
    const std::string t = trim(cell);
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw ValidationError("cannot parse number '" + cell + "' in " + where);
    return v;
}

inline bool is_number(const std::string& cell) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    return ec == std::errc() && ptr == t.data() + t.size();
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace detail

struct PointTable {
    Eigen::MatrixXd points;                 // rows x d
    std::optional<Eigen::VectorXd> weights; // present iff a `weight` column was found
};

// One point per row, d numeric columns, optional trailing `weight` column.
// The header row is required; column names other than `weight` are free.
inline PointTable read_points(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.size() < 2)
        throw ValidationError(path + ": need a header row and at least one data row");
    const auto header = detail::split(lines[0]);
    if (header.empty())
        throw ValidationError(path + ": empty header row");
    for (const auto& name : header)
        if (detail::is_number(name))
            throw ValidationError(path + ": first row must be a header, found numeric cell '" + name + "'");

    bool has_weight = false;
    {
        std::string last = detail::trim(header.back());
        for (auto& c : last) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        has_weight = (last == "weight");
    }
    const std::size_t ncols = header.size();
    const std::size_t d = ncols - (has_weight ? 1 : 0);
    if (d < 1) throw ValidationError(path + ": no coordinate columns");

    PointTable t;
    t.points.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(d));
    if (has_weight) t.weights = Eigen::VectorXd(static_cast<Eigen::Index>(lines.size() - 1));
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = detail::split(lines[r]);
        if (cells.size() != ncols)
            throw ValidationError(path + ": row " + std::to_string(r + 1) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(ncols));
        const std::string where = path + " row " + std::to_string(r + 1);
        for (std::size_t c = 0; c < d; ++c)
            t.points(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) =
                detail::parse_number(cells[c], where);
        if (has_weight)
            (*t.weights)[static_cast<Eigen::Index>(r - 1)] = detail::parse_number(cells[d], where);
    }
    return t;
}

inline EmpiricalDistribution read_empirical(const std::string& path) {
    PointTable t = read_points(path);
    if (t.weights) return validate_empirical(std::move(t.points), std::move(*t.weights));
    return validate_empirical(std::move(t.points));
}

// Plain d x d numeric grid, no header.
inline Eigen::MatrixXd read_covariance(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw ValidationError(path + ": empty covariance file");
    const std::size_t d = detail::split(lines[0]).size();
    if (lines.size() != d)
        throw ValidationError(path + ": covariance grid must be square, got " +
                              std::to_string(lines.size()) + " rows x " + std::to_string(d) + " cols");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < d; ++r) {
        const auto cells = detail::split(lines[r]);
        if (cells.size() != d)
            throw ValidationError(path + ": ragged covariance row " + std::to_string(r + 1));
        for (std::size_t c = 0; c < d; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                detail::parse_number(cells[c], path + " row " + std::to_string(r + 1));
    }
    return m;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// (u_1..u_d, assigned_atom_index), one sampled baseline point per row.
inline void write_partition(const std::string& path, const Eigen::MatrixXd& points,
                            const std::vector<int>& assignment) {
    if (points.rows() != static_cast<Eigen::Index>(assignment.size()))
        throw ValidationError("partition dump: point/assignment size mismatch");
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    for (Eigen::Index c = 0; c < points.cols(); ++c) out << "u" << (c + 1) << ",";
    out << "atom\n";
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        for (Eigen::Index c = 0; c < points.cols(); ++c)
            out << format_double(points(r, c)) << ",";
        out << assignment[static_cast<std::size_t>(r)] << "\n";
    }
}

inline void write_trace(const std::string& path, const std::vector<double>& objective,
                        const std::vector<double>& residual) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << "iter,objective,residual\n";
    for (std::size_t i = 0; i < objective.size(); ++i) {
        out << i << "," << format_double(objective[i]) << ","
            << format_double(i < residual.size() ? residual[i]
                                                 : std::numeric_limits<double>::quiet_NaN())
            << "\n";
    }
}

}  // namespace maxcorr::csv
