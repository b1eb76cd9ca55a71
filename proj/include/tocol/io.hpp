#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace tocol::io {

/// Shortest round-trip decimal text for a double, "." separator, no grouping.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    if (res.ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
    return std::string(buf, res.ptr);
}

/// Writes `content` to a sibling temp file, then renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Small row-oriented CSV builder.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row(header); }

    CsvWriter& row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw std::invalid_argument("csv: row width does not match header");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << escape(cells[i]);
        }
        out_ << '\n';
        return *this;
    }

    std::string str() const { return out_.str(); }

    void save(const std::filesystem::path& path) const { write_atomic(path, str()); }

private:
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string r = "\"";
        for (char c : s) {
            if (c == '"') r += '"';
            r += c;
        }
        return r + '"';
    }

    std::size_t columns_;
    std::ostringstream out_;
};

inline void append_numbers(std::vector<std::string>& cells, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) cells.push_back(format_number(v[i]));
}

inline std::vector<std::string> indexed_names(const std::string& prefix, int count) {
    std::vector<std::string> names;
    for (int i = 1; i <= count; ++i) names.push_back(prefix + std::to_string(i));
    return names;
}

}  // namespace tocol::io
