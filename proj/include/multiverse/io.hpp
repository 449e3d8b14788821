#pragma once

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "multiverse/dataset.hpp"
#include "multiverse/errors.hpp"

namespace multiverse {

/// Write `content` to `path` through a temporary file plus rename, so
/// readers never observe a half-written artifact.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out.flush()) throw DataError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

/// Shortest decimal form that round-trips a double (17 significant digits).
inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace detail {

inline double parse_real(std::string_view token, std::size_t line_no) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("line " + std::to_string(line_no) + ": non-numeric field '" +
                             std::string(token) + "'",
                         line_no);
    return value;
}

inline long long parse_label(std::string_view token, std::size_t line_no) {
    long long value = 0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("line " + std::to_string(line_no) + ": non-integer label '" +
                             std::string(token) + "'",
                         line_no);
    return value;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

}  // namespace detail

/// Dataset CSV schema: UTF-8, '\n' line endings, header
/// `label,f0,f1,...,f{p-1}`, one sample per row, reals with 17 significant
/// digits on output. Labels are written as the dataset's original labels.
inline std::string dataset_to_csv(const LabeledDataset& ds) {
    std::ostringstream out;
    out << "label";
    for (std::size_t k = 0; k < ds.dim(); ++k) out << ",f" << k;
    out << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t dense = static_cast<std::size_t>(ds.labels[i]);
        out << (dense < ds.original_labels.size() ? ds.original_labels[dense]
                                                  : static_cast<long long>(dense));
        for (std::size_t k = 0; k < ds.dim(); ++k)
            out << ',' << format_real(ds.features(k, i));
        out << '\n';
    }
    return out.str();
}

inline void save_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
    write_text_atomic(path, dataset_to_csv(ds));
}

/// Parse a dataset CSV. Row order becomes sample (column) order; labels are
/// re-indexed densely to [0, c) in ascending order of the original values,
/// with the mapping reported through `original_labels`.
inline LabeledDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());

    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line))
        throw ParseError("line 1: missing header", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = detail::split_fields(line);
    if (header.empty() || header[0] != "label")
        throw ParseError("line 1: header must start with 'label'", 1);
    const std::size_t p = header.size() - 1;
    if (p == 0) throw SchemaError("header declares no feature columns");
    for (std::size_t k = 0; k < p; ++k) {
        const std::string expected = "f" + std::to_string(k);
        if (header[k + 1] != expected)
            throw ParseError("line 1: expected header column '" + expected + "', got '" +
                                 std::string(header[k + 1]) + "'",
                             1);
    }

    std::vector<long long> raw_labels;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != p + 1)
            throw SchemaError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(p + 1) + " columns, got " +
                              std::to_string(fields.size()));
        raw_labels.push_back(detail::parse_label(fields[0], line_no));
        for (std::size_t k = 0; k < p; ++k)
            values.push_back(detail::parse_real(fields[k + 1], line_no));
    }
    if (raw_labels.empty()) throw SchemaError("file contains no sample rows");

    std::map<long long, int> remap;
    for (long long l : raw_labels) remap.emplace(l, 0);
    int next = 0;
    for (auto& [orig, dense] : remap) dense = next++;

    LabeledDataset ds;
    ds.class_count = next;
    const std::size_t n = raw_labels.size();
    ds.features = Matrix(p, n);
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < p; ++k) ds.features(k, i) = values[i * p + k];
        ds.labels.push_back(remap.at(raw_labels[i]));
    }
    ds.original_labels.resize(static_cast<std::size_t>(next));
    for (const auto& [orig, dense] : remap)
        ds.original_labels[static_cast<std::size_t>(dense)] = orig;
    validate_dataset(ds);
    return ds;
}

}  // namespace multiverse
