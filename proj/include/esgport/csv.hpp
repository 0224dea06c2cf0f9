#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "esgport/error.hpp"

namespace esgport::csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Splits one record on commas. Double-quoted fields may contain commas;
/// `""` inside quotes is a literal quote.
inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.emplace_back(trim(current));
    return fields;
}

/// Lower-cases and maps spaces/dashes to underscores so `Adjusted Close`,
/// `adjusted_close` and `adjusted-close` compare equal.
inline std::string normalize_header(std::string_view name) {
    std::string out;
    for (char c : trim(name)) {
        if (c == ' ' || c == '-') out += '_';
        else out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::initializer_list<std::string_view> aliases) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            auto name = normalize_header(header[i]);
            for (auto alias : aliases)
                if (name == alias) return i;
        }
        return std::nullopt;
    }
};

/// Reads a whole CSV file. A missing file is an error; an empty file yields
/// an empty header.
inline Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingFile, path);
    Table table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            // UTF-8 byte order mark
            if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
            if (trim(line).empty()) continue;
            table.header = split(line);
            first = false;
            continue;
        }
        if (trim(line).empty()) continue;
        table.rows.push_back(split(line));
    }
    return table;
}

inline std::optional<double> parse_double(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double value) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, ptr);
}

/// Fixed-point formatting for human-facing report columns.
inline std::string format_fixed(double value, int decimals) {
    if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
    std::string out = buffer;
    if (out.find_first_not_of("-0.") == std::string::npos) out = std::string(buffer + (buffer[0] == '-'));
    return out;
}

/// Joins fields with commas, quoting any field that needs it.
inline std::string join(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        const auto& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            line += '"';
            for (char c : f) {
                if (c == '"') line += '"';
                line += c;
            }
            line += '"';
        } else {
            line += f;
        }
    }
    return line;
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error(ErrorKind::MissingFile, "cannot write " + path);
    }

    Writer& row(const std::vector<std::string>& fields) {
        out_ << join(fields) << '\n';
        return *this;
    }

private:
    std::ofstream out_;
};

} // namespace esgport::csv
