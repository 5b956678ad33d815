#pragma once

// Minimal CSV plumbing: header-indexed rows, RFC-4180 quoting on read,
// shortest round-trip number formatting on write.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "error.hpp"

namespace regime_bench::csv {

inline std::vector<std::string> split_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError(line_no, "unterminated quote");
    out.push_back(std::move(cur));
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

class Table {
public:
    /// Reads a header line and all data rows. Blank lines are skipped.
    static Table read(std::istream& in, const std::vector<std::string>& required) {
        Table t;
        std::string line;
        std::size_t line_no = 0;
        bool have_header = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            auto fields = split_line(line, line_no);
            for (auto& f : fields) f = std::string(trim(f));
            if (!have_header) {
                if (line_no == 1 && !fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0)
                    fields[0].erase(0, 3);
                for (std::size_t i = 0; i < fields.size(); ++i) t.columns_[fields[i]] = i;
                for (const auto& r : required)
                    if (!t.columns_.count(r)) throw ParseError(line_no, "missing column '" + r + "'");
                t.width_ = fields.size();
                have_header = true;
                continue;
            }
            if (fields.size() != t.width_)
                throw ParseError(line_no, "expected " + std::to_string(t.width_) + " fields, got " +
                                              std::to_string(fields.size()));
            t.rows_.push_back({line_no, std::move(fields)});
        }
        if (!have_header) throw ParseError(line_no, "empty file, no header");
        return t;
    }

    static Table read_file(const std::string& path, const std::vector<std::string>& required) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open '" + path + "'");
        return read(in, required);
    }

    bool has(const std::string& col) const { return columns_.count(col) != 0; }

    const std::string& get(const Row& r, const std::string& col) const {
        return r.fields[columns_.at(col)];
    }

    const std::vector<Row>& rows() const noexcept { return rows_; }

private:
    std::map<std::string, std::size_t> columns_;
    std::vector<Row> rows_;
    std::size_t width_ = 0;
};

inline double parse_double(std::string_view s, std::size_t line, std::string_view what) {
    s = trim(s);
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || s.empty())
        throw ParseError(line, "invalid " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

inline std::optional<double> parse_optional_double(std::string_view s, std::size_t line,
                                                   std::string_view what) {
    s = trim(s);
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan") return std::nullopt;
    return parse_double(s, line, what);
}

inline std::int64_t parse_int(std::string_view s, std::size_t line, std::string_view what) {
    s = trim(s);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ParseError(line, "invalid " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

/// Shortest decimal representation that round-trips.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string quote(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace regime_bench::csv
