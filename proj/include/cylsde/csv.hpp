#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cylsde {

/// Round-trip double formatting (17 significant digits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

/// Minimal RFC-4180-quoted CSV table, built in memory and written in one pass
/// so output bytes depend only on the data.
struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    static std::string quote(const std::string& field) {
        if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
        std::string out = "\"";
        for (char c : field) {
            if (c == '"') out += "\"\"";
            else out += c;
        }
        out += '"';
        return out;
    }

    void add_row(std::vector<std::string> row) {
        if (!header.empty() && row.size() != header.size())
            throw std::invalid_argument("Csv: row width != header width");
        rows.push_back(std::move(row));
    }

    std::string to_string() const {
        std::string out;
        auto append_line = [&out](const std::vector<std::string>& fields) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (i) out += ',';
                out += quote(fields[i]);
            }
            out += '\n';
        };
        if (!header.empty()) append_line(header);
        for (const auto& r : rows) append_line(r);
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("Csv: cannot open " + path);
        f << to_string();
    }

    std::size_t row_count() const { return rows.size(); }
};

} // namespace cylsde
