#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mainrisk::csv {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One parsed CSV file: header row plus data rows, all fields as strings.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// RFC 4180-ish parser: quoted fields may contain commas, doubled quotes and
/// newlines. CR before LF is dropped. Throws Error on unbalanced quotes.
inline std::vector<std::vector<std::string>> parse(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') {
                field.pop_back();
            }
            end_row();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) {
        throw Error("unterminated quoted CSV field");
    }
    if (field_started || !row.empty() || !field.empty()) {
        if (!field.empty() && field.back() == '\r') {
            field.pop_back();
        }
        end_row();
    }
    return rows;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    auto rows = parse(buf.str());
    if (rows.empty()) {
        throw Error("empty CSV file: " + path);
    }
    Table t;
    t.header = std::move(rows.front());
    t.rows.assign(std::make_move_iterator(rows.begin() + 1),
                  std::make_move_iterator(rows.end()));
    return t;
}

inline std::string escape(std::string_view field) {
    const bool needs_quotes =
        field.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) {
        return std::string(field);
    }
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

/// Shortest decimal form that reloads bit-exactly (max_digits10).
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Prefer the shorter form when it round-trips.
    for (int prec = 1; prec < 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
        if (std::strtod(probe, nullptr) == v) {
            return probe;
        }
    }
    return buf;
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) {
            throw Error("cannot open file for writing: " + path);
        }
    }

    void row(std::span<const std::string> fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) {
                out_ << ',';
            }
            out_ << escape(fields[i]);
        }
        out_ << '\n';
    }

    void row(std::initializer_list<std::string> fields) {
        row(std::span<const std::string>(fields.begin(), fields.size()));
    }

private:
    std::ofstream out_;
};

}  // namespace mainrisk::csv
