#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "ineqop/common.hpp"

namespace ineqop {

// RFC-4180 style CSV: quoted fields may contain the delimiter, doubled
// quotes and embedded newlines. Lone '\n' and '\r\n' both terminate records.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        return -1;
    }
};

inline CsvTable read_csv(std::istream& in, char delim = ',') {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool record_started = false;
    bool any_record = false;

    auto end_field = [&]() {
        record.push_back(field);
        field.clear();
    };
    auto end_record = [&]() {
        end_field();
        if (!any_record) {
            table.header = record;
            any_record = true;
        } else {
            table.rows.push_back(record);
        }
        record.clear();
        record_started = false;
    };

    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        record_started = true;
        if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == delim) {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_record();
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes) throw DataError("CSV: unterminated quoted field");
    if (record_started || !field.empty() || !record.empty()) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        end_record();
    }
    if (!any_record) throw DataError("CSV: empty input, expected a header row");
    return table;
}

inline CsvTable read_csv_file(const std::string& path, char delim = ',') {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    return read_csv(in, delim);
}

inline std::string csv_escape(const std::string& field, char delim = ',') {
    bool needs_quotes = false;
    for (char c : field) {
        if (c == delim || c == '"' || c == '\n' || c == '\r') {
            needs_quotes = true;
            break;
        }
    }
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline std::string csv_row(const std::vector<std::string>& fields, char delim = ',') {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(delim);
        out += csv_escape(fields[i], delim);
    }
    out.push_back('\n');
    return out;
}

}  // namespace ineqop
