#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/csv.hpp"

namespace ineqop {

// Label used for empty circumstance cells. Rows with a missing outcome are
// rejected at load; missing circumstances become their own category.
inline constexpr const char* kMissingLabel = "missing";

// Years of schooling for ISCED levels 0-8: 0,1 -> 7; 2 -> 10; 3 -> 13;
// 4 -> 15; 5+ -> 18.
inline int isced_to_years(int level) {
    if (level < 0 || level > 8) throw DataError("ISCED level out of range 0-8: " + std::to_string(level));
    if (level <= 1) return 7;
    if (level == 2) return 10;
    if (level == 3) return 13;
    if (level == 4) return 15;
    return 18;
}

// One categorical circumstance: integer codes per row plus the code -> label
// dictionary, labels kept in order of first appearance.
struct CategoricalColumn {
    std::string name;
    std::vector<std::int32_t> codes;
    std::vector<std::string> labels;

    const std::string& label_of(std::size_t row) const { return labels[static_cast<std::size_t>(codes[row])]; }

    int find_label(const std::string& label) const {
        for (std::size_t c = 0; c < labels.size(); ++c)
            if (labels[c] == label) return static_cast<int>(c);
        return -1;
    }
};

struct Dataset {
    std::vector<double> y;                 // outcome, strictly positive
    std::vector<double> w;                 // observation weights, strictly positive
    std::vector<std::int64_t> ids;         // stable row identifiers
    std::vector<CategoricalColumn> x;      // categorical circumstances

    std::size_t n() const { return y.size(); }

    const CategoricalColumn* find_column(const std::string& name) const {
        for (const auto& col : x)
            if (col.name == name) return &col;
        return nullptr;
    }

    int column_index(const std::string& name) const {
        for (std::size_t j = 0; j < x.size(); ++j)
            if (x[j].name == name) return static_cast<int>(j);
        return -1;
    }

    std::vector<std::string> circumstance_names() const {
        std::vector<std::string> names;
        names.reserve(x.size());
        for (const auto& col : x) names.push_back(col.name);
        return names;
    }

    void validate() const {
        if (n() < 2) throw DataError("dataset needs n >= 2 observations");
        if (w.size() != n() || ids.size() != n()) throw DataError("dataset: ragged columns");
        for (std::size_t i = 0; i < n(); ++i) {
            if (!(y[i] > 0.0)) throw DataError("outcome must be > 0 (row id " + std::to_string(ids[i]) + ")");
            if (!(w[i] > 0.0)) throw DataError("weight must be > 0 (row id " + std::to_string(ids[i]) + ")");
        }
        for (const auto& col : x) {
            if (col.codes.size() != n()) throw DataError("column " + col.name + ": ragged length");
            if (col.labels.empty()) throw DataError("column " + col.name + ": no categories");
            for (auto c : col.codes)
                if (c < 0 || static_cast<std::size_t>(c) >= col.labels.size())
                    throw DataError("column " + col.name + ": code out of range");
        }
    }

    Dataset select_rows(const std::vector<std::size_t>& rows) const {
        Dataset out;
        out.y.reserve(rows.size());
        out.w.reserve(rows.size());
        out.ids.reserve(rows.size());
        for (auto r : rows) {
            out.y.push_back(y[r]);
            out.w.push_back(w[r]);
            out.ids.push_back(ids[r]);
        }
        out.x.reserve(x.size());
        for (const auto& col : x) {
            CategoricalColumn c;
            c.name = col.name;
            c.labels = col.labels;
            c.codes.reserve(rows.size());
            for (auto r : rows) c.codes.push_back(col.codes[r]);
            out.x.push_back(std::move(c));
        }
        return out;
    }

    Dataset drop_columns(const std::vector<std::string>& names) const {
        Dataset out;
        out.y = y;
        out.w = w;
        out.ids = ids;
        for (const auto& col : x) {
            if (std::find(names.begin(), names.end(), col.name) == names.end()) out.x.push_back(col);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

// Column-role configuration for load_dataset. File form is key = value lines:
//   outcome = educ
//   weight = pw            (optional)
//   circumstances = sex, educM, educF
//   isced = educ           (columns holding ISCED codes to map to years)
//   delimiter = ,
struct Schema {
    std::string outcome;
    std::string weight;                        // empty -> unit weights
    std::vector<std::string> circumstances;
    std::vector<std::string> isced_columns;
    char delimiter = ',';

    bool is_isced(const std::string& col) const {
        return std::find(isced_columns.begin(), isced_columns.end(), col) != isced_columns.end();
    }

    void validate() const {
        if (outcome.empty()) throw ConfigError("schema: outcome column required");
        if (circumstances.empty()) throw ConfigError("schema: at least one circumstance column required");
        for (const auto& c : circumstances)
            if (c == outcome) throw ConfigError("schema: column '" + c + "' is both outcome and circumstance");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            const std::string t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    const std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

}  // namespace detail

inline Schema parse_schema(std::istream& in) {
    Schema schema;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("schema line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "outcome") schema.outcome = value;
        else if (key == "weight") schema.weight = value;
        else if (key == "circumstances") schema.circumstances = detail::split_list(value);
        else if (key == "isced") schema.isced_columns = detail::split_list(value);
        else if (key == "delimiter") {
            if (value.size() != 1) throw ConfigError("schema: delimiter must be a single character");
            schema.delimiter = value[0];
        } else {
            throw ConfigError("schema: unknown key '" + key + "'");
        }
    }
    schema.validate();
    return schema;
}

inline Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file: " + path);
    return parse_schema(in);
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

inline Dataset load_dataset(const CsvTable& table, const Schema& schema) {
    schema.validate();
    const int y_col = table.column_index(schema.outcome);
    if (y_col < 0) throw ConfigError("outcome column '" + schema.outcome + "' not found in header");
    int w_col = -1;
    if (!schema.weight.empty()) {
        w_col = table.column_index(schema.weight);
        if (w_col < 0) throw ConfigError("weight column '" + schema.weight + "' not found in header");
    }
    std::vector<int> x_cols;
    for (const auto& name : schema.circumstances) {
        const int j = table.column_index(name);
        if (j < 0) throw ConfigError("circumstance column '" + name + "' not found in header");
        x_cols.push_back(j);
    }

    Dataset d;
    d.x.resize(schema.circumstances.size());
    std::vector<std::unordered_map<std::string, std::int32_t>> code_of(schema.circumstances.size());
    for (std::size_t j = 0; j < schema.circumstances.size(); ++j) d.x[j].name = schema.circumstances[j];

    const bool y_isced = schema.is_isced(schema.outcome);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string row_name = "row " + std::to_string(r + 1);
        auto cell = [&](int j) -> const std::string& {
            static const std::string empty;
            return static_cast<std::size_t>(j) < row.size() ? row[j] : empty;
        };

        const std::string y_raw = detail::trim(cell(y_col));
        if (y_raw.empty()) throw DataError("missing outcome in " + row_name);
        bool ok = false;
        double y_val = parse_double(y_raw, ok);
        if (!ok) throw DataError("non-numeric outcome '" + y_raw + "' in " + row_name);
        if (y_isced) {
            const double rounded = std::nearbyint(y_val);
            if (rounded != y_val) throw DataError("ISCED outcome must be an integer code in " + row_name);
            y_val = static_cast<double>(isced_to_years(static_cast<int>(rounded)));
        }
        if (!(y_val > 0.0)) throw DataError("nonpositive outcome in " + row_name);
        d.y.push_back(y_val);

        double w_val = 1.0;
        if (w_col >= 0) {
            const std::string w_raw = detail::trim(cell(w_col));
            if (w_raw.empty()) throw DataError("missing weight in " + row_name);
            w_val = parse_double(w_raw, ok);
            if (!ok) throw DataError("non-numeric weight '" + w_raw + "' in " + row_name);
            if (!(w_val > 0.0)) throw DataError("nonpositive weight in " + row_name);
        }
        d.w.push_back(w_val);
        d.ids.push_back(static_cast<std::int64_t>(r + 1));

        for (std::size_t j = 0; j < x_cols.size(); ++j) {
            std::string label = detail::trim(cell(x_cols[j]));
            if (label.empty()) label = kMissingLabel;
            else if (schema.is_isced(d.x[j].name)) {
                double lv = parse_double(label, ok);
                if (!ok || std::nearbyint(lv) != lv)
                    throw DataError("ISCED circumstance '" + d.x[j].name + "' must be an integer code in " + row_name);
                label = std::to_string(isced_to_years(static_cast<int>(lv)));
            }
            auto& dict = code_of[j];
            auto it = dict.find(label);
            std::int32_t code;
            if (it == dict.end()) {
                code = static_cast<std::int32_t>(d.x[j].labels.size());
                d.x[j].labels.push_back(label);
                dict.emplace(label, code);
            } else {
                code = it->second;
            }
            d.x[j].codes.push_back(code);
        }
    }
    d.validate();
    return d;
}

inline Dataset load_dataset(const std::string& path, const Schema& schema) {
    return load_dataset(read_csv_file(path, schema.delimiter), schema);
}

// ---------------------------------------------------------------------------
// Subsetting
// ---------------------------------------------------------------------------

// Row filter on one circumstance column. Comparison operators parse labels
// numerically (e.g. birth-year bounds); a label that does not parse under a
// numeric operator is an error rather than a silent drop, so that a predicate
// and its complement always partition the rows.
struct SubsetPredicate {
    enum class Op { eq, ne, le, ge, lt, gt };
    std::string column;
    Op op = Op::eq;
    std::string value;

    // Accepts "col==v", "col!=v", "col<=v", "col>=v", "col<v", "col>v".
    static SubsetPredicate parse(const std::string& expr) {
        static const std::pair<const char*, Op> ops[] = {
            {"==", Op::eq}, {"!=", Op::ne}, {"<=", Op::le}, {">=", Op::ge}, {"<", Op::lt}, {">", Op::gt}};
        for (const auto& [tok, op] : ops) {
            const auto pos = expr.find(tok);
            if (pos != std::string::npos) {
                SubsetPredicate p;
                p.column = detail::trim(expr.substr(0, pos));
                p.op = op;
                p.value = detail::trim(expr.substr(pos + std::string(tok).size()));
                if (p.column.empty() || p.value.empty())
                    throw ConfigError("subset predicate needs both column and value: '" + expr + "'");
                return p;
            }
        }
        throw ConfigError("cannot parse subset predicate: '" + expr + "'");
    }

    SubsetPredicate negate() const {
        SubsetPredicate p = *this;
        switch (op) {
            case Op::eq: p.op = Op::ne; break;
            case Op::ne: p.op = Op::eq; break;
            case Op::le: p.op = Op::gt; break;
            case Op::gt: p.op = Op::le; break;
            case Op::ge: p.op = Op::lt; break;
            case Op::lt: p.op = Op::ge; break;
        }
        return p;
    }
};

inline Dataset subset(const Dataset& d, const SubsetPredicate& pred) {
    const CategoricalColumn* col = d.find_column(pred.column);
    if (!col) throw DataError("subset: no circumstance column named '" + pred.column + "'");

    const bool numeric_op = pred.op != SubsetPredicate::Op::eq && pred.op != SubsetPredicate::Op::ne;
    double bound = 0.0;
    std::vector<double> label_num;
    if (numeric_op) {
        bool ok = false;
        bound = parse_double(pred.value, ok);
        if (!ok) throw ConfigError("subset: numeric comparison against non-numeric value '" + pred.value + "'");
        label_num.resize(col->labels.size());
        for (std::size_t c = 0; c < col->labels.size(); ++c) {
            label_num[c] = parse_double(col->labels[c], ok);
            if (!ok)
                throw DataError("subset: column '" + pred.column + "' has non-numeric label '" +
                                col->labels[c] + "' under a numeric comparison");
        }
    }

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < d.n(); ++i) {
        bool match = false;
        switch (pred.op) {
            case SubsetPredicate::Op::eq: match = col->label_of(i) == pred.value; break;
            case SubsetPredicate::Op::ne: match = col->label_of(i) != pred.value; break;
            case SubsetPredicate::Op::le: match = label_num[col->codes[i]] <= bound; break;
            case SubsetPredicate::Op::ge: match = label_num[col->codes[i]] >= bound; break;
            case SubsetPredicate::Op::lt: match = label_num[col->codes[i]] < bound; break;
            case SubsetPredicate::Op::gt: match = label_num[col->codes[i]] > bound; break;
        }
        if (match) keep.push_back(i);
    }
    if (keep.size() < 2) throw DataError("subset '" + pred.column + "' leaves fewer than 2 rows");
    return d.select_rows(keep);
}

inline Dataset subset(const Dataset& d, const std::string& expr) {
    return subset(d, SubsetPredicate::parse(expr));
}

}  // namespace ineqop
