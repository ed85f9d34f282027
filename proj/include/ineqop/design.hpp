#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/dataset.hpp"

namespace ineqop {

struct EncodeConfig {
    int order = 2;        // maximum interaction depth (1 = main effects only)
    int min_support = 5;  // drop columns with fewer nonzero rows than this

    void validate() const {
        if (order < 1) throw ConfigError("encode: interaction order must be >= 1");
        if (min_support < 1) throw ConfigError("encode: min_support must be >= 1");
    }
};

// Dummy-encoded circumstances plus interactions, all entries in {0,1}.
// Column provenance is recorded as "col=label" terms joined by '*'.
struct DesignMatrix {
    std::size_t n = 0;
    std::vector<std::vector<double>> cols;  // column-major
    std::vector<std::string> column_names;
    int interaction_order = 1;

    std::size_t p() const { return cols.size(); }
};

namespace detail {

// One encoded term: the set of rows where it is 1, plus its provenance.
struct EncodedTerm {
    std::vector<std::uint32_t> rows;   // sorted row indices with value 1
    std::string name;
    int last_circumstance = -1;        // highest circumstance index in the product
};

inline std::vector<std::uint32_t> intersect_rows(const std::vector<std::uint32_t>& a,
                                                 const std::vector<std::uint32_t>& b) {
    std::vector<std::uint32_t> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (b[j] < a[i]) ++j;
        else {
            out.push_back(a[i]);
            ++i;
            ++j;
        }
    }
    return out;
}

inline std::uint64_t hash_rows(const std::vector<std::uint32_t>& rows) {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto r : rows) {
        h ^= r + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

// One-hot encodes each circumstance dropping the reference category (the
// first-observed label), then adds products of dummies across distinct
// circumstances up to `order`. Columns below min_support, duplicates of an
// earlier column, and all-zero/all-one columns are dropped. Deterministic:
// identical dataset and config give identical column order and names.
inline DesignMatrix encode_design(const Dataset& d, const EncodeConfig& cfg = {}) {
    cfg.validate();
    const std::size_t n = d.n();
    if (n == 0) throw DataError("encode: empty dataset");

    std::vector<detail::EncodedTerm> current;  // terms of the previous level
    std::vector<detail::EncodedTerm> kept;     // all retained terms in emit order
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;  // row-set hash -> kept indices

    auto try_keep = [&](detail::EncodedTerm&& term) {
        if (term.rows.size() < static_cast<std::size_t>(cfg.min_support)) return false;
        if (term.rows.size() == n) return false;  // constant column, no signal
        const std::uint64_t h = detail::hash_rows(term.rows);
        auto& bucket = seen[h];
        for (auto idx : bucket)
            if (kept[idx].rows == term.rows) return false;  // duplicate content
        bucket.push_back(kept.size());
        kept.push_back(std::move(term));
        return true;
    };

    // Level 1: main-effect dummies, reference category (code 0) dropped.
    for (std::size_t j = 0; j < d.x.size(); ++j) {
        const auto& col = d.x[j];
        for (std::size_t c = 1; c < col.labels.size(); ++c) {
            detail::EncodedTerm term;
            term.name = col.name + "=" + col.labels[c];
            term.last_circumstance = static_cast<int>(j);
            for (std::size_t i = 0; i < n; ++i)
                if (col.codes[i] == static_cast<std::int32_t>(c)) term.rows.push_back(static_cast<std::uint32_t>(i));
            if (try_keep(std::move(term))) current.push_back(kept.back());
        }
    }
    const std::size_t n_mains = current.size();

    // Higher levels: extend each term by dummies of a later circumstance.
    // A product that already fell below min_support cannot regain support,
    // so pruning at each level is exact.
    for (int level = 2; level <= cfg.order; ++level) {
        std::vector<detail::EncodedTerm> next;
        for (const auto& base : current) {
            for (std::size_t m = 0; m < n_mains; ++m) {
                const auto& main = kept[m];
                if (main.last_circumstance <= base.last_circumstance) continue;
                detail::EncodedTerm term;
                term.rows = detail::intersect_rows(base.rows, main.rows);
                if (term.rows.size() < static_cast<std::size_t>(cfg.min_support)) continue;
                term.name = base.name + "*" + main.name;
                term.last_circumstance = main.last_circumstance;
                if (try_keep(std::move(term))) next.push_back(kept.back());
            }
        }
        if (next.empty()) break;
        current = std::move(next);
    }

    if (kept.empty()) throw DataError("encode: no design columns survive (p = 0)");

    DesignMatrix dm;
    dm.n = n;
    dm.interaction_order = cfg.order;
    dm.cols.reserve(kept.size());
    dm.column_names.reserve(kept.size());
    for (auto& term : kept) {
        std::vector<double> col(n, 0.0);
        for (auto r : term.rows) col[r] = 1.0;
        dm.cols.push_back(std::move(col));
        dm.column_names.push_back(std::move(term.name));
    }
    return dm;
}

}  // namespace ineqop
