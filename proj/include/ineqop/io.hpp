#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/csv.hpp"
#include "ineqop/effects.hpp"
#include "ineqop/iop.hpp"
#include "ineqop/sim.hpp"

namespace ineqop {

// ---------------------------------------------------------------------------
// Minimal JSON emission
// ---------------------------------------------------------------------------
// Holds already-serialized JSON text; NaN becomes null.

struct JsonValue {
    std::string text = "null";

    static std::string escape(const std::string& s) {
        std::string out;
        out.reserve(s.size() + 2);
        for (char c : s) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\r': out += "\\r"; break;
                case '\t': out += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                        out += buf;
                    } else {
                        out.push_back(c);
                    }
            }
        }
        return out;
    }

    static JsonValue str(const std::string& s) { return {"\"" + escape(s) + "\""}; }
    static JsonValue num(double v) { return {std::isfinite(v) ? format_double(v) : "null"}; }
    static JsonValue num(std::int64_t v) { return {std::to_string(v)}; }
    static JsonValue num(std::uint64_t v) { return {std::to_string(v)}; }
    static JsonValue num(int v) { return {std::to_string(v)}; }
    static JsonValue boolean(bool b) { return {b ? "true" : "false"}; }
    static JsonValue null() { return {"null"}; }
    static JsonValue raw(std::string json) { return {std::move(json)}; }

    static JsonValue array(const std::vector<JsonValue>& items) {
        std::string out = "[";
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i) out += ",";
            out += items[i].text;
        }
        return {out + "]"};
    }

    static JsonValue object(const std::vector<std::pair<std::string, JsonValue>>& members) {
        std::string out = "{";
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (i) out += ",";
            out += "\"" + escape(members[i].first) + "\":" + members[i].second.text;
        }
        return {out + "}"};
    }
};

// FNV-1a over a canonical config dump, printed as 16 hex digits.
inline std::string config_hash(const std::string& canonical) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Table-style formatting
// ---------------------------------------------------------------------------

// Rounds to 3 decimals and strips trailing zeros: 0.0568 -> "0.057",
// 0.0601 -> "0.06".
inline std::string format_round3(double v) {
    if (!std::isfinite(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

// "0.057 (0.053,0.06)"
inline std::string pretty_estimate(double theta, const ConfidenceInterval& ci) {
    std::string s = format_round3(theta);
    if (std::isfinite(ci.lo) && std::isfinite(ci.hi))
        s += " (" + format_round3(ci.lo) + "," + format_round3(ci.hi) + ")";
    return s;
}

// "55% (52%,57%)"
inline std::string pretty_percent(double share, const ConfidenceInterval& ci) {
    auto pct = [](double v) { return format_double(std::nearbyint(v * 100.0)) + "%"; };
    if (!std::isfinite(share)) return "";
    std::string s = pct(share);
    if (std::isfinite(ci.lo) && std::isfinite(ci.hi)) s += " (" + pct(ci.lo) + "," + pct(ci.hi) + ")";
    return s;
}

inline std::string field_or_empty(double v) { return std::isfinite(v) ? format_double(v) : ""; }

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

inline JsonValue to_json(const ConfidenceInterval& ci) {
    return JsonValue::array({JsonValue::num(ci.lo), JsonValue::num(ci.hi)});
}

inline JsonValue to_json(const IOpEstimate& e) {
    std::vector<std::pair<std::string, JsonValue>> m = {
        {"index", JsonValue::str(to_string(e.index))},
        {"kind", JsonValue::str(to_string(e.kind))},
        {"theta", JsonValue::num(e.theta)},
        {"level", JsonValue::num(e.level)},
        {"variance", JsonValue::num(e.variance)},
        {"se", JsonValue::num(e.se)},
        {"ci", e.has_inference ? to_json(e.ci) : JsonValue::null()},
        {"relative", e.has_relative
                         ? JsonValue::object({{"theta", JsonValue::num(e.theta_rel)},
                                              {"se", JsonValue::num(e.se_rel)},
                                              {"ci", to_json(e.ci_rel)}})
                         : JsonValue::null()},
        {"learner", JsonValue::str(e.learner)},
        {"mode", JsonValue::str(e.mode)},
        {"K", JsonValue::num(e.K)},
        {"seed", JsonValue::num(static_cast<std::uint64_t>(e.seed))},
        {"n", JsonValue::num(e.n)},
        {"rmse", JsonValue::num(e.rmse)},
    };
    if (e.mld_values_floored > 0) m.emplace_back("mld_values_floored", JsonValue::num(e.mld_values_floored));
    return JsonValue::object(m);
}

inline JsonValue to_json(const TestResult& t) {
    std::vector<std::pair<std::string, JsonValue>> m = {
        {"description", JsonValue::str(t.description)},
        {"statistic", JsonValue::num(t.statistic)},
        {"se", JsonValue::num(t.se)},
        {"z", JsonValue::num(t.z)},
        {"p_value", JsonValue::num(t.p_value)},
    };
    if (t.permutations > 0) {
        m.emplace_back("p_permutation", JsonValue::num(t.p_permutation));
        m.emplace_back("permutations", JsonValue::num(t.permutations));
    }
    return JsonValue::object(m);
}

inline JsonValue to_json(const PartialEffect& pe) {
    return JsonValue::object({
        {"circumstances", JsonValue::str(pe.circumstances)},
        {"index", JsonValue::str(to_string(pe.index))},
        {"kappa", JsonValue::num(pe.kappa)},
        {"se", JsonValue::num(pe.se)},
        {"ci", to_json(pe.ci)},
        {"p_value", JsonValue::num(pe.p_value)},
        {"kappa_rel", JsonValue::num(pe.kappa_rel)},
        {"se_rel", JsonValue::num(pe.se_rel)},
        {"ci_rel", to_json(pe.ci_rel)},
        {"theta_full", JsonValue::num(pe.full.theta)},
        {"theta_reduced", JsonValue::num(pe.reduced.theta)},
    });
}

inline JsonValue to_json(const McSummary& s) {
    return JsonValue::object({
        {"name", JsonValue::str(s.name)},
        {"truth", JsonValue::num(s.truth)},
        {"n_ok", JsonValue::num(s.n_ok)},
        {"mean_estimate", JsonValue::num(s.mean_estimate)},
        {"bias", JsonValue::num(s.bias)},
        {"sd", JsonValue::num(s.sd)},
        {"mean_se", JsonValue::num(s.mean_se)},
        {"coverage", JsonValue::num(s.coverage)},
    });
}

inline JsonValue to_json(const MonteCarloReport& r) {
    std::vector<JsonValue> sums;
    for (const auto& s : r.summaries) sums.push_back(to_json(s));
    std::vector<JsonValue> errs;
    for (const auto& e : r.errors) errs.push_back(JsonValue::str(e));
    return JsonValue::object({
        {"n", JsonValue::num(r.n)},
        {"replications", JsonValue::num(r.replications)},
        {"summaries", JsonValue::array(sums)},
        {"errors", JsonValue::array(errs)},
        {"plugin_spread", JsonValue::num(r.plugin_spread)},
        {"debiased_spread", JsonValue::num(r.debiased_spread)},
        {"spread_ratio", JsonValue::num(r.spread_ratio)},
    });
}

// ---------------------------------------------------------------------------
// Table-1-shaped CSV rows for estimates
// ---------------------------------------------------------------------------

inline std::vector<std::string> estimate_csv_header() {
    return {"label",  "index",    "n",        "mean",     "unconditional", "plugin",
            "theta",  "se",       "ci_low",   "ci_high",  "estimate",      "relative",
            "rel_se", "rel_low",  "rel_high", "rel_share", "learner",      "rmse",
            "K",      "mode",     "seed",     "config_hash", "version"};
}

inline std::vector<std::string> estimate_csv_row(const std::string& label, double mean_y,
                                                 double unconditional, const IOpEstimate& plugin,
                                                 const IOpEstimate& debiased, const std::string& hash) {
    return {
        label,
        to_string(debiased.index),
        std::to_string(debiased.n),
        format_double(mean_y),
        format_double(unconditional),
        field_or_empty(plugin.theta),
        field_or_empty(debiased.theta),
        field_or_empty(debiased.se),
        field_or_empty(debiased.ci.lo),
        field_or_empty(debiased.ci.hi),
        pretty_estimate(debiased.theta, debiased.ci),
        field_or_empty(debiased.theta_rel),
        field_or_empty(debiased.se_rel),
        field_or_empty(debiased.ci_rel.lo),
        field_or_empty(debiased.ci_rel.hi),
        pretty_percent(debiased.theta_rel, debiased.ci_rel),
        debiased.learner,
        field_or_empty(debiased.rmse),
        std::to_string(debiased.K),
        debiased.mode,
        std::to_string(debiased.seed),
        hash,
        kVersion,
    };
}

inline std::vector<std::string> effect_csv_header() {
    return {"label",     "circumstances", "index",  "kappa",   "se",      "ci_low", "ci_high",
            "p_value",   "kappa_rel",     "rel_se", "rel_low", "rel_high", "theta",  "theta_reduced",
            "config_hash", "version"};
}

inline std::vector<std::string> effect_csv_row(const std::string& label, const PartialEffect& pe,
                                               const std::string& hash) {
    return {
        label,
        pe.circumstances,
        to_string(pe.index),
        field_or_empty(pe.kappa),
        field_or_empty(pe.se),
        field_or_empty(pe.ci.lo),
        field_or_empty(pe.ci.hi),
        field_or_empty(pe.p_value),
        field_or_empty(pe.kappa_rel),
        field_or_empty(pe.se_rel),
        field_or_empty(pe.ci_rel.lo),
        field_or_empty(pe.ci_rel.hi),
        field_or_empty(pe.full.theta),
        field_or_empty(pe.reduced.theta),
        hash,
        kVersion,
    };
}

inline std::vector<std::string> mc_csv_header() {
    return {"name", "truth", "n", "replications", "n_ok", "mean_estimate", "bias",
            "sd",   "mean_se", "coverage", "config_hash", "version"};
}

inline std::vector<std::string> mc_csv_row(const MonteCarloReport& r, const McSummary& s,
                                           const std::string& hash) {
    return {
        s.name,
        field_or_empty(s.truth),
        std::to_string(r.n),
        std::to_string(r.replications),
        std::to_string(s.n_ok),
        field_or_empty(s.mean_estimate),
        field_or_empty(s.bias),
        field_or_empty(s.sd),
        field_or_empty(s.mean_se),
        field_or_empty(s.coverage),
        hash,
        kVersion,
    };
}

}  // namespace ineqop
