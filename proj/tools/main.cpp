// Command-line front end: config-driven IOp estimation, partial-effect
// sweeps, comparison and group tests, mobility slopes and Monte Carlo
// simulation. Configuration comes from a JSON file; a handful of flags
// override config keys. Every output embeds the config echo, its hash, the
// seed and the library version, so a run can be reproduced from any of its
// output files.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ineqop/ineqop.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ineqop;

namespace {

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& context) {
    if (!obj.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ConfigError(context + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

Schema schema_from_json(const json& j) {
    check_keys(j, {"outcome", "weight", "circumstances", "isced", "delimiter"}, "schema");
    Schema s;
    s.outcome = get_or<std::string>(j, "outcome", "");
    s.weight = get_or<std::string>(j, "weight", "");
    s.circumstances = get_or<std::vector<std::string>>(j, "circumstances", {});
    s.isced_columns = get_or<std::vector<std::string>>(j, "isced", {});
    const std::string delim = get_or<std::string>(j, "delimiter", ",");
    if (delim.size() != 1) throw ConfigError("schema: delimiter must be a single character");
    s.delimiter = delim[0];
    s.validate();
    return s;
}

LearnerSpec learner_from_json(const json& j) {
    if (j.is_string()) {
        LearnerSpec s;
        s.kind = learner_kind_from(j.get<std::string>());
        return s;
    }
    check_keys(j,
               {"kind", "lambda", "trees", "max_depth", "min_leaf", "mtry", "bootstrap", "rounds",
                "learning_rate", "depth", "seed", "threads"},
               "learner");
    LearnerSpec s;
    s.kind = learner_kind_from(get_or<std::string>(j, "kind", "forest"));
    s.lambda = get_or<double>(j, "lambda", s.lambda);
    s.trees = get_or<int>(j, "trees", s.trees);
    s.max_depth = get_or<int>(j, "max_depth", s.max_depth);
    s.min_leaf = get_or<int>(j, "min_leaf", s.min_leaf);
    s.mtry = get_or<int>(j, "mtry", s.mtry);
    s.bootstrap = get_or<bool>(j, "bootstrap", s.bootstrap);
    s.rounds = get_or<int>(j, "rounds", s.rounds);
    s.learning_rate = get_or<double>(j, "learning_rate", s.learning_rate);
    s.depth = get_or<int>(j, "depth", s.depth);
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
    s.threads = get_or<int>(j, "threads", s.threads);
    s.validate();
    return s;
}

std::vector<LearnerSpec> learners_from_json(const json& cfg) {
    std::vector<LearnerSpec> specs;
    if (cfg.contains("learners")) {
        for (const auto& item : cfg.at("learners")) specs.push_back(learner_from_json(item));
    } else {
        // the default battery: penalized linear plus the two tree ensembles
        for (const char* kind : {"ridge", "lasso", "forest", "gbt"}) {
            LearnerSpec s;
            s.kind = learner_kind_from(kind);
            specs.push_back(s);
        }
    }
    if (specs.empty()) throw ConfigError("config: 'learners' must not be empty");
    return specs;
}

EstimationConfig estimation_from_json(const json& cfg) {
    EstimationConfig est;
    est.learners = learners_from_json(cfg);
    est.K = get_or<int>(cfg, "K", est.K);
    est.seed = get_or<std::uint64_t>(cfg, "seed", est.seed);
    est.mode = crossfit_mode_from(get_or<std::string>(cfg, "mode", "pair_block"));
    est.level = get_or<double>(cfg, "level", est.level);
    est.relative = get_or<bool>(cfg, "relative", est.relative);
    est.mld.floor = get_or<double>(cfg, "mld_floor", est.mld.floor);
    est.mld.truncate = get_or<bool>(cfg, "mld_truncate", est.mld.truncate);
    if (cfg.contains("encode")) {
        check_keys(cfg.at("encode"), {"order", "min_support"}, "encode");
        est.encode.order = get_or<int>(cfg.at("encode"), "order", est.encode.order);
        est.encode.min_support = get_or<int>(cfg.at("encode"), "min_support", est.encode.min_support);
    }
    est.validate();
    return est;
}

DGPSpec dgp_from_json(const json& j) {
    check_keys(j, {"circumstances", "cells", "noise", "noise_delta", "seed"}, "dgp");
    DGPSpec spec;
    spec.circumstances = get_or<std::vector<std::string>>(j, "circumstances", {});
    if (!j.contains("cells")) throw ConfigError("dgp: 'cells' required");
    for (const auto& cell : j.at("cells")) {
        check_keys(cell, {"labels", "prob", "mean"}, "dgp cell");
        DGPCell c;
        c.labels = get_or<std::vector<std::string>>(cell, "labels", {});
        c.prob = get_or<double>(cell, "prob", 0.0);
        c.mean = get_or<double>(cell, "mean", 0.0);
        spec.cells.push_back(std::move(c));
    }
    const std::string noise = get_or<std::string>(j, "noise", "two_point");
    if (noise == "two_point") spec.noise = NoiseKind::two_point;
    else if (noise == "uniform") spec.noise = NoiseKind::uniform;
    else throw ConfigError("dgp: unknown noise kind '" + noise + "'");
    spec.noise_delta = get_or<double>(j, "noise_delta", spec.noise_delta);
    spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed);
    spec.validate();
    return spec;
}

struct IndexChoice {
    bool gini = true;
    bool mld = false;
};

IndexChoice index_from_json(const json& cfg) {
    const std::string index = get_or<std::string>(cfg, "index", "gini");
    if (index == "gini") return {true, false};
    if (index == "mld") return {false, true};
    if (index == "both") return {true, true};
    throw ConfigError("config: index must be gini, mld or both");
}

// One dataset to analyse: label, file, schema, optional subset filter.
struct DatasetJob {
    std::string label;
    std::string input;
    Schema schema;
    std::string subset_expr;
};

Schema schema_for(const json& cfg) {
    if (cfg.contains("schema_file")) return load_schema(cfg.at("schema_file").get<std::string>());
    if (cfg.contains("schema")) return schema_from_json(cfg.at("schema"));
    throw ConfigError("config: either 'schema' or 'schema_file' is required");
}

std::vector<DatasetJob> dataset_jobs(const json& cfg) {
    std::vector<DatasetJob> jobs;
    if (cfg.contains("datasets")) {
        for (const auto& dj : cfg.at("datasets")) {
            check_keys(dj, {"label", "input", "schema", "schema_file", "subset"}, "datasets entry");
            DatasetJob job;
            job.input = get_or<std::string>(dj, "input", "");
            if (job.input.empty()) throw ConfigError("datasets entry: 'input' required");
            job.label = get_or<std::string>(dj, "label", fs::path(job.input).stem().string());
            job.schema = dj.contains("schema") || dj.contains("schema_file") ? schema_for(dj)
                                                                             : schema_for(cfg);
            job.subset_expr = get_or<std::string>(dj, "subset", "");
            jobs.push_back(std::move(job));
        }
        return jobs;
    }
    DatasetJob job;
    job.input = get_or<std::string>(cfg, "input", "");
    if (job.input.empty()) throw ConfigError("config: 'input' required");
    job.label = get_or<std::string>(cfg, "label", fs::path(job.input).stem().string());
    job.schema = schema_for(cfg);
    job.subset_expr = get_or<std::string>(cfg, "subset", "");
    jobs.push_back(std::move(job));
    return jobs;
}

Dataset load_job(const DatasetJob& job) {
    Dataset d = load_dataset(job.input, job.schema);
    if (!job.subset_expr.empty()) d = subset(d, job.subset_expr);
    return d;
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

void write_text_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write output file: " + path.string());
    out << text;
}

std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
    std::string text = csv_row(header);
    for (const auto& row : rows) text += csv_row(row);
    return text;
}

struct Provenance {
    json config;
    std::string hash;
    std::uint64_t seed = 0;
};

Provenance provenance_for(const json& cfg) {
    Provenance p;
    p.config = cfg;
    p.hash = config_hash(cfg.dump());
    p.seed = get_or<std::uint64_t>(cfg, "seed", 1);
    return p;
}

JsonValue provenance_json(const Provenance& p, std::vector<std::pair<std::string, JsonValue>> body) {
    std::vector<std::pair<std::string, JsonValue>> members = {
        {"version", JsonValue::str(kVersion)},
        {"config_hash", JsonValue::str(p.hash)},
        {"seed", JsonValue::num(static_cast<std::uint64_t>(p.seed))},
        {"config", JsonValue::raw(p.config.dump())},
    };
    for (auto& member : body) members.push_back(std::move(member));
    return JsonValue::object(members);
}

void echo_dataset(const fs::path& out_dir, const std::string& label, const Dataset& d) {
    std::vector<std::string> header{"id", "y", "w"};
    for (const auto& col : d.x) header.push_back(col.name);
    std::string text = csv_row(header);
    for (std::size_t i = 0; i < d.n(); ++i) {
        std::vector<std::string> row{std::to_string(d.ids[i]), format_double(d.y[i]),
                                     format_double(d.w[i])};
        for (const auto& col : d.x) row.push_back(col.label_of(i));
        text += csv_row(row);
    }
    write_text_file(out_dir / (label + "_data.csv"), text);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_estimate(const json& cfg, const fs::path& out_dir, bool echo_data, int threads) {
    const auto jobs = dataset_jobs(cfg);
    const auto est_cfg = estimation_from_json(cfg);
    const auto which = index_from_json(cfg);
    const auto prov = provenance_for(cfg);

    struct JobOutput {
        std::vector<std::vector<std::string>> rows;
        std::vector<JsonValue> results;
    };
    std::vector<JobOutput> outputs(jobs.size());
    std::vector<std::string> job_errors(jobs.size());

    parallel_for(jobs.size(), threads, [&](std::size_t idx) {
        try {
            const Dataset d = load_job(jobs[idx]);
            if (echo_data) echo_dataset(out_dir, jobs[idx].label, d);
            const EstimateRun run = run_estimate(d, est_cfg, which.gini, which.mld);
            auto emit = [&](const IndexEstimates& ie) {
                outputs[idx].rows.push_back(estimate_csv_row(jobs[idx].label, run.mean_y,
                                                             ie.unconditional, ie.plugin, ie.debiased,
                                                             prov.hash));
                outputs[idx].results.push_back(JsonValue::object({
                    {"label", JsonValue::str(jobs[idx].label)},
                    {"n", JsonValue::num(run.n)},
                    {"mean", JsonValue::num(run.mean_y)},
                    {"index", JsonValue::str(to_string(ie.debiased.index))},
                    {"unconditional", JsonValue::num(ie.unconditional)},
                    {"plugin", to_json(ie.plugin)},
                    {"debiased", to_json(ie.debiased)},
                }));
            };
            if (run.gini_est) emit(*run.gini_est);
            if (run.mld_est) emit(*run.mld_est);
        } catch (const std::exception& e) {
            job_errors[idx] = std::string(e.what());
            throw;
        }
    });

    std::vector<std::vector<std::string>> rows;
    std::vector<JsonValue> results;
    for (auto& out : outputs) {
        for (auto& row : out.rows) rows.push_back(std::move(row));
        for (auto& res : out.results) results.push_back(std::move(res));
    }
    write_text_file(out_dir / "estimate.csv", csv_text(estimate_csv_header(), rows));
    write_text_file(out_dir / "estimate.json",
                    provenance_json(prov, {{"results", JsonValue::array(results)}}).text + "\n");
    return 0;
}

int cmd_peffect(const json& cfg, const fs::path& out_dir, int threads) {
    const auto jobs = dataset_jobs(cfg);
    const auto est_cfg = estimation_from_json(cfg);
    const auto which = index_from_json(cfg);
    const IneqIndex index = which.gini ? IneqIndex::gini : IneqIndex::mld;
    const auto prov = provenance_for(cfg);

    std::vector<std::vector<std::string>> rows, largest_rows;
    std::vector<JsonValue> job_results;
    for (const auto& job : jobs) {
        const Dataset d = load_job(job);
        std::vector<std::string> circumstances =
            get_or<std::vector<std::string>>(cfg, "circumstances", d.circumstance_names());

        std::vector<PartialEffect> effects(circumstances.size());
        parallel_for(circumstances.size(), threads, [&](std::size_t c) {
            effects[c] = partial_effect(d, circumstances[c], est_cfg, index);
        });

        std::size_t argmax = 0;
        std::vector<JsonValue> effect_json;
        for (std::size_t c = 0; c < effects.size(); ++c) {
            rows.push_back(effect_csv_row(job.label, effects[c], prov.hash));
            effect_json.push_back(to_json(effects[c]));
            if (effects[c].kappa > effects[argmax].kappa) argmax = c;
        }
        const auto& top = effects[argmax];
        largest_rows.push_back({job.label, top.circumstances, format_double(top.kappa),
                                format_double(top.kappa_rel),
                                pretty_estimate(top.kappa, top.ci), prov.hash, kVersion});
        job_results.push_back(JsonValue::object({
            {"label", JsonValue::str(job.label)},
            {"index", JsonValue::str(to_string(index))},
            {"effects", JsonValue::array(effect_json)},
            {"largest", to_json(top)},
        }));
    }

    write_text_file(out_dir / "effects.csv", csv_text(effect_csv_header(), rows));
    write_text_file(out_dir / "largest_effects.csv",
                    csv_text({"label", "circumstance", "kappa", "kappa_rel", "estimate",
                              "config_hash", "version"},
                             largest_rows));
    write_text_file(out_dir / "effects.json",
                    provenance_json(prov, {{"results", JsonValue::array(job_results)}}).text + "\n");
    return 0;
}

// Reads theta/se back out of an estimate.json produced by cmd_estimate.
IOpEstimate estimate_from_file(const std::string& path, const std::string& index) {
    const json j = read_json_file(path);
    if (!j.contains("results")) throw DataError(path + ": not an estimate output file");
    for (const auto& res : j.at("results")) {
        if (index != "any" && res.at("index").get<std::string>() != index) continue;
        const auto& deb = res.at("debiased");
        IOpEstimate est;
        est.index = ineq_index_from(res.at("index").get<std::string>());
        est.kind = EstimatorKind::debiased;
        est.theta = deb.at("theta").get<double>();
        est.se = deb.at("se").get<double>();
        est.level = deb.at("level").get<double>();
        est.n = deb.at("n").get<std::size_t>();
        est.has_inference = true;
        est.learner = deb.at("learner").get<std::string>();
        return est;
    }
    throw DataError(path + ": no estimate for the requested index");
}

int cmd_test(const json& cfg, const fs::path& out_dir) {
    const auto prov = provenance_for(cfg);
    const std::string index = get_or<std::string>(cfg, "index", "gini");

    IOpEstimate a, b;
    if (cfg.contains("estimate_a") || cfg.contains("estimate_b")) {
        a = estimate_from_file(get_or<std::string>(cfg, "estimate_a", ""), index);
        b = estimate_from_file(get_or<std::string>(cfg, "estimate_b", ""), index);
    } else {
        const std::string sub_a = get_or<std::string>(cfg, "subset_a", "");
        const std::string sub_b = get_or<std::string>(cfg, "subset_b", "");
        if (sub_a.empty() || sub_b.empty())
            throw ConfigError("test: give estimate_a/estimate_b files or subset_a/subset_b predicates");
        auto jobs = dataset_jobs(cfg);
        if (jobs.size() != 1) throw ConfigError("test: subset comparison needs exactly one dataset");
        const Dataset d = load_job(jobs[0]);
        const auto est_cfg = estimation_from_json(cfg);
        const auto which = index_from_json(cfg);
        EstimationConfig cfg_b = est_cfg;
        cfg_b.seed = derive_seed(est_cfg.seed, 2);
        const auto run_a = run_estimate(subset(d, sub_a), est_cfg, which.gini, which.mld);
        const auto run_b = run_estimate(subset(d, sub_b), cfg_b, which.gini, which.mld);
        a = which.gini ? run_a.gini_est->debiased : run_a.mld_est->debiased;
        b = which.gini ? run_b.gini_est->debiased : run_b.mld_est->debiased;
    }

    const TestResult t = compare_iop(a, b);
    write_text_file(out_dir / "test.csv",
                    csv_text({"description", "theta_a", "theta_b", "statistic", "se", "z", "p_value",
                              "config_hash", "version"},
                             {{t.description, format_double(a.theta), format_double(b.theta),
                               format_double(t.statistic), format_double(t.se), format_double(t.z),
                               format_double(t.p_value), prov.hash, kVersion}}));
    write_text_file(out_dir / "test.json",
                    provenance_json(prov, {{"theta_a", JsonValue::num(a.theta)},
                                           {"theta_b", JsonValue::num(b.theta)},
                                           {"result", to_json(t)}})
                            .text +
                        "\n");
    std::cout << t.description << ": diff=" << format_double(t.statistic)
              << " se=" << format_double(t.se) << " p=" << format_double(t.p_value) << "\n";
    return 0;
}

int cmd_group(const json& cfg, const fs::path& out_dir, int threads) {
    const auto jobs = dataset_jobs(cfg);
    if (jobs.size() != 1) throw ConfigError("group: needs exactly one dataset");
    const auto est_cfg = estimation_from_json(cfg);
    const auto which = index_from_json(cfg);
    const IneqIndex index = which.gini ? IneqIndex::gini : IneqIndex::mld;
    const auto prov = provenance_for(cfg);

    const auto group = get_or<std::vector<std::string>>(cfg, "group", {});
    if (group.empty()) throw ConfigError("group: 'group' must list the circumstances to test");
    const int permutations = get_or<int>(cfg, "permutations", 0);
    const Dataset d = load_job(jobs[0]);
    const PartialEffect pe = group_effect(d, group, est_cfg, index);
    const TestResult t = group_test(d, group, est_cfg, index, permutations, threads);

    write_text_file(out_dir / "group.csv", csv_text(effect_csv_header(),
                                                    {effect_csv_row(jobs[0].label, pe, prov.hash)}));
    write_text_file(out_dir / "group.json",
                    provenance_json(prov, {{"effect", to_json(pe)}, {"test", to_json(t)}}).text + "\n");
    std::cout << t.description << ": stat=" << format_double(t.statistic)
              << " p=" << format_double(t.p_value) << "\n";
    return 0;
}

int cmd_mobility(const json& cfg, const fs::path& out_dir) {
    const auto jobs = dataset_jobs(cfg);
    const auto prov = provenance_for(cfg);
    const std::string column = get_or<std::string>(cfg, "mobility_column", "");
    if (column.empty()) throw ConfigError("mobility: 'mobility_column' required");
    const auto levels = get_or<std::vector<std::string>>(cfg, "mobility_levels", {});

    std::vector<std::vector<std::string>> rows;
    std::vector<JsonValue> results;
    for (const auto& job : jobs) {
        const Dataset d = load_job(job);
        const TestResult t = mobility_slope(d, column, levels);
        rows.push_back({job.label, column, format_double(t.statistic), format_double(t.se),
                        format_double(t.z), format_double(t.p_value), prov.hash, kVersion});
        results.push_back(JsonValue::object(
            {{"label", JsonValue::str(job.label)}, {"column", JsonValue::str(column)},
             {"result", to_json(t)}}));
    }
    write_text_file(out_dir / "mobility.csv",
                    csv_text({"label", "column", "slope", "se", "z", "p_value", "config_hash",
                              "version"},
                             rows));
    write_text_file(out_dir / "mobility.json",
                    provenance_json(prov, {{"results", JsonValue::array(results)}}).text + "\n");
    return 0;
}

int cmd_simulate(const json& cfg, const fs::path& out_dir, int threads) {
    const auto prov = provenance_for(cfg);
    if (!cfg.contains("dgp")) throw ConfigError("simulate: 'dgp' required");
    const DGPSpec spec = dgp_from_json(cfg.at("dgp"));
    MonteCarloConfig mc;
    mc.est = estimation_from_json(cfg);
    const auto which = index_from_json(cfg);
    mc.gini = which.gini;
    mc.mld = which.mld;
    mc.n = get_or<std::size_t>(cfg, "n", mc.n);
    mc.replications = get_or<int>(cfg, "replications", mc.replications);
    mc.relative = get_or<bool>(cfg, "relative", false);
    mc.learner_spread = get_or<bool>(cfg, "learner_spread", false);
    mc.threads = threads;

    const MonteCarloReport report = monte_carlo(spec, mc);
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : report.summaries) rows.push_back(mc_csv_row(report, s, prov.hash));
    write_text_file(out_dir / "simulation.csv", csv_text(mc_csv_header(), rows));
    write_text_file(out_dir / "simulation.json",
                    provenance_json(prov, {{"report", to_json(report)}}).text + "\n");
    for (const auto& s : report.summaries)
        std::cout << s.name << ": bias=" << format_double(s.bias) << " sd=" << format_double(s.sd)
                  << " coverage=" << format_double(s.coverage) << "\n";
    return 0;
}

const std::set<std::string> kCommonKeys = {
    "label",   "input",   "datasets",  "schema",   "schema_file", "subset",  "index",
    "learners", "K",      "seed",      "mode",     "level",       "encode",  "relative",
    "mld_floor", "mld_truncate", "out", "threads", "echo_data"};

void check_command_keys(const json& cfg, const std::string& command) {
    std::set<std::string> allowed = kCommonKeys;
    if (command == "peffect") allowed.insert("circumstances");
    if (command == "group") {
        allowed.insert("group");
        allowed.insert("permutations");
    }
    if (command == "mobility") {
        allowed.insert("mobility_column");
        allowed.insert("mobility_levels");
    }
    if (command == "test") {
        allowed.insert("estimate_a");
        allowed.insert("estimate_b");
        allowed.insert("subset_a");
        allowed.insert("subset_b");
    }
    if (command == "simulate") {
        allowed.insert("dgp");
        allowed.insert("n");
        allowed.insert("replications");
        allowed.insert("learner_spread");
    }
    check_keys(cfg, allowed, "config");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inequality of opportunity: debiased Gini/MLD estimation, effects and tests"};
    app.require_subcommand(1);

    std::string config_path, input, label, schema_file, out_dir_flag, index_flag, subset_expr;
    std::string mode_flag, mobility_column, test_a, test_b, subset_a, subset_b;
    std::vector<std::string> circumstances, group, mobility_levels;
    int K = 0, threads = 0, replications = 0;
    std::size_t mc_n = 0;
    std::int64_t seed = -1;
    double level = 0.0;
    bool echo_data = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON config file");
        sub->add_option("-i,--input", input, "input CSV (overrides config)");
        sub->add_option("--label", label, "dataset label");
        sub->add_option("--schema", schema_file, "schema key=value file");
        sub->add_option("-o,--out", out_dir_flag, "output directory");
        sub->add_option("--index", index_flag, "gini, mld or both");
        sub->add_option("--subset", subset_expr, "row filter, e.g. sex==F or birth<=1975");
        sub->add_option("-K,--folds", K, "cross-fitting folds");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--mode", mode_flag, "fold or pair_block");
        sub->add_option("--level", level, "confidence level");
        sub->add_option("--threads", threads, "worker threads");
    };

    auto* estimate = app.add_subcommand("estimate", "IOp estimates for one or more datasets");
    add_common(estimate);
    estimate->add_flag("--echo-data", echo_data, "also write the loaded dataset as CSV");

    auto* peffect = app.add_subcommand("peffect", "partial effects of circumstances");
    add_common(peffect);
    peffect->add_option("--circumstance", circumstances, "circumstances to sweep (default: all)");

    auto* test = app.add_subcommand("test", "compare IOp between two populations");
    add_common(test);
    test->add_option("--estimate-a", test_a, "estimate.json for population A");
    test->add_option("--estimate-b", test_b, "estimate.json for population B");
    test->add_option("--subset-a", subset_a, "subset predicate for population A");
    test->add_option("--subset-b", subset_b, "subset predicate for population B");

    int permutations = 0;
    auto* group_cmd = app.add_subcommand("group", "joint significance of a circumstance group");
    add_common(group_cmd);
    group_cmd->add_option("--group", group, "circumstances to test jointly");
    group_cmd->add_option("--permutations", permutations,
                          "permutation-null draws for a calibrated p-value (0 = z test only)");

    auto* mobility = app.add_subcommand("mobility", "persistence slope on an ordered parent level");
    add_common(mobility);
    mobility->add_option("--column", mobility_column, "3-level parent circumstance");
    mobility->add_option("--levels", mobility_levels, "ordered level labels (low medium high)");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on a synthetic DGP");
    add_common(simulate);
    simulate->add_option("--replications", replications, "number of replications");
    simulate->add_option("--n", mc_n, "sample size per replication");

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg = config_path.empty() ? json::object() : read_json_file(config_path);
        // flag overrides
        if (!input.empty()) cfg["input"] = input;
        if (!label.empty()) cfg["label"] = label;
        if (!schema_file.empty()) cfg["schema_file"] = schema_file;
        if (!index_flag.empty()) cfg["index"] = index_flag;
        if (!subset_expr.empty()) cfg["subset"] = subset_expr;
        if (K > 0) cfg["K"] = K;
        if (seed >= 0) cfg["seed"] = static_cast<std::uint64_t>(seed);
        if (!mode_flag.empty()) cfg["mode"] = mode_flag;
        if (level > 0.0) cfg["level"] = level;
        if (threads > 0) cfg["threads"] = threads;
        if (echo_data) cfg["echo_data"] = true;
        if (!out_dir_flag.empty()) cfg["out"] = out_dir_flag;
        if (!circumstances.empty()) cfg["circumstances"] = circumstances;
        if (!group.empty()) cfg["group"] = group;
        if (!mobility_column.empty()) cfg["mobility_column"] = mobility_column;
        if (!mobility_levels.empty()) cfg["mobility_levels"] = mobility_levels;
        if (!test_a.empty()) cfg["estimate_a"] = test_a;
        if (!test_b.empty()) cfg["estimate_b"] = test_b;
        if (!subset_a.empty()) cfg["subset_a"] = subset_a;
        if (!subset_b.empty()) cfg["subset_b"] = subset_b;
        if (replications > 0) cfg["replications"] = replications;
        if (permutations > 0) cfg["permutations"] = permutations;
        if (mc_n > 0) cfg["n"] = mc_n;

        const std::string command = app.get_subcommands().front()->get_name();
        check_command_keys(cfg, command);
        const fs::path out = get_or<std::string>(cfg, "out", ".");
        fs::create_directories(out);
        const int nthreads = get_or<int>(cfg, "threads", 1);
        const bool echo = get_or<bool>(cfg, "echo_data", false);

        if (command == "estimate") return cmd_estimate(cfg, out, echo, nthreads);
        if (command == "peffect") return cmd_peffect(cfg, out, nthreads);
        if (command == "test") return cmd_test(cfg, out);
        if (command == "group") return cmd_group(cfg, out, nthreads);
        if (command == "mobility") return cmd_mobility(cfg, out);
        if (command == "simulate") return cmd_simulate(cfg, out, nthreads);
        throw ConfigError("unknown subcommand");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
