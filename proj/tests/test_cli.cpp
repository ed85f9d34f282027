#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ineqop/ineqop.hpp"

using namespace ineqop;
namespace fs = std::filesystem;

namespace {

const char* cli_path() { return INEQOP_CLI_PATH; }

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ineqop_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// A small synthetic dataset with one informative circumstance.
void write_sample_data(const fs::path& dir) {
    DGPSpec spec;
    spec.circumstances = {"origin"};
    spec.cells = {{{"a"}, 0.25, 8.0}, {{"b"}, 0.25, 11.0}, {{"c"}, 0.25, 14.0}, {{"d"}, 0.25, 17.0}};
    spec.noise_delta = 1.5;
    spec.seed = 5;
    const auto d = gen_dgp(spec, 400, 5);
    std::string text = "y,origin,sex\n";
    for (std::size_t i = 0; i < d.n(); ++i)
        text += format_double(d.y[i]) + "," + d.x[0].label_of(i) + "," + (i % 2 ? "M" : "F") + "\n";
    write_file(dir / "sample.csv", text);
    write_file(dir / "schema.cfg",
               "outcome = y\ncircumstances = origin, sex\n");
}

std::string base_config(const fs::path& dir, const std::string& extra = "") {
    return std::string("{") +
           "\"input\":\"" + (dir / "sample.csv").string() + "\"," +
           "\"schema_file\":\"" + (dir / "schema.cfg").string() + "\"," +
           "\"label\":\"sample\"," +
           "\"learners\":[{\"kind\":\"forest\",\"trees\":25}]," +
           "\"K\":4,\"seed\":11,\"out\":\"" + (dir / "out").string() + "\"" +
           (extra.empty() ? "" : "," + extra) + "}";
}

}  // namespace

TEST_CASE("cli estimate writes csv and json with provenance") {
    TempDir tmp;
    write_sample_data(tmp.path);
    write_file(tmp.path / "cfg.json", base_config(tmp.path, "\"index\":\"both\""));
    REQUIRE(run_cli("estimate -c " + (tmp.path / "cfg.json").string()) == 0);

    const auto csv = slurp(tmp.path / "out" / "estimate.csv");
    CHECK(csv.find("label,index,n,mean") == 0);
    CHECK(csv.find("sample,gini") != std::string::npos);
    CHECK(csv.find("sample,mld") != std::string::npos);
    CHECK(csv.find(kVersion) != std::string::npos);

    const auto log = slurp(tmp.path / "out" / "estimate.json");
    CHECK(log.find("\"config_hash\"") != std::string::npos);
    CHECK(log.find("\"results\":[") != std::string::npos);
    // both index rows share the fold assignment: the seed is echoed per record
    CHECK(log.find("\"seed\":11") != std::string::npos);
}

TEST_CASE("cli estimate matches the library call bit for bit") {
    TempDir tmp;
    write_sample_data(tmp.path);
    write_file(tmp.path / "cfg.json", base_config(tmp.path));
    REQUIRE(run_cli("estimate -c " + (tmp.path / "cfg.json").string()) == 0);

    Schema schema = load_schema((tmp.path / "schema.cfg").string());
    const Dataset d = load_dataset((tmp.path / "sample.csv").string(), schema);
    EstimationConfig cfg;
    cfg.learners = {LearnerSpec::forest(25)};
    cfg.K = 4;
    cfg.seed = 11;
    const auto run = run_estimate(d, cfg, true, false);

    const auto log = slurp(tmp.path / "out" / "estimate.json");
    const std::string needle = "\"theta\":" + format_double(run.gini_est->debiased.theta);
    CHECK(log.find(needle) != std::string::npos);
}

TEST_CASE("cli rerunning the same config reproduces outputs exactly") {
    TempDir tmp;
    write_sample_data(tmp.path);
    write_file(tmp.path / "cfg.json", base_config(tmp.path));
    REQUIRE(run_cli("estimate -c " + (tmp.path / "cfg.json").string()) == 0);
    const auto first = slurp(tmp.path / "out" / "estimate.csv");
    REQUIRE(run_cli("estimate -c " + (tmp.path / "cfg.json").string()) == 0);
    CHECK(slurp(tmp.path / "out" / "estimate.csv") == first);
}

TEST_CASE("cli exit codes distinguish config and data errors") {
    TempDir tmp;
    write_sample_data(tmp.path);
    // unknown config key -> 2
    write_file(tmp.path / "bad.json", base_config(tmp.path, "\"bogus_key\":1"));
    CHECK(run_cli("estimate -c " + (tmp.path / "bad.json").string()) == 2);
    // missing input file -> 3
    write_file(tmp.path / "nofile.json",
               "{\"input\":\"/nonexistent.csv\",\"schema_file\":\"" +
                   (tmp.path / "schema.cfg").string() + "\",\"out\":\"" +
                   (tmp.path / "out").string() + "\"}");
    CHECK(run_cli("estimate -c " + (tmp.path / "nofile.json").string()) == 3);
    // K too large for a subset -> config error
    write_file(tmp.path / "badk.json", base_config(tmp.path, "\"K\":100000"));
    CHECK(run_cli("estimate -c " + (tmp.path / "badk.json").string()) == 2);
}

TEST_CASE("cli isced mapping is byte-exact in echoed data") {
    TempDir tmp;
    std::string text = "educ,sex\n";
    for (int code = 0; code <= 8; ++code) text += std::to_string(code) + (code % 2 ? ",M" : ",F") + "\n";
    write_file(tmp.path / "isced.csv", text);
    write_file(tmp.path / "schema.cfg", "outcome = educ\ncircumstances = sex\nisced = educ\n");
    write_file(tmp.path / "cfg.json",
               "{\"input\":\"" + (tmp.path / "isced.csv").string() + "\",\"schema_file\":\"" +
                   (tmp.path / "schema.cfg").string() +
                   "\",\"label\":\"isced\",\"learners\":[{\"kind\":\"gbt\",\"rounds\":5}],"
                   "\"K\":3,\"seed\":1,\"relative\":false,\"echo_data\":true,\"out\":\"" +
                   (tmp.path / "out").string() + "\"}");
    REQUIRE(run_cli("estimate -c " + (tmp.path / "cfg.json").string()) == 0);

    const auto echoed = slurp(tmp.path / "out" / "isced_data.csv");
    // codes 0..8 map to 7,7,10,13,15,18,18,18,18
    const std::string expected =
        "id,y,w,sex\n1,7,1,F\n2,7,1,M\n3,10,1,F\n4,13,1,M\n5,15,1,F\n6,18,1,M\n7,18,1,F\n8,18,1,M\n9,18,1,F\n";
    CHECK(echoed == expected);
}

TEST_CASE("cli peffect emits a largest-effect summary") {
    TempDir tmp;
    write_sample_data(tmp.path);
    write_file(tmp.path / "cfg.json",
               base_config(tmp.path, "\"learners\":[{\"kind\":\"forest\",\"trees\":15}]"));
    REQUIRE(run_cli("peffect -c " + (tmp.path / "cfg.json").string()) == 0);
    const auto largest = slurp(tmp.path / "out" / "largest_effects.csv");
    CHECK(largest.find("sample,origin") != std::string::npos);  // origin dominates sex
    const auto effects = slurp(tmp.path / "out" / "effects.csv");
    CHECK(effects.find("origin") != std::string::npos);
    CHECK(effects.find("sex") != std::string::npos);
}

TEST_CASE("cli test compares two estimate files") {
    TempDir tmp;
    write_sample_data(tmp.path);
    write_file(tmp.path / "a.json", base_config(tmp.path, "\"subset\":\"sex==F\""));
    REQUIRE(run_cli("estimate -c " + (tmp.path / "a.json").string() + " -o " +
                    (tmp.path / "out_a").string()) == 0);
    write_file(tmp.path / "b.json", base_config(tmp.path, "\"subset\":\"sex==M\""));
    REQUIRE(run_cli("estimate -c " + (tmp.path / "b.json").string() + " -o " +
                    (tmp.path / "out_b").string()) == 0);

    REQUIRE(run_cli("test --estimate-a " + (tmp.path / "out_a" / "estimate.json").string() +
                    " --estimate-b " + (tmp.path / "out_b" / "estimate.json").string() + " -o " +
                    (tmp.path / "out_t").string()) == 0);
    const auto result = slurp(tmp.path / "out_t" / "test.json");
    CHECK(result.find("\"p_value\":") != std::string::npos);
}

TEST_CASE("cli group and mobility run end to end") {
    TempDir tmp;
    write_sample_data(tmp.path);
    write_file(tmp.path / "cfg.json", base_config(tmp.path, "\"group\":[\"origin\"]"));
    REQUIRE(run_cli("group -c " + (tmp.path / "cfg.json").string()) == 0);
    CHECK(slurp(tmp.path / "out" / "group.json").find("\"test\":") != std::string::npos);

    std::string text = "y,mother\n";
    for (int i = 0; i < 30; ++i) {
        const int level = i % 3;
        text += format_double(9.0 + 2.0 * level + 0.1 * (i % 5)) + "," + std::to_string(level) + "\n";
    }
    write_file(tmp.path / "mob.csv", text);
    write_file(tmp.path / "mobschema.cfg", "outcome = y\ncircumstances = mother\n");
    REQUIRE(run_cli("mobility -i " + (tmp.path / "mob.csv").string() + " --schema " +
                    (tmp.path / "mobschema.cfg").string() + " --column mother -o " +
                    (tmp.path / "out_m").string()) == 0);
    const auto mob = slurp(tmp.path / "out_m" / "mobility.csv");
    CHECK(mob.find("mother") != std::string::npos);
}

TEST_CASE("cli simulate produces a summary table") {
    TempDir tmp;
    const std::string dgp =
        "\"dgp\":{\"circumstances\":[\"g\"],\"cells\":["
        "{\"labels\":[\"a\"],\"prob\":0.5,\"mean\":8},"
        "{\"labels\":[\"b\"],\"prob\":0.5,\"mean\":14}],\"noise_delta\":1,\"seed\":3}";
    write_file(tmp.path / "cfg.json",
               "{" + dgp +
                   ",\"learners\":[{\"kind\":\"forest\",\"trees\":10}],\"K\":3,\"seed\":2,"
                   "\"n\":150,\"replications\":4,\"out\":\"" +
                   (tmp.path / "out").string() + "\"}");
    REQUIRE(run_cli("simulate -c " + (tmp.path / "cfg.json").string()) == 0);
    const auto csv = slurp(tmp.path / "out" / "simulation.csv");
    CHECK(csv.find("debiased_gini") != std::string::npos);
    CHECK(csv.find("plugin_gini") != std::string::npos);
}
