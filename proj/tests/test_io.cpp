#include <catch2/catch_amalgamated.hpp>

#include "ineqop/io.hpp"

using namespace ineqop;

TEST_CASE("json escaping") {
    CHECK(JsonValue::str("plain").text == "\"plain\"");
    CHECK(JsonValue::str("a\"b\\c\nd").text == "\"a\\\"b\\\\c\\nd\"");
    CHECK(JsonValue::num(std::nan("")).text == "null");
    CHECK(JsonValue::num(0.25).text == "0.25");
    CHECK(JsonValue::array({JsonValue::num(1), JsonValue::num(2)}).text == "[1,2]");
    CHECK(JsonValue::object({{"k", JsonValue::boolean(true)}}).text == "{\"k\":true}");
}

TEST_CASE("config hash is stable and sensitive") {
    const auto h1 = config_hash("{\"a\":1}");
    const auto h2 = config_hash("{\"a\":1}");
    const auto h3 = config_hash("{\"a\":2}");
    CHECK(h1 == h2);
    CHECK(h1 != h3);
    CHECK(h1.size() == 16);
}

TEST_CASE("paper-style estimate formatting") {
    // Austria-style row: 0.057 with CI (0.053, 0.06)
    CHECK(format_round3(0.0568) == "0.057");
    CHECK(format_round3(0.0601) == "0.06");
    CHECK(format_round3(0.0534) == "0.053");
    CHECK(pretty_estimate(0.0568, {0.0534, 0.0601}) == "0.057 (0.053,0.06)");
    CHECK(format_round3(-0.0001) == "0");
    CHECK(format_round3(0.5) == "0.5");
}

TEST_CASE("percent formatting") {
    CHECK(pretty_percent(0.5479, {0.5248, 0.5702}) == "55% (52%,57%)");
    CHECK(pretty_percent(0.372, {0.34, 0.41}) == "37% (34%,41%)");
}

TEST_CASE("estimate records serialize to valid-looking json and csv") {
    IOpEstimate est;
    est.index = IneqIndex::gini;
    est.kind = EstimatorKind::debiased;
    est.theta = 0.0568;
    est.has_inference = true;
    est.variance = 0.01;
    est.se = 0.0017;
    est.ci = {0.0534, 0.0601};
    est.has_relative = true;
    est.theta_rel = 0.5479;
    est.se_rel = 0.011;
    est.ci_rel = {0.5248, 0.5702};
    est.learner = "lasso(lambda=cv)";
    est.mode = "fold";
    est.K = 5;
    est.seed = 42;
    est.n = 5121;
    est.rmse = 2.48;

    const auto j = to_json(est).text;
    CHECK(j.find("\"theta\":0.0568") != std::string::npos);
    CHECK(j.find("\"learner\":\"lasso(lambda=cv)\"") != std::string::npos);
    CHECK(j.find("\"relative\":{") != std::string::npos);

    IOpEstimate plugin;
    plugin.kind = EstimatorKind::plugin;
    plugin.theta = 0.103;
    const auto row = estimate_csv_row("Austria", 14.6, 0.103, plugin, est, "deadbeefdeadbeef");
    const auto header = estimate_csv_header();
    REQUIRE(row.size() == header.size());
    // the pretty column carries the paper-style string
    std::size_t pretty_col = 0;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "estimate") pretty_col = i;
    CHECK(row[pretty_col] == "0.057 (0.053,0.06)");
    std::size_t share_col = 0;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "rel_share") share_col = i;
    CHECK(row[share_col] == "55% (52%,57%)");
}

TEST_CASE("plugin records leave inference fields null or empty") {
    IOpEstimate plugin;
    plugin.kind = EstimatorKind::plugin;
    plugin.index = IneqIndex::mld;
    plugin.theta = 0.1;
    const auto j = to_json(plugin).text;
    CHECK(j.find("\"se\":null") != std::string::npos);
    CHECK(j.find("\"ci\":null") != std::string::npos);
    CHECK(field_or_empty(plugin.se).empty());
}
