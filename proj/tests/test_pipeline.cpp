#include "fasids/error.hpp"
#include "fasids/pipeline.hpp"
#include "pipeline_support.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>

using namespace fasids;

namespace {

const Detector& detector() {
    static const Detector d = test::shipped_detector();
    return d;
}

std::vector<const Alert*> alerts_from(const RunResult& r, AlertSource source) {
    std::vector<const Alert*> out;
    for (const auto& a : r.alerts)
        if (a.source == source) out.push_back(&a);
    return out;
}

void check_gate(const RunResult& r, bool fuzzy_on) {
    for (std::size_t i = 0; i < r.transactions.size(); ++i) {
        const auto& t = r.transactions[i];
        INFO("transaction " << i << " " << t.start_line);
        const bool clean = t.triggers.empty() && t.payload_alerts.empty();
        if (t.fed_to_fuzzy) CHECK(clean);
        CHECK(t.fed_to_fuzzy == (clean && fuzzy_on));
    }
    for (const auto* a : alerts_from(r, AlertSource::fuzzy)) {
        REQUIRE_FALSE(a->transactions.empty());
        for (auto idx : a->transactions) {
            REQUIRE(idx < r.transactions.size());
            CHECK(r.transactions[idx].fed_to_fuzzy);
        }
    }
}

const Alert* brute_force_alert(const RunResult& r) {
    for (const auto* a : alerts_from(r, AlertSource::fuzzy))
        if (a->id == "brute_force") return a;
    return nullptr;
}

} // namespace

TEST_CASE("Gate: fuzzy sees only what the other stages passed", "[pipeline][property]") {
    const auto cap = test::mixed_capture();
    for (bool payload : {false, true}) {
        for (bool fuzzy : {false, true}) {
            INFO("payload " << payload << " fuzzy " << fuzzy);
            auto r = analyze_capture(cap, detector(), {payload, fuzzy});
            check_gate(r, fuzzy);
            if (!fuzzy) CHECK(alerts_from(r, AlertSource::fuzzy).empty());
            if (!payload) CHECK(alerts_from(r, AlertSource::payload).empty());
        }
    }
}

TEST_CASE("Alerts: every trigger and payload finding is reported", "[pipeline][property]") {
    auto r = analyze_capture(test::mixed_capture(), detector());
    std::size_t rule_alerts = 0, payload_alerts = 0;
    for (const auto& t : r.transactions) {
        rule_alerts += t.triggers.size();
        payload_alerts += t.payload_alerts.size();
    }
    CHECK(alerts_from(r, AlertSource::header_rule).size() == rule_alerts);
    CHECK(alerts_from(r, AlertSource::payload).size() == payload_alerts);
    for (const auto& a : r.alerts) {
        REQUIRE_FALSE(a.transactions.empty());
        const auto& t = r.transactions[a.transactions.front()];
        if (a.source == AlertSource::header_rule) {
            bool found = false;
            for (const auto& trig : t.triggers) found |= std::to_string(trig.rule_number) == a.id;
            CHECK(found);
            CHECK(a.session_id == t.session_id);
        }
        CHECK(a.evidence.size() <= kMaxEvidence);
    }
    CHECK(r.summary.transactions == r.transactions.size());
}

TEST_CASE("Alerts: order follows the capture", "[pipeline]") {
    auto r = analyze_capture(test::mixed_capture(), detector());
    for (std::size_t i = 1; i < r.alerts.size(); ++i) {
        auto anchor = [](const Alert& a) { return *std::max_element(a.transactions.begin(), a.transactions.end()); };
        CHECK(anchor(r.alerts[i - 1]) <= anchor(r.alerts[i]));
    }
}

TEST_CASE("Determinism: identical input gives identical alerts", "[pipeline][property]") {
    const auto cap = test::mixed_capture();
    auto a = analyze_capture(cap, detector());
    auto b = analyze_capture(cap, detector());
    REQUIRE(a.alerts.size() == b.alerts.size());
    for (std::size_t i = 0; i < a.alerts.size(); ++i) CHECK(to_json_line(a.alerts[i]) == to_json_line(b.alerts[i]));
}

TEST_CASE("Benign traffic is silent in every configuration", "[pipeline]") {
    const auto cap = test::corpus_capture("benign");
    for (bool payload : {false, true})
        for (bool fuzzy : {false, true}) CHECK(analyze_capture(cap, detector(), {payload, fuzzy}).alerts.empty());
}

TEST_CASE("XSS page: one payload alert and nothing for fuzzy", "[pipeline]") {
    auto r = analyze_capture(test::corpus_capture("xss"), detector());
    CHECK(alerts_from(r, AlertSource::fuzzy).empty());
    std::map<std::string, int> per_session;
    for (const auto* a : alerts_from(r, AlertSource::payload)) {
        CHECK(a->id == "tag-attribute-injection");
        ++per_session[a->session_id];
    }
    CHECK(per_session.size() == 13);
    for (const auto& [s, n] : per_session) CHECK(n == 1);
    for (const auto& t : r.transactions)
        if (!t.payload_alerts.empty()) CHECK_FALSE(t.fed_to_fuzzy);
}

TEST_CASE("Brute force: flagged only with the fuzzy stage", "[pipeline]") {
    const auto cap = test::corpus_capture("brute_force");
    auto with = analyze_capture(cap, detector(), {true, true});
    const Alert* a = brute_force_alert(with);
    REQUIRE(a);
    CHECK(a->severity >= AlertSeverity::hp);
    REQUIRE(a->score);
    CHECK(*a->score == Catch::Approx(0.6245).margin(1e-3));
    CHECK(a->transactions.size() == 30);

    auto without = analyze_capture(cap, detector(), {true, false});
    CHECK(without.alerts.empty());

    auto mixed = analyze_capture(test::mixed_capture(), detector(), {true, true});
    const Alert* m = brute_force_alert(mixed);
    REQUIRE(m);
    CHECK(m->severity >= AlertSeverity::hp);
    CHECK(brute_force_alert(analyze_capture(test::mixed_capture(), detector(), {true, false})) == nullptr);
}

TEST_CASE("Rule hits stay out of the fuzzy stage", "[pipeline]") {
    auto r = analyze_capture(test::corpus_capture("injected"), detector());
    bool saw_rule1 = false;
    for (const auto& t : r.transactions) {
        for (const auto& trig : t.triggers) {
            if (trig.rule_number == 1) {
                saw_rule1 = true;
                CHECK_FALSE(t.fed_to_fuzzy);
            }
        }
    }
    CHECK(saw_rule1);
}

TEST_CASE("JSON lines carry the alert schema", "[pipeline]") {
    auto r = analyze_capture(test::mixed_capture(), detector());
    REQUIRE_FALSE(r.alerts.empty());
    for (const auto& a : r.alerts) {
        auto line = to_json_line(a);
        CHECK(line.find('\n') == std::string::npos);
        auto j = nlohmann::json::parse(line);
        for (const char* key : {"source", "id", "severity", "session_id", "timestamp", "message", "evidence",
                                "transactions"}) {
            CHECK(j.contains(key));
        }
        CHECK(j["source"].get<std::string>() == to_string(a.source));
        CHECK(j["transactions"].is_array());
        CHECK(j.contains("score") == (a.source == AlertSource::fuzzy));
    }
    Alert odd;
    odd.evidence = std::string("bad \xff byte");
    CHECK_NOTHROW(nlohmann::json::parse(to_json_line(odd)));
}

TEST_CASE("run_pipeline: writes alerts and records, rejects bad config", "[pipeline]") {
    const auto dir = std::filesystem::temp_directory_path() / "fasids_pipeline_test";
    std::filesystem::create_directories(dir);
    RunConfig cfg;
    cfg.rules_path = test::source_path("rules/default.rules");
    cfg.input = test::corpus_dir() + "/injected.jsonl";
    cfg.out_path = (dir / "alerts.jsonl").string();
    cfg.records_out = (dir / "records.txt").string();
    auto r = run_pipeline(cfg);
    std::ifstream in(cfg.out_path);
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == r.alerts.size());
    CHECK(std::filesystem::file_size(cfg.records_out) > 0);
    CHECK_FALSE(summary_text(r).empty());

    cfg.rules_path = test::source_path("no/such.rules");
    CHECK_THROWS(run_pipeline(cfg));
    cfg.rules_path.clear();
    cfg.input = test::source_path("no/such.jsonl");
    CHECK_THROWS_AS(run_pipeline(cfg), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("Bench: CSV shape", "[pipeline]") {
    auto rows = bench_objects({20, 40}, 1);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].size == 20);
    for (const auto& r : rows) CHECK(r.median_us > 0);
    auto csv = bench_csv(rows, "objects");
    CHECK(csv.rfind("objects,mean_us,median_us\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    auto p = bench_payload({1024}, 1);
    REQUIRE(p.size() == 1);
    CHECK(p[0].size == 1024);
}

TEST_CASE("Report: detection by configuration", "[pipeline]") {
    auto rep = corpus_report(test::corpus_dir(), detector());
    std::map<std::pair<std::string, std::string>, ReportRow> at;
    for (const auto& r : rep.rows) at[{r.configuration, r.label}] = r;
    for (const char* c : {"header-only", "header+payload", "header+payload+fuzzy"}) {
        CHECK(at.at({c, "benign"}).flagged == 0);
        CHECK(at.at({c, "benign"}).incidents == 50);
    }
    CHECK(at.at({"header-only", "xss"}).rate == 0.0);
    CHECK(at.at({"header+payload", "xss"}).rate == 1.0);
    CHECK(at.at({"header+payload", "brute_force"}).rate == 0.0);
    CHECK(at.at({"header+payload+fuzzy", "brute_force"}).rate == 1.0);
    for (const auto& r : rep.rows) {
        if (r.configuration == "header+payload+fuzzy" && r.label != "benign") CHECK(r.rate == 1.0);
    }
    auto csv = report_csv(rep);
    CHECK(csv.rfind("configuration,label,incidents,flagged,rate\n", 0) == 0);
}
