#include "fasids/error.hpp"
#include "fasids/rule_engine.hpp"
#include "rule_oracle.hpp"
#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace fasids;

namespace {

std::vector<FieldRecord> request_records(const std::string& msg) {
    CaptureEntry e;
    e.bytes = msg;
    auto d = dispatch(e);
    REQUIRE(d.transaction);
    return parse_header(*d.transaction).records;
}

} // namespace

TEST_CASE("Rule file: objects and rules parse", "[rules]") {
    auto rb = RuleBase::parse(R"(
# comment
object 1: request-line method parameter = GET
object 2: header User-Agent regex = "sqlmap|nikto"
object 3: request-line uri size > 100
rule 1: objects={1, 2} ordered=true msg="scanner"
rule 2: objects={3} ordered=false
)");
    REQUIRE(rb.objects().size() == 3);
    REQUIRE(rb.rules().size() == 2);
    const auto& o1 = rb.objects().at(1);
    CHECK(o1.line == LineSelector::request_line);
    CHECK(o1.section == "Method");
    CHECK(o1.feature == Feature::parameter);
    CHECK(rb.objects().at(3).section == "Request-URI");
    CHECK(rb.objects().at(3).numeric == 100);
    CHECK(rb.objects().at(2).content == "sqlmap|nikto");
    CHECK(rb.rules().at(1).in_order);
    CHECK(rb.rules().at(1).message == "scanner");
    CHECK(rb.rules().at(2).message == "rule 2");
    CHECK(rb.rules().at(2).no_of_objects() == 1);
}

TEST_CASE("Rule file: errors carry the line number", "[rules]") {
    try {
        RuleBase::parse("object 1: request-line Method parameter = GET\nobject 2: body a regex = \"(\"\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("Rule file: invalid content is rejected", "[rules]") {
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Host size > abc"), ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Host occurrence > -1"), ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Host regex = \"[\""), ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Host parameter > 3"), ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: nowhere Host parameter = a"), ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: request-line Cookie parameter = a"), ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 0: header Host parameter = a"), ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Ho$t parameter = a"), ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Host parameter = a extra"), ParseError);
}

TEST_CASE("Rule file: referential integrity and uniqueness", "[rules]") {
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Host parameter = a\nrule 1: objects={1,2}"), ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Host parameter = a\nobject 1: header Host parameter = b"),
                    ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Host parameter = a\nrule 1: objects={1}\nrule 1: objects={1}"),
                    ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: header Host parameter = a\nrule 1: objects={1,1} count=3"), ParseError);
    CHECK_NOTHROW(RuleBase::parse("object 1: header Host parameter = a\nrule 1: objects={1,1} count=2"));
    CHECK_THROWS_AS(RuleBase::from_parts({test::dummy_object(1)}, {{1, {2}, false, "m"}}), ConfigError);
}

TEST_CASE("Rule file: strict values follow the grammar", "[rules]") {
    CHECK_NOTHROW(RuleBase::parse("object 1: request-line Method parameter = GET", ValueMode::strict));
    CHECK_THROWS_AS(RuleBase::parse("object 1: request-line Method parameter = \"GET\"", ValueMode::strict),
                    ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: request-line Uri parameter = /index.htm", ValueMode::strict),
                    ParseError);
    CHECK_THROWS_AS(RuleBase::parse("object 1: request-line Method parameter eq GET", ValueMode::strict), ParseError);
    CHECK_NOTHROW(RuleBase::parse("object 1: request-line Method parameter eq GET", ValueMode::relaxed));
}

TEST_CASE("Rule file: shipped rule-base loads", "[rules]") {
    auto rb = load_rule_file(test::source_path("rules/default.rules"));
    CHECK(rb.rules().size() >= 4);
    CHECK(rb.rules().at(1).objects == std::vector<int>{1, 3, 4});
    CHECK(rb.rules().at(2).objects == std::vector<int>{2, 1, 1, 1, 1});
    CHECK(rb.rules().at(3).objects == std::vector<int>{3, 6, 4});
    CHECK(rb.rules().at(4).objects == std::vector<int>{6});
    CHECK(rb.rules().at(1).in_order);
    CHECK_FALSE(rb.rules().at(2).in_order);
    CHECK(rb.rules().at(3).in_order);
    CHECK_FALSE(rb.rules().at(4).in_order);
}

TEST_CASE("Match: features and operators", "[rules]") {
    auto recs = request_records("GET /index.htm HTTP/1.1\r\nHost: example\r\nUser-Agent: sqlmap/1.7\r\n\r\n");
    auto rb = RuleBase::parse(R"(
object 1: request-line Method parameter = GET
object 2: request-line Method parameter = POST
object 3: header user-agent regex = "^sqlmap"
object 4: request-line Request-URI size > 5
object 5: request-line Request-URI size < 5
object 6: header Host occurrence = 1
object 7: header Cookie occurrence = 0
object 8: request-header Host parameter = example
object 9: entity-header Host parameter = example
)");
    auto hits = match_objects(recs, rb);
    std::set<int> seen;
    for (const auto& h : hits) seen.insert(h.object_number);
    CHECK(seen == std::set<int>{1, 3, 4, 6, 7, 8});
    for (std::size_t i = 1; i < hits.size(); ++i) {
        CHECK(std::pair(hits[i - 1].record_index, hits[i - 1].object_number) <
              std::pair(hits[i].record_index, hits[i].object_number));
    }
}

TEST_CASE("Match: occurrence hit positions", "[rules]") {
    auto recs = request_records("GET / HTTP/1.1\r\nCookie: a=1\r\nHost: h\r\nCookie: b=2\r\n\r\n");
    auto rb = RuleBase::parse("object 1: header Cookie occurrence > 1\nobject 2: header Referer occurrence < 1");
    auto hits = match_objects(recs, rb);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].object_number == 1);
    CHECK(hits[0].record_index == 5);
    CHECK(hits[0].matched_value == "2");
    CHECK(hits[1].object_number == 2);
    CHECK(hits[1].record_index == recs.size());
}

TEST_CASE("Match: identical predicates are evaluated once", "[rules]") {
    auto rb = RuleBase::parse(R"(
object 1: header Host parameter = a
object 2: header host parameter = a
object 3: header Host parameter = b
)");
    CHECK(rb.distinct_predicates() == 2);
    auto hits = match_objects(request_records("GET / HTTP/1.1\r\nHost: a\r\n\r\n"), rb);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].object_number == 1);
    CHECK(hits[1].object_number == 2);
}

TEST_CASE("Rules: hand-built hit streams for the example rules", "[rules]") {
    auto rb = test::example_rules();
    for (const auto& c : test::example_hit_cases()) {
        INFO(c.name);
        CHECK(test::trigger_numbers(evaluate_rules(c.hits, rb)) == c.expected);
    }
}

TEST_CASE("Rules: witness is minimal and leftmost for ordered rules", "[rules]") {
    Rule r{1, {1, 3, 4}, true, "m"};
    std::vector<ObjectHit> hits{test::H(1, 0), test::H(1, 1), test::H(3, 2), test::H(4, 3), test::H(4, 4)};
    auto w = find_witness(r, hits);
    REQUIRE(w);
    REQUIRE(w->size() == 3);
    CHECK((*w)[0].record_index == 0);
    CHECK((*w)[1].record_index == 2);
    CHECK((*w)[2].record_index == 3);
}

TEST_CASE("Rules: agree with the exhaustive oracle", "[rules][property]") {
    test::Rng rng(20240601);
    for (int i = 0; i < 1000; ++i) {
        auto inst = test::random_instance(rng);
        auto triggers = evaluate_rules(inst.hits, inst.rb);
        INFO("instance " << i);
        REQUIRE(test::trigger_numbers(triggers) == test::oracle_triggers(inst.rb, inst.hits));
        for (const auto& t : triggers) {
            const Rule& rule = inst.rb.rules().at(t.rule_number);
            REQUIRE(t.witness.size() == rule.no_of_objects());
            std::vector<int> got;
            for (const auto& h : t.witness) got.push_back(h.object_number);
            if (rule.in_order) {
                CHECK(got == rule.objects);
                for (std::size_t k = 1; k < t.witness.size(); ++k) {
                    CHECK(t.witness[k - 1].record_index < t.witness[k].record_index);
                }
                // Leftmost: the lexicographically smallest record sequence.
                std::vector<std::size_t> best(rule.objects.size(), SIZE_MAX);
                for (const auto& w : test::all_witnesses(rule, inst.hits)) {
                    std::vector<std::size_t> recs;
                    for (auto h : w) recs.push_back(inst.hits[h].record_index);
                    best = std::min(best, recs);
                }
                std::vector<std::size_t> mine;
                for (const auto& h : t.witness) mine.push_back(h.record_index);
                CHECK(mine == best);
            } else {
                auto want = rule.objects;
                std::sort(want.begin(), want.end());
                std::sort(got.begin(), got.end());
                CHECK(got == want);
            }
            // Distinct hits drawn from the stream.
            std::set<std::pair<int, std::size_t>> uniq;
            for (const auto& h : t.witness) {
                uniq.insert({h.object_number, h.record_index});
                CHECK(std::find(inst.hits.begin(), inst.hits.end(), h) != inst.hits.end());
            }
            CHECK(uniq.size() == t.witness.size());
        }
    }
}

TEST_CASE("Interpret: a miss carries the records on", "[rules]") {
    auto rb = RuleBase::parse("object 1: request-line Method parameter = DELETE\nrule 1: objects={1}");
    auto recs = request_records("GET / HTTP/1.1\r\nHost: h\r\n\r\n");
    auto res = interpret(recs, rb);
    CHECK(res.triggers.empty());
    REQUIRE(res.residual);
    CHECK(res.residual->observations == recs);

    auto hit = interpret(request_records("DELETE / HTTP/1.1\r\n\r\n"), rb);
    REQUIRE(hit.triggers.size() == 1);
    CHECK_FALSE(hit.residual);
}

TEST_CASE("Interpret: header umbrella selector spans classes", "[rules]") {
    auto rb = RuleBase::parse(R"(
object 1: header Connection parameter = close
object 2: header Host parameter = h
object 3: generic-header Host parameter = h
rule 1: objects={2, 1} ordered=true
)");
    auto res = interpret(request_records("GET / HTTP/1.1\r\nHost: h\r\nConnection: close\r\n\r\n"), rb);
    REQUIRE(res.triggers.size() == 1);
    std::set<int> seen;
    for (const auto& h : res.hits) seen.insert(h.object_number);
    CHECK(seen == std::set<int>{1, 2});
}
