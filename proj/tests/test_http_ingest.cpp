#include "fasids/error.hpp"
#include "fasids/http_ingest.hpp"
#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fasids;

namespace {

CaptureEntry entry(std::string bytes, Direction dir = Direction::request) {
    CaptureEntry e;
    e.session_id = "s";
    e.direction = dir;
    e.bytes = std::move(bytes);
    return e;
}

HttpTransaction must_dispatch(std::string bytes, Direction dir = Direction::request) {
    auto d = dispatch(entry(std::move(bytes), dir));
    REQUIRE(d.transaction);
    return *d.transaction;
}

std::string jsonl_line(double ts, const std::string& session, const std::string& dir, const std::string& data) {
    return R"({"ts":)" + std::to_string(ts) + R"(,"session":")" + session + R"(","dir":")" + dir +
           R"(","data_b64":")" + test::base64(data) + "\"}\n";
}

} // namespace

TEST_CASE("Capture: empty jsonl gives no sessions", "[ingest]") {
    std::istringstream in("");
    auto cap = read_capture_jsonl(in);
    CHECK(cap.sessions.empty());
    CHECK(cap.entry_count() == 0);
}

TEST_CASE("Capture: raw GET sample is one session with one request", "[ingest]") {
    auto cap = read_capture(test::data_path("get_index.http"), CaptureFormat::raw);
    REQUIRE(cap.sessions.size() == 1);
    REQUIRE(cap.sessions[0].entries.size() == 1);
    CHECK(cap.sessions[0].entries[0].direction == Direction::request);
}

TEST_CASE("Capture: request then response keeps request first", "[ingest]") {
    std::string text = jsonl_line(10.0, "a", "resp", "HTTP/1.1 200 OK\r\n\r\n") +
                       jsonl_line(9.5, "a", "req", "GET / HTTP/1.1\r\nHost: h\r\n\r\n");
    std::istringstream in(text);
    auto cap = read_capture_jsonl(in);
    REQUIRE(cap.sessions.size() == 1);
    const auto& es = cap.sessions[0].entries;
    REQUIRE(es.size() == 2);
    CHECK(es[0].direction == Direction::request);
    CHECK(es[1].direction == Direction::response);
}

TEST_CASE("Capture: malformed jsonl lines are diagnostics, not fatal", "[ingest]") {
    std::string text = "not json\n" + jsonl_line(1, "a", "req", "GET / HTTP/1.1\r\n\r\n") +
                       R"({"ts":2,"session":"a","dir":"sideways","data_b64":""})" "\n" +
                       R"({"ts":3,"session":"a","dir":"req","data_b64":"%%%"})" "\n";
    std::istringstream in(text);
    auto cap = read_capture_jsonl(in);
    CHECK(cap.entry_count() == 1);
    CHECK(cap.diagnostics.size() == 3);
}

TEST_CASE("Capture: orphan response is dropped with a diagnostic", "[ingest]") {
    std::istringstream in(jsonl_line(1, "a", "resp", "HTTP/1.1 200 OK\r\n\r\n"));
    auto cap = read_capture_jsonl(in);
    CHECK(cap.entry_count() == 0);
    CHECK_FALSE(cap.diagnostics.empty());
}

TEST_CASE("Capture: unknown format tag and unreadable source are fatal", "[ingest]") {
    CHECK_THROWS_AS(parse_capture_format("pcap"), ConfigError);
    CHECK_THROWS_AS(read_capture("/nonexistent/capture.jsonl", CaptureFormat::jsonl), IoError);
}

TEST_CASE("Capture: per-session timestamps come out non-decreasing", "[ingest][property]") {
    test::Rng rng(7);
    std::string text;
    for (int i = 0; i < 200; ++i) {
        auto s = "s" + std::to_string(rng.uniform_int(0, 4));
        text += jsonl_line(rng.uniform_int(0, 1000) / 10.0, s, "req", "GET /" + std::to_string(i) + " HTTP/1.1\r\n\r\n");
    }
    std::istringstream in(text);
    auto cap = read_capture_jsonl(in);
    CHECK(cap.entry_count() == 200);
    for (const auto& s : cap.sessions) {
        for (std::size_t i = 1; i < s.entries.size(); ++i) {
            CHECK(s.entries[i - 1].timestamp <= s.entries[i].timestamp);
            if (s.entries[i - 1].timestamp == s.entries[i].timestamp) {
                CHECK(s.entries[i - 1].sequence < s.entries[i].sequence);
            }
        }
    }
}

TEST_CASE("Dispatch: Content-Length 0 gives an empty body", "[ingest]") {
    auto txn = must_dispatch("POST /x HTTP/1.1\r\nContent-Length: 0\r\n\r\nleftover");
    CHECK(txn.body.empty());
}

TEST_CASE("Dispatch: Content-Length truncates the body", "[ingest]") {
    auto txn = must_dispatch("POST /x HTTP/1.1\r\nContent-Length: 3\r\n\r\nabcdef");
    CHECK(txn.body == "abc");
}

TEST_CASE("Dispatch: sample GET has a request line, six headers, no body", "[ingest]") {
    auto txn = must_dispatch(test::read_file(test::data_path("get_index.http")));
    CHECK(txn.start_line == "GET /index.htm HTTP/1.1");
    CHECK(txn.headers.size() == 6);
    CHECK(txn.body.empty());
}

TEST_CASE("Dispatch: gzip content encoding is recorded", "[ingest]") {
    auto txn = must_dispatch("HTTP/1.1 200 OK\r\nContent-Encoding: gzip\r\n\r\n", Direction::response);
    CHECK(txn.content_encoding == ContentEncoding::gzip);
}

TEST_CASE("Dispatch: no blank line means no body", "[ingest]") {
    auto txn = must_dispatch("GET / HTTP/1.1\r\nHost: a");
    CHECK(txn.body.empty());
    CHECK(txn.headers.size() == 1);
}

TEST_CASE("Dispatch: LF-only framing is accepted", "[ingest]") {
    auto txn = must_dispatch("GET / HTTP/1.0\nHost: a\n\nbody");
    CHECK(txn.headers.size() == 1);
    CHECK(txn.body == "body");
}

TEST_CASE("Dispatch: unparseable start line is rejected", "[ingest]") {
    auto d = dispatch(entry("HELLO THERE\r\n\r\n"));
    CHECK_FALSE(d.transaction);
    REQUIRE(d.violations.size() == 1);
    CHECK(d.violations[0].severity == Severity::reject);
}

TEST_CASE("Dispatch: chunked body is reassembled", "[ingest]") {
    auto txn = must_dispatch("HTTP/1.1 200 OK\r\nTransfer-Encoding: chunked\r\n\r\n4\r\nWiki\r\n5\r\npedia\r\n0\r\n\r\n",
                             Direction::response);
    CHECK(txn.body == "Wikipedia");
}

TEST_CASE("Dispatch: folded header continuation joins the value", "[ingest]") {
    auto txn = must_dispatch("GET / HTTP/1.1\r\nX-Long: one\r\n two\r\n\r\n");
    REQUIRE(txn.headers.size() == 1);
    CHECK(txn.headers[0].second == "one two");
}

TEST_CASE("Header: request line splits into three records", "[ingest]") {
    auto recs = parse_header(must_dispatch("GET /index.htm HTTP/1.1\r\n\r\n")).records;
    REQUIRE(recs.size() == 3);
    CHECK(recs[0] == FieldRecord{MessageLine::request_line, "Method", "GET"});
    CHECK(recs[1] == FieldRecord{MessageLine::request_line, "Request-URI", "/index.htm"});
    CHECK(recs[2] == FieldRecord{MessageLine::request_line, "HTTP-version", "HTTP/1.1"});
}

TEST_CASE("Header: status line splits into three records", "[ingest]") {
    auto recs = parse_header(must_dispatch("HTTP/1.1 404 Not Found\r\n\r\n", Direction::response)).records;
    REQUIRE(recs.size() == 3);
    CHECK(recs[0] == FieldRecord{MessageLine::status_line, "HTTP-version", "HTTP/1.1"});
    CHECK(recs[1] == FieldRecord{MessageLine::status_line, "Status-code", "404"});
    CHECK(recs[2] == FieldRecord{MessageLine::status_line, "Reason", "Not Found"});
}

TEST_CASE("Header: taxonomy classes", "[ingest]") {
    CHECK(classify_header("Connection").line == MessageLine::generic_header);
    CHECK(classify_header("host").line == MessageLine::request_header);
    CHECK(classify_header("Server").line == MessageLine::response_header);
    CHECK(classify_header("Content-Length").line == MessageLine::entity_header);
    auto unknown = classify_header("X-Custom");
    CHECK(unknown.line == MessageLine::generic_header);
    CHECK_FALSE(unknown.known);
}

TEST_CASE("Header: Host record and its legacy spelling", "[ingest]") {
    auto recs = parse_header(must_dispatch("GET / HTTP/1.1\r\nHost: 192.168.0.51:4556\r\n\r\n")).records;
    REQUIRE(recs.size() == 4);
    CHECK(recs[3].section == "Host");
    CHECK(recs[3].value == "192.168.0.51:4556");
    CHECK(serialize_record(recs[3], RecordFormat{true}) == "generic-header_Host$192.168.0.51:4556");
}

TEST_CASE("Header: unknown header is generic with a warning", "[ingest]") {
    auto parsed = parse_header(must_dispatch("GET / HTTP/1.1\r\nX-Trace: 1\r\n\r\n"));
    REQUIRE(parsed.records.size() == 4);
    CHECK(parsed.records[3].message_line == MessageLine::generic_header);
    REQUIRE(parsed.violations.size() == 1);
    CHECK(parsed.violations[0].severity == Severity::warn);
}

TEST_CASE("Header: line without a colon is skipped with a warning", "[ingest]") {
    auto parsed = parse_header(must_dispatch("GET / HTTP/1.1\r\nHost: a\r\nbogus line\r\nAccept: */*\r\n\r\n"));
    CHECK(parsed.records.size() == 5);
    bool found = false;
    for (const auto& v : parsed.violations) found |= v.line == 3 && v.severity == Severity::warn;
    CHECK(found);
}

TEST_CASE("Header: duplicate singleton header is flagged", "[ingest]") {
    auto parsed = parse_header(must_dispatch("GET / HTTP/1.1\r\nHost: a\r\nHost: b\r\n\r\n"));
    CHECK(parsed.records.size() == 5);
    CHECK_FALSE(parsed.violations.empty());
}

TEST_CASE("Records: serialization format", "[ingest]") {
    CHECK(serialize_record({MessageLine::generic_header, "Connection", "Keep-Alive"}) ==
          "generic-header_Connection$Keep-Alive");
    CHECK(serialize_records({}).empty());
    CHECK(serialize_record({MessageLine::request_line, "Method", "GET"}, RecordFormat{true}) == "Request_Method$GET");
    CHECK(serialize_record({MessageLine::status_line, "Status-code", "200"}, RecordFormat{true}) ==
          "Response_Status-code$200");
}

TEST_CASE("Records: reader rejects lines without delimiters", "[ingest]") {
    CHECK_THROWS_AS(read_records("request-line_Method GET\n"), ParseError);
    CHECK_THROWS_AS(read_records("nounderscore$x\n"), ParseError);
    CHECK_THROWS_AS(read_records("bogus-line_Method$GET\n"), ParseError);
}

TEST_CASE("Records: value may contain the delimiter", "[ingest]") {
    std::vector<FieldRecord> recs{{MessageLine::request_line, "Request-URI", "/a$b_c"}};
    CHECK(read_records(serialize_records(recs)) == recs);
}

TEST_CASE("Records: round trip and body isolation over the corpus", "[ingest][property]") {
    std::size_t checked = 0;
    for (const auto& file : test::corpus_files()) {
        auto cap = read_capture(file, CaptureFormat::jsonl);
        for (const auto& e : cap.in_event_order()) {
            auto d = dispatch(e);
            if (!d.transaction) continue;
            auto parsed = parse_header(*d.transaction);
            INFO(file << " entry " << e.sequence);
            CHECK(read_records(serialize_records(parsed.records)) == parsed.records);
            for (const auto& r : parsed.records) CHECK(r.section.find('$') == std::string::npos);

            // Every record value must be explained by the header block alone.
            const auto& body = d.transaction->body;
            const auto head = e.bytes.substr(0, e.bytes.size() - body.size());
            if (body.size() >= 8) {
                for (const auto& r : parsed.records) {
                    CHECK(r.value.find(body) == std::string::npos);
                    CHECK(head.find(r.value) != std::string::npos);
                }
            }
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("Records: capture order is preserved within a session", "[ingest][property]") {
    auto cap = read_capture(test::corpus_dir() + "/brute_force.jsonl", CaptureFormat::jsonl);
    REQUIRE(cap.sessions.size() == 1);
    const auto& es = cap.sessions[0].entries;
    for (std::size_t i = 1; i < es.size(); ++i) CHECK(es[i - 1].sequence < es[i].sequence);
}
