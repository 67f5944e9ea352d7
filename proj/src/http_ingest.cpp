#include "fasids/http_ingest.hpp"

#include "fasids/error.hpp"
#include "text_util.hpp"

#include <sodium.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <regex>
#include <sstream>

namespace fasids {

namespace {

using detail::iequals;
using detail::to_lower;
using detail::trim;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path.string());
    return ss.str();
}

bool looks_like_response(std::string_view bytes) {
    return bytes.substr(0, 5) == "HTTP/";
}

std::optional<std::string> decode_base64(std::string_view text) {
    std::string out(text.size() / 4 * 3 + 3, '\0');
    std::size_t len = 0;
    if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(), text.size(),
                          "\r\n ", &len, nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
        return std::nullopt;
    }
    out.resize(len);
    return out;
}

// Groups entries by session, orders each session by timestamp and drops
// responses that precede every request of their session.
Capture assemble(std::vector<CaptureEntry> entries, std::vector<std::string> diagnostics) {
    Capture capture;
    capture.diagnostics = std::move(diagnostics);
    std::map<std::string, std::size_t> index;
    for (auto& e : entries) {
        auto [it, inserted] = index.try_emplace(e.session_id, capture.sessions.size());
        if (inserted) capture.sessions.push_back(Session{e.session_id, {}});
        capture.sessions[it->second].entries.push_back(std::move(e));
    }
    for (auto& session : capture.sessions) {
        std::stable_sort(session.entries.begin(), session.entries.end(),
                         [](const CaptureEntry& a, const CaptureEntry& b) { return a.timestamp < b.timestamp; });
        std::vector<CaptureEntry> kept;
        bool seen_request = false;
        for (auto& e : session.entries) {
            if (e.direction == Direction::request) seen_request = true;
            if (e.direction == Direction::response && !seen_request) {
                capture.diagnostics.push_back("entry " + std::to_string(e.sequence) + " (session '" + session.id +
                                              "'): response without a preceding request, skipped");
                continue;
            }
            kept.push_back(std::move(e));
        }
        session.entries = std::move(kept);
    }
    std::erase_if(capture.sessions, [](const Session& s) { return s.entries.empty(); });
    return capture;
}

Capture read_raw(const std::filesystem::path& source) {
    namespace fs = std::filesystem;
    std::error_code ec;
    std::vector<fs::path> files;
    if (fs::is_directory(source, ec)) {
        for (const auto& de : fs::directory_iterator(source, ec)) {
            if (!de.is_regular_file()) continue;
            if (de.path().filename().string().starts_with(".")) continue;
            files.push_back(de.path());
        }
        if (ec) throw IoError("cannot list " + source.string() + ": " + ec.message());
        std::sort(files.begin(), files.end());
    } else if (fs::is_regular_file(source, ec)) {
        files.push_back(source);
    } else {
        throw IoError("cannot open " + source.string());
    }

    std::vector<CaptureEntry> entries;
    std::vector<std::string> diagnostics;
    for (std::size_t i = 0; i < files.size(); ++i) {
        CaptureEntry e;
        e.bytes = read_file(files[i]);
        if (e.bytes.empty()) {
            diagnostics.push_back(files[i].filename().string() + ": empty message, skipped");
            continue;
        }
        std::string name = files[i].filename().string();
        e.session_id = name.substr(0, name.find('.'));
        e.direction = looks_like_response(e.bytes) ? Direction::response : Direction::request;
        e.sequence = i;
        entries.push_back(std::move(e));
    }
    return assemble(std::move(entries), std::move(diagnostics));
}

} // namespace

std::string_view to_string(Direction d) {
    return d == Direction::request ? "request" : "response";
}

CaptureFormat parse_capture_format(std::string_view tag) {
    if (tag == "raw") return CaptureFormat::raw;
    if (tag == "jsonl") return CaptureFormat::jsonl;
    throw ConfigError("unknown capture format '" + std::string(tag) + "' (expected raw or jsonl)");
}

std::vector<CaptureEntry> Capture::in_event_order() const {
    std::vector<CaptureEntry> all;
    for (const auto& s : sessions) all.insert(all.end(), s.entries.begin(), s.entries.end());
    std::stable_sort(all.begin(), all.end(), [](const CaptureEntry& a, const CaptureEntry& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.sequence < b.sequence;
    });
    return all;
}

std::size_t Capture::entry_count() const {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.entries.size();
    return n;
}

Capture read_capture_jsonl(std::istream& in) {
    std::vector<CaptureEntry> entries;
    std::vector<std::string> diagnostics;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fail = [&](const std::string& why) {
            diagnostics.push_back("line " + std::to_string(lineno) + ": " + why + ", skipped");
        };
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            fail("not a JSON object");
            continue;
        }
        const auto ts = doc.find("ts");
        const auto session = doc.find("session");
        const auto dir = doc.find("dir");
        const auto data = doc.find("data_b64");
        if (ts == doc.end() || !ts->is_number()) {
            fail("missing numeric 'ts'");
            continue;
        }
        if (session == doc.end() || !session->is_string()) {
            fail("missing string 'session'");
            continue;
        }
        if (dir == doc.end() || !dir->is_string() || (*dir != "req" && *dir != "resp")) {
            fail("'dir' must be \"req\" or \"resp\"");
            continue;
        }
        if (data == doc.end() || !data->is_string()) {
            fail("missing string 'data_b64'");
            continue;
        }
        auto bytes = decode_base64(data->get_ref<const std::string&>());
        if (!bytes) {
            fail("invalid base64 in 'data_b64'");
            continue;
        }
        CaptureEntry e;
        e.timestamp = ts->get<double>();
        e.session_id = session->get<std::string>();
        e.direction = *dir == "req" ? Direction::request : Direction::response;
        e.bytes = std::move(*bytes);
        e.sequence = lineno - 1;
        entries.push_back(std::move(e));
    }
    if (in.bad()) throw IoError("error while reading capture stream");
    return assemble(std::move(entries), std::move(diagnostics));
}

Capture read_capture(const std::filesystem::path& source, CaptureFormat format) {
    if (format == CaptureFormat::raw) return read_raw(source);
    std::ifstream in(source, std::ios::binary);
    if (!in) throw IoError("cannot open " + source.string());
    return read_capture_jsonl(in);
}

std::optional<std::string_view> HttpTransaction::header(std::string_view name) const {
    for (const auto& [n, v] : headers) {
        if (iequals(n, name)) return std::string_view(v);
    }
    return std::nullopt;
}

std::optional<int> HttpTransaction::status_code() const {
    if (kind != Direction::response || start_line.size() < 12) return std::nullopt;
    int code = 0;
    auto sv = std::string_view(start_line);
    auto sp = sv.find(' ');
    if (sp == std::string_view::npos) return std::nullopt;
    auto digits = sv.substr(sp + 1, 3);
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), code);
    if (ec != std::errc{} || p != digits.data() + digits.size()) return std::nullopt;
    return code;
}

namespace {

const std::regex& request_line_re() {
    static const std::regex re(R"(^([!#$%&'*+.^_`|~0-9A-Za-z-]+) (\S+) (HTTP/[0-9]+\.[0-9]+)$)");
    return re;
}

const std::regex& status_line_re() {
    static const std::regex re(R"(^(HTTP/[0-9]+\.[0-9]+) ([0-9]{3})(?: (.*))?$)");
    return re;
}

// Decodes a chunked body. nullopt on framing errors.
std::optional<std::string> dechunk(std::string_view body) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto eol = body.find('\n', pos);
        if (eol == std::string_view::npos) return std::nullopt;
        auto size_line = trim(body.substr(pos, eol - pos));
        size_line = size_line.substr(0, size_line.find(';'));
        std::size_t size = 0;
        auto [p, ec] = std::from_chars(size_line.data(), size_line.data() + size_line.size(), size, 16);
        if (ec != std::errc{} || p != size_line.data() + size_line.size()) return std::nullopt;
        pos = eol + 1;
        if (size == 0) return out;
        if (pos + size > body.size()) return std::nullopt;
        out.append(body.substr(pos, size));
        pos += size;
        if (body.substr(pos, 2) == "\r\n") pos += 2;
        else if (body.substr(pos, 1) == "\n") pos += 1;
    }
}

} // namespace

DispatchResult dispatch(const CaptureEntry& entry) {
    DispatchResult result;
    std::string_view bytes = entry.bytes;

    std::size_t header_end = bytes.size();
    std::size_t body_start = bytes.size();
    if (auto crlf = bytes.find("\r\n\r\n"); crlf != std::string_view::npos) {
        header_end = crlf;
        body_start = crlf + 4;
    }
    if (auto lf = bytes.find("\n\n"); lf != std::string_view::npos && lf < header_end) {
        header_end = lf;
        body_start = lf + 2;
    }

    std::vector<std::string_view> lines;
    std::string_view block = bytes.substr(0, header_end);
    for (std::size_t pos = 0; pos <= block.size();) {
        auto nl = block.find('\n', pos);
        auto line = block.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }

    HttpTransaction txn;
    txn.session_id = entry.session_id;
    txn.timestamp = entry.timestamp;
    txn.sequence = entry.sequence;
    txn.start_line = std::string(lines.empty() ? std::string_view{} : lines.front());

    std::smatch m;
    if (std::regex_match(txn.start_line, m, request_line_re())) {
        txn.kind = Direction::request;
    } else if (std::regex_match(txn.start_line, m, status_line_re())) {
        txn.kind = Direction::response;
    } else {
        result.violations.push_back(
            {1, "unparseable start line '" + txn.start_line.substr(0, 80) + "'", Severity::reject});
        return result;
    }
    if (txn.kind != entry.direction) {
        result.violations.push_back({1, "start line is a " + std::string(to_string(txn.kind)) +
                                            " but the capture marks the entry as a " +
                                            std::string(to_string(entry.direction)),
                                     Severity::warn});
    }

    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        const std::size_t lineno = i + 1;
        if (!line.empty() && (line.front() == ' ' || line.front() == '\t') && !txn.headers.empty()) {
            auto& value = txn.headers.back().second;
            auto cont = trim(line);
            if (!cont.empty()) {
                if (!value.empty()) value += ' ';
                value += cont;
            }
            continue;
        }
        auto colon = line.find(':');
        auto name = colon == std::string_view::npos ? std::string_view{} : line.substr(0, colon);
        if (colon == std::string_view::npos || name.empty() ||
            std::any_of(name.begin(), name.end(), [](char c) { return detail::is_space(c); })) {
            txn.malformed_lines.emplace_back(lineno, std::string(line));
            continue;
        }
        txn.headers.emplace_back(std::string(name), std::string(trim(line.substr(colon + 1))));
    }

    std::string body(bytes.substr(body_start));
    if (auto te = txn.header("Transfer-Encoding"); te && detail::ifind(*te, "chunked") != std::string_view::npos) {
        if (auto decoded = dechunk(body)) {
            body = std::move(*decoded);
        } else {
            result.violations.push_back({0, "malformed chunked body, kept as received", Severity::warn});
        }
    } else if (auto cl = txn.header("Content-Length")) {
        std::size_t declared = 0;
        auto [p, ec] = std::from_chars(cl->data(), cl->data() + cl->size(), declared);
        if (ec != std::errc{} || p != cl->data() + cl->size()) {
            result.violations.push_back({0, "non-numeric Content-Length '" + std::string(*cl) + "'", Severity::warn});
        } else if (body.size() > declared) {
            body.resize(declared);
        } else if (body.size() < declared) {
            result.violations.push_back({0, "body is " + std::to_string(body.size()) +
                                                " bytes, shorter than Content-Length " + std::to_string(declared),
                                         Severity::warn});
        }
    }
    txn.body = std::move(body);

    if (auto ce = txn.header("Content-Encoding")) {
        auto coding = to_lower(trim(*ce));
        if (coding == "gzip" || coding == "x-gzip") {
            txn.content_encoding = ContentEncoding::gzip;
        } else if (coding != "identity" && !coding.empty()) {
            result.violations.push_back(
                {0, "unsupported content-coding '" + coding + "', body treated as identity", Severity::warn});
        }
    }

    result.transaction = std::move(txn);
    return result;
}

namespace {

constexpr std::array<std::pair<MessageLine, std::string_view>, 7> kLineNames{{
    {MessageLine::request_line, "request-line"},
    {MessageLine::status_line, "status-line"},
    {MessageLine::generic_header, "generic-header"},
    {MessageLine::request_header, "request-header"},
    {MessageLine::response_header, "response-header"},
    {MessageLine::entity_header, "entity-header"},
    {MessageLine::body, "body"},
}};

struct KnownHeader {
    std::string_view name;
    MessageLine line;
};

// RFC 2616 sections 4.5, 5.3, 6.2 and 7.1.
constexpr std::array<KnownHeader, 47> kHeaderTaxonomy{{
    {"Cache-Control", MessageLine::generic_header},
    {"Connection", MessageLine::generic_header},
    {"Date", MessageLine::generic_header},
    {"Pragma", MessageLine::generic_header},
    {"Trailer", MessageLine::generic_header},
    {"Transfer-Encoding", MessageLine::generic_header},
    {"Upgrade", MessageLine::generic_header},
    {"Via", MessageLine::generic_header},
    {"Warning", MessageLine::generic_header},
    {"Accept", MessageLine::request_header},
    {"Accept-Charset", MessageLine::request_header},
    {"Accept-Encoding", MessageLine::request_header},
    {"Accept-Language", MessageLine::request_header},
    {"Authorization", MessageLine::request_header},
    {"Expect", MessageLine::request_header},
    {"From", MessageLine::request_header},
    {"Host", MessageLine::request_header},
    {"If-Match", MessageLine::request_header},
    {"If-Modified-Since", MessageLine::request_header},
    {"If-None-Match", MessageLine::request_header},
    {"If-Range", MessageLine::request_header},
    {"If-Unmodified-Since", MessageLine::request_header},
    {"Max-Forwards", MessageLine::request_header},
    {"Proxy-Authorization", MessageLine::request_header},
    {"Range", MessageLine::request_header},
    {"Referer", MessageLine::request_header},
    {"TE", MessageLine::request_header},
    {"User-Agent", MessageLine::request_header},
    {"Accept-Ranges", MessageLine::response_header},
    {"Age", MessageLine::response_header},
    {"ETag", MessageLine::response_header},
    {"Location", MessageLine::response_header},
    {"Proxy-Authenticate", MessageLine::response_header},
    {"Retry-After", MessageLine::response_header},
    {"Server", MessageLine::response_header},
    {"Vary", MessageLine::response_header},
    {"WWW-Authenticate", MessageLine::response_header},
    {"Allow", MessageLine::entity_header},
    {"Content-Encoding", MessageLine::entity_header},
    {"Content-Language", MessageLine::entity_header},
    {"Content-Length", MessageLine::entity_header},
    {"Content-Location", MessageLine::entity_header},
    {"Content-MD5", MessageLine::entity_header},
    {"Content-Range", MessageLine::entity_header},
    {"Content-Type", MessageLine::entity_header},
    {"Expires", MessageLine::entity_header},
    {"Last-Modified", MessageLine::entity_header},
}};

// Fields that must not repeat within one message.
constexpr std::array<std::string_view, 6> kSingletons{
    "Host", "Content-Length", "Content-Type", "Content-Encoding", "Authorization", "Content-Location"};

} // namespace

std::string_view to_string(MessageLine line) {
    for (const auto& [l, name] : kLineNames) {
        if (l == line) return name;
    }
    return "body";
}

std::optional<MessageLine> message_line_from_string(std::string_view name) {
    for (const auto& [l, n] : kLineNames) {
        if (iequals(n, name)) return l;
    }
    if (name == "Request") return MessageLine::request_line;
    if (name == "Response") return MessageLine::status_line;
    return std::nullopt;
}

HeaderClass classify_header(std::string_view name) {
    for (const auto& h : kHeaderTaxonomy) {
        if (iequals(h.name, name)) return {h.line, true};
    }
    return {MessageLine::generic_header, false};
}

HeaderParse parse_header(const HttpTransaction& txn) {
    HeaderParse out;
    std::smatch m;
    if (txn.kind == Direction::request && std::regex_match(txn.start_line, m, request_line_re())) {
        out.records.push_back({MessageLine::request_line, "Method", m[1].str()});
        out.records.push_back({MessageLine::request_line, "Request-URI", m[2].str()});
        out.records.push_back({MessageLine::request_line, "HTTP-version", m[3].str()});
    } else if (txn.kind == Direction::response && std::regex_match(txn.start_line, m, status_line_re())) {
        out.records.push_back({MessageLine::status_line, "HTTP-version", m[1].str()});
        out.records.push_back({MessageLine::status_line, "Status-code", m[2].str()});
        out.records.push_back({MessageLine::status_line, "Reason", m[3].str()});
    } else {
        out.violations.push_back({1, "start line does not match the message kind", Severity::reject});
    }

    for (const auto& [lineno, text] : txn.malformed_lines) {
        out.violations.push_back({lineno, "header line missing ':' skipped: '" + text.substr(0, 80) + "'",
                                  Severity::warn});
    }

    std::map<std::string, int> seen;
    for (const auto& [name, value] : txn.headers) {
        if (name.find('$') != std::string::npos) {
            out.violations.push_back({0, "header name '" + name + "' contains '$', skipped", Severity::warn});
            continue;
        }
        auto cls = classify_header(name);
        if (!cls.known) {
            out.violations.push_back(
                {0, "unknown header field '" + name + "' classified generic-header", Severity::warn});
        }
        if (++seen[to_lower(name)] == 2 &&
            std::any_of(kSingletons.begin(), kSingletons.end(), [&](auto s) { return iequals(s, name); })) {
            out.violations.push_back({0, "repeated header field '" + name + "'", Severity::warn});
        }
        out.records.push_back({cls.line, name, value});
    }
    return out;
}

std::string serialize_record(const FieldRecord& record, RecordFormat format) {
    std::string_view line = to_string(record.message_line);
    if (format.legacy_names) {
        switch (record.message_line) {
        case MessageLine::request_line: line = "Request"; break;
        case MessageLine::status_line: line = "Response"; break;
        case MessageLine::body: break;
        default: line = "generic-header"; break;
        }
    }
    std::string out;
    out.reserve(line.size() + record.section.size() + record.value.size() + 2);
    out.append(line).append("_").append(record.section).append("$").append(record.value);
    return out;
}

std::string serialize_records(const std::vector<FieldRecord>& records, RecordFormat format) {
    std::string out;
    for (const auto& r : records) {
        out += serialize_record(r, format);
        out += '\n';
    }
    return out;
}

std::vector<FieldRecord> read_records(std::string_view text) {
    std::vector<FieldRecord> out;
    std::size_t lineno = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        if (line.empty()) continue;
        auto us = line.find('_');
        if (us == std::string_view::npos) throw ParseError(lineno, "record has no '_' separator");
        auto dollar = line.find('$', us + 1);
        if (dollar == std::string_view::npos) throw ParseError(lineno, "record has no '$' delimiter");
        auto kind = message_line_from_string(line.substr(0, us));
        if (!kind) throw ParseError(lineno, "unknown message line '" + std::string(line.substr(0, us)) + "'");
        out.push_back({*kind, std::string(line.substr(us + 1, dollar - us - 1)), std::string(line.substr(dollar + 1))});
    }
    return out;
}

} // namespace fasids
