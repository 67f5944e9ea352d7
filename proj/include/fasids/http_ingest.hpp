#pragma once

// HTTP capture ingestion: reading captured traffic, splitting each message
// into header and payload, and decomposing headers into `$`-delimited field
// records that the rule interpreter consumes.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fasids {

enum class Direction { request, response };

enum class ContentEncoding { identity, gzip };

std::string_view to_string(Direction d);

/// One captured HTTP message as it came off the wire.
struct CaptureEntry {
    double timestamp = 0.0; // seconds since epoch, millisecond precision
    Direction direction = Direction::request;
    std::string session_id;
    std::string bytes;
    std::size_t sequence = 0; // position in the capture source
};

struct Session {
    std::string id;
    std::vector<CaptureEntry> entries; // timestamp order
};

enum class CaptureFormat { raw, jsonl };

CaptureFormat parse_capture_format(std::string_view tag);

struct Capture {
    std::vector<Session> sessions; // order of first appearance
    std::vector<std::string> diagnostics;

    /// All entries across sessions ordered by (timestamp, sequence).
    std::vector<CaptureEntry> in_event_order() const;
    std::size_t entry_count() const;
};

/// Reads a capture. `raw` accepts a single message file or a directory of
/// them; `jsonl` accepts a line-framed JSON capture file. Malformed entries
/// become diagnostics. Throws IoError when the source cannot be read.
Capture read_capture(const std::filesystem::path& source, CaptureFormat format);

/// Stream variant for the jsonl format.
Capture read_capture_jsonl(std::istream& in);

enum class Severity { warn, reject };

struct SpecViolation {
    std::size_t line = 0; // 1-based line in the raw message, 0 when not line-bound
    std::string description;
    Severity severity = Severity::warn;
};

struct HttpTransaction {
    std::string session_id;
    Direction kind = Direction::request;
    std::string start_line;
    std::vector<std::pair<std::string, std::string>> headers; // wire order
    std::string body;
    ContentEncoding content_encoding = ContentEncoding::identity;
    double timestamp = 0.0;
    std::size_t sequence = 0;

    // Header-block lines that had no `:`; parse_header turns them into
    // violations. Pair of (1-based line number, line text).
    std::vector<std::pair<std::size_t, std::string>> malformed_lines;

    /// First header value with a case-insensitive name match.
    std::optional<std::string_view> header(std::string_view name) const;
    /// Status code of a response, or nullopt.
    std::optional<int> status_code() const;
};

struct DispatchResult {
    std::optional<HttpTransaction> transaction;
    std::vector<SpecViolation> violations;
};

/// Splits a captured message into start line, headers and body.
DispatchResult dispatch(const CaptureEntry& entry);

enum class MessageLine {
    request_line,
    status_line,
    generic_header,
    request_header,
    response_header,
    entity_header,
    body,
};

std::string_view to_string(MessageLine line);
std::optional<MessageLine> message_line_from_string(std::string_view name);

/// RFC 2616 header taxonomy. Unknown names fall back to generic_header and
/// `known` is false.
struct HeaderClass {
    MessageLine line;
    bool known;
};
HeaderClass classify_header(std::string_view name);

struct FieldRecord {
    MessageLine message_line = MessageLine::generic_header;
    std::string section;
    std::string value;

    friend bool operator==(const FieldRecord&, const FieldRecord&) = default;
};

struct HeaderParse {
    std::vector<FieldRecord> records;
    std::vector<SpecViolation> violations;
};

HeaderParse parse_header(const HttpTransaction& txn);

struct RecordFormat {
    // Reproduce the analyzer's historical spelling: `Request_` for the
    // request line, `Response_` for the status line and `generic-header_`
    // for every header class.
    bool legacy_names = false;
};

std::string serialize_record(const FieldRecord& record, RecordFormat format = {});
std::string serialize_records(const std::vector<FieldRecord>& records, RecordFormat format = {});

/// Inverse of serialize_records. Accepts both canonical and legacy prefixes.
/// Throws ParseError on a line without `_` or `$`.
std::vector<FieldRecord> read_records(std::string_view text);

} // namespace fasids
