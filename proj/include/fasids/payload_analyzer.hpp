#pragma once

// Payload analysis: inflate gzip bodies, scan HTML for script-bearing tag
// attributes, pull out script blocks and run script-level attack patterns
// over them. Image data is left alone.

#include "fasids/http_ingest.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fasids {

inline constexpr std::size_t kDefaultInflateCap = 16u << 20;

struct DecompressResult {
    std::string bytes;
    std::vector<std::string> diagnostics;
    bool truncated = false; // output cap reached
    bool corrupt = false;   // stream could not be inflated; bytes is empty
};

DecompressResult decompress_if_needed(std::string_view body, ContentEncoding encoding,
                                      std::size_t cap = kDefaultInflateCap);

struct Attribute {
    std::string name;      // lower-case
    std::string raw_value; // exactly as in the payload, quotes removed
    std::size_t value_offset = 0;
};

struct TagEvent {
    std::string tag; // lower-case
    std::vector<Attribute> attributes;
    std::size_t byte_offset = 0; // the '<'
    std::size_t end_offset = 0;  // one past the '>'
    // Raw-text content of script/style elements as [begin, end) offsets.
    std::optional<std::pair<std::size_t, std::size_t>> content;

    const Attribute* attribute(std::string_view name) const;
};

struct TokenizeResult {
    std::vector<TagEvent> events;
    std::vector<std::string> diagnostics;
    bool binary = false; // image or other non-text payload; nothing scanned
};

bool looks_binary(std::string_view body);

/// Error-tolerant tag scanner. Not a DOM parser: it yields start tags with
/// their attributes and ignores text, comments, closing tags and doctype.
TokenizeResult tokenize_html(std::string_view body);

/// True when the value, ignoring ASCII whitespace and control characters
/// and letter case, starts with `javascript:`. `payload_start` receives the
/// index just past the colon.
bool has_javascript_scheme(std::string_view value, std::size_t* payload_start = nullptr);

enum class ContentPredicate { javascript_url };

struct Signature {
    std::string tag;
    std::string attribute;
    ContentPredicate predicate = ContentPredicate::javascript_url;
};

class SignatureTable {
public:
    SignatureTable() = default;
    explicit SignatureTable(std::vector<Signature> entries) : entries_(std::move(entries)) {}

    /// The tag/attribute pairs where injected javascript: URLs are looked for.
    static SignatureTable defaults();
    /// One `tag attribute [predicate=javascript-url]` entry per line.
    static SignatureTable parse(std::string_view text);
    static SignatureTable load(const std::string& path);

    const std::vector<Signature>& entries() const { return entries_; }
    const Signature* find(std::string_view tag, std::string_view attribute) const;

private:
    std::vector<Signature> entries_;
};

enum class PayloadAlertKind { tag_attribute_injection, sql_injection, dos_loop, suspicious_script };

std::string_view to_string(PayloadAlertKind kind);

inline constexpr std::size_t kMaxEvidence = 256;

struct PayloadAlert {
    PayloadAlertKind kind = PayloadAlertKind::suspicious_script;
    std::string evidence;        // verbatim payload bytes, at most kMaxEvidence
    std::size_t byte_offset = 0; // start of evidence in the inflated payload
    std::string detail;

    friend bool operator==(const PayloadAlert&, const PayloadAlert&) = default;
};

std::vector<PayloadAlert> scan_tag_attributes(const std::vector<TagEvent>& events, const SignatureTable& table);

enum class ScriptOrigin { script_element, event_attribute, javascript_url };

std::string_view to_string(ScriptOrigin origin);

struct ScriptBlock {
    std::string source;
    ScriptOrigin origin = ScriptOrigin::script_element;
    std::size_t byte_offset = 0;
};

std::vector<ScriptBlock> extract_scripts(std::string_view body, const std::vector<TagEvent>& events);

enum class ScriptPatternKind {
    sql_injection,
    dos_loop,
    dos_bound, // capture group 1 is a loop bound compared to the threshold
    suspicious_script,
};

struct ScriptPattern {
    ScriptPatternKind kind;
    std::string source;
    std::regex compiled;
};

class ScriptPatternSet {
public:
    ScriptPatternSet() = default;

    static ScriptPatternSet defaults();
    /// `<kind> <regex>` per line; kinds are sql-injection, dos-loop,
    /// dos-bound and suspicious-script. Patterns are case-insensitive.
    static ScriptPatternSet parse(std::string_view text);
    static ScriptPatternSet load(const std::string& path);

    void add(ScriptPatternKind kind, std::string source);
    const std::vector<ScriptPattern>& patterns() const { return patterns_; }

private:
    std::vector<ScriptPattern> patterns_;
};

struct ScriptScanConfig {
    ScriptPatternSet patterns = ScriptPatternSet::defaults();
    std::uint64_t loop_bound_threshold = 10000;
};

std::vector<PayloadAlert> scan_script(const ScriptBlock& block, const ScriptScanConfig& config);

/// Tag events as body field records (section = tag name) so rule objects on
/// the `body` message line can see them. Script elements carry their source
/// as the value, every other tag its raw start-tag markup.
std::vector<FieldRecord> body_records(std::string_view payload, const std::vector<TagEvent>& events);

struct PayloadReport {
    std::string payload; // inflated body that offsets refer to
    std::vector<TagEvent> events;
    std::vector<ScriptBlock> scripts;
    std::vector<PayloadAlert> alerts; // ordered by byte_offset
    std::vector<std::string> diagnostics;
    bool skipped = false; // image or undecodable body
};

struct PayloadConfig {
    SignatureTable signatures = SignatureTable::defaults();
    ScriptScanConfig scripts;
    std::size_t inflate_cap = kDefaultInflateCap;
};

PayloadReport analyze_payload(const HttpTransaction& txn, const PayloadConfig& config);

} // namespace fasids
