#pragma once

// End-to-end wiring: header rules and payload analysis on every transaction,
// frequency analysis on the transactions neither of them flagged.

#include "fasids/fuzzy_config.hpp"
#include "fasids/http_ingest.hpp"
#include "fasids/payload_analyzer.hpp"
#include "fasids/rule_engine.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fasids {

enum class AlertSource { header_rule, payload, fuzzy };
enum class AlertSeverity { info, lp, hp, intrusive }; // ordered

std::string_view to_string(AlertSource s);
std::string_view to_string(AlertSeverity s);
AlertSeverity severity_of(Consequent c);

struct Alert {
    AlertSource source = AlertSource::header_rule;
    std::string id; // rule number, payload alert kind, or event name
    AlertSeverity severity = AlertSeverity::intrusive;
    std::string session_id;
    double timestamp = 0.0;
    std::string message;
    std::string evidence;
    std::vector<std::size_t> transactions; // indices into RunResult::transactions
    std::optional<double> score;           // fuzzy alerts only

    friend bool operator==(const Alert&, const Alert&) = default;
};

/// One JSON object, no trailing newline. Invalid UTF-8 is replaced.
std::string to_json_line(const Alert& alert);

struct Detector {
    RuleBase rules;
    PayloadConfig payload;
    FuzzyConfig fuzzy = FuzzyConfig::defaults();
};

struct StageToggles {
    bool payload = true;
    bool fuzzy = true;
};

struct TransactionOutcome {
    std::size_t sequence = 0; // capture position
    std::string session_id;
    double timestamp = 0.0;
    Direction kind = Direction::request;
    std::string start_line;
    std::vector<FieldRecord> records;
    std::vector<SpecViolation> violations;
    std::vector<RuleTrigger> triggers;
    std::vector<PayloadAlert> payload_alerts;
    bool fed_to_fuzzy = false;
    std::vector<std::string> diagnostics;
};

struct RunSummary {
    std::size_t sessions = 0;
    std::size_t entries = 0;
    std::size_t transactions = 0;
    std::size_t dropped = 0; // entries with an unparseable start line
    std::map<std::string, std::size_t> by_source;
    std::map<std::string, std::size_t> by_severity;
};

struct RunResult {
    std::vector<Alert> alerts; // capture event order
    std::vector<TransactionOutcome> transactions;
    RunSummary summary;
    std::vector<std::string> diagnostics;
};

/// Bytes of the payload copied into a fuzzy event's text after the start line.
inline constexpr std::size_t kEventExcerpt = 1024;

RunResult analyze_capture(const Capture& capture, const Detector& detector, StageToggles stages = {});

struct RunConfig {
    std::string rules_path;
    std::string signatures_path;
    std::string script_patterns_path; // empty: built-in set
    std::string fuzzy_path;           // empty: built-in defaults
    std::string input;
    CaptureFormat format = CaptureFormat::jsonl;
    std::string out_path = "-"; // "-" is standard output
    std::string records_out;    // optional field-record dump
    bool legacy_record_names = false;
    ValueMode value_mode = ValueMode::relaxed;
    std::uint64_t loop_bound_threshold = 10000;
    std::size_t inflate_cap = kDefaultInflateCap;
    StageToggles stages;
};

/// Loads every configured file. Throws ConfigError for a missing or invalid one.
Detector load_detector(const RunConfig& config);

/// Reads the input, analyzes it, writes alerts (one JSON object per line) and
/// the optional record dump. Throws ConfigError / IoError on setup failures.
RunResult run_pipeline(const RunConfig& config);

std::string summary_text(const RunResult& result);

// ---------------------------------------------------------------------------
// Benchmarks and corpus evaluation

struct BenchRow {
    std::size_t size = 0; // object count or payload bytes
    double mean_us = 0.0;
    double median_us = 0.0;
};

/// Rule-bases of each size are drawn from a fixed pool of distinct
/// predicates and replayed against a fixed transaction set. Times are per
/// transaction; the median is over trials.
std::vector<BenchRow> bench_objects(const std::vector<std::size_t>& object_counts, std::size_t trials);

/// Synthesized HTML documents of the given sizes through analyze_payload.
std::vector<BenchRow> bench_payload(const std::vector<std::size_t>& sizes, std::size_t trials);

std::string bench_csv(const std::vector<BenchRow>& rows, std::string_view size_column);

struct ReportRow {
    std::string configuration; // header-only, header+payload, header+payload+fuzzy
    std::string label;
    std::size_t incidents = 0;
    std::size_t flagged = 0;
    double rate = 0.0; // detection rate, or false-positive rate for benign
};

struct CorpusReport {
    std::vector<ReportRow> rows;
    std::vector<std::string> diagnostics;
};

/// Every *.jsonl file under `dir` is a capture whose lines also carry
/// `label` ("benign" or an attack class) and optionally `incident`. Lines
/// sharing an incident id are scored as one; each other line is its own.
/// An incident counts as flagged when any alert references one of its
/// transactions.
CorpusReport corpus_report(const std::string& dir, const Detector& detector);

std::string report_csv(const CorpusReport& report);

} // namespace fasids
