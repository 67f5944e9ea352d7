// fasids command line: run, parse, bench, report.

#include "fasids/error.hpp"
#include "fasids/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#ifndef FASIDS_DATA_DIR
#define FASIDS_DATA_DIR "."
#endif

namespace {

constexpr int kExitClean = 0;
constexpr int kExitAlerts = 1;
constexpr int kExitConfig = 2;

std::string data_path(const char* rel) {
    return (std::filesystem::path(FASIDS_DATA_DIR) / rel).string();
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw fasids::IoError("cannot write " + path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fuzzy-aided HTTP intrusion detection"};
    app.require_subcommand(1);

    fasids::RunConfig run;
    run.rules_path = data_path("rules/default.rules");
    run.signatures_path = data_path("signatures/table2.sig");
    run.fuzzy_path = data_path("fuzzy/default.yaml");
    std::string format = "jsonl";
    bool no_payload = false;
    bool no_fuzzy = false;
    bool strict = false;
    bool quiet = false;

    auto* run_cmd = app.add_subcommand("run", "Analyze a capture and emit alerts");
    run_cmd->add_option("--rules", run.rules_path, "Rule file")->capture_default_str();
    run_cmd->add_option("--signatures", run.signatures_path, "Tag/attribute signature file")->capture_default_str();
    run_cmd->add_option("--script-patterns", run.script_patterns_path, "Script pattern file (default: built-in)");
    run_cmd->add_option("--fuzzy", run.fuzzy_path, "Fuzzy stage YAML config")->capture_default_str();
    run_cmd->add_option("--input", run.input, "Capture file or directory")->required();
    run_cmd->add_option("--format", format, "Capture format")->check(CLI::IsMember({"raw", "jsonl"}))->capture_default_str();
    run_cmd->add_option("--out", run.out_path, "Alert sink, '-' for stdout")->capture_default_str();
    run_cmd->add_option("--records-out", run.records_out, "Write parsed field records here");
    run_cmd->add_flag("--legacy-record-names", run.legacy_record_names, "Request_/Response_/generic-header_ record names");
    run_cmd->add_option("--loop-bound", run.loop_bound_threshold, "Loop bound treated as DoS")->capture_default_str();
    run_cmd->add_flag("--strict-values", strict, "Rule values must be 1*(Alpha|Digit)");
    run_cmd->add_flag("--no-payload", no_payload, "Skip payload analysis");
    run_cmd->add_flag("--no-fuzzy", no_fuzzy, "Skip the fuzzy stage");
    run_cmd->add_flag("-q,--quiet", quiet, "No summary on stderr");

    std::string parse_input;
    std::string parse_format = "raw";
    bool parse_legacy = false;
    auto* parse_cmd = app.add_subcommand("parse", "Print field records for every transaction");
    parse_cmd->add_option("--input", parse_input, "Capture file or directory")->required();
    parse_cmd->add_option("--format", parse_format, "Capture format")
        ->check(CLI::IsMember({"raw", "jsonl"}))
        ->capture_default_str();
    parse_cmd->add_flag("--legacy-record-names", parse_legacy, "Request_/Response_/generic-header_ record names");

    auto* bench_cmd = app.add_subcommand("bench", "Timing benches, CSV on stdout");
    bench_cmd->require_subcommand(1);
    std::vector<std::size_t> counts{20, 40, 80, 160, 320};
    std::vector<std::size_t> sizes{1024, 4096, 16384, 65536, 262144};
    std::size_t trials = 3;
    std::string bench_out = "-";
    auto* bench_objects_cmd = bench_cmd->add_subcommand("objects", "Scan time against rule-base size");
    bench_objects_cmd->add_option("--counts", counts, "Object counts")->capture_default_str();
    auto* bench_payload_cmd = bench_cmd->add_subcommand("payload", "Scan time against payload size");
    bench_payload_cmd->add_option("--sizes", sizes, "Payload sizes in bytes")->capture_default_str();
    for (auto* c : {bench_objects_cmd, bench_payload_cmd}) {
        c->add_option("--trials", trials, "Trials per row")->capture_default_str();
        c->add_option("--out", bench_out, "CSV destination")->capture_default_str();
    }

    std::string corpus_dir;
    std::string report_out = "-";
    auto* report_cmd = app.add_subcommand("report", "Detection rates per component combination");
    report_cmd->add_option("--corpus", corpus_dir, "Directory of labeled jsonl captures")->required();
    report_cmd->add_option("--rules", run.rules_path, "Rule file")->capture_default_str();
    report_cmd->add_option("--signatures", run.signatures_path, "Signature file")->capture_default_str();
    report_cmd->add_option("--fuzzy", run.fuzzy_path, "Fuzzy stage YAML config")->capture_default_str();
    report_cmd->add_option("--out", report_out, "CSV destination")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            run.format = fasids::parse_capture_format(format);
            run.stages.payload = !no_payload;
            run.stages.fuzzy = !no_fuzzy;
            if (strict) run.value_mode = fasids::ValueMode::strict;
            auto result = fasids::run_pipeline(run);
            if (!quiet) {
                std::cerr << fasids::summary_text(result);
                for (const auto& d : result.diagnostics) std::cerr << "note: " << d << '\n';
            }
            return result.alerts.empty() ? kExitClean : kExitAlerts;
        }
        if (*parse_cmd) {
            auto capture = fasids::read_capture(parse_input, fasids::parse_capture_format(parse_format));
            for (const auto& d : capture.diagnostics) std::cerr << "note: " << d << '\n';
            bool first = true;
            for (const auto& entry : capture.in_event_order()) {
                auto d = fasids::dispatch(entry);
                for (const auto& v : d.violations) std::cerr << entry.session_id << ": " << v.description << '\n';
                if (!d.transaction) continue;
                auto parsed = fasids::parse_header(*d.transaction);
                for (const auto& v : parsed.violations) std::cerr << entry.session_id << ": " << v.description << '\n';
                if (!first) std::cout << '\n';
                first = false;
                std::cout << fasids::serialize_records(parsed.records, fasids::RecordFormat{parse_legacy});
            }
            return kExitClean;
        }
        if (*bench_objects_cmd) {
            write_output(bench_out, fasids::bench_csv(fasids::bench_objects(counts, trials), "n_objects"));
            return kExitClean;
        }
        if (*bench_payload_cmd) {
            write_output(bench_out, fasids::bench_csv(fasids::bench_payload(sizes, trials), "payload_bytes"));
            return kExitClean;
        }
        if (*report_cmd) {
            auto detector = fasids::load_detector(run);
            auto report = fasids::corpus_report(corpus_dir, detector);
            for (const auto& d : report.diagnostics) std::cerr << "note: " << d << '\n';
            write_output(report_out, fasids::report_csv(report));
            return kExitClean;
        }
    } catch (const fasids::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitClean;
}
