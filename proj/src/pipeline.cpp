#include "fasids/pipeline.hpp"

#include "fasids/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fasids {

std::string_view to_string(AlertSource s) {
    switch (s) {
    case AlertSource::header_rule: return "header-rule";
    case AlertSource::payload: return "payload";
    case AlertSource::fuzzy: return "fuzzy";
    }
    return "header-rule";
}

std::string_view to_string(AlertSeverity s) {
    switch (s) {
    case AlertSeverity::info: return "info";
    case AlertSeverity::lp: return "LP";
    case AlertSeverity::hp: return "HP";
    case AlertSeverity::intrusive: return "intrusive";
    }
    return "info";
}

AlertSeverity severity_of(Consequent c) {
    switch (c) {
    case Consequent::non_intrusive: return AlertSeverity::info;
    case Consequent::lp: return AlertSeverity::lp;
    case Consequent::hp: return AlertSeverity::hp;
    case Consequent::intrusive: return AlertSeverity::intrusive;
    }
    return AlertSeverity::info;
}

std::string to_json_line(const Alert& alert) {
    nlohmann::json j;
    j["source"] = to_string(alert.source);
    j["id"] = alert.id;
    j["severity"] = to_string(alert.severity);
    j["session_id"] = alert.session_id;
    j["timestamp"] = alert.timestamp;
    j["message"] = alert.message;
    j["evidence"] = alert.evidence;
    j["transactions"] = alert.transactions;
    if (alert.score) j["score"] = *alert.score;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

namespace {

std::string clip(std::string s) {
    if (s.size() > kMaxEvidence) s.resize(kMaxEvidence);
    return s;
}

std::string format_double(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

class FuzzyStage {
public:
    FuzzyStage(const FuzzyConfig& cfg, std::vector<std::pair<std::size_t, Alert>>& sink,
               std::vector<std::string>& diagnostics)
        : cfg_(cfg), acc_(cfg.metrics), sink_(sink), diagnostics_(diagnostics) {}

    void observe(const TimedEvent& ev, const std::string& session, std::size_t ref) {
        handle(acc_.observe(ev, session, ref));
    }

    void flush() { handle(acc_.flush()); }

private:
    void handle(std::vector<ClosedWindow> closed) {
        for (auto& cw : closed) {
            const std::string& metric = cw.window.metric;
            // Other inputs of a multi-input event use their most recent window.
            latest_[metric] = cw.window;
            auto result = fcm_evaluate(cfg_.graph, latest_, cfg_.model);
            for (const auto& event : cfg_.graph.events()) {
                if (!fed_by(event, metric)) continue;
                for (const auto& d : result.diagnostics) {
                    if (d.rfind(event + ":", 0) == 0) diagnostics_.push_back(d);
                }
                auto it = result.events.find(event);
                if (it == result.events.end()) continue;
                const EventVerdict& v = it->second;
                if (!v.fired || v.verdict < cfg_.alert_min) continue;

                const MetricSpec* spec = find_spec(metric);
                Alert a;
                a.source = AlertSource::fuzzy;
                a.id = event;
                a.severity = severity_of(v.verdict);
                a.session_id = spec && spec->scope == MetricScope::session ? cw.scope_key : cw.last_session;
                a.timestamp = cw.last_timestamp;
                a.message = event + ": " + std::to_string(cw.window.x_count) + " " + metric + " events in " +
                            format_double(cw.window.t_interval, 3) + " s -> " + std::string(to_string(v.verdict));
                a.evidence = metric + " x=" + std::to_string(cw.window.x_count) +
                             " t=" + format_double(cw.window.t_interval, 3) + " score=" + format_double(v.score, 4);
                a.transactions = cw.refs;
                a.score = v.score;
                std::size_t anchor = cw.refs.empty() ? 0 : *std::max_element(cw.refs.begin(), cw.refs.end());
                sink_.emplace_back(anchor, std::move(a));
            }
        }
    }

    bool fed_by(const std::string& event, const std::string& metric) const {
        return std::any_of(cfg_.graph.edges().begin(), cfg_.graph.edges().end(),
                           [&](const FcmEdge& e) { return e.to == event && e.from == metric; });
    }

    const MetricSpec* find_spec(const std::string& name) const {
        for (const auto& s : cfg_.metrics) {
            if (s.name == name) return &s;
        }
        return nullptr;
    }

    const FuzzyConfig& cfg_;
    MetricAccumulator acc_;
    std::map<std::string, MetricWindow> latest_;
    std::vector<std::pair<std::size_t, Alert>>& sink_;
    std::vector<std::string>& diagnostics_;
};

} // namespace

RunResult analyze_capture(const Capture& capture, const Detector& detector, StageToggles stages) {
    RunResult result;
    result.diagnostics = capture.diagnostics;
    result.summary.sessions = capture.sessions.size();

    std::vector<std::pair<std::size_t, Alert>> pending; // (anchor transaction, alert)
    FuzzyStage fuzzy(detector.fuzzy, pending, result.diagnostics);

    const auto entries = capture.in_event_order();
    result.summary.entries = entries.size();
    for (const auto& entry : entries) {
        auto dispatched = dispatch(entry);
        if (!dispatched.transaction) {
            ++result.summary.dropped;
            for (const auto& v : dispatched.violations) {
                result.diagnostics.push_back("session " + entry.session_id + " entry " +
                                             std::to_string(entry.sequence) + ": " + v.description);
            }
            continue;
        }
        const HttpTransaction& txn = *dispatched.transaction;
        const std::size_t index = result.transactions.size();

        TransactionOutcome out;
        out.sequence = entry.sequence;
        out.session_id = txn.session_id;
        out.timestamp = txn.timestamp;
        out.kind = txn.kind;
        out.start_line = txn.start_line;
        out.violations = std::move(dispatched.violations);

        auto parsed = parse_header(txn);
        out.records = std::move(parsed.records);
        out.violations.insert(out.violations.end(), parsed.violations.begin(), parsed.violations.end());

        std::string_view excerpt = txn.body;
        PayloadReport report;
        if (stages.payload) {
            report = analyze_payload(txn, detector.payload);
            out.diagnostics = report.diagnostics;
            if (!report.skipped) {
                auto body = body_records(report.payload, report.events);
                out.records.insert(out.records.end(), body.begin(), body.end());
                excerpt = report.payload;
            }
            out.payload_alerts = report.alerts;
        }

        auto interp = interpret(out.records, detector.rules);
        out.triggers = std::move(interp.triggers);
        out.diagnostics.insert(out.diagnostics.end(), interp.diagnostics.begin(), interp.diagnostics.end());

        for (const auto& trig : out.triggers) {
            Alert a;
            a.source = AlertSource::header_rule;
            a.id = std::to_string(trig.rule_number);
            a.severity = AlertSeverity::intrusive;
            a.session_id = txn.session_id;
            a.timestamp = txn.timestamp;
            a.message = trig.message;
            std::string evidence;
            for (const auto& h : trig.witness) {
                if (!evidence.empty()) evidence += " | ";
                evidence += h.matched_value;
            }
            a.evidence = clip(std::move(evidence));
            a.transactions = {index};
            pending.emplace_back(index, std::move(a));
        }
        for (const auto& pa : out.payload_alerts) {
            Alert a;
            a.source = AlertSource::payload;
            a.id = std::string(to_string(pa.kind));
            a.severity = AlertSeverity::intrusive;
            a.session_id = txn.session_id;
            a.timestamp = txn.timestamp;
            a.message = pa.detail;
            a.evidence = pa.evidence;
            a.transactions = {index};
            pending.emplace_back(index, std::move(a));
        }

        if (stages.fuzzy && out.triggers.empty() && out.payload_alerts.empty()) {
            out.fed_to_fuzzy = true;
            TimedEvent ev{txn.timestamp, txn.start_line + "\n" + std::string(excerpt.substr(0, kEventExcerpt))};
            result.transactions.push_back(std::move(out));
            fuzzy.observe(ev, txn.session_id, index);
        } else {
            result.transactions.push_back(std::move(out));
        }
    }
    if (stages.fuzzy) fuzzy.flush();

    std::stable_sort(pending.begin(), pending.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [anchor, alert] : pending) {
        ++result.summary.by_source[std::string(to_string(alert.source))];
        ++result.summary.by_severity[std::string(to_string(alert.severity))];
        result.alerts.push_back(std::move(alert));
    }
    result.summary.transactions = result.transactions.size();
    return result;
}

Detector load_detector(const RunConfig& config) {
    Detector d;
    if (!config.rules_path.empty()) d.rules = load_rule_file(config.rules_path, config.value_mode);
    if (!config.signatures_path.empty()) d.payload.signatures = SignatureTable::load(config.signatures_path);
    if (!config.script_patterns_path.empty()) {
        d.payload.scripts.patterns = ScriptPatternSet::load(config.script_patterns_path);
    }
    d.payload.scripts.loop_bound_threshold = config.loop_bound_threshold;
    d.payload.inflate_cap = config.inflate_cap;
    if (!config.fuzzy_path.empty()) d.fuzzy = load_fuzzy_config(config.fuzzy_path);
    return d;
}

RunResult run_pipeline(const RunConfig& config) {
    Detector detector = load_detector(config);
    Capture capture = read_capture(config.input, config.format);
    RunResult result = analyze_capture(capture, detector, config.stages);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (config.out_path != "-") {
        file.open(config.out_path, std::ios::binary | std::ios::trunc);
        if (!file) throw IoError("cannot write alerts to " + config.out_path);
        out = &file;
    }
    for (const auto& a : result.alerts) *out << to_json_line(a) << '\n';
    out->flush();

    if (!config.records_out.empty()) {
        std::ofstream rec(config.records_out, std::ios::binary | std::ios::trunc);
        if (!rec) throw IoError("cannot write records to " + config.records_out);
        RecordFormat fmt{config.legacy_record_names};
        for (std::size_t i = 0; i < result.transactions.size(); ++i) {
            if (i) rec << '\n';
            rec << serialize_records(result.transactions[i].records, fmt);
        }
    }
    return result;
}

std::string summary_text(const RunResult& result) {
    const auto& s = result.summary;
    std::ostringstream os;
    os << "sessions " << s.sessions << ", entries " << s.entries << ", transactions " << s.transactions
       << ", dropped " << s.dropped << ", alerts " << result.alerts.size() << '\n';
    for (const auto& [k, v] : s.by_source) os << "  source " << k << ": " << v << '\n';
    for (const auto& [k, v] : s.by_severity) os << "  severity " << k << ": " << v << '\n';
    return os.str();
}

} // namespace fasids
