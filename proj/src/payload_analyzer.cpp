#include "fasids/payload_analyzer.hpp"

#include "fasids/error.hpp"
#include "text_util.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace fasids {

namespace {

using detail::to_lower;
using detail::trim;

std::string read_text_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(std::string("cannot open ") + what + " " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PayloadAlert make_alert(PayloadAlertKind kind, std::string_view evidence, std::size_t offset, std::string detail) {
    return PayloadAlert{kind, std::string(evidence.substr(0, kMaxEvidence)), offset, std::move(detail)};
}

} // namespace

DecompressResult decompress_if_needed(std::string_view body, ContentEncoding encoding, std::size_t cap) {
    DecompressResult out;
    if (encoding == ContentEncoding::identity) {
        out.bytes = std::string(body);
        return out;
    }

    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
        out.corrupt = true;
        out.diagnostics.push_back("zlib initialisation failed");
        return out;
    }
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(body.data()));
    zs.avail_in = static_cast<uInt>(body.size());

    char chunk[16384];
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = reinterpret_cast<Bytef*>(chunk);
        zs.avail_out = sizeof chunk;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) break;
        std::size_t produced = sizeof chunk - zs.avail_out;
        if (out.bytes.size() + produced > cap) {
            out.bytes.append(chunk, cap - out.bytes.size());
            out.truncated = true;
            break;
        }
        out.bytes.append(chunk, produced);
        if (rc == Z_OK && zs.avail_in == 0 && produced == 0) {
            rc = Z_BUF_ERROR;
            break;
        }
    }
    inflateEnd(&zs);

    if (out.truncated) {
        out.diagnostics.push_back("inflated payload exceeds " + std::to_string(cap) + " bytes, truncated");
    } else if (rc != Z_STREAM_END) {
        out.corrupt = true;
        out.bytes.clear();
        out.diagnostics.push_back("corrupt gzip body skipped" + std::string(zs.msg ? std::string(": ") + zs.msg : ""));
    }
    return out;
}

SignatureTable SignatureTable::defaults() {
    // The anchor row is listed under both its literal name and the HTML
    // element that implements it.
    return SignatureTable({
        {"img", "src"},
        {"a", "href"},
        {"anchor", "href"},
        {"input", "type"},
        {"meta", "name"},
        {"meta", "content"},
        {"div", "align"},
        {"div", "class"},
        {"body", "bgcolor"},
        {"body", "background"},
        {"body", "leftmargin"},
        {"iframe", "align"},
        {"iframe", "src"},
    });
}

SignatureTable SignatureTable::parse(std::string_view text) {
    std::vector<Signature> entries;
    std::size_t lineno = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        auto nl = text.find('\n', pos);
        auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string> fields;
        std::istringstream ss{std::string(line)};
        for (std::string f; ss >> f;) fields.push_back(f);
        if (fields.size() < 2 || fields.size() > 3) {
            throw ParseError(lineno, "expected 'tag attribute [predicate=javascript-url]'");
        }
        if (fields.size() == 3 && to_lower(fields[2]) != "predicate=javascript-url") {
            throw ParseError(lineno, "unknown predicate '" + fields[2] + "'");
        }
        entries.push_back({to_lower(fields[0]), to_lower(fields[1]), ContentPredicate::javascript_url});
    }
    return SignatureTable(std::move(entries));
}

SignatureTable SignatureTable::load(const std::string& path) {
    return parse(read_text_file(path, "signature file"));
}

const Signature* SignatureTable::find(std::string_view tag, std::string_view attribute) const {
    for (const auto& s : entries_) {
        if (s.tag == tag && s.attribute == attribute) return &s;
    }
    return nullptr;
}

std::string_view to_string(PayloadAlertKind kind) {
    switch (kind) {
    case PayloadAlertKind::tag_attribute_injection: return "tag-attribute-injection";
    case PayloadAlertKind::sql_injection: return "sql-injection";
    case PayloadAlertKind::dos_loop: return "dos-loop";
    case PayloadAlertKind::suspicious_script: return "suspicious-script";
    }
    return "suspicious-script";
}

std::string_view to_string(ScriptOrigin origin) {
    switch (origin) {
    case ScriptOrigin::script_element: return "script-element";
    case ScriptOrigin::event_attribute: return "event-attribute";
    case ScriptOrigin::javascript_url: return "javascript-url";
    }
    return "script-element";
}

std::vector<PayloadAlert> scan_tag_attributes(const std::vector<TagEvent>& events, const SignatureTable& table) {
    std::vector<PayloadAlert> alerts;
    for (const auto& ev : events) {
        for (const auto& attr : ev.attributes) {
            const Signature* sig = table.find(ev.tag, attr.name);
            if (!sig) continue;
            if (sig->predicate == ContentPredicate::javascript_url && has_javascript_scheme(attr.raw_value)) {
                alerts.push_back(make_alert(PayloadAlertKind::tag_attribute_injection, attr.raw_value,
                                            attr.value_offset, "javascript: URL in <" + ev.tag + " " + attr.name + ">"));
            }
        }
    }
    return alerts;
}

std::vector<ScriptBlock> extract_scripts(std::string_view body, const std::vector<TagEvent>& events) {
    std::vector<ScriptBlock> blocks;
    auto push_trimmed = [&](std::string_view text, std::size_t offset, ScriptOrigin origin) {
        std::size_t lead = 0;
        while (lead < text.size() && detail::is_space(text[lead])) ++lead;
        auto t = trim(text);
        if (!t.empty()) blocks.push_back(ScriptBlock{std::string(t), origin, offset + lead});
    };

    for (const auto& ev : events) {
        if (ev.tag == "script" && ev.content) {
            auto [begin, end] = *ev.content;
            push_trimmed(body.substr(begin, end - begin), begin, ScriptOrigin::script_element);
        }
        for (const auto& attr : ev.attributes) {
            if (attr.name.size() > 2 && attr.name.starts_with("on")) {
                push_trimmed(attr.raw_value, attr.value_offset, ScriptOrigin::event_attribute);
                continue;
            }
            std::size_t after = 0;
            if (has_javascript_scheme(attr.raw_value, &after)) {
                push_trimmed(std::string_view(attr.raw_value).substr(after), attr.value_offset + after,
                             ScriptOrigin::javascript_url);
            }
        }
    }
    return blocks;
}

namespace {

std::optional<ScriptPatternKind> pattern_kind_from_string(std::string_view s) {
    if (s == "sql-injection") return ScriptPatternKind::sql_injection;
    if (s == "dos-loop") return ScriptPatternKind::dos_loop;
    if (s == "dos-bound") return ScriptPatternKind::dos_bound;
    if (s == "suspicious-script") return ScriptPatternKind::suspicious_script;
    return std::nullopt;
}

PayloadAlertKind alert_kind(ScriptPatternKind k) {
    switch (k) {
    case ScriptPatternKind::sql_injection: return PayloadAlertKind::sql_injection;
    case ScriptPatternKind::dos_loop:
    case ScriptPatternKind::dos_bound: return PayloadAlertKind::dos_loop;
    case ScriptPatternKind::suspicious_script: return PayloadAlertKind::suspicious_script;
    }
    return PayloadAlertKind::suspicious_script;
}

} // namespace

void ScriptPatternSet::add(ScriptPatternKind kind, std::string source) {
    std::regex compiled(source, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
    if (kind == ScriptPatternKind::dos_bound && compiled.mark_count() < 1) {
        throw ConfigError("dos-bound pattern needs a capture group for the bound: " + source);
    }
    patterns_.push_back(ScriptPattern{kind, std::move(source), std::move(compiled)});
}

ScriptPatternSet ScriptPatternSet::defaults() {
    ScriptPatternSet set;
    // quote-then-OR tautology: ' or '1'='1
    set.add(ScriptPatternKind::sql_injection, R"('\s*\)?\s*or\s+['"\w(])");
    set.add(ScriptPatternKind::sql_injection, R"(\bunion\s+(all\s+)?select\b)");
    // comment truncation right after a closing quote: admin'--
    set.add(ScriptPatternKind::sql_injection, R"('\s*(--|#)\s*["'])");
    set.add(ScriptPatternKind::sql_injection, R"(;\s*(drop\s+table|insert\s+into|update\s+\w+\s+set|delete\s+from)\b)");
    set.add(ScriptPatternKind::dos_loop, R"(\bwhile\s*\(\s*(true|1)\s*\))");
    set.add(ScriptPatternKind::dos_loop, R"(\bfor\s*\(\s*[^;()]*;\s*;[^)]*\))");
    set.add(ScriptPatternKind::dos_bound, R"(\bfor\s*\([^;]*;\s*[\w.$]+\s*(?:<|<=|!=)\s*(\d+))");
    set.add(ScriptPatternKind::dos_bound, R"(\bwhile\s*\(\s*[\w.$]+\s*(?:<|<=|!=)\s*(\d+)\s*\))");
    return set;
}

ScriptPatternSet ScriptPatternSet::parse(std::string_view text) {
    ScriptPatternSet set;
    std::size_t lineno = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        auto nl = text.find('\n', pos);
        auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto sp = line.find_first_of(" \t");
        if (sp == std::string_view::npos) throw ParseError(lineno, "expected '<kind> <regex>'");
        auto kind = pattern_kind_from_string(line.substr(0, sp));
        if (!kind) throw ParseError(lineno, "unknown pattern kind '" + std::string(line.substr(0, sp)) + "'");
        try {
            set.add(*kind, std::string(trim(line.substr(sp))));
        } catch (const std::regex_error& e) {
            throw ParseError(lineno, std::string("regex does not compile: ") + e.what());
        } catch (const ConfigError& e) {
            throw ParseError(lineno, e.what());
        }
    }
    return set;
}

ScriptPatternSet ScriptPatternSet::load(const std::string& path) {
    return parse(read_text_file(path, "script pattern file"));
}

std::vector<PayloadAlert> scan_script(const ScriptBlock& block, const ScriptScanConfig& config) {
    std::vector<PayloadAlert> alerts;
    const std::string& src = block.source;
    for (const auto& p : config.patterns.patterns()) {
        for (auto it = std::sregex_iterator(src.begin(), src.end(), p.compiled); it != std::sregex_iterator(); ++it) {
            const auto& m = *it;
            auto pos = static_cast<std::size_t>(m.position(0));
            auto text = std::string_view(src).substr(pos, static_cast<std::size_t>(m.length(0)));
            if (p.kind == ScriptPatternKind::dos_bound) {
                std::uint64_t bound = 0;
                auto digits = m[1].str();
                auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), bound);
                // Out-of-range literals are as good as unbounded.
                if (ec == std::errc::result_out_of_range) bound = UINT64_MAX;
                else if (ec != std::errc{}) continue;
                if (bound < config.loop_bound_threshold) continue;
                alerts.push_back(make_alert(alert_kind(p.kind), text, block.byte_offset + pos,
                                            "loop bound " + digits + " >= " +
                                                std::to_string(config.loop_bound_threshold)));
            } else {
                alerts.push_back(make_alert(alert_kind(p.kind), text, block.byte_offset + pos,
                                            "matches /" + p.source + "/ in " + std::string(to_string(block.origin))));
            }
            break; // one alert per pattern per block
        }
    }
    return alerts;
}

std::vector<FieldRecord> body_records(std::string_view payload, const std::vector<TagEvent>& events) {
    std::vector<FieldRecord> out;
    out.reserve(events.size());
    for (const auto& ev : events) {
        std::string value;
        if (ev.tag == "script" && ev.content) {
            value = std::string(payload.substr(ev.content->first, ev.content->second - ev.content->first));
        } else {
            value = std::string(payload.substr(ev.byte_offset, ev.end_offset - ev.byte_offset));
        }
        std::replace_if(value.begin(), value.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
        out.push_back({MessageLine::body, ev.tag, std::move(value)});
    }
    return out;
}

PayloadReport analyze_payload(const HttpTransaction& txn, const PayloadConfig& config) {
    PayloadReport report;
    if (txn.body.empty()) return report;
    if (auto ct = txn.header("Content-Type"); ct && detail::istarts_with(trim(*ct), "image/")) {
        report.skipped = true;
        return report;
    }

    auto inflated = decompress_if_needed(txn.body, txn.content_encoding, config.inflate_cap);
    report.diagnostics = std::move(inflated.diagnostics);
    if (inflated.corrupt) {
        report.skipped = true;
        return report;
    }
    report.payload = std::move(inflated.bytes);

    auto tokens = tokenize_html(report.payload);
    report.diagnostics.insert(report.diagnostics.end(), tokens.diagnostics.begin(), tokens.diagnostics.end());
    if (tokens.binary) {
        report.skipped = true;
        return report;
    }
    report.events = std::move(tokens.events);
    report.alerts = scan_tag_attributes(report.events, config.signatures);
    report.scripts = extract_scripts(report.payload, report.events);
    for (const auto& block : report.scripts) {
        auto found = scan_script(block, config.scripts);
        report.alerts.insert(report.alerts.end(), found.begin(), found.end());
    }
    std::stable_sort(report.alerts.begin(), report.alerts.end(),
                     [](const PayloadAlert& a, const PayloadAlert& b) { return a.byte_offset < b.byte_offset; });
    return report;
}

} // namespace fasids
