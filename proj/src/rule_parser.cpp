#include "fasids/error.hpp"
#include "fasids/rule_engine.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace fasids {

namespace {

using detail::iequals;
using detail::to_lower;
using detail::trim;

struct SelectorName {
    std::string_view name;
    LineSelector selector;
};

// Accepted spellings: grammar terminals, their long forms, and the
// `general-header` wording of the object table.
constexpr std::array<SelectorName, 15> kSelectorNames{{
    {"start-line", LineSelector::start_line},
    {"request-line", LineSelector::request_line},
    {"status-line", LineSelector::status_line},
    {"header", LineSelector::header},
    {"generic-hdr", LineSelector::generic_header},
    {"generic-header", LineSelector::generic_header},
    {"general-header", LineSelector::generic_header},
    {"request-hdr", LineSelector::request_header},
    {"request-header", LineSelector::request_header},
    {"response-hdr", LineSelector::response_header},
    {"response-header", LineSelector::response_header},
    {"entity-hdr", LineSelector::entity_header},
    {"entity-header", LineSelector::entity_header},
    {"body", LineSelector::body},
    {"html", LineSelector::body},
}};

constexpr std::array<std::string_view, 3> kRequestLineSections{"Method", "Request-URI", "HTTP-version"};
constexpr std::array<std::string_view, 3> kStatusLineSections{"HTTP-version", "Status-code", "Reason"};

std::string canonical_section(LineSelector line, std::string_view section) {
    if (line == LineSelector::body) return to_lower(section);
    if (line != LineSelector::start_line && line != LineSelector::request_line && line != LineSelector::status_line) {
        return std::string(section);
    }
    auto s = to_lower(section);
    if (s == "method") return "Method";
    if (s == "uri" || s == "request-uri") return "Request-URI";
    if (s == "version" || s == "http-version") return "HTTP-version";
    if (s == "status-code" || s == "status") return "Status-code";
    if (s == "reason" || s == "reason-phrase") return "Reason";
    return std::string(section);
}

bool valid_start_line_section(LineSelector line, std::string_view section) {
    auto in = [&](const auto& list) {
        return std::find(list.begin(), list.end(), section) != list.end();
    };
    switch (line) {
    case LineSelector::request_line: return in(kRequestLineSections);
    case LineSelector::status_line: return in(kStatusLineSections);
    case LineSelector::start_line: return in(kRequestLineSections) || in(kStatusLineSections);
    default: return true;
    }
}

// Reads a "double quoted" string starting at s[i] == '"'; supports the
// escapes \" and \\. Leaves i after the closing quote.
std::string read_quoted(std::string_view s, std::size_t& i, std::size_t lineno) {
    std::string tok;
    ++i;
    while (i < s.size()) {
        char c = s[i++];
        if (c == '\\' && i < s.size() && (s[i] == '"' || s[i] == '\\')) {
            tok += s[i++];
        } else if (c == '"') {
            return tok;
        } else {
            tok += c;
        }
    }
    throw ParseError(lineno, "unterminated quoted string");
}

// Splits on whitespace; quoted tokens may contain spaces. Returns
// (token, was_quoted).
std::vector<std::pair<std::string, bool>> tokenize(std::string_view s, std::size_t lineno) {
    std::vector<std::pair<std::string, bool>> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (detail::is_space(s[i])) {
            ++i;
            continue;
        }
        if (s[i] == '"') {
            out.emplace_back(read_quoted(s, i, lineno), true);
            continue;
        }
        auto start = i;
        while (i < s.size() && !detail::is_space(s[i])) ++i;
        out.emplace_back(std::string(s.substr(start, i - start)), false);
    }
    return out;
}

int parse_positive(std::string_view s, std::size_t lineno, const char* what) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || v <= 0) {
        throw ParseError(lineno, std::string(what) + " must be a positive integer, got '" + std::string(s) + "'");
    }
    return v;
}

// "<n>:" or "<n> :" right after the directive keyword.
std::pair<int, std::string_view> parse_header_number(std::string_view rest, std::size_t lineno, const char* what) {
    rest = trim(rest);
    auto colon = rest.find(':');
    if (colon == std::string_view::npos) throw ParseError(lineno, std::string("expected ':' after ") + what + " number");
    int n = parse_positive(trim(rest.substr(0, colon)), lineno, what);
    return {n, rest.substr(colon + 1)};
}

std::optional<Operator> parse_operator(std::string_view tok, ValueMode mode) {
    if (tok == "=") return Operator::eq;
    if (tok == ">") return Operator::gt;
    if (tok == "<") return Operator::lt;
    if (mode == ValueMode::relaxed) {
        if (tok == "eq" || tok == "==") return Operator::eq;
        if (tok == "gt") return Operator::gt;
        if (tok == "lt") return Operator::lt;
    }
    return std::nullopt;
}

std::optional<Feature> parse_feature(std::string_view tok) {
    auto t = to_lower(tok);
    if (t == "parameter" || t == "type") return Feature::parameter;
    if (t == "size") return Feature::size;
    if (t == "regex") return Feature::regex;
    if (t == "occurrence") return Feature::occurrence;
    return std::nullopt;
}

bool strict_value(std::string_view v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '1' && c <= '9');
    });
}

MatchObject parse_object_line(std::string_view rest, std::size_t lineno, ValueMode mode) {
    auto [number, body] = parse_header_number(rest, lineno, "object");
    auto toks = tokenize(body, lineno);
    if (toks.size() != 5) {
        throw ParseError(lineno, "object needs <message-line> <section> <feature> <operator> <value>, got " +
                                     std::to_string(toks.size()) + " fields");
    }
    MatchObject obj;
    obj.number = number;
    obj.source_line = lineno;

    auto line = line_selector_from_string(toks[0].first);
    if (!line) throw ParseError(lineno, "unknown message-line '" + toks[0].first + "'");
    obj.line = *line;
    obj.section = toks[1].first;

    auto feature = parse_feature(toks[2].first);
    if (!feature) throw ParseError(lineno, "unknown feature '" + toks[2].first + "'");
    obj.feature = *feature;

    auto op = parse_operator(toks[3].first, mode);
    if (!op) throw ParseError(lineno, "unknown operator '" + toks[3].first + "'");
    obj.op = *op;

    auto& [value, quoted] = toks[4];
    if (mode == ValueMode::strict && (quoted || !strict_value(value))) {
        throw ParseError(lineno, "value '" + value + "' is not 1*(Alpha | Digit)");
    }
    obj.content = value;
    return obj;
}

Rule parse_rule_line(std::string_view rest, std::size_t lineno) {
    auto [number, body] = parse_header_number(rest, lineno, "rule");
    Rule rule;
    rule.number = number;
    rule.message = "rule " + std::to_string(number);
    std::optional<std::size_t> declared_count;
    bool have_objects = false;

    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < body.size() && detail::is_space(body[i])) ++i;
    };
    while (true) {
        skip_ws();
        if (i >= body.size()) break;
        auto key_start = i;
        while (i < body.size() && (std::isalnum(static_cast<unsigned char>(body[i])) || body[i] == '_')) ++i;
        auto key = to_lower(body.substr(key_start, i - key_start));
        skip_ws();
        if (key.empty() || i >= body.size() || body[i] != '=') {
            throw ParseError(lineno, "expected key=value in rule directive");
        }
        ++i;
        skip_ws();
        std::string value;
        if (i < body.size() && body[i] == '{') {
            auto close = body.find('}', i);
            if (close == std::string_view::npos) throw ParseError(lineno, "unterminated object list");
            value = std::string(body.substr(i, close - i + 1));
            i = close + 1;
        } else if (i < body.size() && body[i] == '"') {
            value = read_quoted(body, i, lineno);
        } else {
            auto start = i;
            while (i < body.size() && !detail::is_space(body[i])) ++i;
            value = std::string(body.substr(start, i - start));
        }

        if (key == "objects") {
            if (value.size() < 2 || value.front() != '{') throw ParseError(lineno, "objects must be a {list}");
            std::string_view inner(value);
            inner = inner.substr(1, inner.size() - 2);
            for (std::size_t p = 0; p <= inner.size();) {
                auto comma = inner.find(',', p);
                auto item = trim(inner.substr(p, comma == std::string_view::npos ? std::string_view::npos : comma - p));
                if (item.empty()) throw ParseError(lineno, "empty entry in object list");
                rule.objects.push_back(parse_positive(item, lineno, "object reference"));
                if (comma == std::string_view::npos) break;
                p = comma + 1;
            }
            have_objects = true;
        } else if (key == "ordered" || key == "in_order") {
            auto v = to_lower(value);
            if (v == "true") rule.in_order = true;
            else if (v == "false") rule.in_order = false;
            else throw ParseError(lineno, "ordered must be true or false");
        } else if (key == "msg" || key == "message") {
            rule.message = value;
        } else if (key == "count" || key == "no_of_objects") {
            declared_count = static_cast<std::size_t>(parse_positive(value, lineno, "count"));
        } else {
            throw ParseError(lineno, "unknown rule key '" + key + "'");
        }
    }
    if (!have_objects || rule.objects.empty()) throw ParseError(lineno, "rule has no objects={...} list");
    if (declared_count && *declared_count != rule.objects.size()) {
        throw ParseError(lineno, "count=" + std::to_string(*declared_count) + " but object list has " +
                                     std::to_string(rule.objects.size()) + " entries");
    }
    return rule;
}

// Canonicalizes and checks one object; the error carries its source line.
void finalize_object(MatchObject& obj) {
    const auto lineno = obj.source_line;
    auto fail = [&](const std::string& why) -> void {
        if (lineno > 0) throw ParseError(lineno, why);
        throw ConfigError("object " + std::to_string(obj.number) + ": " + why);
    };
    if (obj.number <= 0) fail("object number must be positive");
    obj.section = canonical_section(obj.line, obj.section);
    if (obj.section.empty()) fail("empty section");
    if (obj.section.find('$') != std::string::npos) fail("section must not contain '$'");
    if (!valid_start_line_section(obj.line, obj.section)) {
        fail("section '" + obj.section + "' is not part of a " + std::string(to_string(obj.line)));
    }
    switch (obj.feature) {
    case Feature::parameter:
        if (obj.op != Operator::eq) fail("parameter feature only supports '='");
        break;
    case Feature::regex:
        if (obj.op != Operator::eq) fail("regex feature only supports '='");
        if (!obj.pattern) {
            try {
                obj.pattern = std::make_shared<const std::regex>(obj.content, std::regex::ECMAScript);
            } catch (const std::regex_error& e) {
                fail("regex '" + obj.content + "' does not compile: " + e.what());
            }
        }
        break;
    case Feature::size:
    case Feature::occurrence: {
        std::uint64_t n = 0;
        auto [p, ec] = std::from_chars(obj.content.data(), obj.content.data() + obj.content.size(), n);
        if (ec != std::errc{} || p != obj.content.data() + obj.content.size()) {
            fail(std::string(to_string(obj.feature)) + " feature needs a non-negative integer, got '" + obj.content +
                 "'");
        }
        obj.numeric = n;
        break;
    }
    }
}

} // namespace

std::string_view to_string(LineSelector s) {
    switch (s) {
    case LineSelector::start_line: return "start-line";
    case LineSelector::request_line: return "request-line";
    case LineSelector::status_line: return "status-line";
    case LineSelector::header: return "header";
    case LineSelector::generic_header: return "generic-header";
    case LineSelector::request_header: return "request-header";
    case LineSelector::response_header: return "response-header";
    case LineSelector::entity_header: return "entity-header";
    case LineSelector::body: return "body";
    }
    return "body";
}

std::optional<LineSelector> line_selector_from_string(std::string_view name) {
    for (const auto& [n, s] : kSelectorNames) {
        if (iequals(n, name)) return s;
    }
    return std::nullopt;
}

std::string_view to_string(Feature f) {
    switch (f) {
    case Feature::parameter: return "parameter";
    case Feature::size: return "size";
    case Feature::regex: return "regex";
    case Feature::occurrence: return "occurrence";
    }
    return "parameter";
}

std::string_view to_string(Operator op) {
    switch (op) {
    case Operator::eq: return "=";
    case Operator::gt: return ">";
    case Operator::lt: return "<";
    }
    return "=";
}

RuleBase RuleBase::parse(std::string_view text, ValueMode mode) {
    std::vector<MatchObject> objects;
    std::vector<std::pair<Rule, std::size_t>> rules;
    std::size_t lineno = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        auto nl = text.find('\n', pos);
        auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;

        auto kw_end = line.find_first_of(" \t");
        auto keyword = to_lower(line.substr(0, kw_end));
        auto rest = kw_end == std::string_view::npos ? std::string_view{} : line.substr(kw_end);
        if (keyword == "object") {
            objects.push_back(parse_object_line(rest, lineno, mode));
        } else if (keyword == "rule") {
            rules.emplace_back(parse_rule_line(rest, lineno), lineno);
        } else {
            throw ParseError(lineno, "expected 'object' or 'rule', got '" + keyword + "'");
        }
    }

    RuleBase rb;
    for (auto& obj : objects) {
        finalize_object(obj);
        auto line = obj.source_line;
        if (!rb.objects_.emplace(obj.number, std::move(obj)).second) {
            throw ParseError(line, "duplicate object number");
        }
    }
    for (auto& [rule, line] : rules) {
        for (int ref : rule.objects) {
            if (!rb.objects_.count(ref)) {
                throw ParseError(line, "rule " + std::to_string(rule.number) + " references undefined object " +
                                           std::to_string(ref));
            }
        }
        if (!rb.rules_.emplace(rule.number, std::move(rule)).second) throw ParseError(line, "duplicate rule number");
    }
    rb.source_text_ = std::string(text);
    rb.build_index();
    return rb;
}

RuleBase RuleBase::from_parts(std::vector<MatchObject> objects, std::vector<Rule> rules) {
    RuleBase rb;
    for (auto& obj : objects) {
        finalize_object(obj);
        auto n = obj.number;
        if (!rb.objects_.emplace(n, std::move(obj)).second) {
            throw ConfigError("duplicate object number " + std::to_string(n));
        }
    }
    for (auto& rule : rules) {
        if (rule.objects.empty()) throw ConfigError("rule " + std::to_string(rule.number) + " has no objects");
        for (int ref : rule.objects) {
            if (!rb.objects_.count(ref)) {
                throw ConfigError("rule " + std::to_string(rule.number) + " references undefined object " +
                                  std::to_string(ref));
            }
        }
        auto n = rule.number;
        if (!rb.rules_.emplace(n, std::move(rule)).second) {
            throw ConfigError("duplicate rule number " + std::to_string(n));
        }
    }
    rb.build_index();
    return rb;
}

void RuleBase::build_index() {
    predicates_.clear();
    by_section_.clear();
    using Key = std::tuple<LineSelector, std::string, Feature, Operator, std::string>;
    std::map<Key, std::size_t> seen;
    for (const auto& [number, obj] : objects_) {
        Key key{obj.line, to_lower(obj.section), obj.feature, obj.op, obj.content};
        auto [it, inserted] = seen.try_emplace(key, predicates_.size());
        if (inserted) {
            predicates_.push_back(Predicate{number, {}});
            by_section_[std::get<1>(key)].push_back(it->second);
        }
        predicates_[it->second].object_numbers.push_back(number);
    }
}

RuleBase load_rule_file(const std::string& path, ValueMode mode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open rule file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return RuleBase::parse(ss.str(), mode);
}

} // namespace fasids
