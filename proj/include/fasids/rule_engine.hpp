#pragma once

// Rule-base of five-tuple match objects <message-line, section, feature,
// operator, content>, the line-oriented rule language that declares them,
// and the interpreter that correlates object hits into rule triggers.

#include "fasids/http_ingest.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace fasids {

/// Which field records an object looks at. The grammar allows either a
/// concrete line kind or one of the umbrella kinds (start-line, header).
enum class LineSelector {
    start_line,
    request_line,
    status_line,
    header,
    generic_header,
    request_header,
    response_header,
    entity_header,
    body,
};

std::string_view to_string(LineSelector s);
std::optional<LineSelector> line_selector_from_string(std::string_view name);
bool selects(LineSelector selector, MessageLine line);

enum class Feature { parameter, size, regex, occurrence };
enum class Operator { eq, gt, lt };

std::string_view to_string(Feature f);
std::string_view to_string(Operator op);

struct MatchObject {
    int number = 0;
    LineSelector line = LineSelector::header;
    std::string section;     // as written, after alias canonicalization
    Feature feature = Feature::parameter;
    Operator op = Operator::eq;
    std::string content;
    std::uint64_t numeric = 0;                    // size / occurrence operand
    std::shared_ptr<const std::regex> pattern;    // regex feature only
    std::size_t source_line = 0;
};

struct Rule {
    int number = 0;
    std::vector<int> objects; // repetition allowed
    bool in_order = false;
    std::string message;

    std::size_t no_of_objects() const { return objects.size(); }
};

enum class ValueMode {
    relaxed, // any non-whitespace token or quoted string
    strict,  // 1*(Alpha | Digit) exactly as the grammar states
};

class RuleBase {
public:
    RuleBase() = default;

    /// Parses rule-language text. Throws ParseError with the offending line.
    static RuleBase parse(std::string_view text, ValueMode mode = ValueMode::relaxed);

    /// Builds a rule-base directly; validates referential integrity.
    static RuleBase from_parts(std::vector<MatchObject> objects, std::vector<Rule> rules);

    const std::map<int, MatchObject>& objects() const { return objects_; }
    const std::map<int, Rule>& rules() const { return rules_; }
    const std::string& source_text() const { return source_text_; }

    /// Identical predicates shared by several object numbers are evaluated
    /// once per record; this is the number of distinct predicates.
    std::size_t distinct_predicates() const { return predicates_.size(); }

private:
    friend struct RuleMatcher;

    struct Predicate {
        int prototype = 0; // object number carrying the predicate
        std::vector<int> object_numbers;
    };

    void build_index();

    std::map<int, MatchObject> objects_;
    std::map<int, Rule> rules_;
    std::string source_text_;
    std::vector<Predicate> predicates_;
    // Interpreter state table: lower-cased section -> predicates that may
    // fire on a record in that section.
    std::map<std::string, std::vector<std::size_t>, std::less<>> by_section_;
};

RuleBase load_rule_file(const std::string& path, ValueMode mode = ValueMode::relaxed);

struct ObjectHit {
    int object_number = 0;
    std::size_t record_index = 0;
    std::string matched_value;

    friend bool operator==(const ObjectHit&, const ObjectHit&) = default;
};

/// Emits hits ordered by (record_index, object_number). Occurrence objects
/// are evaluated once the whole record list has been scanned; their hit sits
/// on the last record of that section, or at records.size() when the section
/// never appeared.
std::vector<ObjectHit> match_objects(const std::vector<FieldRecord>& records, const RuleBase& rulebase,
                                     std::vector<std::string>* diagnostics = nullptr);

struct RuleTrigger {
    int rule_number = 0;
    std::vector<ObjectHit> witness;
    std::string message;

    friend bool operator==(const RuleTrigger&, const RuleTrigger&) = default;
};

/// Minimal leftmost-earliest witness for one rule, or nullopt.
std::optional<std::vector<ObjectHit>> find_witness(const Rule& rule, const std::vector<ObjectHit>& hits);

std::vector<RuleTrigger> evaluate_rules(const std::vector<ObjectHit>& hits, const RuleBase& rulebase);

/// A transaction the rule-base did not flag, handed on for frequency analysis.
struct MissReport {
    std::vector<FieldRecord> observations;
};

struct Interpretation {
    std::vector<ObjectHit> hits;
    std::vector<RuleTrigger> triggers;
    std::optional<MissReport> residual; // set iff triggers is empty
    std::vector<std::string> diagnostics;
};

Interpretation interpret(const std::vector<FieldRecord>& records, const RuleBase& rulebase);

} // namespace fasids
