#include "fasids/rule_engine.hpp"

#include "text_util.hpp"

#include <algorithm>
#include <map>

namespace fasids {

bool selects(LineSelector selector, MessageLine line) {
    switch (selector) {
    case LineSelector::start_line: return line == MessageLine::request_line || line == MessageLine::status_line;
    case LineSelector::request_line: return line == MessageLine::request_line;
    case LineSelector::status_line: return line == MessageLine::status_line;
    case LineSelector::header:
        return line == MessageLine::generic_header || line == MessageLine::request_header ||
               line == MessageLine::response_header || line == MessageLine::entity_header;
    case LineSelector::generic_header: return line == MessageLine::generic_header;
    case LineSelector::request_header: return line == MessageLine::request_header;
    case LineSelector::response_header: return line == MessageLine::response_header;
    case LineSelector::entity_header: return line == MessageLine::entity_header;
    case LineSelector::body: return line == MessageLine::body;
    }
    return false;
}

namespace {

bool compare(std::uint64_t lhs, Operator op, std::uint64_t rhs) {
    switch (op) {
    case Operator::eq: return lhs == rhs;
    case Operator::gt: return lhs > rhs;
    case Operator::lt: return lhs < rhs;
    }
    return false;
}

} // namespace

struct RuleMatcher {
    static std::vector<ObjectHit> run(const std::vector<FieldRecord>& records, const RuleBase& rb,
                                      std::vector<std::string>* diagnostics) {
        std::vector<ObjectHit> hits;
        const auto& predicates = rb.predicates_;
        std::vector<char> disabled(predicates.size(), 0);
        std::vector<std::uint64_t> occurrences(predicates.size(), 0);
        std::vector<std::size_t> last_seen(predicates.size(), records.size());

        auto emit = [&](std::size_t pred, std::size_t index, const std::string& value) {
            for (int n : predicates[pred].object_numbers) hits.push_back(ObjectHit{n, index, value});
        };

        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& rec = records[i];
            auto slot = rb.by_section_.find(detail::to_lower(rec.section));
            if (slot == rb.by_section_.end()) continue;
            for (std::size_t pred : slot->second) {
                if (disabled[pred]) continue;
                const MatchObject& obj = rb.objects_.at(predicates[pred].prototype);
                if (!selects(obj.line, rec.message_line)) continue;
                switch (obj.feature) {
                case Feature::parameter:
                    if (rec.value == obj.content) emit(pred, i, rec.value);
                    break;
                case Feature::size:
                    if (compare(rec.value.size(), obj.op, obj.numeric)) emit(pred, i, rec.value);
                    break;
                case Feature::regex:
                    try {
                        if (std::regex_search(rec.value, *obj.pattern)) emit(pred, i, rec.value);
                    } catch (const std::regex_error& e) {
                        disabled[pred] = 1;
                        if (diagnostics) {
                            diagnostics->push_back("object " + std::to_string(obj.number) +
                                                   ": regex failed at record " + std::to_string(i) + " (" + e.what() +
                                                   "), disabled for this transaction");
                        }
                    }
                    break;
                case Feature::occurrence:
                    ++occurrences[pred];
                    last_seen[pred] = i;
                    break;
                }
            }
        }

        for (std::size_t pred = 0; pred < predicates.size(); ++pred) {
            const MatchObject& obj = rb.objects_.at(predicates[pred].prototype);
            if (obj.feature != Feature::occurrence) continue;
            if (compare(occurrences[pred], obj.op, obj.numeric)) {
                emit(pred, last_seen[pred], std::to_string(occurrences[pred]));
            }
        }

        std::stable_sort(hits.begin(), hits.end(), [](const ObjectHit& a, const ObjectHit& b) {
            if (a.record_index != b.record_index) return a.record_index < b.record_index;
            return a.object_number < b.object_number;
        });
        return hits;
    }
};

std::vector<ObjectHit> match_objects(const std::vector<FieldRecord>& records, const RuleBase& rulebase,
                                     std::vector<std::string>* diagnostics) {
    return RuleMatcher::run(records, rulebase, diagnostics);
}

std::optional<std::vector<ObjectHit>> find_witness(const Rule& rule, const std::vector<ObjectHit>& hits) {
    std::vector<ObjectHit> witness;
    witness.reserve(rule.objects.size());

    if (rule.in_order) {
        std::size_t pos = 0;
        std::optional<std::size_t> last_record;
        for (int wanted : rule.objects) {
            while (pos < hits.size() &&
                   (hits[pos].object_number != wanted || (last_record && hits[pos].record_index <= *last_record))) {
                ++pos;
            }
            if (pos == hits.size()) return std::nullopt;
            witness.push_back(hits[pos]);
            last_record = hits[pos].record_index;
            ++pos;
        }
        return witness;
    }

    std::map<int, std::size_t> needed;
    for (int n : rule.objects) ++needed[n];
    std::vector<std::size_t> taken;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        auto it = needed.find(hits[i].object_number);
        if (it == needed.end() || it->second == 0) continue;
        --it->second;
        taken.push_back(i);
    }
    if (std::any_of(needed.begin(), needed.end(), [](const auto& kv) { return kv.second != 0; })) {
        return std::nullopt;
    }
    for (auto i : taken) witness.push_back(hits[i]);
    return witness;
}

std::vector<RuleTrigger> evaluate_rules(const std::vector<ObjectHit>& hits, const RuleBase& rulebase) {
    std::vector<RuleTrigger> triggers;
    for (const auto& [number, rule] : rulebase.rules()) {
        if (auto witness = find_witness(rule, hits)) {
            triggers.push_back(RuleTrigger{number, std::move(*witness), rule.message});
        }
    }
    return triggers;
}

Interpretation interpret(const std::vector<FieldRecord>& records, const RuleBase& rulebase) {
    Interpretation out;
    out.hits = match_objects(records, rulebase, &out.diagnostics);
    out.triggers = evaluate_rules(out.hits, rulebase);
    if (out.triggers.empty()) out.residual = MissReport{records};
    return out;
}

} // namespace fasids
