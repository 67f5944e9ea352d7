#pragma once

// Exhaustive reference for rule triggering, used to check the interpreter.

#include "fasids/rule_engine.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

namespace test {

// Every valid witness for `rule` as a list of indices into `hits`.
inline void enumerate_witnesses(const fasids::Rule& rule, const std::vector<fasids::ObjectHit>& hits, std::size_t pos,
                                std::vector<std::size_t>& chosen, std::vector<std::vector<std::size_t>>& out) {
    if (pos == rule.objects.size()) {
        out.push_back(chosen);
        return;
    }
    for (std::size_t h = 0; h < hits.size(); ++h) {
        if (hits[h].object_number != rule.objects[pos]) continue;
        if (std::find(chosen.begin(), chosen.end(), h) != chosen.end()) continue;
        if (rule.in_order && !chosen.empty() && hits[chosen.back()].record_index >= hits[h].record_index) continue;
        chosen.push_back(h);
        enumerate_witnesses(rule, hits, pos + 1, chosen, out);
        chosen.pop_back();
    }
}

inline std::vector<std::vector<std::size_t>> all_witnesses(const fasids::Rule& rule,
                                                           const std::vector<fasids::ObjectHit>& hits) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> chosen;
    enumerate_witnesses(rule, hits, 0, chosen, out);
    return out;
}

inline std::set<int> oracle_triggers(const fasids::RuleBase& rb, const std::vector<fasids::ObjectHit>& hits) {
    std::set<int> out;
    for (const auto& [n, rule] : rb.rules()) {
        if (!all_witnesses(rule, hits).empty()) out.insert(n);
    }
    return out;
}

inline fasids::MatchObject dummy_object(int n) {
    fasids::MatchObject o;
    o.number = n;
    o.line = fasids::LineSelector::header;
    o.section = "X-Obj-" + std::to_string(n);
    o.feature = fasids::Feature::parameter;
    o.content = "v";
    return o;
}

// Rules 1-4 from the rule-base example: {1,3,4} ordered, {2,1,1,1,1}
// unordered, {3,6,4} ordered, {6} unordered.
inline fasids::RuleBase example_rules() {
    std::vector<fasids::MatchObject> objects;
    for (int n : {1, 2, 3, 4, 6}) objects.push_back(dummy_object(n));
    std::vector<fasids::Rule> rules{
        {1, {1, 3, 4}, true, "rule 1"},
        {2, {2, 1, 1, 1, 1}, false, "rule 2"},
        {3, {3, 6, 4}, true, "rule 3"},
        {4, {6}, false, "rule 4"},
    };
    return fasids::RuleBase::from_parts(std::move(objects), std::move(rules));
}

struct HitCase {
    const char* name;
    std::vector<fasids::ObjectHit> hits;
    std::set<int> expected;
};

inline fasids::ObjectHit H(int object, std::size_t record) {
    return {object, record, "v"};
}

inline std::vector<HitCase> example_hit_cases() {
    return {
        {"rule 1 in order", {H(1, 0), H(3, 1), H(4, 2)}, {1}},
        {"rule 1 reversed", {H(4, 0), H(3, 1), H(1, 2)}, {}},
        {"rule 1 missing last object", {H(1, 0), H(3, 1)}, {}},
        {"rule 1 with interleaved extra", {H(1, 0), H(4, 1), H(3, 2), H(4, 3)}, {1}},
        {"rule 2 four repeats then partner", {H(1, 0), H(1, 1), H(1, 2), H(1, 3), H(2, 4)}, {2}},
        {"rule 2 only three repeats", {H(2, 0), H(1, 1), H(1, 2), H(1, 3)}, {}},
        {"rule 2 partner first", {H(2, 0), H(1, 1), H(1, 2), H(1, 3), H(1, 4)}, {2}},
        {"rule 3 in order also fires rule 4", {H(3, 0), H(6, 1), H(4, 2)}, {3, 4}},
        {"rule 3 out of order", {H(6, 0), H(3, 1), H(4, 2)}, {4}},
        {"rule 3 same record is not after", {H(3, 0), H(6, 0), H(4, 1)}, {4}},
        {"rule 4 single object", {H(6, 5)}, {4}},
        {"empty stream", {}, {}},
    };
}

inline std::set<int> trigger_numbers(const std::vector<fasids::RuleTrigger>& ts) {
    std::set<int> out;
    for (const auto& t : ts) out.insert(t.rule_number);
    return out;
}

struct RandomInstance {
    fasids::RuleBase rb;
    std::vector<fasids::ObjectHit> hits;
};

// At most 5 objects and 8 records; hits sorted by (record, object).
inline RandomInstance random_instance(Rng& rng) {
    const int n_objects = rng.uniform_int(1, 5);
    const int n_records = rng.uniform_int(1, 8);
    const double density = rng.uniform(0.1, 0.7);
    std::vector<fasids::MatchObject> objects;
    for (int o = 1; o <= n_objects; ++o) objects.push_back(dummy_object(o));
    std::vector<fasids::Rule> rules;
    const int n_rules = rng.uniform_int(1, 4);
    for (int r = 1; r <= n_rules; ++r) {
        fasids::Rule rule;
        rule.number = r;
        const int len = rng.uniform_int(1, 5);
        for (int i = 0; i < len; ++i) rule.objects.push_back(rng.uniform_int(1, n_objects));
        rule.in_order = rng.coin();
        rule.message = "r" + std::to_string(r);
        rules.push_back(std::move(rule));
    }
    RandomInstance inst{fasids::RuleBase::from_parts(std::move(objects), std::move(rules)), {}};
    for (int rec = 0; rec < n_records; ++rec) {
        for (int o = 1; o <= n_objects; ++o) {
            if (rng.uniform() < density) inst.hits.push_back({o, static_cast<std::size_t>(rec), "v"});
        }
    }
    return inst;
}

} // namespace test
