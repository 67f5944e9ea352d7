#pragma once

// Configuration for the fuzzy stage: linguistic variables, consequent scale,
// associative matrices, the cognitive map and the metrics that feed it.

#include "fasids/fuzzy_ids.hpp"

#include <string>
#include <vector>

namespace fasids {

struct FuzzyConfig {
    FuzzyModel model;
    FcmGraph graph = FcmGraph::defaults();
    std::vector<MetricSpec> metrics;
    Consequent alert_min = Consequent::hp; // lowest verdict reported as an alert

    /// login_failure (401/403 or "login failed" per session, 300 s) and
    /// request_rate (requests per session, 60 s) over the default graph.
    static FuzzyConfig defaults();
};

/// YAML text; relative matrix file paths resolve against `base_dir`.
/// Keys left out keep their defaults. Throws ConfigError.
FuzzyConfig parse_fuzzy_config(const std::string& text, const std::string& base_dir = ".");
FuzzyConfig load_fuzzy_config(const std::string& path);

} // namespace fasids
