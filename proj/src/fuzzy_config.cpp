#include "fasids/fuzzy_config.hpp"

#include "fasids/error.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fasids {

namespace {

std::pair<double, double> read_pair(const YAML::Node& node, const std::string& what) {
    if (!node.IsSequence() || node.size() != 2) throw ConfigError(what + " must be a [min, max] pair");
    return {node[0].as<double>(), node[1].as<double>()};
}

Axis read_axis(const YAML::Node& node, const std::string& what) {
    auto s = node.as<std::string>();
    if (s == "x") return Axis::x;
    if (s == "t") return Axis::t;
    throw ConfigError(what + " must be x or t, got '" + s + "'");
}

LinguisticVariable read_variable(const YAML::Node& node, const std::string& name) {
    if (!node.IsSequence() || node.size() != kTerms) {
        throw ConfigError("variable " + name + " needs exactly 5 sets");
    }
    std::array<FuzzySet, kTerms> sets;
    for (std::size_t i = 0; i < kTerms; ++i) {
        const auto& s = node[i];
        if (!s.IsSequence() || s.size() != 5) {
            throw ConfigError("variable " + name + ": each set is [label, a, b, c, d]");
        }
        sets[i] = FuzzySet{s[0].as<std::string>(), s[1].as<double>(), s[2].as<double>(), s[3].as<double>(),
                           s[4].as<double>()};
    }
    return LinguisticVariable(name, std::move(sets));
}

MetricScope read_scope(const YAML::Node& node) {
    if (!node) return MetricScope::global;
    auto s = node.as<std::string>();
    if (s == "global") return MetricScope::global;
    if (s == "session") return MetricScope::session;
    throw ConfigError("metric scope must be global or session, got '" + s + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open fuzzy config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

FuzzyConfig FuzzyConfig::defaults() {
    FuzzyConfig cfg;
    cfg.metrics.push_back(MetricSpec::make("login_failure", R"(^HTTP/[0-9.]+ 40[13]\b|login failed)", {0.0, 50.0},
                                           {0.0, 300.0}, 300.0, MetricScope::session));
    cfg.metrics.push_back(MetricSpec::make("request_rate", R"(^[A-Z]+ \S+ HTTP/)", {0.0, 200.0}, {0.0, 60.0}, 60.0,
                                           MetricScope::session));
    return cfg;
}

FuzzyConfig parse_fuzzy_config(const std::string& text, const std::string& base_dir) {
    FuzzyConfig cfg = FuzzyConfig::defaults();
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("fuzzy config: ") + e.what());
    }
    if (root.IsNull()) return cfg;
    if (!root.IsMap()) throw ConfigError("fuzzy config must be a mapping");

    static const std::set<std::string> known{"resolution", "alert_min", "variables", "scale",
                                             "fams",       "metrics",   "events",    "edges"};
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (!known.count(key)) throw ConfigError("fuzzy config: unknown key '" + key + "'");
    }

    try {
        if (auto n = root["resolution"]) {
            auto r = n.as<long long>();
            if (r < 2) throw ConfigError("resolution must be at least 2");
            cfg.model.resolution = static_cast<std::size_t>(r);
        }
        if (auto n = root["alert_min"]) {
            auto c = consequent_from_string(n.as<std::string>());
            if (!c) throw ConfigError("unknown alert_min '" + n.as<std::string>() + "'");
            cfg.alert_min = *c;
        }
        if (auto vars = root["variables"]) {
            if (vars["x"]) cfg.model.x = read_variable(vars["x"], "x");
            if (vars["t"]) cfg.model.t = read_variable(vars["t"], "t");
        }
        if (auto scale = root["scale"]) {
            std::array<ConsequentScale::Interval, kConsequents> anchors;
            for (std::size_t k = 0; k < kConsequents; ++k) {
                auto label = std::string(to_string(static_cast<Consequent>(k)));
                if (!scale[label]) throw ConfigError("scale is missing " + label);
                anchors[k] = read_pair(scale[label], "scale " + label);
            }
            cfg.model.scale = ConsequentScale(anchors);
        }

        std::map<std::string, FamMatrix> fams{{"table3", FamMatrix::table3()}};
        if (auto n = root["fams"]) {
            for (const auto& kv : n) {
                std::filesystem::path p = kv.second.as<std::string>();
                if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
                fams[kv.first.as<std::string>()] = FamMatrix::load(p.string());
            }
        }

        if (auto n = root["metrics"]) {
            cfg.metrics.clear();
            for (const auto& m : n) {
                if (!m["name"] || !m["pattern"]) throw ConfigError("metric needs name and pattern");
                cfg.metrics.push_back(MetricSpec::make(
                    m["name"].as<std::string>(), m["pattern"].as<std::string>(),
                    m["x_bounds"] ? read_pair(m["x_bounds"], "x_bounds") : std::pair{0.0, 50.0},
                    m["t_bounds"] ? read_pair(m["t_bounds"], "t_bounds") : std::pair{0.0, 300.0},
                    m["window"] ? m["window"].as<double>() : 300.0, read_scope(m["scope"])));
            }
        }

        std::vector<std::string> metric_names;
        for (const auto& m : cfg.metrics) metric_names.push_back(m.name);
        if (std::set<std::string>(metric_names.begin(), metric_names.end()).size() != metric_names.size()) {
            throw ConfigError("duplicate metric name");
        }

        if (auto n = root["edges"]) {
            std::vector<FcmEdge> edges;
            std::vector<std::string> events;
            for (const auto& e : n) {
                if (!e["from"] || !e["to"]) throw ConfigError("edge needs from and to");
                FcmEdge edge;
                edge.from = e["from"].as<std::string>();
                edge.to = e["to"].as<std::string>();
                if (e["fam"] && e["rules"]) throw ConfigError("edge takes either fam or rules, not both");
                if (e["rules"]) {
                    RuleListRelation rel;
                    for (const auto& r : e["rules"]) {
                        rel.rules.push_back(parse_fuzzy_rule(r.as<std::string>(), cfg.model.x, cfg.model.t));
                    }
                    edge.relation = std::move(rel);
                } else {
                    FamRelation rel;
                    rel.fam = e["fam"] ? e["fam"].as<std::string>() : "table3";
                    if (e["rows"]) rel.rows = read_axis(e["rows"], "rows");
                    if (e["columns"]) rel.columns = read_axis(e["columns"], "columns");
                    edge.relation = std::move(rel);
                }
                if (std::find(events.begin(), events.end(), edge.to) == events.end()) events.push_back(edge.to);
                edges.push_back(std::move(edge));
            }
            if (auto ev = root["events"]) {
                events.clear();
                for (const auto& x : ev) events.push_back(x.as<std::string>());
            }
            cfg.graph = FcmGraph(metric_names, std::move(events), std::move(edges), std::move(fams));
        } else {
            // Default edges, rebuilt so that a replaced matrix file takes effect.
            cfg.graph = FcmGraph(metric_names, cfg.graph.events(), cfg.graph.edges(), std::move(fams));
        }
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("fuzzy config: ") + e.what());
    }
    return cfg;
}

FuzzyConfig load_fuzzy_config(const std::string& path) {
    auto dir = std::filesystem::path(path).parent_path();
    return parse_fuzzy_config(read_file(path), dir.empty() ? "." : dir.string());
}

} // namespace fasids
