#pragma once

// Fuzzy detection of frequency-style misuse (brute force, DoS) among the
// transactions the rule-base let through. Counts are taken per time window,
// normalized onto [0,1], fuzzified over five trapezoidal sets, combined
// through a fuzzy associative matrix inside a small cognitive map, and
// defuzzified by mean of maxima.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace fasids {

// ---------------------------------------------------------------------------
// Crisp inputs

struct TimedEvent {
    double timestamp = 0.0;
    std::string text;
};

struct TimeWindow {
    double start = 0.0;
    double length = 0.0; // > 0; the window is [start, start + length)
};

/// Number of events whose text matches `pattern` and whose timestamp lies
/// in the half-open window.
std::size_t count_pattern(std::span<const TimedEvent> events, const std::regex& pattern, TimeWindow window);

/// (v - min) / (max - min), clamped to [0,1]. Throws ConfigError if min >= max.
double normalize(double v, double min, double max);

struct MetricWindow {
    std::string metric;
    std::uint64_t x_count = 0;
    double t_interval = 1.0; // seconds, > 0
    std::pair<double, double> x_bounds{0.0, 1.0};
    std::pair<double, double> t_bounds{0.0, 1.0};

    void validate() const;
};

// ---------------------------------------------------------------------------
// Fuzzy sets

struct FuzzySet {
    std::string label;
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0; // a <= b <= c <= d

    double membership(double u) const;
};

inline constexpr std::size_t kTerms = 5;
using Memberships = std::array<double, kTerms>;

class LinguisticVariable {
public:
    LinguisticVariable() = default;

    /// Throws ConfigError unless the five sets are ordered low to high and
    /// form a Ruspini partition of [0,1] (adjacent ramps complementary).
    LinguisticVariable(std::string name, std::array<FuzzySet, kTerms> sets);

    /// Failure-count variable: Very Small .. Very high.
    static LinguisticVariable count_default();
    /// Time-interval variable: Very low .. Very high.
    static LinguisticVariable interval_default();

    const std::string& name() const { return name_; }
    const std::array<FuzzySet, kTerms>& sets() const { return sets_; }
    std::optional<std::size_t> index_of(std::string_view label) const;

private:
    std::string name_;
    std::array<FuzzySet, kTerms> sets_;
};

/// Default breakpoints shared by both variables.
std::array<FuzzySet, kTerms> default_partition(const std::array<std::string, kTerms>& labels);

Memberships fuzzify(double u, const LinguisticVariable& var);

// ---------------------------------------------------------------------------
// Operators

enum class FuzzyOp { and_, or_, not_ };

inline double fuzzy_and(double a, double b) { return a < b ? a : b; }
inline double fuzzy_or(double a, double b) { return a > b ? a : b; }
inline double fuzzy_not(double a) { return 1.0 - a; }

/// Binary operators require `b`; NOT ignores it.
double apply_operator(FuzzyOp op, double a, std::optional<double> b = std::nullopt);

// ---------------------------------------------------------------------------
// Consequents, associative matrix, defuzzification

enum class Consequent { non_intrusive, lp, hp, intrusive };
inline constexpr std::size_t kConsequents = 4;

std::string_view to_string(Consequent c);
std::optional<Consequent> consequent_from_string(std::string_view s);

using LabelStrengths = std::array<double, kConsequents>;

class FamMatrix {
public:
    using Cells = std::array<std::array<Consequent, kTerms>, kTerms>;

    FamMatrix() = default;
    FamMatrix(std::array<std::string, kTerms> row_labels, std::array<std::string, kTerms> column_labels, Cells cells)
        : row_labels_(std::move(row_labels)), column_labels_(std::move(column_labels)), cells_(cells) {}

    /// Brute force / DoS matrix, rows Very low..Very high, columns
    /// Very Small..Very high.
    static FamMatrix table3();

    /// Text form:
    ///   columns: <label> | <label> | ... (5)
    ///   <row label> : <cell> | <cell> | ... (5)   (5 rows)
    static FamMatrix parse(std::string_view text);
    static FamMatrix load(const std::string& path);

    Consequent at(std::size_t row, std::size_t column) const { return cells_[row][column]; }
    const std::array<std::string, kTerms>& row_labels() const { return row_labels_; }
    const std::array<std::string, kTerms>& column_labels() const { return column_labels_; }

    std::string to_text() const;

private:
    std::array<std::string, kTerms> row_labels_;
    std::array<std::string, kTerms> column_labels_;
    Cells cells_{};
};

/// Each cell fires at min(row[i], column[j]); a label's strength is the max
/// over the cells that map to it.
LabelStrengths evaluate_fam(const Memberships& rows, const Memberships& columns, const FamMatrix& fam);

class ConsequentScale {
public:
    using Interval = std::pair<double, double>;

    /// Non-Intrusive [0,.25), LP [.25,.5), HP [.5,.75), Intrusive [.75,1].
    ConsequentScale();
    /// Throws ConfigError unless the intervals tile [0,1] in label order.
    explicit ConsequentScale(std::array<Interval, kConsequents> anchors);

    const Interval& anchor(Consequent c) const { return anchors_[static_cast<std::size_t>(c)]; }
    double representative(Consequent c) const;
    /// Label whose interval contains u; intervals are lower-inclusive and the
    /// last one is closed at 1.
    Consequent label_at(double u) const;

private:
    std::array<Interval, kConsequents> anchors_;
};

inline constexpr std::size_t kDefaultResolution = 1001;

struct MomResult {
    double score = 0.0;
    bool fired = false; // false when every strength was zero
};

MomResult defuzzify_mom(const LabelStrengths& strengths, const ConsequentScale& scale,
                        std::size_t resolution = kDefaultResolution);

Consequent classify(double score, const ConsequentScale& scale);

// ---------------------------------------------------------------------------
// Cognitive map

enum class Axis { x, t };

/// Condition tree over "<axis> is <label>" atoms combined with AND/OR/NOT.
struct FuzzyExpr {
    enum class Kind { atom, and_, or_, not_ };
    Kind kind = Kind::atom;
    Axis axis = Axis::x;
    std::size_t term = 0;
    std::vector<FuzzyExpr> operands;

    double evaluate(const Memberships& x, const Memberships& t) const;
};

struct FuzzyRule {
    FuzzyExpr condition;
    Consequent consequent = Consequent::non_intrusive;
    std::string text;
};

/// Parses `IF <cond> THEN <consequent>`; labels resolve against the two
/// variables (case-insensitive). Throws ConfigError.
FuzzyRule parse_fuzzy_rule(std::string_view text, const LinguisticVariable& x, const LinguisticVariable& t);

struct FamRelation {
    std::string fam;      // name in FcmGraph::fams
    Axis rows = Axis::x;  // which input indexes the matrix rows
    Axis columns = Axis::t;
};

struct RuleListRelation {
    std::vector<FuzzyRule> rules;
};

struct FcmEdge {
    std::string from; // input metric
    std::string to;   // suspicious-event concept
    std::variant<FamRelation, RuleListRelation> relation;
};

struct FuzzyModel {
    LinguisticVariable x = LinguisticVariable::count_default();
    LinguisticVariable t = LinguisticVariable::interval_default();
    ConsequentScale scale;
    std::size_t resolution = kDefaultResolution;
};

class FcmGraph {
public:
    FcmGraph() = default;

    /// Throws ConfigError when an event has no incoming edge, an edge leaves
    /// something other than a metric, or a FAM reference is unknown.
    FcmGraph(std::vector<std::string> metrics, std::vector<std::string> events, std::vector<FcmEdge> edges,
             std::map<std::string, FamMatrix> fams);

    /// login_failure -> brute_force and request_rate -> dos, both through
    /// the brute force / DoS matrix with failure count on the rows.
    static FcmGraph defaults();

    const std::vector<std::string>& metrics() const { return metrics_; }
    const std::vector<std::string>& events() const { return events_; }
    const std::vector<FcmEdge>& edges() const { return edges_; }
    const FamMatrix& fam(const std::string& name) const { return fams_.at(name); }

private:
    std::vector<std::string> metrics_;
    std::vector<std::string> events_;
    std::vector<FcmEdge> edges_;
    std::map<std::string, FamMatrix> fams_;
};

struct EventVerdict {
    double score = 0.0;
    Consequent verdict = Consequent::non_intrusive;
    bool fired = false;
    LabelStrengths strengths{};
};

struct FcmResult {
    std::map<std::string, EventVerdict> events;
    std::vector<std::string> diagnostics;
};

/// One forward pass: normalize and fuzzify each input window, evaluate every
/// edge, OR the edge outputs per event, defuzzify and classify.
FcmResult fcm_evaluate(const FcmGraph& graph, const std::map<std::string, MetricWindow>& inputs,
                       const FuzzyModel& model);

// ---------------------------------------------------------------------------
// Window accumulation

enum class MetricScope { global, session };

struct MetricSpec {
    std::string name;
    std::string pattern_source;
    std::regex pattern;
    std::pair<double, double> x_bounds{0.0, 50.0};
    std::pair<double, double> t_bounds{0.0, 300.0};
    double window_seconds = 300.0;
    MetricScope scope = MetricScope::global;

    static MetricSpec make(std::string name, std::string pattern, std::pair<double, double> x_bounds,
                           std::pair<double, double> t_bounds, double window_seconds, MetricScope scope);
};

struct ClosedWindow {
    MetricWindow window;
    std::string scope_key;
    double first_timestamp = 0.0;
    double last_timestamp = 0.0;
    std::vector<std::size_t> refs; // caller-supplied ids of the counted events
    std::string last_session;
};

/// Tumbling windows per (metric, scope key). A window opens at the first
/// matching event and closes when a matching event falls past its end, or
/// on flush. x is the pattern count inside the window; t is the span from
/// first to last counted event, or the window length when fewer than two
/// events were counted.
class MetricAccumulator {
public:
    explicit MetricAccumulator(std::vector<MetricSpec> specs);

    std::vector<ClosedWindow> observe(const TimedEvent& event, const std::string& session, std::size_t ref);
    std::vector<ClosedWindow> flush();

    const std::vector<MetricSpec>& specs() const { return specs_; }

private:
    struct Stream {
        double start = 0.0;
        std::vector<TimedEvent> log;
        std::vector<std::size_t> refs;
        std::string last_session;
    };

    ClosedWindow close(const MetricSpec& spec, const std::string& key, Stream& stream) const;

    std::vector<MetricSpec> specs_;
    std::vector<std::map<std::string, Stream>> streams_; // per spec
};

/// Smallest observation span; all events at one instant still yield t > 0.
inline constexpr double kMinInterval = 1e-3;

} // namespace fasids
