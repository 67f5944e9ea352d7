#include "fasids/fuzzy_ids.hpp"

#include "fasids/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fasids {

namespace {

using detail::iequals;
using detail::trim;

constexpr double kEps = 1e-12;

bool same(double a, double b) {
    return std::fabs(a - b) <= kEps;
}

} // namespace

std::size_t count_pattern(std::span<const TimedEvent> events, const std::regex& pattern, TimeWindow window) {
    if (!(window.length > 0.0)) throw ConfigError("window length must be positive");
    const double end = window.start + window.length;
    return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](const TimedEvent& e) {
        return e.timestamp >= window.start && e.timestamp < end && std::regex_search(e.text, pattern);
    }));
}

double normalize(double v, double min, double max) {
    if (!(min < max)) {
        throw ConfigError("normalization bounds need min < max, got [" + std::to_string(min) + ", " +
                          std::to_string(max) + "]");
    }
    return std::clamp((v - min) / (max - min), 0.0, 1.0);
}

void MetricWindow::validate() const {
    if (!(x_bounds.first < x_bounds.second)) throw ConfigError(metric + ": x bounds need min < max");
    if (!(t_bounds.first < t_bounds.second)) throw ConfigError(metric + ": t bounds need min < max");
    if (!(t_interval > 0.0)) throw ConfigError(metric + ": time interval must be positive");
}

double FuzzySet::membership(double u) const {
    if (u >= b && u <= c) return 1.0;
    if (u > a && u < b) return (u - a) / (b - a);
    if (u > c && u < d) return (d - u) / (d - c);
    return 0.0;
}

LinguisticVariable::LinguisticVariable(std::string name, std::array<FuzzySet, kTerms> sets)
    : name_(std::move(name)), sets_(std::move(sets)) {
    auto fail = [&](const std::string& why) { throw ConfigError("linguistic variable '" + name_ + "': " + why); };
    for (const auto& s : sets_) {
        if (!(s.a <= s.b && s.b <= s.c && s.c <= s.d)) fail("set '" + s.label + "' breakpoints not ordered");
        if (s.a < 0.0 || s.d > 1.0) fail("set '" + s.label + "' leaves [0,1]");
    }
    if (!same(sets_.front().a, 0.0) || !same(sets_.front().b, 0.0)) fail("first set must start at 0 with full membership");
    if (!same(sets_.back().c, 1.0) || !same(sets_.back().d, 1.0)) fail("last set must end at 1 with full membership");
    for (std::size_t k = 0; k + 1 < kTerms; ++k) {
        const auto& lo = sets_[k];
        const auto& hi = sets_[k + 1];
        if (!(lo.c < lo.d)) fail("set '" + lo.label + "' needs a falling ramp");
        if (!same(hi.a, lo.c) || !same(hi.b, lo.d)) {
            fail("sets '" + lo.label + "' and '" + hi.label + "' do not overlap as complementary ramps");
        }
    }
}

std::array<FuzzySet, kTerms> default_partition(const std::array<std::string, kTerms>& labels) {
    return {{
        {labels[0], 0.0, 0.0, 0.1, 0.25},
        {labels[1], 0.1, 0.25, 0.35, 0.5},
        {labels[2], 0.35, 0.5, 0.6, 0.75},
        {labels[3], 0.6, 0.75, 0.85, 0.95},
        {labels[4], 0.85, 0.95, 1.0, 1.0},
    }};
}

LinguisticVariable LinguisticVariable::count_default() {
    return LinguisticVariable("x", default_partition({"Very Small", "Small", "Medium", "High", "Very high"}));
}

LinguisticVariable LinguisticVariable::interval_default() {
    return LinguisticVariable("t", default_partition({"Very low", "Low", "Medium", "High", "Very high"}));
}

std::optional<std::size_t> LinguisticVariable::index_of(std::string_view label) const {
    for (std::size_t i = 0; i < kTerms; ++i) {
        if (iequals(sets_[i].label, label)) return i;
    }
    return std::nullopt;
}

Memberships fuzzify(double u, const LinguisticVariable& var) {
    u = std::clamp(u, 0.0, 1.0);
    Memberships mu{};
    for (std::size_t i = 0; i < kTerms; ++i) mu[i] = var.sets()[i].membership(u);
    return mu;
}

double apply_operator(FuzzyOp op, double a, std::optional<double> b) {
    switch (op) {
    case FuzzyOp::and_:
        if (!b) throw std::invalid_argument("AND needs two operands");
        return fuzzy_and(a, *b);
    case FuzzyOp::or_:
        if (!b) throw std::invalid_argument("OR needs two operands");
        return fuzzy_or(a, *b);
    case FuzzyOp::not_: return fuzzy_not(a);
    }
    return 0.0;
}

std::string_view to_string(Consequent c) {
    switch (c) {
    case Consequent::non_intrusive: return "Non-Intrusive";
    case Consequent::lp: return "LP";
    case Consequent::hp: return "HP";
    case Consequent::intrusive: return "Intrusive";
    }
    return "Non-Intrusive";
}

std::optional<Consequent> consequent_from_string(std::string_view s) {
    s = trim(s);
    for (auto c : {Consequent::non_intrusive, Consequent::lp, Consequent::hp, Consequent::intrusive}) {
        if (iequals(to_string(c), s)) return c;
    }
    return std::nullopt;
}

FamMatrix FamMatrix::table3() {
    using enum Consequent;
    return FamMatrix({"Very low", "Low", "Medium", "High", "Very high"},
                     {"Very Small", "Small", "Medium", "High", "Very high"},
                     {{
                         {lp, lp, non_intrusive, non_intrusive, non_intrusive},
                         {lp, lp, lp, non_intrusive, non_intrusive},
                         {hp, lp, lp, lp, non_intrusive},
                         {hp, hp, hp, lp, lp},
                         {intrusive, intrusive, hp, hp, hp},
                     }});
}

namespace {

std::vector<std::string> split_cells(std::string_view s) {
    std::vector<std::string> out;
    for (std::size_t pos = 0;;) {
        auto bar = s.find('|', pos);
        out.emplace_back(trim(s.substr(pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos)));
        if (bar == std::string_view::npos) break;
        pos = bar + 1;
    }
    return out;
}

} // namespace

FamMatrix FamMatrix::parse(std::string_view text) {
    std::array<std::string, kTerms> columns;
    std::array<std::string, kTerms> rows;
    Cells cells{};
    bool have_columns = false;
    std::size_t nrows = 0;
    std::size_t lineno = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        auto nl = text.find('\n', pos);
        auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        auto colon = line.find(':');
        if (colon == std::string_view::npos) throw ParseError(lineno, "expected '<label> : <cells>'");
        auto head = trim(line.substr(0, colon));
        auto fields = split_cells(line.substr(colon + 1));
        if (fields.size() != kTerms) {
            throw ParseError(lineno, "expected 5 '|'-separated entries, got " + std::to_string(fields.size()));
        }
        if (!have_columns) {
            if (!iequals(head, "columns")) throw ParseError(lineno, "first entry must be 'columns: ...'");
            std::copy(fields.begin(), fields.end(), columns.begin());
            have_columns = true;
            continue;
        }
        if (nrows == kTerms) throw ParseError(lineno, "more than 5 rows");
        rows[nrows] = std::string(head);
        for (std::size_t j = 0; j < kTerms; ++j) {
            auto c = consequent_from_string(fields[j]);
            if (!c) throw ParseError(lineno, "unknown consequent '" + fields[j] + "'");
            cells[nrows][j] = *c;
        }
        ++nrows;
    }
    if (!have_columns || nrows != kTerms) throw ConfigError("associative matrix needs a columns line and 5 rows");
    return FamMatrix(rows, columns, cells);
}

FamMatrix FamMatrix::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open associative matrix " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string FamMatrix::to_text() const {
    std::string out = "columns: ";
    for (std::size_t j = 0; j < kTerms; ++j) out.append(j ? " | " : "").append(column_labels_[j]);
    out += '\n';
    for (std::size_t i = 0; i < kTerms; ++i) {
        out.append(row_labels_[i]).append(" : ");
        for (std::size_t j = 0; j < kTerms; ++j) out.append(j ? " | " : "").append(to_string(cells_[i][j]));
        out += '\n';
    }
    return out;
}

LabelStrengths evaluate_fam(const Memberships& rows, const Memberships& columns, const FamMatrix& fam) {
    LabelStrengths out{};
    for (std::size_t i = 0; i < kTerms; ++i) {
        for (std::size_t j = 0; j < kTerms; ++j) {
            auto& slot = out[static_cast<std::size_t>(fam.at(i, j))];
            slot = fuzzy_or(slot, fuzzy_and(rows[i], columns[j]));
        }
    }
    return out;
}

ConsequentScale::ConsequentScale() : anchors_{{{0.0, 0.25}, {0.25, 0.5}, {0.5, 0.75}, {0.75, 1.0}}} {}

ConsequentScale::ConsequentScale(std::array<Interval, kConsequents> anchors) : anchors_(anchors) {
    if (!same(anchors_.front().first, 0.0) || !same(anchors_.back().second, 1.0)) {
        throw ConfigError("consequent intervals must cover [0,1]");
    }
    for (std::size_t k = 0; k < kConsequents; ++k) {
        if (!(anchors_[k].first < anchors_[k].second)) throw ConfigError("consequent interval is empty");
        if (k + 1 < kConsequents && !same(anchors_[k].second, anchors_[k + 1].first)) {
            throw ConfigError("consequent intervals must be contiguous and ordered");
        }
    }
}

double ConsequentScale::representative(Consequent c) const {
    const auto& [lo, hi] = anchor(c);
    return (lo + hi) / 2.0;
}

Consequent ConsequentScale::label_at(double u) const {
    for (std::size_t k = 0; k + 1 < kConsequents; ++k) {
        if (u < anchors_[k].second) return static_cast<Consequent>(k);
    }
    return Consequent::intrusive;
}

MomResult defuzzify_mom(const LabelStrengths& strengths, const ConsequentScale& scale, std::size_t resolution) {
    if (std::all_of(strengths.begin(), strengths.end(), [](double s) { return s <= 0.0; })) return {0.0, false};
    if (resolution < 2) throw ConfigError("defuzzification resolution must be at least 2");

    double best = -1.0;
    double sum = 0.0;
    std::size_t count = 0;
    const double step = 1.0 / static_cast<double>(resolution - 1);
    for (std::size_t k = 0; k < resolution; ++k) {
        const double u = static_cast<double>(k) * step;
        const double m = strengths[static_cast<std::size_t>(scale.label_at(u))];
        if (m > best) {
            best = m;
            sum = u;
            count = 1;
        } else if (m == best) {
            sum += u;
            ++count;
        }
    }
    return {sum / static_cast<double>(count), true};
}

Consequent classify(double score, const ConsequentScale& scale) {
    return scale.label_at(score);
}

double FuzzyExpr::evaluate(const Memberships& x, const Memberships& t) const {
    switch (kind) {
    case Kind::atom: return (axis == Axis::x ? x : t)[term];
    case Kind::not_: return fuzzy_not(operands.at(0).evaluate(x, t));
    case Kind::and_: {
        double v = 1.0;
        for (const auto& o : operands) v = fuzzy_and(v, o.evaluate(x, t));
        return v;
    }
    case Kind::or_: {
        double v = 0.0;
        for (const auto& o : operands) v = fuzzy_or(v, o.evaluate(x, t));
        return v;
    }
    }
    return 0.0;
}

namespace {

class RuleTextParser {
public:
    RuleTextParser(std::string_view text, const LinguisticVariable& x, const LinguisticVariable& t)
        : text_(text), x_(x), t_(t) {
        std::string cur;
        for (char c : text) {
            if (c == '(' || c == ')') {
                if (!cur.empty()) toks_.push_back(std::move(cur)), cur.clear();
                toks_.emplace_back(1, c);
            } else if (detail::is_space(c)) {
                if (!cur.empty()) toks_.push_back(std::move(cur)), cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) toks_.push_back(std::move(cur));
    }

    FuzzyRule parse() {
        expect("IF");
        FuzzyRule rule;
        rule.condition = parse_or();
        expect("THEN");
        // "THEN HP" or "THEN Intrusion is HP"
        std::vector<std::string> rest(toks_.begin() + static_cast<std::ptrdiff_t>(pos_), toks_.end());
        if (rest.size() >= 3 && iequals(rest[1], "is")) rest.erase(rest.begin(), rest.begin() + 2);
        std::string label;
        for (const auto& w : rest) label += (label.empty() ? "" : " ") + w;
        auto c = consequent_from_string(label);
        if (!c) fail("unknown consequent '" + label + "'");
        rule.consequent = *c;
        rule.text = std::string(trim(text_));
        return rule;
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError("fuzzy rule '" + std::string(trim(text_)) + "': " + why);
    }

    bool at(std::string_view kw) const { return pos_ < toks_.size() && iequals(toks_[pos_], kw); }

    void expect(std::string_view kw) {
        if (!at(kw)) fail("expected " + std::string(kw));
        ++pos_;
    }

    bool is_keyword(std::size_t i) const {
        const auto& s = toks_[i];
        return iequals(s, "AND") || iequals(s, "OR") || iequals(s, "THEN") || s == ")" || s == "(";
    }

    FuzzyExpr parse_or() {
        FuzzyExpr first = parse_and();
        if (!at("OR")) return first;
        FuzzyExpr node{FuzzyExpr::Kind::or_, Axis::x, 0, {std::move(first)}};
        while (at("OR")) {
            ++pos_;
            node.operands.push_back(parse_and());
        }
        return node;
    }

    FuzzyExpr parse_and() {
        FuzzyExpr first = parse_unary();
        if (!at("AND")) return first;
        FuzzyExpr node{FuzzyExpr::Kind::and_, Axis::x, 0, {std::move(first)}};
        while (at("AND")) {
            ++pos_;
            node.operands.push_back(parse_unary());
        }
        return node;
    }

    FuzzyExpr parse_unary() {
        if (at("NOT")) {
            ++pos_;
            return FuzzyExpr{FuzzyExpr::Kind::not_, Axis::x, 0, {parse_unary()}};
        }
        if (at("(")) {
            ++pos_;
            auto inner = parse_or();
            expect(")");
            return inner;
        }
        return parse_atom();
    }

    FuzzyExpr parse_atom() {
        if (pos_ >= toks_.size()) fail("unexpected end of condition");
        const std::string& var = toks_[pos_++];
        const LinguisticVariable* lv = nullptr;
        Axis axis = Axis::x;
        // y is accepted as another name for the count input
        if (iequals(var, "x") || iequals(var, "y") || iequals(var, x_.name())) {
            lv = &x_;
        } else if (iequals(var, "t") || iequals(var, t_.name())) {
            lv = &t_;
            axis = Axis::t;
        } else {
            fail("unknown variable '" + var + "'");
        }
        expect("is");
        std::string label;
        while (pos_ < toks_.size() && !is_keyword(pos_)) label += (label.empty() ? "" : " ") + toks_[pos_++];
        auto idx = lv->index_of(label);
        if (!idx) fail("'" + label + "' is not a term of " + var);
        return FuzzyExpr{FuzzyExpr::Kind::atom, axis, *idx, {}};
    }

    std::string_view text_;
    const LinguisticVariable& x_;
    const LinguisticVariable& t_;
    std::vector<std::string> toks_;
    std::size_t pos_ = 0;
};

} // namespace

FuzzyRule parse_fuzzy_rule(std::string_view text, const LinguisticVariable& x, const LinguisticVariable& t) {
    return RuleTextParser(text, x, t).parse();
}

FcmGraph::FcmGraph(std::vector<std::string> metrics, std::vector<std::string> events, std::vector<FcmEdge> edges,
                   std::map<std::string, FamMatrix> fams)
    : metrics_(std::move(metrics)), events_(std::move(events)), edges_(std::move(edges)), fams_(std::move(fams)) {
    std::set<std::string> metric_set(metrics_.begin(), metrics_.end());
    std::set<std::string> event_set(events_.begin(), events_.end());
    for (const auto& m : metrics_) {
        if (event_set.count(m)) throw ConfigError("'" + m + "' is both a metric and an event");
    }
    std::set<std::string> fed;
    for (const auto& e : edges_) {
        if (!metric_set.count(e.from)) throw ConfigError("edge source '" + e.from + "' is not an input metric");
        if (!event_set.count(e.to)) throw ConfigError("edge target '" + e.to + "' is not a suspicious event");
        if (const auto* fam = std::get_if<FamRelation>(&e.relation)) {
            if (!fams_.count(fam->fam)) throw ConfigError("edge uses unknown associative matrix '" + fam->fam + "'");
            if (fam->rows == fam->columns) throw ConfigError("associative matrix rows and columns need different inputs");
        } else if (std::get<RuleListRelation>(e.relation).rules.empty()) {
            throw ConfigError("edge " + e.from + " -> " + e.to + " has an empty rule list");
        }
        fed.insert(e.to);
    }
    for (const auto& ev : events_) {
        if (!fed.count(ev)) throw ConfigError("suspicious event '" + ev + "' has no incoming edge");
    }
}

FcmGraph FcmGraph::defaults() {
    std::vector<FcmEdge> edges{
        {"login_failure", "brute_force", FamRelation{"table3", Axis::x, Axis::t}},
        {"request_rate", "dos", FamRelation{"table3", Axis::x, Axis::t}},
    };
    return FcmGraph({"login_failure", "request_rate"}, {"brute_force", "dos"}, std::move(edges),
                    {{"table3", FamMatrix::table3()}});
}

FcmResult fcm_evaluate(const FcmGraph& graph, const std::map<std::string, MetricWindow>& inputs,
                       const FuzzyModel& model) {
    FcmResult result;
    for (const auto& event : graph.events()) {
        LabelStrengths strengths{};
        bool ok = true;
        for (const auto& edge : graph.edges()) {
            if (edge.to != event) continue;
            auto in = inputs.find(edge.from);
            if (in == inputs.end()) {
                result.diagnostics.push_back(event + ": input metric '" + edge.from + "' missing, skipped");
                ok = false;
                break;
            }
            const MetricWindow& w = in->second;
            try {
                w.validate();
            } catch (const ConfigError& e) {
                result.diagnostics.push_back(event + ": " + e.what());
                ok = false;
                break;
            }
            const auto mu_x =
                fuzzify(normalize(static_cast<double>(w.x_count), w.x_bounds.first, w.x_bounds.second), model.x);
            const auto mu_t = fuzzify(normalize(w.t_interval, w.t_bounds.first, w.t_bounds.second), model.t);

            LabelStrengths edge_out{};
            if (const auto* fam = std::get_if<FamRelation>(&edge.relation)) {
                edge_out = evaluate_fam(fam->rows == Axis::x ? mu_x : mu_t, fam->columns == Axis::x ? mu_x : mu_t,
                                        graph.fam(fam->fam));
            } else {
                for (const auto& rule : std::get<RuleListRelation>(edge.relation).rules) {
                    auto& slot = edge_out[static_cast<std::size_t>(rule.consequent)];
                    slot = fuzzy_or(slot, rule.condition.evaluate(mu_x, mu_t));
                }
            }
            for (std::size_t k = 0; k < kConsequents; ++k) strengths[k] = fuzzy_or(strengths[k], edge_out[k]);
        }
        if (!ok) continue;
        auto mom = defuzzify_mom(strengths, model.scale, model.resolution);
        result.events[event] = EventVerdict{mom.score, classify(mom.score, model.scale), mom.fired, strengths};
    }
    return result;
}

MetricSpec MetricSpec::make(std::string name, std::string pattern, std::pair<double, double> x_bounds,
                            std::pair<double, double> t_bounds, double window_seconds, MetricScope scope) {
    MetricSpec spec;
    spec.name = std::move(name);
    try {
        spec.pattern = std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
        throw ConfigError("metric '" + spec.name + "': pattern does not compile: " + e.what());
    }
    spec.pattern_source = std::move(pattern);
    if (!(x_bounds.first < x_bounds.second) || !(t_bounds.first < t_bounds.second)) {
        throw ConfigError("metric '" + spec.name + "': bounds need min < max");
    }
    if (!(window_seconds > 0.0)) throw ConfigError("metric '" + spec.name + "': window must be positive");
    spec.x_bounds = x_bounds;
    spec.t_bounds = t_bounds;
    spec.window_seconds = window_seconds;
    spec.scope = scope;
    return spec;
}

MetricAccumulator::MetricAccumulator(std::vector<MetricSpec> specs)
    : specs_(std::move(specs)), streams_(specs_.size()) {}

ClosedWindow MetricAccumulator::close(const MetricSpec& spec, const std::string& key, Stream& stream) const {
    ClosedWindow out;
    out.scope_key = key;
    out.first_timestamp = stream.log.front().timestamp;
    out.last_timestamp = stream.log.back().timestamp;
    out.refs = std::move(stream.refs);
    out.last_session = stream.last_session;
    out.window.metric = spec.name;
    out.window.x_count = count_pattern(stream.log, spec.pattern, TimeWindow{stream.start, spec.window_seconds});
    out.window.t_interval = stream.log.size() >= 2
                                ? std::max(out.last_timestamp - out.first_timestamp, kMinInterval)
                                : spec.window_seconds;
    out.window.x_bounds = spec.x_bounds;
    out.window.t_bounds = spec.t_bounds;
    stream = Stream{};
    return out;
}

std::vector<ClosedWindow> MetricAccumulator::observe(const TimedEvent& event, const std::string& session,
                                                     std::size_t ref) {
    std::vector<ClosedWindow> closed;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& spec = specs_[i];
        if (!std::regex_search(event.text, spec.pattern)) continue;
        const std::string key = spec.scope == MetricScope::global ? std::string() : session;
        Stream& stream = streams_[i][key];
        if (!stream.log.empty() && event.timestamp >= stream.start + spec.window_seconds) {
            closed.push_back(close(spec, key, stream));
        }
        if (stream.log.empty()) stream.start = event.timestamp;
        stream.log.push_back(event);
        stream.refs.push_back(ref);
        stream.last_session = session;
    }
    return closed;
}

std::vector<ClosedWindow> MetricAccumulator::flush() {
    std::vector<ClosedWindow> closed;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        for (auto& [key, stream] : streams_[i]) {
            if (!stream.log.empty()) closed.push_back(close(specs_[i], key, stream));
        }
        streams_[i].clear();
    }
    return closed;
}

} // namespace fasids
