#include "fasids/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>

namespace fasids {

namespace {

using Clock = std::chrono::steady_clock;

// keeps the timed work from being optimized away
volatile std::size_t g_sink = 0;

// Rule-bases in practice reference a bounded set of (field, pattern) checks;
// larger rule-bases mostly recombine them.
constexpr std::size_t kPredicatePool = 80;

struct PoolSection {
    LineSelector line;
    const char* section;
};

constexpr PoolSection kPoolSections[] = {
    {LineSelector::request_line, "Request-URI"},
    {LineSelector::request_line, "Method"},
    {LineSelector::header, "User-Agent"},
    {LineSelector::header, "Host"},
    {LineSelector::header, "Accept"},
    {LineSelector::header, "Cookie"},
    {LineSelector::header, "Referer"},
    {LineSelector::header, "Content-Length"},
};

MatchObject pool_object(std::size_t k) {
    const auto& ps = kPoolSections[k % std::size(kPoolSections)];
    MatchObject o;
    o.line = ps.line;
    o.section = ps.section;
    switch (k % 4) {
    case 0: {
        // always matches, so the rule stage has hits to correlate
        o.feature = Feature::regex;
        o.content = "^[^\\n]{0," + std::to_string(k + 1) + "}";
        break;
    }
    case 1:
        o.feature = Feature::regex;
        o.content = "tok" + std::to_string(k) + "[a-z]*x";
        break;
    case 2:
        o.feature = Feature::size;
        o.op = Operator::gt;
        o.content = std::to_string(k);
        o.numeric = k;
        break;
    default:
        o.feature = Feature::parameter;
        o.content = "value-" + std::to_string(k);
        break;
    }
    if (o.feature == Feature::regex) o.pattern = std::make_shared<const std::regex>(o.content, std::regex::ECMAScript);
    return o;
}

RuleBase synth_rulebase(std::size_t n) {
    std::vector<MatchObject> objects;
    std::vector<Rule> rules;
    for (std::size_t i = 0; i < n; ++i) {
        auto o = pool_object(i % kPredicatePool);
        o.number = static_cast<int>(i + 1);
        objects.push_back(std::move(o));
    }
    for (std::size_t i = 0; i < n; i += 2) {
        Rule r;
        r.number = static_cast<int>(i / 2 + 1);
        r.objects.push_back(static_cast<int>(i + 1));
        if (i + 1 < n) r.objects.push_back(static_cast<int>(i + 2));
        r.in_order = (i / 2) % 2 == 0;
        r.message = "bench rule " + std::to_string(r.number);
        rules.push_back(std::move(r));
    }
    return RuleBase::from_parts(std::move(objects), std::move(rules));
}

std::vector<std::vector<FieldRecord>> bench_transactions() {
    static const char* kPaths[] = {"/index.htm", "/search?q=shoes&page=2", "/login", "/static/app.js",
                                   "/api/v1/items/42", "/images/logo.png", "/cart?add=17", "/about"};
    static const char* kAgents[] = {"Mozilla/4.0 (compatible; MSIE 7.0; Windows NT 5.1; SV1)",
                                    "Mozilla/5.0 (X11; Linux x86_64) Gecko/20100101 Firefox/115.0", "curl/8.4.0"};
    std::vector<std::vector<FieldRecord>> out;
    for (std::size_t i = 0; i < 40; ++i) {
        std::string msg = std::string(i % 5 == 0 ? "POST " : "GET ") + kPaths[i % std::size(kPaths)] +
                          " HTTP/1.1\r\nHost: 192.168.0.51:4556\r\nUser-Agent: " + kAgents[i % std::size(kAgents)] +
                          "\r\nAccept: text/html, image/gif, */*\r\nAccept-Language: en-us\r\n";
        if (i % 3 == 0) msg += "Cookie: session=" + std::to_string(1000 + i) + "; theme=dark\r\n";
        if (i % 4 == 0) msg += "Referer: http://192.168.0.51:4556/index.htm\r\n";
        msg += "Connection: Keep-Alive\r\n";
        if (i % 5 == 0) msg += "Content-Length: 0\r\n";
        msg += "\r\n";
        CaptureEntry e;
        e.session_id = "bench";
        e.bytes = msg;
        auto d = dispatch(e);
        if (d.transaction) out.push_back(parse_header(*d.transaction).records);
    }
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

BenchRow summarize(std::size_t size, const std::vector<double>& per_trial) {
    BenchRow row;
    row.size = size;
    row.mean_us = std::accumulate(per_trial.begin(), per_trial.end(), 0.0) / static_cast<double>(per_trial.size());
    row.median_us = median(per_trial);
    return row;
}

template <class F>
double time_us(F&& f) {
    auto t0 = Clock::now();
    f();
    return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

} // namespace

std::vector<BenchRow> bench_objects(const std::vector<std::size_t>& object_counts, std::size_t trials) {
    trials = std::max<std::size_t>(trials, 1);
    const auto txns = bench_transactions();
    constexpr std::size_t kPasses = 10;
    std::vector<BenchRow> rows;
    for (auto n : object_counts) {
        const RuleBase rb = synth_rulebase(std::max<std::size_t>(n, 1));
        std::vector<double> per_trial;
        std::size_t sink = 0;
        for (std::size_t t = 0; t < trials; ++t) {
            double us = time_us([&] {
                for (std::size_t p = 0; p < kPasses; ++p) {
                    for (const auto& recs : txns) sink += interpret(recs, rb).triggers.size();
                }
            });
            per_trial.push_back(us / static_cast<double>(kPasses * txns.size()));
        }
        rows.push_back(summarize(n, per_trial));
        g_sink = sink;
    }
    return rows;
}

std::vector<BenchRow> bench_payload(const std::vector<std::size_t>& sizes, std::size_t trials) {
    trials = std::max<std::size_t>(trials, 1);
    const PayloadConfig cfg;
    std::vector<BenchRow> rows;
    for (auto size : sizes) {
        std::string html = "<!DOCTYPE html>\n<html><head><title>bench</title></head><body bgcolor=\"#ffffff\">\n";
        for (std::size_t i = 0; html.size() < size; ++i) {
            html += "<div class=\"c" + std::to_string(i) + "\"><a href=\"/p" + std::to_string(i) +
                    "\">link</a><img src=\"/i" + std::to_string(i) + ".png\" alt=\"x\">";
            if (i % 4 == 0) html += "<script>var a" + std::to_string(i) + " = " + std::to_string(i) + ";</script>";
            html += "some text</div>\n";
        }
        html.resize(std::min(html.size(), size));
        HttpTransaction txn;
        txn.kind = Direction::response;
        txn.start_line = "HTTP/1.1 200 OK";
        txn.headers = {{"Content-Type", "text/html"}};
        txn.body = std::move(html);

        std::vector<double> per_trial;
        std::size_t sink = 0;
        for (std::size_t t = 0; t < trials; ++t) {
            per_trial.push_back(time_us([&] { sink += analyze_payload(txn, cfg).events.size(); }));
        }
        rows.push_back(summarize(size, per_trial));
        g_sink = sink;
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows, std::string_view size_column) {
    std::ostringstream os;
    os << size_column << ",mean_us,median_us\n";
    os.precision(6);
    for (const auto& r : rows) os << r.size << ',' << r.mean_us << ',' << r.median_us << '\n';
    return os.str();
}

} // namespace fasids
