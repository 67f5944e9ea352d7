#include "fasids/pipeline.hpp"

#include "fasids/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fasids {

namespace {

namespace fs = std::filesystem;

struct Labeled {
    std::string label;
    std::string incident;
};

struct Configuration {
    const char* name;
    StageToggles stages;
};

constexpr Configuration kConfigurations[] = {
    {"header-only", {false, false}},
    {"header+payload", {true, false}},
    {"header+payload+fuzzy", {true, true}},
};

} // namespace

CorpusReport corpus_report(const std::string& dir, const Detector& detector) {
    if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());

    CorpusReport report;
    // (configuration, label) -> incident ids / flagged incident ids
    std::map<std::pair<std::string, std::string>, std::pair<std::set<std::string>, std::set<std::string>>> tally;

    for (const auto& file : files) {
        const std::string name = fs::relative(file, dir).string();
        std::map<std::size_t, Labeled> labels; // capture line index -> label
        {
            std::ifstream in(file, std::ios::binary);
            std::string line;
            for (std::size_t i = 0; std::getline(in, line); ++i) {
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                auto j = nlohmann::json::parse(line, nullptr, false);
                if (j.is_discarded() || !j.is_object()) continue; // the capture reader reports these
                if (!j.contains("label") || !j["label"].is_string()) {
                    report.diagnostics.push_back(name + " line " + std::to_string(i + 1) + ": no label, not scored");
                    continue;
                }
                Labeled l;
                l.label = j["label"].get<std::string>();
                if (j.contains("incident") && !j["incident"].is_null()) {
                    l.incident = name + "#" + (j["incident"].is_string() ? j["incident"].get<std::string>()
                                                                          : j["incident"].dump());
                } else {
                    l.incident = name + ":" + std::to_string(i + 1);
                }
                labels.emplace(i, std::move(l));
            }
        }

        const Capture capture = read_capture(file, CaptureFormat::jsonl);
        for (const auto& d : capture.diagnostics) report.diagnostics.push_back(name + ": " + d);

        for (const auto& cfg : kConfigurations) {
            RunResult run = analyze_capture(capture, detector, cfg.stages);
            std::set<std::size_t> flagged_lines;
            for (const auto& a : run.alerts) {
                for (auto t : a.transactions) flagged_lines.insert(run.transactions.at(t).sequence);
            }
            for (const auto& [line, l] : labels) {
                auto& [all, hit] = tally[{cfg.name, l.label}];
                all.insert(l.incident);
                if (flagged_lines.count(line)) hit.insert(l.incident);
            }
        }
    }

    for (const auto& cfg : kConfigurations) {
        for (const auto& [key, sets] : tally) {
            if (key.first != cfg.name) continue;
            ReportRow row;
            row.configuration = key.first;
            row.label = key.second;
            row.incidents = sets.first.size();
            row.flagged = sets.second.size();
            row.rate = row.incidents ? static_cast<double>(row.flagged) / static_cast<double>(row.incidents) : 0.0;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

std::string report_csv(const CorpusReport& report) {
    std::ostringstream os;
    os << "configuration,label,incidents,flagged,rate\n";
    os.precision(4);
    for (const auto& r : report.rows) {
        os << r.configuration << ',' << r.label << ',' << r.incidents << ',' << r.flagged << ',' << r.rate << '\n';
    }
    return os.str();
}

} // namespace fasids
