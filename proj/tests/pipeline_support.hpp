#pragma once

#include "fasids/pipeline.hpp"
#include "test_support.hpp"

#include <fstream>
#include <sstream>

namespace test {

inline fasids::Detector shipped_detector() {
    fasids::RunConfig cfg;
    cfg.rules_path = source_path("rules/default.rules");
    cfg.signatures_path = source_path("signatures/table2.sig");
    cfg.fuzzy_path = source_path("fuzzy/default.yaml");
    return fasids::load_detector(cfg);
}

inline fasids::Capture corpus_capture(const std::string& name) {
    return fasids::read_capture(corpus_dir() + "/" + name + ".jsonl", fasids::CaptureFormat::jsonl);
}

// Every corpus file interleaved into one capture.
inline fasids::Capture mixed_capture() {
    std::stringstream all;
    for (const auto& f : corpus_files()) all << read_file(f);
    return fasids::read_capture_jsonl(all);
}

} // namespace test
