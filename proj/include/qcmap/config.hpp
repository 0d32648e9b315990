#pragma once

#include <string>

#include "qcmap/trainer.hpp"

namespace qcmap {

// A training run as described by one JSON document: the trainer configuration
// plus the data files it reads.
struct RunSpec {
    TrainConfig config;
    std::string landmarks;  // landmark file
    std::string source;     // source volume
    std::string target;     // target volume
};

// Missing fields take defaults; unknown fields and wrong types are config
// errors naming the offending field. A run manifest is accepted too (its
// "config" member is used).
RunSpec parse_run_spec(const std::string& json_text);
// Full document with every default materialized.
std::string dump_run_spec(const RunSpec& spec, int indent = 2);

} // namespace qcmap
