#pragma once

#include <string>

#include <json.hpp>

#include "dml/config.hpp"

namespace dml {

/// Structured run report (schema_version 1). The results block is the part
/// covered by the determinism contract; timing is kept outside it.
struct Report {
    nlohmann::json doc;

    std::string results_block() const { return doc.at("results").dump(); }
    std::string dump(int indent = 2) const { return doc.dump(indent); }
};

/// Dispatches a validated config to the owning module and assembles the
/// report. Writes the report to config["out"] when present.
Report run(const RunConfig& config);

/// One-line human summary for standard output.
std::string summarize(const Report& report);

} // namespace dml
