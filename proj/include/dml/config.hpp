#pragma once

#include <string>

#include <json.hpp>

namespace dml {

/// Parsed and normalized run configuration. `doc` carries every key with
/// defaults filled in, so a report's config echo re-runs to the same results.
struct RunConfig {
    std::string command;
    nlohmann::json doc;

    std::uint64_t spec_hash() const;
};

/// Validates a raw config document: unknown keys are rejected, defaults are
/// filled, ranges are checked. `flag_overrides` (dotted paths, e.g.
/// "nuisance.folds=10") win over file values.
RunConfig parse_config(const nlohmann::json& raw);
RunConfig parse_config_file(const std::string& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides = {});
RunConfig parse_config_text(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Applies one dotted-path override (string value parsed as JSON when
/// possible, else kept as string) to a raw document.
void apply_override(nlohmann::json& doc, const std::string& path, const std::string& value);

} // namespace dml
