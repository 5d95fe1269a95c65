#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dml/data.hpp"

namespace dml {

/// Column bindings for load_csv. Names refer to the header row.
/// Covariates listed in `categorical_covariates` are one-hot expanded
/// (first observed level dropped); all other cells must parse as finite reals.
struct CsvSchema {
    std::vector<std::string> outcome_columns;
    std::string treatment_column;
    std::vector<std::string> covariate_columns;
    std::vector<std::string> categorical_covariates;
    std::optional<std::string> weight_column;
    /// Declared treatment label set; when empty, labels are inferred from the
    /// file (sorted order).
    std::vector<std::string> labels;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);

} // namespace dml
