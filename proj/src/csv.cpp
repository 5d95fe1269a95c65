#include "dml/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dml/errors.hpp"

namespace dml {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto first = field.find_first_not_of(" \t\r");
        const auto last = field.find_last_not_of(" \t\r");
        out.push_back(first == std::string::npos ? "" : field.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw IngestionError("load_csv: missing column \"" + name + "\"");
}

double parse_real(const std::string& cell, std::size_t row, const std::string& column) {
    if (cell.empty())
        throw IngestionError("load_csv: blank cell in column \"" + column + "\" at data row " +
                             std::to_string(row));
    std::size_t used = 0;
    double value;
    try {
        value = std::stod(cell, &used);
    } catch (const std::exception&) {
        throw IngestionError("load_csv: non-numeric cell \"" + cell + "\" in column \"" + column +
                             "\" at data row " + std::to_string(row));
    }
    if (used != cell.size() || !std::isfinite(value))
        throw IngestionError("load_csv: non-numeric cell \"" + cell + "\" in column \"" + column +
                             "\" at data row " + std::to_string(row));
    return value;
}

} // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IngestionError("load_csv: cannot open \"" + path + "\"");
    if (schema.outcome_columns.empty())
        throw ConfigError("load_csv: schema needs at least one outcome column");
    if (schema.treatment_column.empty())
        throw ConfigError("load_csv: schema needs a treatment column");

    std::string line;
    if (!std::getline(in, line)) throw IngestionError("load_csv: empty file \"" + path + "\"");
    const auto header = split_line(line);

    std::vector<std::size_t> outcome_idx;
    for (const auto& name : schema.outcome_columns) outcome_idx.push_back(column_index(header, name));
    const std::size_t treat_idx = column_index(header, schema.treatment_column);
    std::vector<std::size_t> cov_idx;
    std::vector<bool> cov_categorical;
    for (const auto& name : schema.covariate_columns) {
        cov_idx.push_back(column_index(header, name));
        cov_categorical.push_back(std::find(schema.categorical_covariates.begin(),
                                            schema.categorical_covariates.end(),
                                            name) != schema.categorical_covariates.end());
    }
    std::optional<std::size_t> weight_idx;
    if (schema.weight_column) weight_idx = column_index(header, *schema.weight_column);

    std::vector<std::vector<std::string>> rows;
    std::size_t row_number = 0;
    while (std::getline(in, line)) {
        ++row_number;
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != header.size())
            throw IngestionError("load_csv: data row " + std::to_string(row_number) + " has " +
                                 std::to_string(fields.size()) + " fields, header has " +
                                 std::to_string(header.size()));
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw IngestionError("load_csv: no data rows in \"" + path + "\"");
    const std::size_t n = rows.size();

    // Treatment labels: declared set, or inferred in sorted order.
    std::vector<std::string> labels = schema.labels;
    if (labels.empty()) {
        for (const auto& fields : rows) {
            const auto& label = fields[treat_idx];
            if (std::find(labels.begin(), labels.end(), label) == labels.end())
                labels.push_back(label);
        }
        std::sort(labels.begin(), labels.end());
    }
    std::vector<int> treatment(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& label = rows[i][treat_idx];
        const auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end())
            throw IngestionError("load_csv: treatment label \"" + label + "\" at data row " +
                                 std::to_string(i + 1) + " is not in the declared label set");
        treatment[i] = static_cast<int>(it - labels.begin());
    }

    // Covariates: numeric pass-through, or one-hot expansion with the first
    // observed level dropped.
    std::vector<std::vector<double>> cov_columns;
    std::vector<std::string> cov_names;
    for (std::size_t c = 0; c < cov_idx.size(); ++c) {
        if (!cov_categorical[c]) {
            std::vector<double> col(n);
            for (std::size_t i = 0; i < n; ++i)
                col[i] = parse_real(rows[i][cov_idx[c]], i + 1, schema.covariate_columns[c]);
            cov_columns.push_back(std::move(col));
            cov_names.push_back(schema.covariate_columns[c]);
        } else {
            std::vector<std::string> levels;
            for (std::size_t i = 0; i < n; ++i) {
                const auto& cell = rows[i][cov_idx[c]];
                if (cell.empty())
                    throw IngestionError("load_csv: blank cell in column \"" +
                                         schema.covariate_columns[c] + "\" at data row " +
                                         std::to_string(i + 1));
                if (std::find(levels.begin(), levels.end(), cell) == levels.end())
                    levels.push_back(cell);
            }
            std::sort(levels.begin(), levels.end());
            for (std::size_t lev = 1; lev < levels.size(); ++lev) {
                std::vector<double> col(n);
                for (std::size_t i = 0; i < n; ++i)
                    col[i] = rows[i][cov_idx[c]] == levels[lev] ? 1.0 : 0.0;
                cov_columns.push_back(std::move(col));
                cov_names.push_back(schema.covariate_columns[c] + "=" + levels[lev]);
            }
        }
    }

    Eigen::MatrixXd outcomes(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(outcome_idx.size()));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < outcome_idx.size(); ++j)
            outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                parse_real(rows[i][outcome_idx[j]], i + 1, schema.outcome_columns[j]);

    Eigen::MatrixXd covariates(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cov_columns.size()));
    for (std::size_t j = 0; j < cov_columns.size(); ++j)
        for (std::size_t i = 0; i < n; ++i)
            covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov_columns[j][i];

    Eigen::VectorXd weights;
    if (weight_idx) {
        weights.resize(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            weights(static_cast<Eigen::Index>(i)) = parse_real(rows[i][*weight_idx], i + 1, *schema.weight_column);
    }

    return Dataset(std::move(outcomes), std::move(treatment), std::move(labels),
                   std::move(covariates), std::move(weights));
}

} // namespace dml
