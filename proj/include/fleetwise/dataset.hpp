#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fleetwise {

/// Row-major numeric table consumed by the training engines.
struct Table {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;  // rows * cols

    std::span<const double> row(std::size_t r) const {
        return {v.data() + r * cols, cols};
    }
    std::span<double> row(std::size_t r) { return {v.data() + r * cols, cols}; }
    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

/// Column-labeled table of 10-minute monitoring statistics. DEM label
/// columns are optional; timestamps (epoch seconds) are kept when present.
class Dataset {
public:
    std::string turbine_id;
    std::vector<std::int64_t> timestamps;  // empty when absent

    std::size_t rows() const { return n_rows_; }
    std::size_t n_columns() const { return names_.size(); }
    const std::vector<std::string>& column_names() const { return names_; }

    bool has_column(const std::string& name) const;
    const std::vector<double>& column(const std::string& name) const;
    std::vector<double>& column(const std::string& name);

    /// Append a column; all columns must keep equal length.
    void add_column(const std::string& name, std::vector<double> values);
    void set_rows(std::size_t n) { n_rows_ = n; }

    bool has_labels() const;

    /// Extract a row-major table for the given columns, in order.
    Table to_table(const std::vector<std::string>& cols) const;

    /// Keep only the listed rows (in the given order).
    Dataset select_rows(std::span<const std::size_t> indices) const;

private:
    std::size_t index_of(const std::string& name) const;

    std::vector<std::string> names_;
    std::vector<std::vector<double>> columns_;
    std::size_t n_rows_ = 0;
};

// Table 1 schema ------------------------------------------------------------

const std::vector<std::string>& scada_columns();
const std::vector<std::string>& wave_columns();
std::vector<std::string> accel_columns(int lat_level);  // 17, 38 or 77
const std::vector<std::string>& label_columns();        // DEM_tl, DEM_tn
std::vector<std::string> all_input_columns();

// CSV -----------------------------------------------------------------------

struct CsvLoadResult {
    Dataset data;
    std::size_t dropped_rows = 0;  // rows removed because of gaps
};

/// Load a monitoring CSV. `required` columns must be present; rows with
/// empty or non-finite cells are dropped and counted.
CsvLoadResult load_csv(const std::string& path,
                       const std::vector<std::string>& required = {});

void save_csv(const Dataset& ds, const std::string& path);

// Scaling ---------------------------------------------------------------------

/// Per-column z-score statistics fitted on a training set. Constant columns
/// are flagged and passed through unchanged.
struct Scaler {
    std::vector<std::string> columns;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> constant;

    std::size_t index_of(const std::string& name) const;
};

Scaler fit_scaler(const Dataset& train, const std::vector<std::string>& columns);
Dataset apply_scaler(const Scaler& scaler, const Dataset& ds);
Table apply_scaler(const Scaler& scaler, const Table& t,
                   const std::vector<std::string>& cols);

void save_scaler(const Scaler& scaler, const std::string& path);
Scaler load_scaler(const std::string& path);

// Splitting -------------------------------------------------------------------

/// Random, disjoint, exhaustive, seed-deterministic split.
std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions,
                           std::uint64_t seed);

// Input configurations ----------------------------------------------------------

/// One of the twelve enumerated monitoring-signal combinations.
/// SCADA is always included.
struct InputConfig {
    int id = 7;
    bool wave = false;
    bool acc017 = false;
    bool acc038 = false;
    bool acc077 = false;

    static InputConfig from_id(int id);
    std::vector<std::string> input_columns() const;
    std::size_t width() const { return input_columns().size(); }
};

/// Restrict a dataset to the configuration's input columns (labels and
/// timestamps are carried along when present).
Dataset select_inputs(const Dataset& ds, const InputConfig& cfg);

}  // namespace fleetwise
