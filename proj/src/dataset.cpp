#include "fleetwise/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fleetwise/errors.hpp"
#include "fleetwise/rng.hpp"

namespace fleetwise {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::size_t Dataset::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    throw ValidationError("dataset has no column '" + name + "'");
}

bool Dataset::has_column(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const std::vector<double>& Dataset::column(const std::string& name) const {
    return columns_[index_of(name)];
}

std::vector<double>& Dataset::column(const std::string& name) {
    return columns_[index_of(name)];
}

void Dataset::add_column(const std::string& name, std::vector<double> values) {
    if (has_column(name)) throw ValidationError("duplicate column '" + name + "'");
    if (!names_.empty() && values.size() != n_rows_) {
        throw ValidationError("column '" + name + "' length mismatch");
    }
    n_rows_ = values.size();
    names_.push_back(name);
    columns_.push_back(std::move(values));
}

bool Dataset::has_labels() const {
    for (const auto& name : label_columns()) {
        if (!has_column(name)) return false;
    }
    return true;
}

Table Dataset::to_table(const std::vector<std::string>& cols) const {
    Table t;
    t.rows = n_rows_;
    t.cols = cols.size();
    t.v.resize(t.rows * t.cols);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto& src = column(cols[c]);
        for (std::size_t r = 0; r < t.rows; ++r) t.v[r * t.cols + c] = src[r];
    }
    return t;
}

Dataset Dataset::select_rows(std::span<const std::size_t> indices) const {
    Dataset out;
    out.turbine_id = turbine_id;
    if (!timestamps.empty()) {
        out.timestamps.reserve(indices.size());
        for (std::size_t idx : indices) out.timestamps.push_back(timestamps[idx]);
    }
    for (std::size_t c = 0; c < names_.size(); ++c) {
        std::vector<double> col;
        col.reserve(indices.size());
        for (std::size_t idx : indices) col.push_back(columns_[c][idx]);
        out.add_column(names_[c], std::move(col));
    }
    out.n_rows_ = indices.size();
    return out;
}

// Table 1 schema ------------------------------------------------------------

const std::vector<std::string>& scada_columns() {
    static const std::vector<std::string> cols = {
        "μ[RPM]", "μ[Yaw]", "μ[Pitch]", "μ[Power]",
        "μ[WSpd]", "σ[WSpd]", "μ[WDir]"};
    return cols;
}

const std::vector<std::string>& wave_columns() {
    static const std::vector<std::string> cols = {"Hs", "Tp", "θw"};
    return cols;
}

std::vector<std::string> accel_columns(int lat_level) {
    if (lat_level != 17 && lat_level != 38 && lat_level != 77) {
        throw ValidationError("unknown accelerometer level LAT-" +
                              std::to_string(lat_level));
    }
    char suffix[8];
    std::snprintf(suffix, sizeof(suffix), "@%03d", lat_level);
    std::vector<std::string> cols;
    for (const char* dir : {"FA", "SS"}) {
        for (const char* stat : {"max", "min", "rms"}) {
            cols.push_back(std::string(stat) + "[acc_" + dir + "]" + suffix);
        }
    }
    return cols;
}

const std::vector<std::string>& label_columns() {
    static const std::vector<std::string> cols = {"DEM_tl", "DEM_tn"};
    return cols;
}

std::vector<std::string> all_input_columns() {
    std::vector<std::string> cols = scada_columns();
    for (const auto& c : wave_columns()) cols.push_back(c);
    for (int level : {17, 38, 77}) {
        for (auto& c : accel_columns(level)) cols.push_back(c);
    }
    return cols;
}

// CSV -----------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

CsvLoadResult load_csv(const std::string& path,
                       const std::vector<std::string>& required) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw IoError("empty dataset file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_line(line);

    std::ptrdiff_t ts_col = -1, id_col = -1;
    std::vector<std::string> value_names;
    std::vector<std::ptrdiff_t> value_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "timestamp") {
            ts_col = static_cast<std::ptrdiff_t>(i);
        } else if (header[i] == "turbine_id") {
            id_col = static_cast<std::ptrdiff_t>(i);
        } else {
            value_names.push_back(header[i]);
            value_cols.push_back(static_cast<std::ptrdiff_t>(i));
        }
    }
    for (const auto& name : required) {
        if (std::find(value_names.begin(), value_names.end(), name) ==
            value_names.end()) {
            throw ValidationError("missing mandatory column '" + name + "' in " +
                                  path);
        }
    }

    CsvLoadResult result;
    std::vector<std::vector<double>> columns(value_names.size());
    std::vector<std::int64_t> timestamps;
    std::string turbine_id;
    std::size_t line_no = 1;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != header.size()) {
            throw IoError(path + ":" + std::to_string(line_no) +
                          ": wrong field count");
        }

        std::vector<double> values(value_names.size());
        bool gap = false;
        for (std::size_t i = 0; i < value_cols.size(); ++i) {
            const std::string& cell = fields[value_cols[i]];
            if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA") {
                gap = true;
                break;
            }
            std::size_t consumed = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &consumed);
            } catch (const std::exception&) {
                throw IoError(path + ":" + std::to_string(line_no) +
                              ": unparseable cell '" + cell + "'");
            }
            if (consumed != cell.size()) {
                throw IoError(path + ":" + std::to_string(line_no) +
                              ": unparseable cell '" + cell + "'");
            }
            if (!std::isfinite(v)) {
                gap = true;
                break;
            }
            values[i] = v;
        }
        if (gap) {
            ++result.dropped_rows;
            continue;
        }

        if (ts_col >= 0) {
            try {
                timestamps.push_back(std::stoll(fields[ts_col]));
            } catch (const std::exception&) {
                throw IoError(path + ":" + std::to_string(line_no) +
                              ": unparseable timestamp");
            }
        }
        if (id_col >= 0 && turbine_id.empty()) turbine_id = fields[id_col];
        for (std::size_t i = 0; i < values.size(); ++i) {
            columns[i].push_back(values[i]);
        }
    }

    result.data.turbine_id = turbine_id;
    result.data.timestamps = std::move(timestamps);
    for (std::size_t i = 0; i < value_names.size(); ++i) {
        result.data.add_column(value_names[i], std::move(columns[i]));
    }
    if (value_names.empty()) {
        throw ValidationError("dataset has no value columns: " + path);
    }
    result.data.set_rows(result.data.column(value_names[0]).size());
    return result;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file: " + path);

    bool with_ts = !ds.timestamps.empty();
    bool with_id = !ds.turbine_id.empty();
    if (with_ts) out << "timestamp,";
    if (with_id) out << "turbine_id,";
    const auto& names = ds.column_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << names[i] << (i + 1 < names.size() ? "," : "\n");
    }
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (with_ts) out << ds.timestamps[r] << ",";
        if (with_id) out << ds.turbine_id << ",";
        for (std::size_t i = 0; i < names.size(); ++i) {
            out << format_double(ds.column(names[i])[r])
                << (i + 1 < names.size() ? "," : "\n");
        }
    }
}

// Scaling ---------------------------------------------------------------------

std::size_t Scaler::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return i;
    }
    throw ValidationError("scaler has no column '" + name + "'");
}

Scaler fit_scaler(const Dataset& train, const std::vector<std::string>& cols) {
    if (train.rows() == 0) throw ValidationError("fit_scaler: empty training set");
    Scaler scaler;
    for (const auto& name : cols) {
        const auto& col = train.column(name);
        double mean = std::accumulate(col.begin(), col.end(), 0.0) /
                      static_cast<double>(col.size());
        double ss = 0.0;
        for (double v : col) ss += (v - mean) * (v - mean);
        double sd = std::sqrt(ss / static_cast<double>(col.size()));
        bool constant = sd <= 0.0;
        scaler.columns.push_back(name);
        scaler.mean.push_back(mean);
        scaler.stddev.push_back(constant ? 1.0 : sd);
        scaler.constant.push_back(constant);
    }
    return scaler;
}

Dataset apply_scaler(const Scaler& scaler, const Dataset& ds) {
    Dataset out;
    out.turbine_id = ds.turbine_id;
    out.timestamps = ds.timestamps;
    for (const auto& name : ds.column_names()) {
        std::vector<double> col = ds.column(name);
        auto it = std::find(scaler.columns.begin(), scaler.columns.end(), name);
        if (it != scaler.columns.end()) {
            std::size_t i = static_cast<std::size_t>(it - scaler.columns.begin());
            if (!scaler.constant[i]) {
                for (double& v : col) v = (v - scaler.mean[i]) / scaler.stddev[i];
            }
        }
        out.add_column(name, std::move(col));
    }
    out.set_rows(ds.rows());
    return out;
}

Table apply_scaler(const Scaler& scaler, const Table& t,
                   const std::vector<std::string>& cols) {
    if (cols.size() != t.cols) {
        throw ValidationError("apply_scaler: column list does not match table");
    }
    Table out = t;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        std::size_t i = scaler.index_of(cols[c]);
        if (scaler.constant[i]) continue;
        for (std::size_t r = 0; r < out.rows; ++r) {
            out.at(r, c) = (out.at(r, c) - scaler.mean[i]) / scaler.stddev[i];
        }
    }
    return out;
}

void save_scaler(const Scaler& scaler, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["columns"] = scaler.columns;
    j["mean"] = scaler.mean;
    j["stddev"] = scaler.stddev;
    j["constant"] = std::vector<int>(scaler.constant.begin(), scaler.constant.end());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scaler file: " + path);
    out << j.dump(2) << "\n";
}

Scaler load_scaler(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scaler file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("bad scaler file " + path + ": " + e.what());
    }
    Scaler scaler;
    scaler.columns = j.at("columns").get<std::vector<std::string>>();
    scaler.mean = j.at("mean").get<std::vector<double>>();
    scaler.stddev = j.at("stddev").get<std::vector<double>>();
    for (int c : j.at("constant").get<std::vector<int>>()) {
        scaler.constant.push_back(c != 0);
    }
    return scaler;
}

// Splitting -------------------------------------------------------------------

std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions,
                           std::uint64_t seed) {
    double total = std::accumulate(fractions.begin(), fractions.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError("split fractions must sum to 1");
    }

    std::vector<std::size_t> order(ds.rows());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::substream(seed, 0x5911u, ds.rows());
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = rng.below(i);
        std::swap(order[i - 1], order[j]);
    }

    std::vector<Dataset> parts;
    std::size_t start = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
        std::size_t count =
            (p + 1 == fractions.size())
                ? ds.rows() - start
                : static_cast<std::size_t>(
                      std::floor(fractions[p] * static_cast<double>(ds.rows())));
        std::vector<std::size_t> idx(order.begin() + start,
                                     order.begin() + start + count);
        std::sort(idx.begin(), idx.end());  // keep chronological order per part
        parts.push_back(ds.select_rows(idx));
        start += count;
    }
    return parts;
}

// Input configurations ----------------------------------------------------------

InputConfig InputConfig::from_id(int id) {
    // The twelve enumerated combinations: 1-6 include wave data, 7-12 do not.
    switch (id) {
        case 1: return {1, true, false, false, false};
        case 2: return {2, true, true, false, false};
        case 3: return {3, true, false, true, false};
        case 4: return {4, true, false, false, true};
        case 5: return {5, true, true, true, false};
        case 6: return {6, true, true, true, true};
        case 7: return {7, false, false, false, false};
        case 8: return {8, false, true, false, false};
        case 9: return {9, false, false, true, false};
        case 10: return {10, false, false, false, true};
        case 11: return {11, false, true, true, false};
        case 12: return {12, false, true, true, true};
        default:
            throw ValidationError("input configuration id must be 1..12, got " +
                                  std::to_string(id));
    }
}

std::vector<std::string> InputConfig::input_columns() const {
    std::vector<std::string> cols = scada_columns();
    if (wave) {
        for (const auto& c : wave_columns()) cols.push_back(c);
    }
    if (acc017) for (auto& c : accel_columns(17)) cols.push_back(c);
    if (acc038) for (auto& c : accel_columns(38)) cols.push_back(c);
    if (acc077) for (auto& c : accel_columns(77)) cols.push_back(c);
    return cols;
}

Dataset select_inputs(const Dataset& ds, const InputConfig& cfg) {
    Dataset out;
    out.turbine_id = ds.turbine_id;
    out.timestamps = ds.timestamps;
    for (const auto& name : cfg.input_columns()) {
        if (!ds.has_column(name)) {
            throw ValidationError("input configuration " + std::to_string(cfg.id) +
                                  " needs missing column '" + name + "'");
        }
        out.add_column(name, ds.column(name));
    }
    for (const auto& name : label_columns()) {
        if (ds.has_column(name)) out.add_column(name, ds.column(name));
    }
    out.set_rows(ds.rows());
    return out;
}

}  // namespace fleetwise
