#include "fleetwise/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "fleetwise/errors.hpp"

namespace fleetwise {

std::int64_t month_index_of(std::int64_t epoch_seconds) {
    // Days-to-civil conversion (proleptic Gregorian).
    std::int64_t z = epoch_seconds / 86400;
    if (epoch_seconds % 86400 < 0) --z;
    z += 719468;
    std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    std::int64_t doe = z - era * 146097;
    std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t y = yoe + era * 400;
    std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    std::int64_t mp = (5 * doy + 2) / 153;
    std::int64_t m = mp < 10 ? mp + 3 : mp - 9;
    if (m <= 2) ++y;
    return y * 12 + (m - 1);
}

TrainConfig resolve_dnn_config(const TrainOverrides& o, std::uint64_t seed) {
    TrainConfig cfg = dnn_default_config();
    cfg.seed = seed;
    if (o.max_epochs) cfg.max_epochs = *o.max_epochs;
    if (o.batch_size) cfg.batch_size = *o.batch_size;
    if (o.learning_rate) cfg.optimizer.learning_rate = *o.learning_rate;
    if (o.patience) cfg.early_stop.patience = *o.patience;
    if (o.min_delta) cfg.early_stop.min_delta = *o.min_delta;
    return cfg;
}

TrainConfig resolve_bnn_config(int config_id, const TrainOverrides& o,
                               std::uint64_t seed) {
    TrainConfig cfg = bnn_default_config(config_id);
    cfg.seed = seed;
    if (o.max_epochs) cfg.max_epochs = *o.max_epochs;
    if (o.batch_size) cfg.batch_size = *o.batch_size;
    if (o.learning_rate) cfg.optimizer.learning_rate = *o.learning_rate;
    if (o.patience) cfg.early_stop.patience = *o.patience;
    if (o.min_delta) cfg.early_stop.min_delta = *o.min_delta;
    return cfg;
}

namespace {

struct PreparedData {
    InputConfig config;
    std::vector<std::string> input_cols;
    Scaler input_scaler;
    Scaler label_scaler;
    LabeledTable scaled;  // z-scored inputs and labels
};

PreparedData prepare_training(const Dataset& train, int config_id) {
    if (!train.has_labels()) {
        throw ValidationError("training dataset has no DEM labels");
    }
    PreparedData prep;
    prep.config = InputConfig::from_id(config_id);
    prep.input_cols = prep.config.input_columns();
    prep.input_scaler = fit_scaler(train, prep.input_cols);
    prep.label_scaler = fit_scaler(train, label_columns());
    prep.scaled.x = apply_scaler(prep.input_scaler,
                                 train.to_table(prep.input_cols), prep.input_cols);
    prep.scaled.y = apply_scaler(prep.label_scaler,
                                 train.to_table(label_columns()), label_columns());
    return prep;
}

/// mu/sigma back to physical label units per channel.
PredictiveSampleSet unscale_samples(PredictiveSampleSet set,
                                    const Scaler& label_scaler) {
    for (std::size_t c = 0; c < set.channels; ++c) {
        std::size_t i = label_scaler.index_of(label_columns()[c]);
        double mean = label_scaler.constant[i] ? 0.0 : label_scaler.mean[i];
        double sd = label_scaler.constant[i] ? 1.0 : label_scaler.stddev[i];
        for (std::size_t r = 0; r < set.n_rows; ++r) {
            for (std::size_t k = 0; k < set.n_f; ++k) {
                std::size_t base = (r * set.n_f + k) * set.channels + c;
                set.mu[base] = set.mu[base] * sd + mean;
                set.sigma[base] *= sd;
            }
        }
    }
    return set;
}

double mean_finite(std::span<const double> v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isfinite(x)) {
            sum += x;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n)
             : std::numeric_limits<double>::quiet_NaN();
}

double channel_expected_ll(const PredictiveSampleSet& samples,
                           const Table& labels, std::size_t channel) {
    PredictiveSampleSet one;
    one.n_rows = samples.n_rows;
    one.n_f = samples.n_f;
    one.channels = 1;
    one.mu.resize(samples.n_rows * samples.n_f);
    one.sigma.resize(samples.n_rows * samples.n_f);
    Table y;
    y.rows = labels.rows;
    y.cols = 1;
    y.v.resize(labels.rows);
    for (std::size_t r = 0; r < samples.n_rows; ++r) {
        y.v[r] = labels.at(r, channel);
        for (std::size_t k = 0; k < samples.n_f; ++k) {
            one.mu[r * samples.n_f + k] = samples.mu_at(r, k, channel);
            one.sigma[r * samples.n_f + k] = samples.sigma_at(r, k, channel);
        }
    }
    return expected_log_likelihood(one, y);
}

}  // namespace

FleetDnn train_fleet_dnn(const Dataset& train, int config_id,
                         const TrainOverrides& overrides, std::uint64_t seed) {
    PreparedData prep = prepare_training(train, config_id);
    TrainConfig cfg = resolve_dnn_config(overrides, seed);
    Rng init = Rng::substream(seed, 0xd41u, static_cast<std::uint64_t>(config_id));
    std::vector<std::size_t> hidden =
        overrides.hidden ? *overrides.hidden : dnn_default_hidden();
    DenseNet net = DenseNet::make(prep.scaled.x.cols, hidden,
                                  prep.scaled.y.cols, init);
    auto trained = mlp_train(net, prep.scaled, nullptr, cfg);
    return {std::move(trained.net), prep.input_scaler, prep.label_scaler,
            prep.config, std::move(trained.history)};
}

FleetBnnResult train_fleet_bnn(const Dataset& train, int config_id,
                               HeadKind head, const TrainOverrides& overrides,
                               std::uint64_t seed) {
    PreparedData prep = prepare_training(train, config_id);
    TrainConfig cfg = resolve_bnn_config(config_id, overrides, seed);
    Rng init = Rng::substream(seed, 0xb41u, static_cast<std::uint64_t>(config_id));
    std::vector<std::size_t> hidden =
        overrides.hidden ? *overrides.hidden : bnn_default_hidden(config_id);
    double prior_std = overrides.prior_std ? *overrides.prior_std : 1.0;
    double sigma_fixed = overrides.sigma_fixed ? *overrides.sigma_fixed : 1e-3;
    BnnNet net =
        BnnNet::make(prep.scaled.x.cols, hidden, prep.scaled.y.cols, head, init,
                     prior_std, sigma_fixed, SamplingMode::Flipout);
    BnnTrainOptions track;
    track.track_layer = hidden.size();  // output layer
    track.track_index = 0;
    track.track_bias = true;
    auto trained = bnn_train(net, prep.scaled, cfg, track);
    FleetBnnResult result;
    result.model = {std::move(trained.net), prep.input_scaler,
                    prep.label_scaler, prep.config};
    result.history = std::move(trained.history);
    result.weight_stats = std::move(trained.weight_stats);
    return result;
}

Table scaled_inputs(const Scaler& input_scaler, const InputConfig& config,
                    const Dataset& ds) {
    auto cols = config.input_columns();
    return apply_scaler(input_scaler, ds.to_table(cols), cols);
}

PredictiveSampleSet ensemble_physical(const FleetBnn& model, const Dataset& ds,
                                      std::size_t n_f, std::uint64_t seed) {
    Table x = scaled_inputs(model.input_scaler, model.config, ds);
    auto set = predictive_ensemble(model.net, x, n_f, seed);
    return unscale_samples(std::move(set), model.label_scaler);
}

Table predict_physical(const FleetDnn& model, const Dataset& ds) {
    Table x = scaled_inputs(model.input_scaler, model.config, ds);
    Table out;
    out.rows = x.rows;
    out.cols = model.net.output_width();
    out.v.resize(out.rows * out.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        auto y = model.net.forward(x.row(r));
        for (std::size_t c = 0; c < y.size(); ++c) {
            std::size_t i = model.label_scaler.index_of(label_columns()[c]);
            out.at(r, c) = model.label_scaler.constant[i]
                               ? y[c]
                               : y[c] * model.label_scaler.stddev[i] +
                                     model.label_scaler.mean[i];
        }
    }
    return out;
}

// Input-configuration sweep ---------------------------------------------------

SweepResult input_sweep(const Dataset& ds, const std::vector<int>& config_ids,
                        const std::vector<std::string>& kinds,
                        const SweepOptions& options) {
    if (!ds.has_labels()) throw ValidationError("input_sweep: dataset unlabeled");
    std::set<int> seen;
    for (int id : config_ids) {
        if (!seen.insert(id).second) {
            throw ValidationError("input_sweep: duplicate config id " +
                                  std::to_string(id));
        }
    }
    std::set<std::string> kind_set(kinds.begin(), kinds.end());
    for (const auto& kind : kind_set) {
        if (kind != "dnn" && kind != "bnn") {
            throw ValidationError("input_sweep: unknown kind '" + kind + "'");
        }
    }

    std::array<double, 2> fractions = {1.0 - options.test_fraction,
                                       options.test_fraction};
    auto parts = split(ds, fractions, options.seed);
    const Dataset& train = parts[0];
    const Dataset& test = parts[1];

    SweepResult result;
    for (int id : config_ids) {
        if (kind_set.count("dnn")) {
            FleetDnn model = train_fleet_dnn(train, id, options.dnn, options.seed);
            Table pred = predict_physical(model, test);
            Table labels = test.to_table(label_columns());
            SweepEntry entry;
            entry.config_id = id;
            entry.kind = "dnn";
            for (std::size_t c = 0; c < labels.cols; ++c) {
                std::vector<double> p(pred.rows), y(pred.rows);
                for (std::size_t r = 0; r < pred.rows; ++r) {
                    p[r] = pred.at(r, c);
                    y[r] = labels.at(r, c);
                }
                entry.dnn_percent_error.push_back(
                    point_errors(p, y).percent_error);
            }
            result.entries.push_back(std::move(entry));
        }
        if (kind_set.count("bnn")) {
            auto fleet = train_fleet_bnn(train, id, HeadKind::Aleatoric,
                                         options.bnn, options.seed);
            auto samples =
                ensemble_physical(fleet.model, test, options.n_f, options.seed);
            SweepEntry entry;
            entry.config_id = id;
            entry.kind = "bnn";
            entry.bnn_expected_ll =
                expected_log_likelihood(samples, test.to_table(label_columns()));
            result.entries.push_back(std::move(entry));
        }
    }
    return result;
}

// Data-collection-period study ---------------------------------------------------

PeriodStudyResult period_study(const Dataset& ds,
                               const std::vector<int>& period_months,
                               const PeriodOptions& options) {
    if (ds.timestamps.empty()) {
        throw ValidationError("period_study: dataset has no timestamps");
    }
    for (std::size_t i = 1; i < period_months.size(); ++i) {
        if (period_months[i] <= period_months[i - 1]) {
            throw ValidationError("period_study: periods must ascend");
        }
    }

    std::array<double, 2> fractions = {1.0 - options.test_fraction,
                                       options.test_fraction};
    auto parts = split(ds, fractions, options.seed);
    const Dataset& pool = parts[0];
    const Dataset& test = parts[1];

    std::int64_t first_month = month_index_of(
        *std::min_element(ds.timestamps.begin(), ds.timestamps.end()));

    PeriodStudyResult result;
    for (int months : period_months) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < pool.rows(); ++r) {
            if (month_index_of(pool.timestamps[r]) - first_month < months) {
                rows.push_back(r);
            }
        }
        PeriodEntry entry;
        entry.months = months;
        entry.rows_used = rows.size();
        if (rows.empty()) {
            entry.skipped = true;
            result.entries.push_back(entry);
            continue;
        }
        Dataset train = pool.select_rows(rows);
        auto fleet = train_fleet_bnn(train, options.config_id,
                                     HeadKind::Aleatoric, options.bnn,
                                     options.seed);
        auto samples =
            ensemble_physical(fleet.model, test, options.n_f, options.seed);
        entry.mean_expected_ll =
            expected_log_likelihood(samples, test.to_table(label_columns()));
        auto decomp = decompose(samples);
        entry.mean_cov_mu = mean_finite(decomp.cov_mu);
        result.entries.push_back(entry);
    }
    return result;
}

// Farm-wide deployment ------------------------------------------------------------

DemHistogram dem_histogram(std::span<const double> expected_dem,
                           std::span<const double> cov_mu, std::size_t n_bins) {
    if (n_bins < 1) throw ValidationError("dem_histogram: n_bins must be >= 1");
    if (expected_dem.empty()) {
        throw ValidationError("dem_histogram: empty row set");
    }
    if (expected_dem.size() != cov_mu.size()) {
        throw ValidationError("dem_histogram: size mismatch");
    }
    double lo = *std::min_element(expected_dem.begin(), expected_dem.end());
    double hi = *std::max_element(expected_dem.begin(), expected_dem.end());
    if (hi <= lo) hi = lo + 1.0;  // all predictions equal: one occupied bin

    DemHistogram h;
    h.edges.resize(n_bins + 1);
    double width = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t i = 0; i <= n_bins; ++i) {
        h.edges[i] = lo + width * static_cast<double>(i);
    }
    std::vector<double> counts(n_bins, 0.0);
    std::vector<double> cov_sum(n_bins, 0.0);
    std::vector<double> cov_n(n_bins, 0.0);
    for (std::size_t i = 0; i < expected_dem.size(); ++i) {
        auto idx = static_cast<std::size_t>((expected_dem[i] - lo) / width);
        if (idx >= n_bins) idx = n_bins - 1;
        counts[idx] += 1.0;
        if (std::isfinite(cov_mu[i])) {
            cov_sum[idx] += cov_mu[i];
            cov_n[idx] += 1.0;
        }
    }
    double total = static_cast<double>(expected_dem.size());
    h.probability.resize(n_bins);
    h.mean_cov_mu.resize(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i) {
        h.probability[i] = counts[i] / total;
        h.mean_cov_mu[i] = cov_n[i] > 0.0
                               ? cov_sum[i] / cov_n[i]
                               : std::numeric_limits<double>::quiet_NaN();
    }
    return h;
}

namespace {

std::vector<MarginalSummary> input_marginals(const Dataset& ds,
                                             const InputConfig& config) {
    std::vector<MarginalSummary> out;
    for (const auto& name : config.input_columns()) {
        const auto& col = ds.column(name);
        std::vector<double> sorted(col.begin(), col.end());
        std::sort(sorted.begin(), sorted.end());
        MarginalSummary m;
        m.column = name;
        m.mean = mean_of(col);
        double ss = 0.0;
        for (double v : col) ss += (v - m.mean) * (v - m.mean);
        m.stddev = std::sqrt(ss / static_cast<double>(col.size()));
        auto pick = [&](double p) {
            double idx = p * static_cast<double>(sorted.size() - 1);
            auto lo = static_cast<std::size_t>(idx);
            auto hi = std::min(lo + 1, sorted.size() - 1);
            double frac = idx - static_cast<double>(lo);
            return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
        };
        m.q5 = pick(0.05);
        m.q50 = pick(0.50);
        m.q95 = pick(0.95);
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace

std::vector<UncertaintyReport> deploy_farm(const FleetBnn& model,
                                           const std::vector<Dataset>& turbines,
                                           const Dataset& train_reference,
                                           std::size_t n_f, std::uint64_t seed,
                                           std::size_t histogram_bins) {
    Table reference =
        scaled_inputs(model.input_scaler, model.config, train_reference);

    std::vector<UncertaintyReport> reports;
    for (std::size_t t = 0; t < turbines.size(); ++t) {
        const Dataset& turbine = turbines[t];
        UncertaintyReport report;
        report.turbine_id =
            turbine.turbine_id.empty() ? ("turbine_" + std::to_string(t))
                                       : turbine.turbine_id;
        report.rows = turbine.rows();
        report.n_f = n_f;

        auto samples = ensemble_physical(model, turbine, n_f,
                                         Rng::substream(seed, 0xdeu, t).next_u64());
        auto decomp = decompose(samples);
        report.expected_y = decomp.expected_y;
        report.cov_mu = decomp.cov_mu;

        Table x = scaled_inputs(model.input_scaler, model.config, turbine);
        report.r_min = min_euclidean_distance(x, reference);
        report.r_min_stats = box_stats(report.r_min);
        report.mean_r_min = mean_finite(report.r_min);
        report.mean_cov_mu = mean_finite(report.cov_mu);

        bool labeled = turbine.has_labels();
        Table labels;
        if (labeled) labels = turbine.to_table(label_columns());

        std::size_t channels = decomp.channels;
        std::vector<double> ll_per_channel;
        for (std::size_t c = 0; c < channels; ++c) {
            ChannelReport ch;
            ch.name = label_columns()[c];
            std::vector<double> dem_c(report.rows), cov_c(report.rows);
            for (std::size_t r = 0; r < report.rows; ++r) {
                dem_c[r] = decomp.at(decomp.expected_y, r, c);
                cov_c[r] = decomp.at(decomp.cov_mu, r, c);
            }
            ch.cov_mu_stats = box_stats(cov_c);
            ch.histogram = dem_histogram(dem_c, cov_c, histogram_bins);
            if (labeled) {
                ch.expected_ll = channel_expected_ll(samples, labels, c);
                ll_per_channel.push_back(*ch.expected_ll);
            }
            report.channels.push_back(std::move(ch));
        }
        if (labeled) report.expected_ll = mean_of(ll_per_channel);
        report.input_marginals = input_marginals(turbine, model.config);
        reports.push_back(std::move(report));
    }
    return reports;
}

// Model-kind comparison ---------------------------------------------------------

CompareResult compare_models(const Dataset& train, const Dataset& test,
                             const std::vector<Dataset>& turbines,
                             const std::vector<std::string>& kinds,
                             const CompareOptions& options) {
    // Deduplicate kinds, preserving order.
    std::vector<std::string> unique_kinds;
    for (const auto& kind : kinds) {
        if (kind != "dnn" && kind != "epistemic_bnn" && kind != "aleatoric_bnn") {
            throw ValidationError("compare_models: unknown kind '" + kind + "'");
        }
        if (std::find(unique_kinds.begin(), unique_kinds.end(), kind) ==
            unique_kinds.end()) {
            unique_kinds.push_back(kind);
        }
    }

    std::optional<FleetDnn> dnn;
    std::optional<FleetBnn> epistemic;
    std::optional<FleetBnn> aleatoric;
    for (const auto& kind : unique_kinds) {
        if (kind == "dnn") {
            dnn = train_fleet_dnn(train, options.config_id, options.dnn,
                                  options.seed);
        } else if (kind == "epistemic_bnn") {
            epistemic = train_fleet_bnn(train, options.config_id,
                                        HeadKind::Epistemic, options.bnn,
                                        options.seed)
                            .model;
        } else {
            aleatoric = train_fleet_bnn(train, options.config_id,
                                        HeadKind::Aleatoric, options.bnn,
                                        options.seed)
                            .model;
        }
    }

    CompareResult result;
    result.kinds = unique_kinds;

    std::vector<std::pair<std::string, const Dataset*>> sets;
    sets.emplace_back("fl_test", &test);
    for (const auto& turbine : turbines) {
        sets.emplace_back(turbine.turbine_id, &turbine);
    }

    std::size_t set_index = 0;
    for (const auto& [name, ds] : sets) {
        CompareEntry entry;
        entry.dataset = name;
        bool labeled = ds->has_labels();
        Table labels;
        if (labeled) labels = ds->to_table(label_columns());

        auto percent_by_channel = [&](const Table& pred) {
            std::vector<double> out;
            for (std::size_t c = 0; c < labels.cols; ++c) {
                std::vector<double> p(pred.rows), y(pred.rows);
                for (std::size_t r = 0; r < pred.rows; ++r) {
                    p[r] = pred.at(r, c);
                    y[r] = labels.at(r, c);
                }
                out.push_back(point_errors(p, y).percent_error);
            }
            return out;
        };

        std::uint64_t set_seed =
            Rng::substream(options.seed, 0xc0u, set_index).next_u64();
        if (dnn && labeled) {
            entry.percent_error["dnn"] = percent_by_channel(predict_physical(*dnn, *ds));
        }
        if (epistemic) {
            auto samples = ensemble_physical(*epistemic, *ds, options.n_f, set_seed);
            auto decomp = decompose(samples);
            entry.mean_cov_mu["epistemic_bnn"] = mean_finite(decomp.cov_mu);
            if (labeled) {
                Table pred;
                pred.rows = decomp.rows;
                pred.cols = decomp.channels;
                pred.v = decomp.expected_mu;
                entry.percent_error["epistemic_bnn"] = percent_by_channel(pred);
            }
        }
        if (aleatoric) {
            auto samples = ensemble_physical(*aleatoric, *ds, options.n_f, set_seed);
            auto decomp = decompose(samples);
            entry.mean_cov_mu["aleatoric_bnn"] = mean_finite(decomp.cov_mu);
        }
        result.entries.push_back(std::move(entry));
        ++set_index;
    }
    return result;
}

// Writers -------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

nlohmann::json json_vector(std::span<const double> v) {
    nlohmann::json arr = nlohmann::json::array();
    for (double x : v) {
        if (std::isfinite(x)) {
            arr.push_back(x);
        } else {
            arr.push_back(nullptr);
        }
    }
    return arr;
}

nlohmann::json box_json(const BoxStats& s) {
    return {{"mean", s.mean},   {"median", s.median}, {"q25", s.q25},
            {"q75", s.q75},     {"w2_5", s.w2_5},     {"w97_5", s.w97_5}};
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    return out;
}

}  // namespace

void write_report_json(const UncertaintyReport& report,
                       const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["turbine_id"] = report.turbine_id;
    j["rows"] = report.rows;
    j["n_f"] = report.n_f;
    j["mean_cov_mu"] = report.mean_cov_mu;
    j["mean_r_min"] = report.mean_r_min;
    if (report.expected_ll) j["expected_ll"] = *report.expected_ll;
    j["r_min_stats"] = box_json(report.r_min_stats);
    j["expected_y"] = json_vector(report.expected_y);
    j["cov_mu"] = json_vector(report.cov_mu);
    j["r_min"] = json_vector(report.r_min);
    nlohmann::json channels = nlohmann::json::array();
    for (const auto& ch : report.channels) {
        nlohmann::json cj;
        cj["name"] = ch.name;
        cj["cov_mu_stats"] = box_json(ch.cov_mu_stats);
        if (ch.expected_ll) cj["expected_ll"] = *ch.expected_ll;
        cj["histogram"] = {{"edges", json_vector(ch.histogram.edges)},
                           {"probability", json_vector(ch.histogram.probability)},
                           {"mean_cov_mu", json_vector(ch.histogram.mean_cov_mu)}};
        channels.push_back(std::move(cj));
    }
    j["channels"] = std::move(channels);
    nlohmann::json marginals = nlohmann::json::array();
    for (const auto& m : report.input_marginals) {
        marginals.push_back({{"column", m.column},
                             {"mean", m.mean},
                             {"stddev", m.stddev},
                             {"q5", m.q5},
                             {"q50", m.q50},
                             {"q95", m.q95}});
    }
    j["input_marginals"] = std::move(marginals);
    open_out(path) << j.dump(2) << "\n";
}

void write_report_csvs(const UncertaintyReport& report,
                       const std::string& path_prefix) {
    {
        auto out = open_out(path_prefix + "_histogram.csv");
        out << "channel,bin_lo,bin_hi,probability,mean_cov_mu\n";
        for (const auto& ch : report.channels) {
            for (std::size_t i = 0; i < ch.histogram.probability.size(); ++i) {
                out << ch.name << "," << fmt(ch.histogram.edges[i]) << ","
                    << fmt(ch.histogram.edges[i + 1]) << ","
                    << fmt(ch.histogram.probability[i]) << ","
                    << fmt(ch.histogram.mean_cov_mu[i]) << "\n";
            }
        }
    }
    {
        auto out = open_out(path_prefix + "_box.csv");
        out << "metric,channel,mean,median,q25,q75,w2_5,w97_5\n";
        for (const auto& ch : report.channels) {
            const auto& s = ch.cov_mu_stats;
            out << "cov_mu," << ch.name << "," << fmt(s.mean) << ","
                << fmt(s.median) << "," << fmt(s.q25) << "," << fmt(s.q75) << ","
                << fmt(s.w2_5) << "," << fmt(s.w97_5) << "\n";
        }
        const auto& r = report.r_min_stats;
        out << "r_min,," << fmt(r.mean) << "," << fmt(r.median) << ","
            << fmt(r.q25) << "," << fmt(r.q75) << "," << fmt(r.w2_5) << ","
            << fmt(r.w97_5) << "\n";
    }
}

void write_sweep_files(const SweepResult& sweep,
                       const std::string& path_prefix) {
    nlohmann::json j;
    j["schema_version"] = 1;
    nlohmann::json entries = nlohmann::json::array();
    auto out = open_out(path_prefix + ".csv");
    out << "config_id,kind,pct_err_DEM_tl,pct_err_DEM_tn,expected_ll\n";
    for (const auto& e : sweep.entries) {
        nlohmann::json ej;
        ej["config_id"] = e.config_id;
        ej["kind"] = e.kind;
        if (e.kind == "dnn") {
            ej["percent_error"] = e.dnn_percent_error;
            out << e.config_id << ",dnn," << fmt(e.dnn_percent_error[0]) << ","
                << fmt(e.dnn_percent_error[1]) << ",\n";
        } else {
            ej["expected_ll"] = e.bnn_expected_ll;
            out << e.config_id << ",bnn,,," << fmt(e.bnn_expected_ll) << "\n";
        }
        entries.push_back(std::move(ej));
    }
    j["entries"] = std::move(entries);
    open_out(path_prefix + ".json") << j.dump(2) << "\n";
}

void write_period_files(const PeriodStudyResult& periods,
                        const std::string& path_prefix) {
    nlohmann::json j;
    j["schema_version"] = 1;
    nlohmann::json entries = nlohmann::json::array();
    auto out = open_out(path_prefix + ".csv");
    out << "months,rows_used,mean_expected_ll,mean_cov_mu,skipped\n";
    for (const auto& e : periods.entries) {
        entries.push_back({{"months", e.months},
                           {"rows_used", e.rows_used},
                           {"mean_expected_ll", e.mean_expected_ll},
                           {"mean_cov_mu", e.mean_cov_mu},
                           {"skipped", e.skipped}});
        out << e.months << "," << e.rows_used << "," << fmt(e.mean_expected_ll)
            << "," << fmt(e.mean_cov_mu) << "," << (e.skipped ? 1 : 0) << "\n";
    }
    j["entries"] = std::move(entries);
    open_out(path_prefix + ".json") << j.dump(2) << "\n";
}

void write_compare_files(const CompareResult& cmp,
                         const std::string& path_prefix) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kinds"] = cmp.kinds;
    nlohmann::json entries = nlohmann::json::array();
    auto out = open_out(path_prefix + ".csv");
    out << "dataset,kind,pct_err_DEM_tl,pct_err_DEM_tn,mean_cov_mu\n";
    for (const auto& e : cmp.entries) {
        nlohmann::json ej;
        ej["dataset"] = e.dataset;
        for (const auto& [kind, pct] : e.percent_error) {
            ej["percent_error"][kind] = pct;
        }
        for (const auto& [kind, cov] : e.mean_cov_mu) {
            ej["mean_cov_mu"][kind] = cov;
        }
        std::set<std::string> kinds_here;
        for (const auto& [kind, _] : e.percent_error) kinds_here.insert(kind);
        for (const auto& [kind, _] : e.mean_cov_mu) kinds_here.insert(kind);
        for (const auto& kind : kinds_here) {
            out << e.dataset << "," << kind << ",";
            auto pit = e.percent_error.find(kind);
            if (pit != e.percent_error.end()) {
                out << fmt(pit->second[0]) << "," << fmt(pit->second[1]);
            } else {
                out << ",";
            }
            out << ",";
            auto cit = e.mean_cov_mu.find(kind);
            if (cit != e.mean_cov_mu.end()) out << fmt(cit->second);
            out << "\n";
        }
        entries.push_back(std::move(ej));
    }
    j["entries"] = std::move(entries);
    open_out(path_prefix + ".json") << j.dump(2) << "\n";
}

}  // namespace fleetwise
