#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fleetwise/bnn.hpp"
#include "fleetwise/dataset.hpp"
#include "fleetwise/fatigue.hpp"
#include "fleetwise/metrics.hpp"
#include "fleetwise/nnet_train.hpp"
#include "fleetwise/synth_farm.hpp"
#include "fleetwise/workflow.hpp"

namespace py = pybind11;
using namespace fleetwise;

namespace {

Table table_from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 2) throw ValidationError("expected a 2-d array");
    Table t;
    t.rows = static_cast<std::size_t>(arr.shape(0));
    t.cols = static_cast<std::size_t>(arr.shape(1));
    t.v.assign(arr.data(), arr.data() + t.rows * t.cols);
    return t;
}

py::array_t<double> numpy_from_vector(const std::vector<double>& v,
                                      std::size_t rows, std::size_t cols) {
    py::array_t<double> arr({rows, cols});
    std::copy(v.begin(), v.end(), arr.mutable_data());
    return arr;
}

LabeledTable labeled_from_numpy(py::array_t<double> x, py::array_t<double> y) {
    return {table_from_numpy(std::move(x)), table_from_numpy(std::move(y))};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "fleetwise: farm-wide virtual load monitoring primitives";

    py::register_exception<ValidationError>(m, "ValidationError",
                                            PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<NumericalError>(m, "NumericalError",
                                           PyExc_ArithmeticError);

    // fatigue ----------------------------------------------------------------
    py::class_<SnParams>(m, "SnParams")
        .def(py::init<>())
        .def(py::init([](double k, double mm, double n_eq) {
                 return SnParams{k, mm, n_eq};
             }),
             py::arg("k") = 1.0, py::arg("m") = 3.0, py::arg("n_eq") = 1e7)
        .def_readwrite("k", &SnParams::k)
        .def_readwrite("m", &SnParams::m)
        .def_readwrite("n_eq", &SnParams::n_eq);

    py::class_<CycleSpectrum>(m, "CycleSpectrum")
        .def_property_readonly("ranges",
                               [](const CycleSpectrum& s) {
                                   std::vector<double> v;
                                   for (const auto& b : s.bins) v.push_back(b.range);
                                   return v;
                               })
        .def_property_readonly("counts",
                               [](const CycleSpectrum& s) {
                                   std::vector<double> v;
                                   for (const auto& b : s.bins) v.push_back(b.count);
                                   return v;
                               })
        .def_property_readonly("n_bins",
                               [](const CycleSpectrum& s) { return s.n_bins; })
        .def("total_count", &CycleSpectrum::total_count);

    m.def(
        "rainflow_count",
        [](std::vector<double> samples, double dt, std::size_t n_bins) {
            return rainflow_count(LoadSeries{std::move(samples), dt}, n_bins);
        },
        py::arg("samples"), py::arg("dt") = 1.0, py::arg("n_bins") = 128,
        "Four-point rainflow count of a moment series into a binned spectrum.");
    m.def("dem", &dem, py::arg("spectrum"), py::arg("sn") = SnParams{},
          "Damage equivalent moment of a cycle spectrum.");
    m.def("miner_damage", &miner_damage, py::arg("spectrum"), py::arg("sn"),
          "Miner-Palmgren damage of a cycle spectrum.");

    // metrics ----------------------------------------------------------------
    m.def(
        "gaussian_kl",
        [](double mu_q, double sigma_q, double mu_p, double sigma_p) {
            GaussianPosterior q{mu_q, softplus_inverse(sigma_q)};
            return gaussian_kl(q, {mu_p, sigma_p});
        },
        py::arg("mu_q"), py::arg("sigma_q"), py::arg("mu_p") = 0.0,
        py::arg("sigma_p") = 1.0,
        "Closed-form KL divergence between two scalar Gaussians.");

    py::class_<PointErrors>(m, "PointErrors")
        .def_readonly("mae", &PointErrors::mae)
        .def_readonly("rmse", &PointErrors::rmse)
        .def_readonly("percent_error", &PointErrors::percent_error)
        .def_readonly("excluded_rows", &PointErrors::excluded_rows);
    m.def(
        "point_errors",
        [](std::vector<double> pred, std::vector<double> label) {
            return point_errors(pred, label);
        },
        py::arg("pred"), py::arg("label"));

    py::class_<PredictiveSampleSet>(m, "PredictiveSampleSet")
        .def_property_readonly("n_rows",
                               [](const PredictiveSampleSet& s) { return s.n_rows; })
        .def_property_readonly("n_f",
                               [](const PredictiveSampleSet& s) { return s.n_f; })
        .def_property_readonly("channels",
                               [](const PredictiveSampleSet& s) { return s.channels; })
        .def_property_readonly("mu",
                               [](const PredictiveSampleSet& s) {
                                   py::array_t<double> arr(
                                       {s.n_rows, s.n_f, s.channels});
                                   std::copy(s.mu.begin(), s.mu.end(),
                                             arr.mutable_data());
                                   return arr;
                               })
        .def_property_readonly("sigma", [](const PredictiveSampleSet& s) {
            py::array_t<double> arr({s.n_rows, s.n_f, s.channels});
            std::copy(s.sigma.begin(), s.sigma.end(), arr.mutable_data());
            return arr;
        });

    py::class_<UncertaintyDecomposition>(m, "UncertaintyDecomposition")
        .def_property_readonly("expected_y",
                               [](const UncertaintyDecomposition& d) {
                                   return numpy_from_vector(d.expected_y, d.rows,
                                                            d.channels);
                               })
        .def_property_readonly("total_var",
                               [](const UncertaintyDecomposition& d) {
                                   return numpy_from_vector(d.total_var, d.rows,
                                                            d.channels);
                               })
        .def_property_readonly("aleatory_var",
                               [](const UncertaintyDecomposition& d) {
                                   return numpy_from_vector(d.aleatory_var,
                                                            d.rows, d.channels);
                               })
        .def_property_readonly("epistemic_var",
                               [](const UncertaintyDecomposition& d) {
                                   return numpy_from_vector(d.epistemic_var,
                                                            d.rows, d.channels);
                               })
        .def_property_readonly("expected_mu",
                               [](const UncertaintyDecomposition& d) {
                                   return numpy_from_vector(d.expected_mu,
                                                            d.rows, d.channels);
                               })
        .def_property_readonly("cov_mu", [](const UncertaintyDecomposition& d) {
            return numpy_from_vector(d.cov_mu, d.rows, d.channels);
        });
    m.def("decompose", &decompose, py::arg("samples"),
          "Law-of-total-variance decomposition of a predictive sample set.");

    m.def(
        "expected_log_likelihood",
        [](const PredictiveSampleSet& samples, py::array_t<double> labels) {
            return expected_log_likelihood(samples, table_from_numpy(labels));
        },
        py::arg("samples"), py::arg("labels"));

    m.def(
        "min_euclidean_distance",
        [](py::array_t<double> test, py::array_t<double> train) {
            return min_euclidean_distance(table_from_numpy(test),
                                          table_from_numpy(train));
        },
        py::arg("test"), py::arg("train"),
        "Per test row, the distance to the nearest training row.");

    // deterministic network ----------------------------------------------------
    py::class_<DenseNet>(m, "DenseNet")
        .def_static(
            "make",
            [](std::size_t input, std::vector<std::size_t> hidden,
               std::size_t output, std::uint64_t seed) {
                Rng rng(seed);
                return DenseNet::make(input, hidden, output, rng);
            },
            py::arg("input_width"), py::arg("hidden"), py::arg("output_width"),
            py::arg("seed") = 0)
        .def("forward",
             [](const DenseNet& net, std::vector<double> x) {
                 return net.forward(x);
             })
        .def("to_json", &DenseNet::to_json)
        .def_static("from_json", &DenseNet::from_json)
        .def("save", &DenseNet::save)
        .def_static("load", &DenseNet::load)
        .def_property_readonly("input_width", &DenseNet::input_width)
        .def_property_readonly("output_width", &DenseNet::output_width);

    py::class_<TrainHistory>(m, "TrainHistory")
        .def_property_readonly("training_loss",
                               [](const TrainHistory& h) {
                                   std::vector<double> v;
                                   for (const auto& e : h.epochs) {
                                       v.push_back(e.training_loss);
                                   }
                                   return v;
                               })
        .def_property_readonly("validation_loss",
                               [](const TrainHistory& h) {
                                   std::vector<double> v;
                                   for (const auto& e : h.epochs) {
                                       v.push_back(e.validation_loss
                                                       ? *e.validation_loss
                                                       : std::nan(""));
                                   }
                                   return v;
                               })
        .def_readonly("stopped_epoch", &TrainHistory::stopped_epoch)
        .def_readonly("best_epoch", &TrainHistory::best_epoch);

    m.def(
        "mlp_train",
        [](const DenseNet& net, py::array_t<double> x, py::array_t<double> y,
           std::size_t max_epochs, std::size_t batch_size, double learning_rate,
           std::size_t patience, std::uint64_t seed) {
            LabeledTable train = labeled_from_numpy(std::move(x), std::move(y));
            TrainConfig cfg = dnn_default_config();
            cfg.max_epochs = max_epochs;
            cfg.batch_size = batch_size;
            cfg.optimizer.learning_rate = learning_rate;
            cfg.early_stop.patience = patience;
            cfg.seed = seed;
            auto result = mlp_train(net, train, nullptr, cfg);
            return py::make_tuple(result.net, result.history);
        },
        py::arg("net"), py::arg("x"), py::arg("y"), py::arg("max_epochs") = 200,
        py::arg("batch_size") = 32, py::arg("learning_rate") = 1e-3,
        py::arg("patience") = 5, py::arg("seed") = 0,
        "Train with the mean-absolute-error objective (Adamax), early "
        "stopping on an internal 80/20 validation split.");

    // bayesian network ----------------------------------------------------------
    py::enum_<HeadKind>(m, "HeadKind")
        .value("ALEATORIC", HeadKind::Aleatoric)
        .value("EPISTEMIC", HeadKind::Epistemic);

    py::class_<BnnNet>(m, "BnnNet")
        .def_static(
            "make",
            [](std::size_t input, std::vector<std::size_t> hidden,
               std::size_t channels, HeadKind head, std::uint64_t seed,
               double prior_std, double sigma_fixed) {
                Rng rng(seed);
                return BnnNet::make(input, hidden, channels, head, rng,
                                    prior_std, sigma_fixed);
            },
            py::arg("input_width"), py::arg("hidden"), py::arg("channels"),
            py::arg("head") = HeadKind::Aleatoric, py::arg("seed") = 0,
            py::arg("prior_std") = 1.0, py::arg("sigma_fixed") = 1e-3)
        .def("total_kl", &BnnNet::total_kl)
        .def("to_json", &BnnNet::to_json)
        .def_static("from_json", &BnnNet::from_json)
        .def("save", &BnnNet::save)
        .def_static("load", &BnnNet::load)
        .def_property_readonly("input_width", &BnnNet::input_width)
        .def_property_readonly("channels", &BnnNet::channels);

    py::class_<WeightStatHistory>(m, "WeightStatHistory")
        .def_property_readonly("mu",
                               [](const WeightStatHistory& h) {
                                   std::vector<double> v;
                                   for (const auto& e : h.epochs) v.push_back(e.mu);
                                   return v;
                               })
        .def_property_readonly("sd",
                               [](const WeightStatHistory& h) {
                                   std::vector<double> v;
                                   for (const auto& e : h.epochs) v.push_back(e.sd);
                                   return v;
                               })
        .def_property_readonly("cov", [](const WeightStatHistory& h) {
            std::vector<double> v;
            for (const auto& e : h.epochs) v.push_back(e.cov);
            return v;
        });

    m.def(
        "bnn_train",
        [](const BnnNet& net, py::array_t<double> x, py::array_t<double> y,
           std::size_t max_epochs, std::size_t batch_size, double learning_rate,
           std::size_t patience, double min_delta, std::uint64_t seed) {
            LabeledTable train = labeled_from_numpy(std::move(x), std::move(y));
            TrainConfig cfg = bnn_default_config(10);
            cfg.max_epochs = max_epochs;
            cfg.batch_size = batch_size;
            cfg.optimizer.learning_rate = learning_rate;
            cfg.early_stop.patience = patience;
            cfg.early_stop.min_delta = min_delta;
            cfg.seed = seed;
            auto result = bnn_train(net, train, cfg);
            return py::make_tuple(result.net, result.history,
                                  result.weight_stats);
        },
        py::arg("net"), py::arg("x"), py::arg("y"), py::arg("max_epochs") = 2000,
        py::arg("batch_size") = 1024, py::arg("learning_rate") = 2e-4,
        py::arg("patience") = 30, py::arg("min_delta") = 1e-4,
        py::arg("seed") = 0,
        "Negative-ELBO minibatch training with one weight sample per step.");

    m.def(
        "elbo_loss",
        [](const BnnNet& net, py::array_t<double> x, py::array_t<double> y,
           std::uint64_t seed, double kl_weight) {
            LabeledTable batch = labeled_from_numpy(std::move(x), std::move(y));
            return elbo_loss(net, batch, seed, kl_weight);
        },
        py::arg("net"), py::arg("x"), py::arg("y"), py::arg("seed"),
        py::arg("kl_weight"));

    m.def(
        "predictive_ensemble",
        [](const BnnNet& net, py::array_t<double> rows, std::size_t n_f,
           std::uint64_t seed) {
            return predictive_ensemble(net, table_from_numpy(rows), n_f, seed);
        },
        py::arg("net"), py::arg("rows"), py::arg("n_f") = kDefaultForwardRuns,
        py::arg("seed") = 0,
        "N_f stochastic forward realizations per input row.");

    // synthetic farm --------------------------------------------------------------
    py::class_<TurbineSpec>(m, "TurbineSpec")
        .def(py::init<>())
        .def_readwrite("id", &TurbineSpec::id)
        .def_readwrite("resonance_shift", &TurbineSpec::resonance_shift)
        .def_readwrite("damping", &TurbineSpec::damping)
        .def_readwrite("noise_scale", &TurbineSpec::noise_scale);

    py::class_<FarmSpec>(m, "FarmSpec")
        .def(py::init<>())
        .def_readwrite("seed", &FarmSpec::seed)
        .def_readwrite("months", &FarmSpec::months)
        .def_readwrite("rows_per_month", &FarmSpec::rows_per_month)
        .def_readwrite("sea_scale", &FarmSpec::sea_scale)
        .def_readwrite("wave_wind_coupling", &FarmSpec::wave_wind_coupling)
        .def_readwrite("fleet_leader", &FarmSpec::fleet_leader)
        .def_readwrite("mp01", &FarmSpec::mp01)
        .def_readwrite("mp02", &FarmSpec::mp02)
        .def("to_json", &FarmSpec::to_json)
        .def_static("from_json", &FarmSpec::from_json);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("rows", &Dataset::rows)
        .def_property_readonly("turbine_id",
                               [](const Dataset& ds) { return ds.turbine_id; })
        .def_property_readonly("columns", &Dataset::column_names)
        .def_property_readonly("timestamps",
                               [](const Dataset& ds) { return ds.timestamps; })
        .def("column",
             [](const Dataset& ds, const std::string& name) {
                 return ds.column(name);
             })
        .def("to_numpy", [](const Dataset& ds, std::vector<std::string> cols) {
            Table t = ds.to_table(cols);
            return numpy_from_vector(t.v, t.rows, t.cols);
        });

    py::class_<FarmData>(m, "FarmData")
        .def_readonly("fleet_leader", &FarmData::fleet_leader)
        .def_readonly("mp01", &FarmData::mp01)
        .def_readonly("mp02", &FarmData::mp02);

    m.def("synth_farm", &synth_farm, py::arg("spec"),
          "Generate the three-turbine synthetic farm with DEM labels.");
    m.def(
        "load_csv",
        [](const std::string& path) {
            auto result = load_csv(path);
            return py::make_tuple(result.data, result.dropped_rows);
        },
        py::arg("path"));
    m.def("save_csv", &save_csv, py::arg("dataset"), py::arg("path"));
    m.def("scada_columns", &scada_columns);
    m.def("wave_columns", &wave_columns);
    m.def("accel_columns", &accel_columns, py::arg("lat_level"));
    m.def("label_columns", &label_columns);
    m.def(
        "input_config_columns",
        [](int id) { return InputConfig::from_id(id).input_columns(); },
        py::arg("config_id"),
        "Input column names of one of the twelve monitoring configurations.");

    m.attr("__version__") = "0.1.0";
}
