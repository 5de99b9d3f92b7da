#include "fleetwise/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fleetwise/errors.hpp"
#include "fleetwise/synth_farm.hpp"
#include "fleetwise/workflow.hpp"

namespace fleetwise::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonArgs {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string config_path;
    std::string out_dir;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const std::exception& e) {
        throw IoError("bad config file " + path + ": " + e.what());
    }
}

/// Seeds resolve flag > config > FLEETWISE_SEED > 0.
std::uint64_t resolve_seed(const CommonArgs& args, const json& config) {
    if (args.seed_given) return args.seed;
    if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
    if (const char* env = std::getenv("FLEETWISE_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ValidationError("FLEETWISE_SEED is not an integer");
        }
    }
    return 0;
}

TrainOverrides overrides_from(const json& config, const char* key) {
    TrainOverrides o;
    if (!config.contains(key)) return o;
    const json& j = config[key];
    if (j.contains("max_epochs")) o.max_epochs = j["max_epochs"].get<std::size_t>();
    if (j.contains("batch_size")) o.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("learning_rate")) o.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("hidden")) o.hidden = j["hidden"].get<std::vector<std::size_t>>();
    if (j.contains("sigma_fixed")) o.sigma_fixed = j["sigma_fixed"].get<double>();
    if (j.contains("prior_std")) o.prior_std = j["prior_std"].get<double>();
    if (j.contains("patience")) o.patience = j["patience"].get<std::size_t>();
    if (j.contains("min_delta")) o.min_delta = j["min_delta"].get<double>();
    return o;
}

json overrides_json(const TrainOverrides& o) {
    json j = json::object();
    if (o.max_epochs) j["max_epochs"] = *o.max_epochs;
    if (o.batch_size) j["batch_size"] = *o.batch_size;
    if (o.learning_rate) j["learning_rate"] = *o.learning_rate;
    if (o.hidden) j["hidden"] = *o.hidden;
    if (o.sigma_fixed) j["sigma_fixed"] = *o.sigma_fixed;
    if (o.prior_std) j["prior_std"] = *o.prior_std;
    if (o.patience) j["patience"] = *o.patience;
    if (o.min_delta) j["min_delta"] = *o.min_delta;
    return j;
}

fs::path ensure_out_dir(const std::string& out) {
    if (out.empty()) throw ValidationError("--out directory is required");
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out);
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    std::uint64_t seed, const json& resolved,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json manifest;
    manifest["schema_version"] = 1;
    manifest["command"] = command;
    manifest["seed"] = seed;
    manifest["config"] = resolved;
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest");
    out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
    auto result = load_csv(path);
    if (result.dropped_rows > 0) {
        std::cerr << "note: dropped " << result.dropped_rows
                  << " gap rows from " << path << "\n";
    }
    return std::move(result.data);
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

std::vector<std::string> parse_str_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void write_history_csv(const TrainHistory& history, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write history file");
    out << "epoch,training_loss,validation_loss\n";
    for (std::size_t i = 0; i < history.epochs.size(); ++i) {
        out << (i + 1) << "," << history.epochs[i].training_loss << ",";
        if (history.epochs[i].validation_loss) {
            out << *history.epochs[i].validation_loss;
        }
        out << "\n";
    }
}

void write_weight_stats_csv(const WeightStatHistory& stats,
                            const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write weight stats file");
    out << "epoch,mu,sd,cov\n";
    for (std::size_t i = 0; i < stats.epochs.size(); ++i) {
        const auto& r = stats.epochs[i];
        out << (i + 1) << "," << r.mu << "," << r.sd << "," << r.cov << "\n";
    }
}

// Subcommands -----------------------------------------------------------------

int cmd_synth(const CommonArgs& common) {
    json config = load_config(common.config_path);
    std::uint64_t seed = resolve_seed(common, config);
    fs::path dir = ensure_out_dir(common.out_dir);

    FarmSpec spec;
    if (config.contains("farm")) {
        spec = FarmSpec::from_json(config["farm"].dump());
    }
    spec.seed = seed;

    FarmData farm = synth_farm(spec);
    save_csv(farm.fleet_leader, (dir / "fleet_leader.csv").string());
    save_csv(farm.mp01, (dir / "mp01.csv").string());
    save_csv(farm.mp02, (dir / "mp02.csv").string());
    spec.save((dir / "farm_spec.json").string());

    write_manifest(dir, "synth", seed, json::parse(spec.to_json()), {},
                   {"fleet_leader.csv", "mp01.csv", "mp02.csv",
                    "farm_spec.json"});
    std::cout << "synth: wrote 3 turbines x " << farm.fleet_leader.rows()
              << " rows to " << dir.string() << "\n";
    return kOk;
}

int cmd_train(const CommonArgs& common, const std::string& data_path,
              const std::string& kind, int config_id) {
    json config = load_config(common.config_path);
    std::uint64_t seed = resolve_seed(common, config);
    fs::path dir = ensure_out_dir(common.out_dir);

    Dataset data = load_dataset(data_path);
    json resolved;
    resolved["kind"] = kind;
    resolved["input_config"] = config_id;
    std::vector<std::string> outputs = {"model.json", "input_scaler.json",
                                        "label_scaler.json", "history.csv"};

    if (kind == "dnn") {
        TrainOverrides o = overrides_from(config, "dnn");
        FleetDnn model = train_fleet_dnn(data, config_id, o, seed);
        model.net.save((dir / "model.json").string());
        save_scaler(model.input_scaler, (dir / "input_scaler.json").string());
        save_scaler(model.label_scaler, (dir / "label_scaler.json").string());
        write_history_csv(model.history, dir / "history.csv");
        resolved["overrides"] = overrides_json(o);
    } else if (kind == "bnn" || kind == "ebnn") {
        TrainOverrides o = overrides_from(config, "bnn");
        HeadKind head = kind == "bnn" ? HeadKind::Aleatoric : HeadKind::Epistemic;
        auto result = train_fleet_bnn(data, config_id, head, o, seed);
        result.model.net.save((dir / "model.json").string());
        save_scaler(result.model.input_scaler,
                    (dir / "input_scaler.json").string());
        save_scaler(result.model.label_scaler,
                    (dir / "label_scaler.json").string());
        write_history_csv(result.history, dir / "history.csv");
        write_weight_stats_csv(result.weight_stats, dir / "weight_stats.csv");
        outputs.push_back("weight_stats.csv");
        resolved["overrides"] = overrides_json(o);
    } else {
        throw ValidationError("unknown model kind '" + kind + "'");
    }

    write_manifest(dir, "train", seed, resolved, {data_path}, outputs);
    std::cout << "train: wrote model artifacts to " << dir.string() << "\n";
    return kOk;
}

int cmd_sweep(const CommonArgs& common, const std::string& data_path,
              const std::string& configs_text, const std::string& kinds_text) {
    json config = load_config(common.config_path);
    std::uint64_t seed = resolve_seed(common, config);
    fs::path dir = ensure_out_dir(common.out_dir);

    Dataset data = load_dataset(data_path);
    SweepOptions options;
    options.seed = seed;
    options.dnn = overrides_from(config, "dnn");
    options.bnn = overrides_from(config, "bnn");
    if (config.contains("n_f")) options.n_f = config["n_f"].get<std::size_t>();

    auto configs = parse_int_list(configs_text);
    auto kinds = parse_str_list(kinds_text);
    SweepResult result = input_sweep(data, configs, kinds, options);
    write_sweep_files(result, (dir / "sweep").string());

    json resolved;
    resolved["configs"] = configs;
    resolved["kinds"] = kinds;
    resolved["n_f"] = options.n_f;
    resolved["dnn"] = overrides_json(options.dnn);
    resolved["bnn"] = overrides_json(options.bnn);
    write_manifest(dir, "sweep", seed, resolved, {data_path},
                   {"sweep.csv", "sweep.json"});
    std::cout << "sweep: " << result.entries.size() << " entries written to "
              << dir.string() << "\n";
    return kOk;
}

int cmd_period_study(const CommonArgs& common, const std::string& data_path,
                     const std::string& periods_text, int config_id) {
    json config = load_config(common.config_path);
    std::uint64_t seed = resolve_seed(common, config);
    fs::path dir = ensure_out_dir(common.out_dir);

    Dataset data = load_dataset(data_path);
    PeriodOptions options;
    options.seed = seed;
    options.config_id = config_id;
    options.bnn = overrides_from(config, "bnn");
    if (config.contains("n_f")) options.n_f = config["n_f"].get<std::size_t>();

    auto periods = parse_int_list(periods_text);
    PeriodStudyResult result = period_study(data, periods, options);
    write_period_files(result, (dir / "periods").string());

    json resolved;
    resolved["periods"] = periods;
    resolved["input_config"] = config_id;
    resolved["n_f"] = options.n_f;
    resolved["bnn"] = overrides_json(options.bnn);
    write_manifest(dir, "period-study", seed, resolved, {data_path},
                   {"periods.csv", "periods.json"});
    std::cout << "period-study: " << result.entries.size()
              << " periods written to " << dir.string() << "\n";
    return kOk;
}

int cmd_deploy(const CommonArgs& common, const std::string& model_path,
               const std::string& input_scaler_path,
               const std::string& label_scaler_path, int config_id,
               const std::string& train_ref_path,
               const std::vector<std::string>& turbine_paths,
               std::size_t n_f) {
    json config = load_config(common.config_path);
    std::uint64_t seed = resolve_seed(common, config);
    fs::path dir = ensure_out_dir(common.out_dir);

    FleetBnn model;
    model.net = BnnNet::load(model_path);
    model.input_scaler = load_scaler(input_scaler_path);
    model.label_scaler = load_scaler(label_scaler_path);
    model.config = InputConfig::from_id(config_id);

    Dataset train_ref = load_dataset(train_ref_path);
    std::vector<Dataset> turbines;
    std::vector<std::string> inputs = {model_path, input_scaler_path,
                                       label_scaler_path, train_ref_path};
    for (const auto& path : turbine_paths) {
        turbines.push_back(load_dataset(path));
        inputs.push_back(path);
    }

    auto reports = deploy_farm(model, turbines, train_ref, n_f, seed);
    std::vector<std::string> outputs;
    for (const auto& report : reports) {
        std::string stem = "report_" + report.turbine_id;
        write_report_json(report, (dir / (stem + ".json")).string());
        write_report_csvs(report, (dir / stem).string());
        outputs.push_back(stem + ".json");
        outputs.push_back(stem + "_histogram.csv");
        outputs.push_back(stem + "_box.csv");
        std::cout << "deploy: " << report.turbine_id
                  << " mean_cov_mu=" << report.mean_cov_mu
                  << " mean_r_min=" << report.mean_r_min << "\n";
    }

    json resolved;
    resolved["input_config"] = config_id;
    resolved["n_f"] = n_f;
    write_manifest(dir, "deploy", seed, resolved, inputs, outputs);
    return kOk;
}

int cmd_compare(const CommonArgs& common, const std::string& data_path,
                const std::vector<std::string>& turbine_paths,
                const std::string& kinds_text, int config_id) {
    json config = load_config(common.config_path);
    std::uint64_t seed = resolve_seed(common, config);
    fs::path dir = ensure_out_dir(common.out_dir);

    Dataset data = load_dataset(data_path);
    CompareOptions options;
    options.seed = seed;
    options.config_id = config_id;
    options.dnn = overrides_from(config, "dnn");
    options.bnn = overrides_from(config, "bnn");
    if (config.contains("n_f")) options.n_f = config["n_f"].get<std::size_t>();

    std::array<double, 2> fractions = {1.0 - options.test_fraction,
                                       options.test_fraction};
    auto parts = split(data, fractions, seed);

    std::vector<Dataset> turbines;
    std::vector<std::string> inputs = {data_path};
    for (const auto& path : turbine_paths) {
        turbines.push_back(load_dataset(path));
        inputs.push_back(path);
    }

    auto kinds = parse_str_list(kinds_text);
    CompareResult result =
        compare_models(parts[0], parts[1], turbines, kinds, options);
    write_compare_files(result, (dir / "compare").string());

    json resolved;
    resolved["kinds"] = kinds;
    resolved["input_config"] = config_id;
    resolved["n_f"] = options.n_f;
    write_manifest(dir, "compare", seed, resolved, inputs,
                   {"compare.csv", "compare.json"});
    std::cout << "compare: " << result.entries.size() << " datasets written to "
              << dir.string() << "\n";
    return kOk;
}

int cmd_selfcheck(const CommonArgs& common) {
    json config = load_config(common.config_path);
    std::uint64_t seed = resolve_seed(common, config);
    bool ok = selfcheck(seed == 0 ? 20240501u : seed);
    if (!common.out_dir.empty()) {
        fs::path dir = ensure_out_dir(common.out_dir);
        write_manifest(dir, "selfcheck", seed, json::object(), {}, {});
    }
    if (!ok) throw NumericalError("selfcheck failed");
    std::cout << "selfcheck: all internal oracles passed\n";
    return kOk;
}

void emit_error(int code, const std::string& kind, const std::string& message,
                const std::string& out_dir) {
    json j;
    j["error"] = {{"code", code}, {"kind", kind}, {"message", message}};
    std::cerr << j.dump() << "\n";
    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (!ec) {
            std::ofstream out(fs::path(out_dir) / "error.json");
            if (out) out << j.dump(2) << "\n";
        }
    }
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"fleetwise: farm-wide virtual load monitoring toolkit"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&common](CLI::App* cmd) {
        cmd->add_option("--seed", common.seed, "random seed")
            ->each([&common](const std::string&) { common.seed_given = true; });
        cmd->add_option("--config", common.config_path, "config file (json)");
        cmd->add_option("--out", common.out_dir, "output directory");
    };

    // synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic farm");
    add_common(synth);

    // train
    auto* train = app.add_subcommand("train", "train a fleet-leader model");
    add_common(train);
    std::string train_data, train_kind = "bnn";
    int train_config_id = 10;
    train->add_option("--data", train_data, "labeled dataset csv")->required();
    train->add_option("--kind", train_kind, "dnn | bnn | ebnn");
    train->add_option("--input-config", train_config_id,
                      "input configuration id (1..12)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "input-configuration sweep");
    add_common(sweep);
    std::string sweep_data, sweep_configs = "1,2,3,4,5,6,7,8,9,10,11,12";
    std::string sweep_kinds = "dnn,bnn";
    sweep->add_option("--data", sweep_data, "labeled dataset csv")->required();
    sweep->add_option("--configs", sweep_configs, "comma-separated config ids");
    sweep->add_option("--kinds", sweep_kinds, "comma-separated kinds (dnn,bnn)");

    // period-study
    auto* period = app.add_subcommand("period-study",
                                      "data-collection-period study");
    add_common(period);
    std::string period_data, period_list = "3,6,9,12,15,18,21,24";
    int period_config_id = 10;
    period->add_option("--data", period_data, "labeled dataset csv")->required();
    period->add_option("--periods", period_list, "comma-separated months");
    period->add_option("--input-config", period_config_id,
                       "input configuration id (1..12)");

    // deploy
    auto* deploy = app.add_subcommand("deploy", "farm-wide deployment");
    add_common(deploy);
    std::string deploy_model, deploy_in_scaler, deploy_label_scaler;
    std::string deploy_train_ref;
    std::vector<std::string> deploy_data;
    int deploy_config_id = 10;
    std::size_t deploy_nf = kDefaultForwardRuns;
    deploy->add_option("--model", deploy_model, "trained bnn model json")
        ->required();
    deploy->add_option("--input-scaler", deploy_in_scaler, "input scaler json")
        ->required();
    deploy->add_option("--label-scaler", deploy_label_scaler,
                       "label scaler json")
        ->required();
    deploy->add_option("--train-ref", deploy_train_ref,
                       "fleet-leader training csv (r_min reference)")
        ->required();
    deploy->add_option("--data", deploy_data, "turbine csv (repeatable)")
        ->required();
    deploy->add_option("--input-config", deploy_config_id,
                       "input configuration id (1..12)");
    deploy->add_option("--nf", deploy_nf, "forward runs per row");

    // compare
    auto* compare = app.add_subcommand("compare", "dnn vs bnn comparison");
    add_common(compare);
    std::string compare_data, compare_kinds = "dnn,epistemic_bnn,aleatoric_bnn";
    std::vector<std::string> compare_turbines;
    int compare_config_id = 10;
    compare->add_option("--data", compare_data, "fleet-leader csv")->required();
    compare->add_option("--turbines", compare_turbines,
                        "deployment turbine csvs");
    compare->add_option("--kinds", compare_kinds, "comma-separated kinds");
    compare->add_option("--input-config", compare_config_id,
                        "input configuration id (1..12)");

    // selfcheck
    auto* check = app.add_subcommand("selfcheck", "run the internal oracles");
    add_common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (synth->parsed()) return cmd_synth(common);
        if (train->parsed()) {
            return cmd_train(common, train_data, train_kind, train_config_id);
        }
        if (sweep->parsed()) {
            return cmd_sweep(common, sweep_data, sweep_configs, sweep_kinds);
        }
        if (period->parsed()) {
            return cmd_period_study(common, period_data, period_list,
                                    period_config_id);
        }
        if (deploy->parsed()) {
            return cmd_deploy(common, deploy_model, deploy_in_scaler,
                              deploy_label_scaler, deploy_config_id,
                              deploy_train_ref, deploy_data, deploy_nf);
        }
        if (compare->parsed()) {
            return cmd_compare(common, compare_data, compare_turbines,
                               compare_kinds, compare_config_id);
        }
        if (check->parsed()) return cmd_selfcheck(common);
        return kUsageError;
    } catch (const IoError& e) {
        emit_error(kIoError, "io", e.what(), common.out_dir);
        return kIoError;
    } catch (const ValidationError& e) {
        emit_error(kValidationError, "validation", e.what(), common.out_dir);
        return kValidationError;
    } catch (const NumericalError& e) {
        emit_error(kNumericalError, "numerical", e.what(), common.out_dir);
        return kNumericalError;
    } catch (const std::exception& e) {
        emit_error(kNumericalError, "internal", e.what(), common.out_dir);
        return kNumericalError;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> full = args;
    full.insert(full.begin(), "fleetwise");
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& arg : full) argv.push_back(arg.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace fleetwise::cli
