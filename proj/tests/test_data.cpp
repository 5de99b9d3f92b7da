#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fleetwise/dataset.hpp"
#include "fleetwise/errors.hpp"
#include "fleetwise/fatigue.hpp"
#include "fleetwise/synth_farm.hpp"
#include "oracles.hpp"

using namespace fleetwise;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    auto dir = fs::temp_directory_path() / "fleetwise_tests";
    fs::create_directories(dir);
    return dir / name;
}

FarmSpec small_spec(std::uint64_t seed) {
    FarmSpec spec;
    spec.seed = seed;
    spec.months = 2;
    spec.rows_per_month = 60;
    return spec;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("csv with only a header loads as an empty dataset") {
    auto path = temp_file("empty.csv");
    std::ofstream(path) << "μ[RPM],μ[WSpd]\n";
    auto result = load_csv(path.string());
    CHECK(result.data.rows() == 0);
    CHECK(result.dropped_rows == 0);
}

TEST_CASE("gap rows are dropped and counted") {
    auto path = temp_file("gaps.csv");
    std::ofstream(path) << "a,b\n1,2\n3,\n4,5\n6,7\n";
    auto result = load_csv(path.string());
    CHECK(result.data.rows() == 3);
    CHECK(result.dropped_rows == 1);
    CHECK(result.data.column("a") == std::vector<double>{1, 4, 6});
}

TEST_CASE("missing mandatory column is rejected") {
    auto path = temp_file("short.csv");
    std::ofstream(path) << "a,b\n1,2\n";
    CHECK_THROWS_AS(load_csv(path.string(), {"μ[RPM]"}), ValidationError);
}

TEST_CASE("unparseable cell is an io error") {
    auto path = temp_file("badcell.csv");
    std::ofstream(path) << "a,b\n1,zap\n";
    CHECK_THROWS_AS(load_csv(path.string()), IoError);
}

TEST_CASE("csv round trip preserves values exactly") {
    Dataset ds;
    ds.turbine_id = "T1";
    ds.timestamps = {1514764800, 1514765400, 1514766000};
    ds.add_column("x", {0.1, -2.5e-17, 3.141592653589793});
    ds.add_column("y", {1e300, 7.0, -0.0});
    auto path = temp_file("roundtrip.csv");
    save_csv(ds, path.string());
    auto loaded = load_csv(path.string()).data;
    CHECK(loaded.turbine_id == "T1");
    CHECK(loaded.timestamps == ds.timestamps);
    for (const char* col : {"x", "y"}) {
        auto& a = ds.column(col);
        auto& b = loaded.column(col);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
}

TEST_CASE("scaler maps [1,3] to [-1,1]") {
    Dataset ds;
    ds.add_column("v", {1.0, 3.0});
    auto scaler = fit_scaler(ds, {"v"});
    CHECK(scaler.mean[0] == doctest::Approx(2.0));
    CHECK(scaler.stddev[0] == doctest::Approx(1.0));
    auto scaled = apply_scaler(scaler, ds);
    CHECK(scaled.column("v")[0] == doctest::Approx(-1.0));
    CHECK(scaled.column("v")[1] == doctest::Approx(1.0));
}

TEST_CASE("scaling a training set zero-means it") {
    FarmData farm = synth_farm(small_spec(3));
    auto cols = InputConfig::from_id(12).input_columns();
    auto scaler = fit_scaler(farm.fleet_leader, cols);
    auto scaled = apply_scaler(scaler, farm.fleet_leader);
    for (const auto& name : cols) {
        double m = oracles::mean(scaled.column(name));
        double v = oracles::variance(scaled.column(name));
        CHECK(std::abs(m) < 1e-9);
        CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("constant columns are flagged and passed through") {
    Dataset ds;
    ds.add_column("flat", {2.0, 2.0, 2.0});
    auto scaler = fit_scaler(ds, {"flat"});
    CHECK(scaler.constant[0]);
    auto scaled = apply_scaler(scaler, ds);
    CHECK(scaled.column("flat") == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("scaler persists and reloads identically") {
    Dataset ds;
    ds.add_column("a", {1.0, 2.0, 4.0});
    ds.add_column("b", {-1.0, 0.0, 1.0});
    auto scaler = fit_scaler(ds, {"a", "b"});
    auto path = temp_file("scaler.json");
    save_scaler(scaler, path.string());
    auto reloaded = load_scaler(path.string());
    auto first = apply_scaler(scaler, ds);
    auto second = apply_scaler(reloaded, ds);
    for (const char* col : {"a", "b"}) {
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            CHECK(first.column(col)[i] == second.column(col)[i]);
        }
    }
}

TEST_CASE("split is exhaustive, disjoint and seed-deterministic") {
    Dataset ds;
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    ds.add_column("i", v);

    SUBCASE("identity split") {
        std::array<double, 1> all{1.0};
        auto parts = split(ds, all, 9);
        REQUIRE(parts.size() == 1);
        CHECK(parts[0].rows() == 1000);
    }
    SUBCASE("75/25 split sizes and reproducibility") {
        std::array<double, 2> fr{0.75, 0.25};
        auto parts = split(ds, fr, 9);
        CHECK(parts[0].rows() == 750);
        CHECK(parts[1].rows() == 250);
        auto again = split(ds, fr, 9);
        CHECK(parts[0].column("i") == again[0].column("i"));
        CHECK(parts[1].column("i") == again[1].column("i"));

        std::vector<double> joined = parts[0].column("i");
        auto& rest = parts[1].column("i");
        joined.insert(joined.end(), rest.begin(), rest.end());
        std::sort(joined.begin(), joined.end());
        for (std::size_t i = 0; i < joined.size(); ++i) {
            CHECK(joined[i] == static_cast<double>(i));
        }
    }
    SUBCASE("fractions must sum to one") {
        std::array<double, 2> bad{0.6, 0.3};
        CHECK_THROWS_AS(split(ds, bad, 1), ValidationError);
    }
}

TEST_CASE("input configurations expose the paper's column counts") {
    CHECK(InputConfig::from_id(7).width() == 7);    // SCADA only
    CHECK(InputConfig::from_id(6).width() == 28);   // SCADA + wave + 3 accels
    CHECK(InputConfig::from_id(10).width() == 13);  // SCADA + LAT-077
    CHECK(InputConfig::from_id(1).width() == 10);
    CHECK(InputConfig::from_id(12).width() == 25);
    CHECK_THROWS_AS(InputConfig::from_id(0), ValidationError);
    CHECK_THROWS_AS(InputConfig::from_id(13), ValidationError);
}

TEST_CASE("configurations nest: 7 in 8 in 11 in 12") {
    auto contains = [](const std::vector<std::string>& big,
                       const std::vector<std::string>& small) {
        for (const auto& c : small) {
            if (std::find(big.begin(), big.end(), c) == big.end()) return false;
        }
        return true;
    };
    auto c7 = InputConfig::from_id(7).input_columns();
    auto c8 = InputConfig::from_id(8).input_columns();
    auto c11 = InputConfig::from_id(11).input_columns();
    auto c12 = InputConfig::from_id(12).input_columns();
    CHECK(contains(c8, c7));
    CHECK(contains(c11, c8));
    CHECK(contains(c12, c11));
}

TEST_CASE("select_inputs keeps labels and rejects missing groups") {
    FarmData farm = synth_farm(small_spec(4));
    auto selected = select_inputs(farm.fleet_leader, InputConfig::from_id(10));
    CHECK(selected.n_columns() == 13 + 2);  // inputs + DEM labels
    CHECK(selected.has_labels());

    Dataset scada_only = select_inputs(farm.fleet_leader, InputConfig::from_id(7));
    CHECK_THROWS_AS(select_inputs(scada_only, InputConfig::from_id(10)),
                    ValidationError);
}

TEST_CASE("synth farm is deterministic per seed") {
    FarmData a = synth_farm(small_spec(77));
    FarmData b = synth_farm(small_spec(77));
    CHECK(a.fleet_leader.column("DEM_tn") == b.fleet_leader.column("DEM_tn"));
    CHECK(a.mp02.column("rms[acc_FA]@077") == b.mp02.column("rms[acc_FA]@077"));
}

TEST_CASE("turbine-irrelevant spec edits leave other turbines untouched") {
    FarmSpec spec = small_spec(5);
    FarmData base = synth_farm(spec);
    spec.mp02.resonance_shift = 0.35;
    spec.mp02.damping = 0.5;
    FarmData tweaked = synth_farm(spec);
    CHECK(base.fleet_leader.column("DEM_tl") == tweaked.fleet_leader.column("DEM_tl"));
    CHECK(base.mp01.column("rms[acc_SS]@038") == tweaked.mp01.column("rms[acc_SS]@038"));
    CHECK(base.mp02.column("rms[acc_SS]@038") != tweaked.mp02.column("rms[acc_SS]@038"));
}

TEST_CASE("acceleration marginals: identical generators vs shifted resonance") {
    FarmSpec spec = small_spec(6);
    spec.months = 3;

    SUBCASE("no shift: statistically indistinguishable") {
        spec.mp02 = {"MP02", 0.0, 1.0, 1.0};
        FarmData farm = synth_farm(spec);
        double p = oracles::ks_two_sample_p(
            farm.fleet_leader.column("rms[acc_FA]@077"),
            farm.mp02.column("rms[acc_FA]@077"));
        CHECK(p > 0.01);
    }
    SUBCASE("default 20% shift: marginals differ") {
        FarmData farm = synth_farm(spec);
        double p = oracles::ks_two_sample_p(
            farm.fleet_leader.column("rms[acc_FA]@077"),
            farm.mp02.column("rms[acc_FA]@077"));
        CHECK(p < 1e-3);
    }
}

TEST_CASE("stored DEM labels reproduce exactly from the emitted series") {
    FarmSpec spec = small_spec(8);
    spec.months = 1;
    spec.rows_per_month = 10;
    FarmData farm = synth_farm(spec);
    for (std::size_t slot = 0; slot < 3; ++slot) {
        const Dataset& ds = farm.by_slot(slot);
        for (std::size_t row = 0; row < ds.rows(); row += 3) {
            for (int channel = 0; channel < 2; ++channel) {
                LoadSeries series = synth_moment_series(spec, slot, row, channel);
                double label = dem(rainflow_count(series, spec.spectrum_bins), spec.sn);
                const char* col = channel == 0 ? "DEM_tl" : "DEM_tn";
                CHECK(ds.column(col)[row] == label);
            }
        }
    }
}

TEST_CASE("farm spec round trips through json") {
    FarmSpec spec = small_spec(123);
    spec.mp02.resonance_shift = 0.27;
    spec.sea_scale = 1.4;
    auto path = temp_file("farm_spec.json");
    spec.save(path.string());
    FarmSpec loaded = FarmSpec::load(path.string());
    CHECK(loaded.seed == spec.seed);
    CHECK(loaded.mp02.resonance_shift == spec.mp02.resonance_shift);
    CHECK(loaded.sea_scale == spec.sea_scale);
    FarmData a = synth_farm(spec);
    FarmData b = synth_farm(loaded);
    CHECK(a.mp02.column("DEM_tn") == b.mp02.column("DEM_tn"));
}

TEST_SUITE_END();
