#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fleetwise/errors.hpp"
#include "fleetwise/synth_farm.hpp"
#include "fleetwise/workflow.hpp"

using namespace fleetwise;
namespace fs = std::filesystem;

namespace {

FarmSpec tiny_spec(std::uint64_t seed) {
    FarmSpec spec;
    spec.seed = seed;
    spec.months = 2;
    spec.rows_per_month = 50;
    return spec;
}

TrainOverrides quick_bnn() {
    TrainOverrides o;
    o.max_epochs = 60;
    o.hidden = std::vector<std::size_t>{8, 8};
    return o;
}

}  // namespace

TEST_SUITE_BEGIN("workflow");

TEST_CASE("month indexing is calendar correct") {
    CHECK(month_index_of(1514764800) == 2018 * 12 + 0);   // 2018-01-01
    CHECK(month_index_of(1517443199) == 2018 * 12 + 0);   // 2018-01-31 23:59:59
    CHECK(month_index_of(1517443200) == 2018 * 12 + 1);   // 2018-02-01
    CHECK(month_index_of(1546300800) == 2019 * 12 + 0);   // 2019-01-01
    CHECK(farm_month_start(0) == 1514764800);
    CHECK(farm_month_start(12) == 1546300800);
}

TEST_CASE("dem_histogram") {
    SUBCASE("equal predictions occupy a single bin with probability one") {
        std::vector<double> dem(25, 3.0), cov(25, 0.1);
        auto h = dem_histogram(dem, cov, 8);
        double total = 0.0;
        std::size_t nonzero = 0;
        for (double p : h.probability) {
            total += p;
            if (p > 0.0) ++nonzero;
        }
        CHECK(total == doctest::Approx(1.0));
        CHECK(nonzero == 1);
    }
    SUBCASE("uniform predictions fill four bins evenly") {
        Rng rng(3);
        std::vector<double> dem, cov;
        for (int i = 0; i < 10000; ++i) {
            dem.push_back(rng.uniform());
            cov.push_back(0.2);
        }
        auto h = dem_histogram(dem, cov, 4);
        for (double p : h.probability) {
            CHECK(p == doctest::Approx(0.25).epsilon(0.08));
            CHECK(std::abs(p - 0.25) < 0.02);
        }
        for (double c : h.mean_cov_mu) CHECK(c == doctest::Approx(0.2));
    }
    SUBCASE("empty row set is rejected") {
        std::vector<double> none;
        CHECK_THROWS_AS(dem_histogram(none, none, 4), ValidationError);
    }
}

TEST_CASE("input_sweep validation and kind selection") {
    FarmData farm = synth_farm(tiny_spec(21));
    SweepOptions options;
    options.seed = 21;
    options.n_f = 20;
    options.dnn.max_epochs = 5;
    options.dnn.hidden = std::vector<std::size_t>{8};
    options.bnn = quick_bnn();

    SUBCASE("duplicate config ids are rejected") {
        CHECK_THROWS_AS(
            input_sweep(farm.fleet_leader, {7, 7}, {"dnn"}, options),
            ValidationError);
    }
    SUBCASE("unknown kinds are rejected") {
        CHECK_THROWS_AS(
            input_sweep(farm.fleet_leader, {7}, {"gp"}, options),
            ValidationError);
    }
    SUBCASE("dnn-only sweeps carry no bnn fields") {
        auto result = input_sweep(farm.fleet_leader, {7, 10}, {"dnn"}, options);
        REQUIRE(result.entries.size() == 2);
        for (const auto& e : result.entries) {
            CHECK(e.kind == "dnn");
            CHECK(e.dnn_percent_error.size() == 2);
        }
    }
}

TEST_CASE("acceleration inputs beat scada-only on the synthetic farm") {
    FarmSpec spec;
    spec.seed = 71;
    spec.months = 8;
    spec.rows_per_month = 100;
    FarmData farm = synth_farm(spec);
    SweepOptions options;
    options.seed = 71;
    options.dnn.max_epochs = 120;
    options.dnn.hidden = std::vector<std::size_t>{32, 32};
    auto result = input_sweep(farm.fleet_leader, {7, 10}, {"dnn"}, options);
    REQUIRE(result.entries.size() == 2);
    double scada_only = (result.entries[0].dnn_percent_error[0] +
                         result.entries[0].dnn_percent_error[1]) / 2.0;
    double with_accel = (result.entries[1].dnn_percent_error[0] +
                         result.entries[1].dnn_percent_error[1]) / 2.0;
    CHECK(with_accel < scada_only);
}

TEST_CASE("period_study structure") {
    FarmSpec spec = tiny_spec(31);
    spec.months = 4;
    FarmData farm = synth_farm(spec);
    PeriodOptions options;
    options.seed = 31;
    options.n_f = 30;
    options.bnn = quick_bnn();

    SUBCASE("single period produces a single entry") {
        auto result = period_study(farm.fleet_leader, {4}, options);
        REQUIRE(result.entries.size() == 1);
        CHECK(result.entries[0].months == 4);
        CHECK(result.entries[0].rows_used > 0);
        CHECK_FALSE(result.entries[0].skipped);
    }
    SUBCASE("non-ascending periods are rejected") {
        CHECK_THROWS_AS(period_study(farm.fleet_leader, {4, 2}, options),
                        ValidationError);
    }
    SUBCASE("rows_used grows with the period") {
        auto result = period_study(farm.fleet_leader, {1, 2, 4}, options);
        REQUIRE(result.entries.size() == 3);
        CHECK(result.entries[0].rows_used < result.entries[1].rows_used);
        CHECK(result.entries[1].rows_used < result.entries[2].rows_used);
    }
}

TEST_CASE("deploy_farm reports") {
    FarmData farm = synth_farm(tiny_spec(41));
    auto fleet = train_fleet_bnn(farm.fleet_leader, 10, HeadKind::Aleatoric,
                                 quick_bnn(), 41);

    SUBCASE("n_f below two propagates the decomposition precondition") {
        CHECK_THROWS_AS(deploy_farm(fleet.model, {farm.mp01},
                                    farm.fleet_leader, 1, 41),
                        ValidationError);
    }
    SUBCASE("reports carry the full surface") {
        auto reports =
            deploy_farm(fleet.model, {farm.mp01, farm.mp02},
                        farm.fleet_leader, 24, 41, 10);
        REQUIRE(reports.size() == 2);
        for (const auto& report : reports) {
            CHECK(report.rows == farm.mp01.rows());
            CHECK(report.r_min.size() == report.rows);
            CHECK(report.cov_mu.size() == report.rows * 2);
            CHECK(report.channels.size() == 2);
            CHECK(report.expected_ll.has_value());  // labels exist
            for (const auto& ch : report.channels) {
                double total = 0.0;
                for (double p : ch.histogram.probability) total += p;
                CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
            }
            CHECK(report.input_marginals.size() == 13);
        }
        CHECK(reports[0].turbine_id == "MP01");
        CHECK(reports[1].turbine_id == "MP02");
    }
    SUBCASE("input width mismatch is rejected") {
        Dataset scada_only =
            select_inputs(farm.mp01, InputConfig::from_id(7));
        CHECK_THROWS_AS(deploy_farm(fleet.model, {scada_only},
                                    farm.fleet_leader, 8, 41),
                        ValidationError);
    }
    SUBCASE("reports are reproducible bit for bit") {
        auto a = deploy_farm(fleet.model, {farm.mp01}, farm.fleet_leader, 16, 7);
        auto b = deploy_farm(fleet.model, {farm.mp01}, farm.fleet_leader, 16, 7);
        CHECK(a[0].expected_y == b[0].expected_y);
        CHECK(a[0].cov_mu == b[0].cov_mu);
        CHECK(a[0].r_min == b[0].r_min);
    }
}

TEST_CASE("compare_models deduplicates kinds and fills the table") {
    FarmData farm = synth_farm(tiny_spec(51));
    std::array<double, 2> fr{0.75, 0.25};
    auto parts = split(farm.fleet_leader, fr, 51);
    CompareOptions options;
    options.seed = 51;
    options.n_f = 24;
    options.dnn.max_epochs = 5;
    options.dnn.hidden = std::vector<std::size_t>{8};
    options.bnn = quick_bnn();

    auto result = compare_models(
        parts[0], parts[1], {farm.mp01},
        {"dnn", "epistemic_bnn", "dnn", "aleatoric_bnn"}, options);
    CHECK(result.kinds ==
          std::vector<std::string>{"dnn", "epistemic_bnn", "aleatoric_bnn"});
    REQUIRE(result.entries.size() == 2);  // fl_test + mp01
    const auto& test_entry = result.entries[0];
    CHECK(test_entry.percent_error.count("dnn") == 1);
    CHECK(test_entry.percent_error.count("epistemic_bnn") == 1);
    CHECK(test_entry.mean_cov_mu.count("epistemic_bnn") == 1);
    CHECK(test_entry.mean_cov_mu.count("aleatoric_bnn") == 1);
    CHECK(test_entry.percent_error.at("dnn").size() == 2);

    CHECK_THROWS_AS(compare_models(parts[0], parts[1], {}, {"svm"}, options),
                    ValidationError);
}

TEST_CASE("report writers emit the plot-ready files") {
    FarmData farm = synth_farm(tiny_spec(61));
    auto fleet = train_fleet_bnn(farm.fleet_leader, 10, HeadKind::Aleatoric,
                                 quick_bnn(), 61);
    auto reports =
        deploy_farm(fleet.model, {farm.mp01}, farm.fleet_leader, 16, 61, 6);
    auto dir = fs::temp_directory_path() / "fleetwise_tests" / "report";
    fs::create_directories(dir);
    write_report_json(reports[0], (dir / "r.json").string());
    write_report_csvs(reports[0], (dir / "r").string());
    CHECK(fs::exists(dir / "r.json"));
    CHECK(fs::exists(dir / "r_histogram.csv"));
    CHECK(fs::exists(dir / "r_box.csv"));
}

TEST_SUITE_END();
