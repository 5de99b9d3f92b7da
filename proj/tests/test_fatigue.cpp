#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fleetwise/errors.hpp"
#include "fleetwise/fatigue.hpp"
#include "fleetwise/rng.hpp"
#include "oracles.hpp"

using namespace fleetwise;

namespace {

LoadSeries triangle_wave(double mean, double amplitude, std::size_t periods,
                         std::size_t steps_per_period = 8) {
    LoadSeries series;
    series.dt = 1.0;
    for (std::size_t p = 0; p < periods; ++p) {
        for (std::size_t s = 0; s < steps_per_period; ++s) {
            double phase = static_cast<double>(s) / steps_per_period;
            double v = phase < 0.5 ? 4.0 * phase - 1.0 : 3.0 - 4.0 * phase;
            series.samples.push_back(mean + amplitude * v);
        }
    }
    series.samples.push_back(mean - amplitude);  // close the last cycle
    return series;
}

LoadSeries random_series(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    LoadSeries series;
    series.dt = 1.0;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v = 0.85 * v + rng.gaussian();
        series.samples.push_back(10.0 + v);
    }
    return series;
}

}  // namespace

TEST_SUITE_BEGIN("fatigue");

TEST_CASE("triangle wave counts one full cycle per period") {
    const double range = 7.0;
    auto series = triangle_wave(3.0, range / 2.0, 100);
    auto spectrum = rainflow_count(series, 128);
    // every cycle has the same range, so exactly one occupied bin
    REQUIRE(spectrum.bins.size() == 1);
    CHECK(spectrum.bins[0].range == doctest::Approx(range).epsilon(1e-12));
    CHECK(spectrum.total_count() == doctest::Approx(100.0));
}

TEST_CASE("monotone ramp is a single half cycle") {
    LoadSeries ramp;
    ramp.dt = 1.0;
    for (int i = 0; i <= 10; ++i) ramp.samples.push_back(0.5 * i);
    auto spectrum = rainflow_count(ramp, 16);
    REQUIRE(spectrum.bins.size() == 1);
    CHECK(spectrum.bins[0].count == doctest::Approx(0.5));
    CHECK(spectrum.bins[0].range == doctest::Approx(5.0));
}

TEST_CASE("constant series yields an empty spectrum") {
    LoadSeries flat;
    flat.samples.assign(50, 4.2);
    auto spectrum = rainflow_count(flat, 32);
    CHECK(spectrum.empty());
    CHECK(dem(spectrum, {}) == 0.0);
}

TEST_CASE("binned damage matches the unbinned three-point reference") {
    SnParams sn;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto series = random_series(seed, 1000);
        auto spectrum = rainflow_count(series, 128);
        double binned = 0.0;
        for (const auto& bin : spectrum.bins) {
            binned += bin.count * std::pow(bin.range, sn.m);
        }
        double reference =
            oracles::damage_of(oracles::rainflow_3pt(series.samples), sn.m);
        CHECK(binned == doctest::Approx(reference).epsilon(0.01));
    }
}

TEST_CASE("cycle count bounded by turning points") {
    auto series = random_series(9, 500);
    auto tp = turning_points(series.samples);
    auto cycles = rainflow_cycles(series.samples);
    double total = 0.0, halves = 0.0;
    for (const auto& c : cycles) {
        total += c.count;
        if (c.count == 0.5) halves += 1.0;
    }
    CHECK(total <= static_cast<double>(tp.size()) / 2.0 + 0.5 * halves);
}

TEST_CASE("dem closed-form examples") {
    SnParams sn{1.0, 3.0, 1e7};
    const double range = 5.0;

    SUBCASE("n = N_eq collapses to the range itself") {
        CycleSpectrum spec{{{range, sn.n_eq}}, 1};
        CHECK(dem(spec, sn) == doctest::Approx(range).epsilon(1e-12));
    }
    SUBCASE("n = N_eq/8 at m=3 halves the range") {
        CycleSpectrum spec{{{range, sn.n_eq / 8.0}}, 1};
        CHECK(dem(spec, sn) == doctest::Approx(range / 2.0).epsilon(1e-12));
    }
    SUBCASE("two bins match direct summation") {
        CycleSpectrum spec{{{2.0, 300.0}, {6.0, 40.0}}, 2};
        double direct = std::pow(
            (300.0 * std::pow(2.0, 3.0) + 40.0 * std::pow(6.0, 3.0)) / 1e7,
            1.0 / 3.0);
        CHECK(dem(spec, sn) == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("miner damage examples and identity") {
    SnParams sn{5e12, 3.0, 1e7};

    SUBCASE("empty spectrum has zero damage") {
        CHECK(miner_damage({}, sn) == 0.0);
    }
    SUBCASE("n = k * R^-m accumulates exactly unit damage") {
        const double range = 12.0;
        double n = sn.k * std::pow(range, -sn.m);
        CycleSpectrum spec{{{range, n}}, 1};
        CHECK(miner_damage(spec, sn) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("damage equals N_eq * DEM^m / k for any spectrum") {
        Rng rng(4);
        CycleSpectrum spec;
        spec.n_bins = 8;
        for (int i = 0; i < 8; ++i) {
            spec.bins.push_back({0.5 + rng.uniform() * 9.0, rng.uniform() * 200.0});
        }
        std::sort(spec.bins.begin(), spec.bins.end(),
                  [](auto& a, auto& b) { return a.range < b.range; });
        double lhs = miner_damage(spec, sn);
        double rhs = sn.n_eq * std::pow(dem(spec, sn), sn.m) / sn.k;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("dem is scale equivariant and monotone") {
    Rng rng(12);
    SnParams sn;
    CycleSpectrum spec;
    spec.n_bins = 6;
    for (int i = 0; i < 6; ++i) {
        spec.bins.push_back({1.0 + rng.uniform() * 4.0, 10.0 + rng.uniform() * 50.0});
    }
    double base = dem(spec, sn);

    SUBCASE("scaling ranges by c scales dem by c") {
        const double c = 3.7;
        CycleSpectrum scaled = spec;
        for (auto& bin : scaled.bins) bin.range *= c;
        CHECK(dem(scaled, sn) == doctest::Approx(c * base).epsilon(1e-12));
    }
    SUBCASE("raising any count never lowers dem") {
        CycleSpectrum bumped = spec;
        bumped.bins[2].count += 25.0;
        CHECK(dem(bumped, sn) >= base);
        bumped = spec;
        bumped.bins[4].range += 0.5;
        CHECK(dem(bumped, sn) >= base);
    }
    SUBCASE("larger slope m leans toward the max range") {
        // single-max-bin limit: normalize by count so only range weighting acts
        SnParams m3{1.0, 3.0, 1e7};
        SnParams m10{1.0, 10.0, 1e7};
        double d3 = dem(spec, m3) / std::pow(spec.total_count() / m3.n_eq, 1.0 / m3.m);
        double d10 = dem(spec, m10) / std::pow(spec.total_count() / m10.n_eq, 1.0 / m10.m);
        CHECK(d10 >= d3);
        double max_range = 0.0;
        for (const auto& bin : spec.bins) max_range = std::max(max_range, bin.range);
        CHECK(d10 <= max_range * 1.0001);
    }
}

TEST_CASE("load series csv ingestion") {
    auto path = std::filesystem::temp_directory_path() / "fleetwise_series.csv";
    {
        std::ofstream out(path);
        out << "t_s,moment_MNm\n";
        for (int i = 0; i < 8; ++i) {
            out << (0.5 * i) << "," << (i % 2 == 0 ? -3.0 : 3.0) << "\n";
        }
    }
    LoadSeries series = load_series_csv(path.string());
    CHECK(series.samples.size() == 8);
    CHECK(series.dt == doctest::Approx(0.5));
    CHECK(series.samples[1] == 3.0);
    CHECK_THROWS_AS(load_series_csv("/nonexistent/series.csv"), IoError);
}

TEST_CASE("rainflow input validation") {
    LoadSeries tiny;
    tiny.samples = {1.0};
    CHECK_THROWS_AS(rainflow_count(tiny, 16), ValidationError);
    LoadSeries bad;
    bad.samples = {1.0, std::nan("")};
    CHECK_THROWS_AS(rainflow_count(bad, 16), ValidationError);
    CHECK_THROWS_AS(rainflow_count(random_series(1, 10), 0), ValidationError);
}

TEST_SUITE_END();
