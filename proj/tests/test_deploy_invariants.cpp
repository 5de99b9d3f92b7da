// Slow end-to-end deployment invariants on the default synthetic farm:
// a converged fleet-leader model is deployed to all three turbines and the
// diagnostic rankings must agree with each other.

#include <doctest.h>

#include <algorithm>

#include "fleetwise/synth_farm.hpp"
#include "fleetwise/workflow.hpp"

using namespace fleetwise;

namespace {

Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(ds.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    idx.resize(std::min(n, idx.size()));
    std::sort(idx.begin(), idx.end());
    return ds.select_rows(idx);
}

}  // namespace

TEST_SUITE_BEGIN("deploy_invariants");

TEST_CASE("diagnostic rankings agree across the default farm") {
    FarmSpec spec;
    spec.seed = 11;
    FarmData farm = synth_farm(spec);
    std::array<double, 2> fr{0.75, 0.25};
    auto parts = split(farm.fleet_leader, fr, spec.seed);

    TrainOverrides o;
    o.max_epochs = 2000;
    o.patience = 50;
    o.min_delta = 1e-5;
    auto fleet = train_fleet_bnn(parts[0], 10, HeadKind::Aleatoric, o, spec.seed);

    std::vector<Dataset> turbines = {subsample(parts[1], 600, 5),
                                     subsample(farm.mp01, 600, 5),
                                     subsample(farm.mp02, 600, 5)};
    auto reports = deploy_farm(fleet.model, turbines, parts[0], 300, spec.seed);
    REQUIRE(reports.size() == 3);
    const auto& fl = reports[0];
    const auto& mp01 = reports[1];
    const auto& mp02 = reports[2];

    // model-uncertainty ranking matches the distance-to-training ranking
    CHECK(fl.mean_cov_mu < mp01.mean_cov_mu);
    CHECK(mp01.mean_cov_mu < mp02.mean_cov_mu);
    CHECK(fl.mean_r_min < mp01.mean_r_min);
    CHECK(mp01.mean_r_min < mp02.mean_r_min);

    // expected log-likelihood ranks the other way around
    REQUIRE(fl.expected_ll.has_value());
    CHECK(*fl.expected_ll > *mp01.expected_ll);
    CHECK(*mp01.expected_ll > *mp02.expected_ll);

    // deploying on the training rows themselves is the in-domain baseline
    std::vector<Dataset> self = {subsample(parts[0], 600, 6)};
    auto self_report = deploy_farm(fleet.model, self, parts[0], 300, spec.seed);
    CHECK(self_report[0].mean_cov_mu < mp01.mean_cov_mu);
    CHECK(self_report[0].mean_cov_mu < mp02.mean_cov_mu);
}

TEST_SUITE_END();
