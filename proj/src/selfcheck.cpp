#include <cmath>
#include <cstdio>
#include <vector>

#include "fleetwise/bnn.hpp"
#include "fleetwise/cli.hpp"
#include "fleetwise/fatigue.hpp"
#include "fleetwise/metrics.hpp"
#include "fleetwise/nnet_train.hpp"
#include "fleetwise/rng.hpp"

namespace fleetwise::cli {

namespace {

// Reference three-point rainflow (the classic standard formulation),
// deliberately separate from the production four-point routine.
std::vector<Cycle> reference_rainflow(std::span<const double> samples) {
    auto tp = turning_points(samples);
    std::vector<Cycle> cycles;
    std::vector<double> buffer;
    std::size_t start = 0;
    for (double point : tp) {
        buffer.push_back(point);
        while (buffer.size() - start >= 3) {
            std::size_t n = buffer.size();
            double x = std::abs(buffer[n - 1] - buffer[n - 2]);
            double y = std::abs(buffer[n - 2] - buffer[n - 3]);
            if (x < y) break;
            if (n - start == 3) {
                // Range contains the starting point: half cycle.
                cycles.push_back({y, 0.5});
                ++start;
            } else {
                cycles.push_back({y, 1.0});
                buffer.erase(buffer.end() - 3, buffer.end() - 1);
            }
        }
    }
    for (std::size_t i = start + 1; i < buffer.size(); ++i) {
        cycles.push_back({std::abs(buffer[i] - buffer[i - 1]), 0.5});
    }
    return cycles;
}

double cycles_damage(const std::vector<Cycle>& cycles, double m) {
    double damage = 0.0;
    for (const auto& c : cycles) damage += c.count * std::pow(c.range, m);
    return damage;
}

bool report(const char* name, bool ok, double value, double limit) {
    std::printf("[%s] %-34s value=%.3e limit=%.3e\n", ok ? "PASS" : "FAIL",
                name, value, limit);
    return ok;
}

bool check_kl_monte_carlo(std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        GaussianPosterior q{rng.uniform(-2.0, 2.0),
                            softplus_inverse(rng.uniform(0.2, 2.0))};
        Gaussian p{0.0, rng.uniform(0.3, 2.0)};
        double closed = gaussian_kl(q, p);

        const std::size_t n = 200000;
        double acc = 0.0;
        double sq = q.sigma();
        for (std::size_t i = 0; i < n; ++i) {
            double theta = q.mu + sq * rng.gaussian();
            double zq = (theta - q.mu) / sq;
            double zp = (theta - p.mean) / p.std;
            acc += -std::log(sq) - 0.5 * zq * zq + std::log(p.std) +
                   0.5 * zp * zp;
        }
        double mc = acc / static_cast<double>(n);
        double err = std::abs(closed - mc) / std::max(std::abs(closed), 0.05);
        worst = std::max(worst, err);
    }
    return report("kl closed-form vs monte carlo", worst < 0.02, worst, 0.02);
}

bool check_gradients(std::uint64_t seed) {
    Rng rng(seed + 1);
    LabeledTable batch;
    batch.x.rows = batch.y.rows = 4;
    batch.x.cols = 3;
    batch.y.cols = 2;
    for (int i = 0; i < 12; ++i) batch.x.v.push_back(rng.gaussian());
    for (int i = 0; i < 8; ++i) batch.y.v.push_back(rng.gaussian() + 2.0);

    DenseNet dnn = DenseNet::make(3, {5}, 2, rng);
    double dnn_err = finite_diff_check(dnn, batch, 1e-6, "mae");

    BnnNet bnn = BnnNet::make(3, {4}, 2, HeadKind::Aleatoric, rng);
    std::vector<double> analytic;
    elbo_loss_and_grad(bnn, batch, seed, 0.5, analytic);
    std::vector<double> params = bnn.parameters();
    BnnNet work = bnn;
    double bnn_err = 0.0;
    const double eps = 1e-6;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double saved = params[i];
        params[i] = saved + eps;
        work.set_parameters(params);
        double up = elbo_loss(work, batch, seed, 0.5);
        params[i] = saved - eps;
        work.set_parameters(params);
        double down = elbo_loss(work, batch, seed, 0.5);
        params[i] = saved;
        double fd = (up - down) / (2.0 * eps);
        double err = std::abs(analytic[i] - fd) /
                     std::max(std::abs(analytic[i]), 1e-6);
        bnn_err = std::max(bnn_err, err);
    }
    double worst = std::max(dnn_err, bnn_err);
    return report("analytic vs central differences", worst < 1e-3, worst, 1e-3);
}

bool check_variance_identity(std::uint64_t seed) {
    Rng rng(seed + 2);
    PredictiveSampleSet set;
    set.n_rows = 6;
    set.n_f = 64;
    set.channels = 2;
    for (std::size_t i = 0; i < set.n_rows * set.n_f * set.channels; ++i) {
        set.mu.push_back(3.0 + rng.gaussian());
        set.sigma.push_back(0.2 + 0.5 * rng.uniform());
    }
    auto d = decompose(set);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.total_var.size(); ++i) {
        double lhs = d.aleatory_var[i] + d.epistemic_var[i];
        worst = std::max(worst, std::abs(lhs - d.total_var[i]) /
                                    std::max(d.total_var[i], 1e-30));
    }
    return report("total-variance identity", worst <= 1e-12, worst, 1e-12);
}

bool check_rainflow_reference(std::uint64_t seed) {
    Rng rng(seed + 3);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        LoadSeries series;
        series.dt = 1.0;
        double v = 0.0;
        for (int i = 0; i < 1000; ++i) {
            v = 0.9 * v + rng.gaussian();
            series.samples.push_back(5.0 + v);
        }
        auto spectrum = rainflow_count(series, 128);
        SnParams sn;
        double binned = 0.0;
        for (const auto& bin : spectrum.bins) {
            binned += bin.count * std::pow(bin.range, sn.m);
        }
        double reference = cycles_damage(reference_rainflow(series.samples), sn.m);
        worst = std::max(worst,
                         std::abs(binned - reference) / std::max(reference, 1e-30));
    }
    return report("rainflow vs three-point reference", worst < 0.01, worst, 0.01);
}

}  // namespace

bool selfcheck(std::uint64_t seed) {
    bool ok = true;
    ok &= check_kl_monte_carlo(seed);
    ok &= check_gradients(seed);
    ok &= check_variance_identity(seed);
    ok &= check_rainflow_reference(seed);
    return ok;
}

}  // namespace fleetwise::cli
