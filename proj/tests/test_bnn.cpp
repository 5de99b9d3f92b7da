#include <doctest.h>

#include <cmath>

#include "fleetwise/bnn.hpp"
#include "fleetwise/errors.hpp"
#include "fleetwise/metrics.hpp"
#include "oracles.hpp"

using namespace fleetwise;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

/// Posterior with sigma pinned at the floor, so realizations equal mu.
GaussianPosterior collapsed(double mu) { return {mu, -40.0}; }

void collapse_net(BnnNet& net) {
    for (auto& layer : net.layers()) {
        for (auto& q : layer.w) q.rho = -40.0;
        for (auto& q : layer.b) q.rho = -40.0;
    }
}

LabeledTable hetero_toy(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LabeledTable data;
    data.x.rows = data.y.rows = n;
    data.x.cols = data.y.cols = 1;
    for (std::size_t i = 0; i < n; ++i) {
        double x = rng.uniform(-2.0, 2.0);
        double s = 0.1 + 0.1 * x * x;
        data.x.v.push_back(x);
        data.y.v.push_back(std::sin(x) + s * rng.gaussian());
    }
    return data;
}

}  // namespace

TEST_SUITE_BEGIN("bnn");

TEST_CASE("gaussian kl closed form") {
    SUBCASE("identical distributions have zero divergence") {
        GaussianPosterior q{0.0, softplus_inverse(1.0)};
        CHECK(gaussian_kl(q, {0.0, 1.0}) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("unit mean offset against the standard prior gives 1/2") {
        GaussianPosterior q{1.0, softplus_inverse(1.0)};
        CHECK(gaussian_kl(q, {0.0, 1.0}) == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("monte carlo estimate agrees within 1%") {
        Rng rng(17);
        for (int trial = 0; trial < 4; ++trial) {
            GaussianPosterior q{rng.uniform(-1.5, 1.5),
                                softplus_inverse(rng.uniform(0.3, 1.8))};
            Gaussian p{0.0, rng.uniform(0.5, 1.5)};
            double closed = gaussian_kl(q, p);
            double sq = q.sigma();
            double acc = 0.0;
            const std::size_t n = 1000000;
            for (std::size_t i = 0; i < n; ++i) {
                double theta = q.mu + sq * rng.gaussian();
                double zq = (theta - q.mu) / sq;
                double zp = (theta - p.mean) / p.std;
                acc += -std::log(sq) - 0.5 * zq * zq + std::log(p.std) +
                       0.5 * zp * zp;
            }
            double mc = acc / static_cast<double>(n);
            CHECK(closed ==
                  doctest::Approx(mc).epsilon(0.01).scale(std::max(closed, 0.1)));
        }
    }
    SUBCASE("never negative, zero only at equality") {
        Rng rng(18);
        for (int trial = 0; trial < 200; ++trial) {
            GaussianPosterior q{rng.uniform(-3.0, 3.0),
                                rng.uniform(-4.0, 2.0)};
            Gaussian p{0.0, rng.uniform(0.2, 3.0)};
            double kl = gaussian_kl(q, p);
            CHECK(kl >= -1e-15);
            if (std::abs(q.mu) > 1e-3 || std::abs(q.sigma() - p.std) > 1e-3) {
                CHECK(kl > 0.0);
            }
        }
    }
}

TEST_CASE("sample_weights realizes the posterior") {
    SUBCASE("collapsed sigma returns mu exactly up to the floor") {
        VariationalLayer layer;
        layer.in = 2;
        layer.out = 1;
        layer.w = {collapsed(0.7), collapsed(-1.1)};
        layer.b = {collapsed(0.25)};
        layer.prior = {0.0, 1.0};
        Rng rng(1);
        auto real = sample_weights(layer, rng);
        CHECK(real.w[0] == doctest::Approx(0.7).epsilon(1e-5));
        CHECK(real.w[1] == doctest::Approx(-1.1).epsilon(1e-5));
        CHECK(real.b[0] == doctest::Approx(0.25).epsilon(1e-5));
    }
    SUBCASE("standard posterior matches N(0,1) moments over 1e5 draws") {
        VariationalLayer layer;
        layer.in = 1;
        layer.out = 1;
        layer.w = {GaussianPosterior{0.0, softplus_inverse(1.0)}};
        layer.b = {collapsed(0.0)};
        layer.prior = {0.0, 1.0};
        Rng rng(2);
        std::vector<double> draws;
        for (int i = 0; i < 100000; ++i) {
            draws.push_back(sample_weights(layer, rng).w[0]);
        }
        CHECK(std::abs(oracles::mean(draws)) < 0.02);
        CHECK(oracles::variance(draws) == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("flipout gives rows distinct perturbations, same marginal law") {
    // Single linear layer, epistemic head, two identical rows with label 0
    // and sigma_fixed 1: the batch loss is 2*c + (y1^2 + y2^2)/2, a direct
    // window onto the per-row realized weights y_i.
    Rng init(3);
    BnnNet net = BnnNet::make(1, {}, 1, HeadKind::Epistemic, init, 1.0, 1.0,
                              SamplingMode::Flipout);
    net.layers()[0].w[0] = {1.5, softplus_inverse(0.5)};
    net.layers()[0].b[0] = collapsed(0.0);
    BnnNet shared = net;
    shared.set_sampling_mode(SamplingMode::SharedEps);

    LabeledTable batch;
    batch.x.rows = batch.y.rows = 2;
    batch.x.cols = batch.y.cols = 1;
    batch.x.v = {1.0, 1.0};
    batch.y.v = {0.0, 0.0};

    std::vector<double> flip_losses, shared_losses;
    for (std::uint64_t k = 0; k < 3000; ++k) {
        flip_losses.push_back(elbo_loss(net, batch, 1000 + k, 0.0));
        shared_losses.push_back(elbo_loss(shared, batch, 9000 + k, 0.0));
    }
    // Marginal law per row unchanged: the mean batch loss agrees.
    double mf = oracles::mean(flip_losses);
    double ms = oracles::mean(shared_losses);
    CHECK(mf == doctest::Approx(ms).epsilon(0.05));
    // Rows see decorrelated perturbations: averaging two independent draws
    // shrinks the loss variance strictly below the shared-draw case.
    CHECK(oracles::variance(flip_losses) < 0.8 * oracles::variance(shared_losses));
}

TEST_CASE("forward_sample honors the degenerate and softplus cases") {
    SUBCASE("collapsed posteriors give identical repeated calls") {
        Rng init(6);
        BnnNet net =
            BnnNet::make(2, {3}, 1, HeadKind::Aleatoric, init);
        collapse_net(net);
        std::vector<double> x{0.5, -0.5};
        Rng r1(9), r2(9);
        auto a = net.forward_sample(x, r1);
        auto b = net.forward_sample(x, r2);
        CHECK(a.mu == b.mu);
        CHECK(a.sigma == b.sigma);
        Rng r3(10);  // different stream, same collapsed net
        auto c = net.forward_sample(x, r3);
        CHECK(a.mu[0] == doctest::Approx(c.mu[0]).epsilon(1e-4));
    }
    SUBCASE("zero net emits mu 0 and sigma softplus(0)") {
        Rng init(7);
        BnnNet net = BnnNet::make(2, {3}, 2, HeadKind::Aleatoric, init);
        collapse_net(net);
        for (auto& layer : net.layers()) {
            for (auto& q : layer.w) q.mu = 0.0;
            for (auto& q : layer.b) q.mu = 0.0;
        }
        Rng rng(8);
        auto out = net.forward_sample(std::vector<double>{1.0, 2.0}, rng);
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(out.mu[c] == doctest::Approx(0.0).epsilon(1e-4));
            CHECK(out.sigma[c] == doctest::Approx(0.6931).epsilon(1e-3));
        }
    }
    SUBCASE("epistemic head pins sigma to sigma_fixed") {
        Rng init(8);
        BnnNet net = BnnNet::make(2, {3}, 2, HeadKind::Epistemic, init, 1.0,
                                  0.125);
        Rng rng(9);
        auto out = net.forward_sample(std::vector<double>{0.1, 0.2}, rng);
        CHECK(out.sigma[0] == 0.125);
        CHECK(out.sigma[1] == 0.125);
    }
    SUBCASE("dimension mismatch is rejected") {
        Rng init(9);
        BnnNet net = BnnNet::make(3, {}, 1, HeadKind::Epistemic, init);
        Rng rng(1);
        CHECK_THROWS_AS(net.forward_sample(std::vector<double>{1.0}, rng),
                        ValidationError);
    }
}

TEST_CASE("elbo closed-form values") {
    SUBCASE("labels at the mode with unit sigma and no kl term") {
        // epistemic head with sigma_fixed = 1, zero-mean collapsed net
        Rng init(10);
        BnnNet net = BnnNet::make(2, {}, 2, HeadKind::Epistemic, init, 1.0, 1.0);
        collapse_net(net);
        for (auto& q : net.layers()[0].w) q.mu = 0.0;
        for (auto& q : net.layers()[0].b) q.mu = 0.0;
        LabeledTable batch;
        batch.x.rows = batch.y.rows = 5;
        batch.x.cols = batch.y.cols = 2;
        batch.x.v.assign(10, 0.7);
        batch.y.v.assign(10, 0.0);  // labels exactly at mu_y
        double loss = elbo_loss(net, batch, 123, 0.0);
        CHECK(loss == doctest::Approx(5 * 2 * kHalfLog2Pi).epsilon(1e-6));
    }
    SUBCASE("posteriors equal to priors contribute zero kl") {
        Rng init(11);
        BnnNet net = BnnNet::make(1, {}, 1, HeadKind::Epistemic, init, 1.0, 1.0);
        for (auto& q : net.layers()[0].w) q = {0.0, softplus_inverse(1.0)};
        for (auto& q : net.layers()[0].b) q = {0.0, softplus_inverse(1.0)};
        CHECK(net.total_kl() == doctest::Approx(0.0).epsilon(1e-12));
        LabeledTable batch;
        batch.x.rows = batch.y.rows = 1;
        batch.x.cols = batch.y.cols = 1;
        batch.x.v = {0.0};
        batch.y.v = {0.0};
        double with_kl = elbo_loss(net, batch, 5, 1.0);
        double without = elbo_loss(net, batch, 5, 0.0);
        CHECK(with_kl == doctest::Approx(without).epsilon(1e-12));
    }
    SUBCASE("kl_weight 0 with a wide head approaches the analytic likelihood") {
        Rng init(12);
        BnnNet net = BnnNet::make(1, {}, 1, HeadKind::Aleatoric, init);
        collapse_net(net);
        auto& layer = net.layers()[0];
        layer.w[0].mu = 0.0;   // mu_y row
        layer.w[1].mu = 0.0;   // raw sigma row
        layer.b[0].mu = 2.0;   // mu_y = 2
        layer.b[1].mu = softplus_inverse(3.0);  // sigma_y = 3
        LabeledTable batch;
        batch.x.rows = batch.y.rows = 3;
        batch.x.cols = batch.y.cols = 1;
        batch.x.v = {0.0, 0.0, 0.0};
        batch.y.v = {2.0, 5.0, -1.0};
        double expected = 0.0;
        for (double y : {2.0, 5.0, -1.0}) {
            double r = (y - 2.0) / 3.0;
            expected += kHalfLog2Pi + std::log(3.0) + 0.5 * r * r;
        }
        CHECK(elbo_loss(net, batch, 3, 0.0) ==
              doctest::Approx(expected).epsilon(1e-3));
    }
    SUBCASE("non-finite labels abort") {
        Rng init(13);
        BnnNet net = BnnNet::make(1, {}, 1, HeadKind::Epistemic, init);
        LabeledTable batch;
        batch.x.rows = batch.y.rows = 1;
        batch.x.cols = batch.y.cols = 1;
        batch.x.v = {0.0};
        batch.y.v = {std::numeric_limits<double>::infinity()};
        CHECK_THROWS_AS(elbo_loss(net, batch, 1, 1.0), NumericalError);
    }
}

TEST_CASE("reparameterized gradients match central differences") {
    Rng init(14);
    for (SamplingMode mode : {SamplingMode::SharedEps, SamplingMode::Flipout}) {
        BnnNet net = BnnNet::make(2, {3}, 1, HeadKind::Aleatoric, init, 1.0,
                                  1e-3, mode);
        LabeledTable batch;
        batch.x.rows = batch.y.rows = 4;
        batch.x.cols = 2;
        batch.y.cols = 1;
        Rng rng(15);
        for (int i = 0; i < 8; ++i) batch.x.v.push_back(rng.gaussian());
        for (int i = 0; i < 4; ++i) batch.y.v.push_back(rng.gaussian());

        std::vector<double> analytic;
        elbo_loss_and_grad(net, batch, 99, 0.7, analytic);
        auto params = net.parameters();
        BnnNet work = net;
        double worst = 0.0;
        const double eps = 1e-6;
        for (std::size_t i = 0; i < params.size(); ++i) {
            double saved = params[i];
            params[i] = saved + eps;
            work.set_parameters(params);
            double up = elbo_loss(work, batch, 99, 0.7);
            params[i] = saved - eps;
            work.set_parameters(params);
            double down = elbo_loss(work, batch, 99, 0.7);
            params[i] = saved;
            double fd = (up - down) / (2.0 * eps);
            worst = std::max(worst, std::abs(analytic[i] - fd) /
                                        std::max(std::abs(analytic[i]), 1e-6));
        }
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("epistemic decomposition identity is exact") {
    Rng init(16);
    BnnNet net = BnnNet::make(2, {4}, 2, HeadKind::Epistemic, init, 1.0, 0.05);
    Table rows;
    rows.rows = 3;
    rows.cols = 2;
    rows.v = {0.1, 0.4, -0.2, 0.9, 1.5, -1.0};
    auto samples = predictive_ensemble(net, rows, 64, 3);
    for (std::size_t r = 0; r < samples.n_rows; ++r) {
        for (std::size_t k = 0; k < samples.n_f; ++k) {
            for (std::size_t c = 0; c < samples.channels; ++c) {
                CHECK(samples.sigma_at(r, k, c) == 0.05);
            }
        }
    }
    auto d = decompose(samples);
    for (std::size_t i = 0; i < d.total_var.size(); ++i) {
        CHECK(d.aleatory_var[i] == doctest::Approx(0.05 * 0.05).epsilon(1e-12));
        CHECK(d.total_var[i] - d.aleatory_var[i] ==
              doctest::Approx(d.epistemic_var[i]).epsilon(1e-9));
    }
}

TEST_CASE("bnn_train basics") {
    SUBCASE("max_epochs 0 leaves the net untouched") {
        Rng init(17);
        BnnNet net = BnnNet::make(1, {4}, 1, HeadKind::Aleatoric, init);
        auto train = hetero_toy(32, 18);
        TrainConfig cfg = bnn_default_config(10);
        cfg.max_epochs = 0;
        auto result = bnn_train(net, train, cfg);
        CHECK(result.net.parameters() == net.parameters());
        CHECK(result.history.epochs.empty());
    }
    SUBCASE("training loss is reproducible per seed") {
        Rng init(19);
        BnnNet net = BnnNet::make(1, {4}, 1, HeadKind::Aleatoric, init);
        auto train = hetero_toy(128, 20);
        TrainConfig cfg = bnn_default_config(10);
        cfg.max_epochs = 10;
        cfg.seed = 77;
        auto a = bnn_train(net, train, cfg);
        auto b = bnn_train(net, train, cfg);
        CHECK(a.net.parameters() == b.net.parameters());
        CHECK(a.history.epochs.back().training_loss ==
              b.history.epochs.back().training_loss);
    }
}

TEST_CASE("heteroscedastic toy: learned sigma tracks the generator") {
    auto train = hetero_toy(4000, 31);
    TrainConfig cfg = bnn_default_config(10);
    cfg.seed = 31;
    cfg.max_epochs = 900;
    cfg.optimizer.learning_rate = 1e-3;
    cfg.early_stop = {Monitor::TrainingLoss, 80, 1e-5};
    Rng init(32);
    BnnNet net = BnnNet::make(1, {16, 16}, 1, HeadKind::Aleatoric, init);
    BnnTrainOptions track;
    track.track_layer = 2;
    track.track_bias = true;
    auto result = bnn_train(net, train, cfg, track);

    // loss at the stopped epoch no worse than epoch 1
    CHECK(result.history.epochs.back().training_loss <=
          result.history.epochs.front().training_loss);

    // tracked posterior collapses as data is absorbed
    CHECK(result.weight_stats.epochs.back().cov <
          result.weight_stats.epochs.front().cov);

    Table grid;
    grid.rows = 41;
    grid.cols = 1;
    for (int i = 0; i <= 40; ++i) grid.v.push_back(-2.0 + 0.1 * i);
    auto samples = predictive_ensemble(result.net, grid, 300, 5);
    auto d = decompose(samples);
    std::vector<double> sig_true, sig_learned;
    for (std::size_t r = 0; r < grid.rows; ++r) {
        sig_true.push_back(0.1 + 0.1 * grid.v[r] * grid.v[r]);
        sig_learned.push_back(std::sqrt(d.aleatory_var[r]));
    }
    CHECK(spearman_rank_correlation(sig_learned, sig_true) > 0.8);
}

TEST_CASE("predictive ensemble contracts") {
    Rng init(33);
    BnnNet net = BnnNet::make(1, {4}, 1, HeadKind::Aleatoric, init);
    Table rows;
    rows.rows = 2;
    rows.cols = 1;
    rows.v = {0.2, -0.7};

    SUBCASE("N_f = 1 yields a set of size one") {
        auto set = predictive_ensemble(net, rows, 1, 9);
        CHECK(set.n_f == 1);
        CHECK(set.mu.size() == rows.rows * net.channels());
        // the expectation over a single draw is that draw
        auto other = predictive_ensemble(net, rows, 1, 10);
        CHECK(set.mu_at(0, 0, 0) != other.mu_at(0, 0, 0));
    }
    SUBCASE("collapsed posteriors have (near) zero epistemic spread") {
        collapse_net(net);
        auto set = predictive_ensemble(net, rows, 64, 10);
        auto d = decompose(set);
        for (double v : d.epistemic_var) CHECK(v < 1e-9);
    }
    SUBCASE("ensemble mean is stable across reseeds at the clt rate") {
        auto big = predictive_ensemble(net, rows, 8000, 11);
        auto alt = predictive_ensemble(net, rows, 8000, 12);
        auto da = decompose(big);
        auto db = decompose(alt);
        for (std::size_t i = 0; i < da.expected_mu.size(); ++i) {
            double sd = std::sqrt(da.epistemic_var[i] / 8000.0);
            CHECK(std::abs(da.expected_mu[i] - db.expected_mu[i]) < 6.0 * sd + 1e-12);
        }
    }
    SUBCASE("same seed reproduces the set bit for bit") {
        auto a = predictive_ensemble(net, rows, 32, 13);
        auto b = predictive_ensemble(net, rows, 32, 13);
        CHECK(a.mu == b.mu);
        CHECK(a.sigma == b.sigma);
    }
}

TEST_CASE("flipout reduces batch gradient variance on the toy") {
    auto train = hetero_toy(1024, 41);
    Rng init(42);
    BnnNet base = BnnNet::make(1, {8}, 1, HeadKind::Aleatoric, init);
    // give the posteriors some spread so the estimator differences show
    for (auto& layer : base.layers()) {
        for (auto& q : layer.w) q.rho = softplus_inverse(0.3);
        for (auto& q : layer.b) q.rho = softplus_inverse(0.3);
    }
    auto grad_variance = [&](SamplingMode mode) {
        BnnNet net = base;
        net.set_sampling_mode(mode);
        std::vector<double> g, sum, sq;
        const int reps = 24;
        for (int k = 0; k < reps; ++k) {
            elbo_loss_and_grad(net, train, 500 + k, 0.0, g);
            if (sum.empty()) {
                sum.assign(g.size(), 0.0);
                sq.assign(g.size(), 0.0);
            }
            for (std::size_t i = 0; i < g.size(); ++i) {
                sum[i] += g[i];
                sq[i] += g[i] * g[i];
            }
        }
        double total = 0.0;
        for (std::size_t i = 0; i < sum.size(); ++i) {
            double m = sum[i] / reps;
            total += sq[i] / reps - m * m;
        }
        return total;
    };
    CHECK(grad_variance(SamplingMode::Flipout) <
          grad_variance(SamplingMode::SharedEps));
}

TEST_CASE("bnn json round trip preserves behavior") {
    Rng init(51);
    BnnNet net = BnnNet::make(3, {5}, 2, HeadKind::Aleatoric, init);
    BnnNet loaded = BnnNet::from_json(net.to_json());
    CHECK(loaded.parameters() == net.parameters());
    CHECK(loaded.head() == net.head());
    CHECK(loaded.sampling_mode() == net.sampling_mode());
    Table rows;
    rows.rows = 1;
    rows.cols = 3;
    rows.v = {0.3, -0.1, 1.1};
    auto a = predictive_ensemble(net, rows, 16, 3);
    auto b = predictive_ensemble(loaded, rows, 16, 3);
    CHECK(a.mu == b.mu);
    CHECK(a.sigma == b.sigma);
}

TEST_CASE("default configs follow the per-group values") {
    CHECK(bnn_default_config(1).optimizer.learning_rate == 3e-4);
    CHECK(bnn_default_config(6).optimizer.learning_rate == 3.5e-4);
    CHECK(bnn_default_config(10).optimizer.learning_rate == 2e-4);
    CHECK(bnn_default_config(12).optimizer.learning_rate == 3e-4);
    CHECK(bnn_default_config(10).batch_size == 1024);
    CHECK(bnn_default_config(10).max_epochs == 2000);
    CHECK(bnn_default_config(10).early_stop.patience == 30);
    CHECK(bnn_default_hidden(4) == std::vector<std::size_t>{31, 64, 32});
    CHECK(bnn_default_hidden(10) == std::vector<std::size_t>{32, 64, 32});
}

TEST_SUITE_END();
