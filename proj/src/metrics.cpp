#include "fleetwise/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fleetwise/errors.hpp"
#include "fleetwise/rng.hpp"

namespace fleetwise {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kCovMeanFloor = 1e-9;

}  // namespace

PointErrors point_errors(std::span<const double> pred,
                         std::span<const double> label) {
    if (pred.size() != label.size()) {
        throw ValidationError("point_errors: length mismatch");
    }
    if (pred.empty()) throw ValidationError("point_errors: empty input");

    PointErrors out;
    double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
    std::size_t pct_rows = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double e = pred[i] - label[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        if (label[i] != 0.0) {
            pct_sum += std::abs(e / label[i]);
            ++pct_rows;
        } else {
            ++out.excluded_rows;
        }
    }
    double n = static_cast<double>(pred.size());
    out.mae = abs_sum / n;
    out.rmse = std::sqrt(sq_sum / n);
    out.percent_error =
        pct_rows > 0 ? 100.0 * pct_sum / static_cast<double>(pct_rows) : 0.0;
    return out;
}

double expected_log_likelihood(const PredictiveSampleSet& samples,
                               const Table& labels) {
    if (labels.rows != samples.n_rows || labels.cols != samples.channels) {
        throw ValidationError("expected_log_likelihood: label shape mismatch");
    }
    if (samples.n_rows == 0 || samples.n_f == 0) {
        throw ValidationError("expected_log_likelihood: empty sample set");
    }
    double total = 0.0;
    for (std::size_t r = 0; r < samples.n_rows; ++r) {
        auto label = labels.row(r);
        for (std::size_t k = 0; k < samples.n_f; ++k) {
            for (std::size_t c = 0; c < samples.channels; ++c) {
                double sig = samples.sigma_at(r, k, c);
                if (sig <= 0.0) {
                    throw ValidationError(
                        "expected_log_likelihood: non-positive sigma sample");
                }
                double res = label[c] - samples.mu_at(r, k, c);
                total -= kHalfLog2Pi + std::log(sig) +
                         0.5 * res * res / (sig * sig);
            }
        }
    }
    return total / (static_cast<double>(samples.n_rows) *
                    static_cast<double>(samples.n_f) *
                    static_cast<double>(samples.channels));
}

UncertaintyDecomposition decompose(const PredictiveSampleSet& samples) {
    if (samples.n_f < 2) {
        throw ValidationError(
            "decompose: epistemic variance needs N_f >= 2 forward runs");
    }
    UncertaintyDecomposition d;
    d.rows = samples.n_rows;
    d.channels = samples.channels;
    std::size_t n = d.rows * d.channels;
    d.expected_y.resize(n);
    d.total_var.resize(n);
    d.aleatory_var.resize(n);
    d.epistemic_var.resize(n);
    d.expected_mu.resize(n);
    d.cov_mu.resize(n);
    d.cov_defined.resize(n);

    const double inv_nf = 1.0 / static_cast<double>(samples.n_f);
    for (std::size_t r = 0; r < d.rows; ++r) {
        for (std::size_t c = 0; c < d.channels; ++c) {
            double mu_sum = 0.0, mu_sq_sum = 0.0, sig_sq_sum = 0.0;
            for (std::size_t k = 0; k < samples.n_f; ++k) {
                double mu = samples.mu_at(r, k, c);
                double sig = samples.sigma_at(r, k, c);
                mu_sum += mu;
                mu_sq_sum += mu * mu;
                sig_sq_sum += sig * sig;
            }
            double e_mu = mu_sum * inv_nf;
            double aleatory = sig_sq_sum * inv_nf;
            double epistemic = std::max(0.0, mu_sq_sum * inv_nf - e_mu * e_mu);
            std::size_t i = r * d.channels + c;
            d.expected_mu[i] = e_mu;
            d.expected_y[i] = e_mu;
            d.aleatory_var[i] = aleatory;
            d.epistemic_var[i] = epistemic;
            d.total_var[i] = aleatory + epistemic;
            if (std::abs(e_mu) < kCovMeanFloor) {
                d.cov_mu[i] = std::numeric_limits<double>::quiet_NaN();
                d.cov_defined[i] = 0;
            } else {
                d.cov_mu[i] = std::sqrt(epistemic) / std::abs(e_mu);
                d.cov_defined[i] = 1;
            }
        }
    }
    return d;
}

std::vector<double> draw_total_variance(const PredictiveSampleSet& samples,
                                        std::uint64_t seed) {
    std::vector<double> var(samples.n_rows * samples.channels, 0.0);
    for (std::size_t r = 0; r < samples.n_rows; ++r) {
        for (std::size_t c = 0; c < samples.channels; ++c) {
            double sum = 0.0, sq_sum = 0.0;
            for (std::size_t k = 0; k < samples.n_f; ++k) {
                Rng rng = Rng::substream(seed, r, k, c);
                double y = samples.mu_at(r, k, c) +
                           samples.sigma_at(r, k, c) * rng.gaussian();
                sum += y;
                sq_sum += y * y;
            }
            double inv_nf = 1.0 / static_cast<double>(samples.n_f);
            double mean = sum * inv_nf;
            var[r * samples.channels + c] =
                std::max(0.0, sq_sum * inv_nf - mean * mean);
        }
    }
    return var;
}

std::vector<double> min_euclidean_distance(const Table& test,
                                           const Table& train) {
    if (train.rows == 0) {
        throw ValidationError("min_euclidean_distance: empty training set");
    }
    if (test.cols != train.cols) {
        throw ValidationError("min_euclidean_distance: feature width mismatch");
    }
    std::vector<double> out(test.rows);
    for (std::size_t t = 0; t < test.rows; ++t) {
        auto x = test.row(t);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < train.rows; ++r) {
            const double* y = train.v.data() + r * train.cols;
            double acc = 0.0;
            for (std::size_t c = 0; c < train.cols; ++c) {
                double d = x[c] - y[c];
                acc += d * d;
            }
            best = std::min(best, acc);
        }
        out[t] = std::sqrt(best);
    }
    return out;
}

double mean_of(std::span<const double> v) {
    if (v.empty()) throw ValidationError("mean of empty range");
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // ties share rank
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    return rank;
}

}  // namespace

double spearman_rank_correlation(std::span<const double> a,
                                 std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw ValidationError("spearman: need two equal-length series");
    }
    auto ra = ranks(a);
    auto rb = ranks(b);
    double ma = mean_of(ra), mb = mean_of(rb);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

namespace {

double percentile(std::vector<double> sorted, double p) {
    // linear interpolation between closest ranks
    if (sorted.empty()) throw ValidationError("percentile of empty range");
    double idx = p / 100.0 * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(idx));
    std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
    double frac = idx - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

BoxStats box_stats(std::span<const double> values) {
    std::vector<double> clean;
    clean.reserve(values.size());
    for (double v : values) {
        if (std::isfinite(v)) clean.push_back(v);
    }
    if (clean.empty()) throw ValidationError("box_stats: no finite values");
    std::sort(clean.begin(), clean.end());
    BoxStats s;
    s.mean = mean_of(clean);
    s.median = percentile(clean, 50.0);
    s.q25 = percentile(clean, 25.0);
    s.q75 = percentile(clean, 75.0);
    s.w2_5 = percentile(clean, 2.5);
    s.w97_5 = percentile(clean, 97.5);
    return s;
}

}  // namespace fleetwise
