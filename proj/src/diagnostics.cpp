#include "rggsb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "rggsb/errors.hpp"

namespace rggsb {

namespace {

// Halve every chain (middle draw dropped when odd).
std::vector<std::vector<double>> split_halves(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> halves;
    halves.reserve(chains.size() * 2);
    for (const auto& c : chains) {
        std::size_t h = c.size() / 2;
        halves.emplace_back(c.begin(), c.begin() + h);
        halves.emplace_back(c.end() - h, c.end());
    }
    return halves;
}

void validate_chains(const std::vector<std::vector<double>>& chains) {
    if (chains.empty()) throw UsageError("need at least one chain");
    std::size_t n = chains[0].size();
    if (n < 4) throw UsageError("need at least 4 draws per chain");
    for (const auto& c : chains)
        if (c.size() != n) throw UsageError("chains must have equal length");
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size() - 1);
}

// Between/within variance ratio over the given (already split) sequences.
double variance_ratio_rhat(const std::vector<std::vector<double>>& seqs) {
    const std::size_t m = seqs.size();
    const double n = static_cast<double>(seqs[0].size());
    std::vector<double> means(m);
    double w = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        means[j] = mean_of(seqs[j]);
        w += sample_var(seqs[j], means[j]);
    }
    w /= static_cast<double>(m);
    double grand = mean_of(means);
    double b_over_n = m > 1 ? sample_var(means, grand) : 0.0;
    double var_plus = (n - 1.0) / n * w + b_over_n;
    if (var_plus < 1e-300 && w < 1e-300) return 1.0;  // constant chains
    if (w < 1e-300) return std::numeric_limits<double>::infinity();
    return std::sqrt(var_plus / w);
}

// Pooled rank-normalization: average ranks for ties, then the normal quantile
// of (rank - 3/8) / (S + 1/4).
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& seqs) {
    std::size_t total = 0;
    for (const auto& s : seqs) total += s.size();
    struct Entry {
        double value;
        std::uint32_t seq;
        std::uint32_t pos;
    };
    std::vector<Entry> pool;
    pool.reserve(total);
    for (std::uint32_t j = 0; j < seqs.size(); ++j)
        for (std::uint32_t i = 0; i < seqs[j].size(); ++i) pool.push_back({seqs[j][i], j, i});
    std::sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
        return a.value < b.value;
    });

    std::vector<std::vector<double>> z(seqs.size());
    for (std::size_t j = 0; j < seqs.size(); ++j) z[j].resize(seqs[j].size());

    boost::math::normal_distribution<double> normal;
    const double denom = static_cast<double>(total) + 0.25;
    std::size_t i = 0;
    while (i < total) {
        std::size_t j = i;
        while (j + 1 < total && pool[j + 1].value == pool[i].value) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
        double zval = boost::math::quantile(normal, (avg_rank - 0.375) / denom);
        for (std::size_t k = i; k <= j; ++k) z[pool[k].seq][pool[k].pos] = zval;
        i = j + 1;
    }
    return z;
}

// Autocovariance at the given lag with divisor N.
double acov(const std::vector<double>& v, double mean, std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < v.size(); ++i) s += (v[i] - mean) * (v[i + lag] - mean);
    return s / static_cast<double>(v.size());
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
    validate_chains(chains);
    auto halves = split_halves(chains);
    return variance_ratio_rhat(halves);
}

double ess_bulk(const std::vector<std::vector<double>>& chains) {
    validate_chains(chains);
    auto halves = split_halves(chains);

    bool constant = true;
    for (const auto& h : halves)
        for (double x : h)
            if (x != halves[0][0]) {
                constant = false;
                break;
            }
    if (constant) return 0.0;

    auto z = rank_normalize(halves);
    const std::size_t m = z.size();
    const std::size_t n = z[0].size();
    const double nd = static_cast<double>(n);

    std::vector<double> means(m);
    double w = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        means[j] = mean_of(z[j]);
        w += sample_var(z[j], means[j]);
    }
    w /= static_cast<double>(m);
    double b_over_n = m > 1 ? sample_var(means, mean_of(means)) : 0.0;
    double var_plus = (nd - 1.0) / nd * w + b_over_n;
    if (var_plus < 1e-300) return 0.0;

    auto mean_acov_at = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += acov(z[j], means[j], lag);
        return s / static_cast<double>(m);
    };

    // Geyer initial positive monotone sequence over lag pairs
    double tau = 0.0;
    double rho_prev_pair = std::numeric_limits<double>::infinity();
    std::size_t lag = 0;
    double rho_even = 1.0;  // rho_0
    while (lag + 1 < n) {
        double rho_odd = 1.0 - (w - mean_acov_at(lag + 1)) / var_plus;
        double pair = rho_even + rho_odd;
        if (pair <= 0.0) break;
        if (pair > rho_prev_pair) pair = rho_prev_pair;  // enforce monotonicity
        tau += 2.0 * pair;
        rho_prev_pair = pair;
        lag += 2;
        if (lag >= n) break;
        rho_even = 1.0 - (w - mean_acov_at(lag)) / var_plus;
    }
    tau -= 1.0;
    if (tau < 1e-12) tau = 1e-12;
    double total = static_cast<double>(m) * nd;
    return total / tau;
}

double Diagnostics::worst_rhat() const { return std::max({rhat[0], rhat[1], rhat[2]}); }

double Diagnostics::min_ess() const { return std::min({ess[0], ess[1], ess[2]}); }

Diagnostics batch_diagnostics(const SampleBatch& batch, int n_nodes, GeometryKind g) {
    const int cdim = chart_dim(g);
    const int edim = embed_dim(g);
    if (batch.dim != static_cast<std::size_t>(n_nodes) * cdim + 1)
        throw UsageError("batch dimension does not match n_nodes and geometry");

    std::array<std::vector<std::vector<double>>, 3> series;
    for (auto& s : series) s.assign(batch.n_chains, std::vector<double>(batch.n_samples));

    const std::size_t n_dyads = static_cast<std::size_t>(n_nodes) * (n_nodes - 1) / 2;
    std::vector<double> emb(static_cast<std::size_t>(n_nodes) * edim);
    for (std::size_t c = 0; c < batch.n_chains; ++c) {
        for (std::size_t s = 0; s < batch.n_samples; ++s) {
            auto q = batch.draw(c, s);
            series[0][c][s] = batch.lp(c, s);
            series[1][c][s] = std::exp(q[batch.dim - 1]);
            for (int i = 0; i < n_nodes; ++i)
                manifold_detail::embed_raw(q.data() + static_cast<std::size_t>(i) * cdim, g,
                                           emb.data() + static_cast<std::size_t>(i) * edim);
            double sum = 0.0;
            for (int i = 0; i < n_nodes; ++i)
                for (int j = i + 1; j < n_nodes; ++j)
                    sum += manifold_detail::dist_raw(
                        emb.data() + static_cast<std::size_t>(i) * edim,
                        emb.data() + static_cast<std::size_t>(j) * edim, g);
            series[2][c][s] = sum / static_cast<double>(n_dyads);
        }
    }

    Diagnostics d;
    for (int k = 0; k < 3; ++k) {
        d.rhat[k] = split_rhat(series[k]);
        d.ess[k] = ess_bulk(series[k]);
    }
    return d;
}

}  // namespace rggsb
