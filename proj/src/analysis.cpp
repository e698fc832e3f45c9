#include "rggsb/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "rggsb/errors.hpp"
#include "rggsb/util.hpp"

namespace rggsb {

ProcrustesResult procrustes_align(const std::vector<double>& X, const std::vector<double>& Y_ref,
                                  int n, int d) {
    if (d != 2 && d != 3) throw UsageError("procrustes supports d in {2, 3}");
    if (n < d) throw UsageError("procrustes needs at least d points");
    if (X.size() != static_cast<std::size_t>(n) * d || Y_ref.size() != X.size())
        throw UsageError("procrustes inputs must both be n x d");

    using Mat = Eigen::MatrixXd;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Xm(
        X.data(), n, d);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Ym(
        Y_ref.data(), n, d);

    Eigen::RowVectorXd mx = Xm.colwise().mean();
    Eigen::RowVectorXd my = Ym.colwise().mean();
    Mat Xc = Xm.rowwise() - mx;
    Mat Yc = Ym.rowwise() - my;

    Mat C = Xc.transpose() * Yc;  // d x d cross-covariance
    Eigen::JacobiSVD<Mat> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat R = svd.matrixU() * svd.matrixV().transpose();

    ProcrustesResult out;
    double smax = svd.singularValues().maxCoeff();
    out.degenerate = smax <= 0.0 || svd.singularValues().minCoeff() < 1e-12 * smax;

    Mat aligned = (Xc * R).rowwise() + my;
    out.residual = (aligned - Ym).norm();
    out.aligned.resize(X.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.aligned[static_cast<std::size_t>(i) * d + j] = aligned(i, j);
    return out;
}

SensitivityResult sensitivity_sweep(const DyadData& data, const SweepConfig& base,
                                    const Ablation& ablation) {
    if (ablation.values.empty()) throw UsageError("ablation values must be nonempty");

    SensitivityResult result;
    std::vector<RiskTable> tables(ablation.values.size());

    for (std::size_t vi = 0; vi < ablation.values.size(); ++vi) {
        SweepConfig cfg = base;
        double value = ablation.values[vi];
        switch (ablation.vary) {
            case AblationVariable::K:
                cfg.K = static_cast<int>(std::llround(value));
                break;
            case AblationVariable::Rho:
                cfg.rho = value;
                break;
            case AblationVariable::Shuffle:
                // vary only the dyad ordering; sampling streams stay fixed
                cfg.partition_seed = static_cast<std::uint64_t>(std::llround(value));
                break;
        }
        tables[vi] = run_sweep(data, cfg, "");
        const RiskTable& t = tables[vi];
        for (std::size_t gi = 0; gi < t.geometries.size(); ++gi) {
            AblationCurve curve;
            curve.setting = value;
            curve.geometry = t.geometries[gi];
            curve.eta_grid = t.eta_grid;
            for (std::size_t ei = 0; ei < t.eta_grid.size(); ++ei) {
                const RiskCell& c = t.cell(gi, ei);
                curve.cum_log_loss.push_back(c.ok ? c.cum_log_loss
                                                  : std::numeric_limits<double>::quiet_NaN());
            }
            curve.argmin_eta = t.eta_star[gi];
            result.curves.push_back(std::move(curve));
        }
    }

    if (ablation.vary == AblationVariable::Shuffle) {
        for (std::size_t gi = 0; gi < base.geometries.size(); ++gi) {
            SensitivityResult::MeanCurve mc;
            mc.geometry = base.geometries[gi];
            mc.eta_grid = base.eta_grid;
            const std::size_t ne = base.eta_grid.size();
            mc.mean.assign(ne, 0.0);
            mc.std_dev.assign(ne, 0.0);
            const double m = static_cast<double>(ablation.values.size());
            auto cell_loss = [&](const RiskTable& t, std::size_t ei) {
                const RiskCell& c = t.cell(gi, ei);
                return c.ok ? c.cum_log_loss : std::numeric_limits<double>::quiet_NaN();
            };
            for (std::size_t ei = 0; ei < ne; ++ei) {
                double sum = 0.0;
                for (const auto& t : tables) sum += cell_loss(t, ei);
                mc.mean[ei] = sum / m;
                double ss = 0.0;
                for (const auto& t : tables) {
                    double dv = cell_loss(t, ei) - mc.mean[ei];
                    ss += dv * dv;
                }
                mc.std_dev[ei] = m > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
            }
            std::size_t best = 0;
            for (std::size_t ei = 1; ei < ne; ++ei)
                if (mc.mean[ei] < mc.mean[best]) best = ei;
            mc.argmin_eta = mc.eta_grid[best];
            result.mean_curves.push_back(std::move(mc));
        }
    }
    return result;
}

std::vector<OverfittingRow> overfitting_report(const RiskTable& table) {
    std::vector<OverfittingRow> rows;
    for (std::size_t gi = 0; gi < table.geometries.size(); ++gi) {
        if (std::isnan(table.eta_star[gi])) continue;
        OverfittingRow row;
        row.geometry = table.geometries[gi];
        row.eta_star = table.eta_star[gi];
        const RiskCell* star = table.find_cell(row.geometry, row.eta_star);
        const RiskCell* one = table.find_cell(row.geometry, 1.0);
        if (!star || !star->ok) continue;
        row.log_loss_star = star->cum_log_loss;
        row.sq_loss_star = star->cum_sq_loss;
        if (one && one->ok) {
            row.baseline_available = true;
            row.log_loss_one = one->cum_log_loss;
            row.sq_loss_one = one->cum_sq_loss;
            row.abs_reduction_log = one->cum_log_loss - star->cum_log_loss;
            row.rel_reduction_log = row.abs_reduction_log / one->cum_log_loss;
            row.abs_reduction_sq = one->cum_sq_loss - star->cum_sq_loss;
            row.rel_reduction_sq = row.abs_reduction_sq / one->cum_sq_loss;
        }
        rows.push_back(row);
    }
    return rows;
}

ImprovementHistogram improvement_histogram(const std::vector<double>& p_hat_safe,
                                           const std::vector<double>& p_hat_std,
                                           const std::vector<std::uint8_t>& labels,
                                           BinningMode mode, int n_bins) {
    const std::size_t n = labels.size();
    if (p_hat_safe.size() != n || p_hat_std.size() != n || n == 0)
        throw UsageError("improvement inputs must have equal nonzero length");
    if (n_bins < 1) throw UsageError("need at least one bin");

    auto loss = [](double p, double a) { return -(a * std::log(p) + (1.0 - a) * std::log(1.0 - p)); };

    std::vector<double> error(n), improvement(n);
    for (std::size_t k = 0; k < n; ++k) {
        double a = static_cast<double>(labels[k]);
        if (!(p_hat_safe[k] > 0 && p_hat_safe[k] < 1 && p_hat_std[k] > 0 && p_hat_std[k] < 1))
            throw UsageError("probabilities must lie strictly in (0, 1)");
        error[k] = std::fabs(p_hat_std[k] - a);
        improvement[k] = loss(p_hat_std[k], a) - loss(p_hat_safe[k], a);
    }

    std::vector<int> bin_of(n);
    ImprovementHistogram h;
    h.bin_low.assign(n_bins, 0.0);
    h.bin_high.assign(n_bins, 0.0);
    h.counts.assign(n_bins, 0);
    h.mean_improvement.assign(n_bins, 0.0);
    h.total_improvement.assign(n_bins, 0.0);
    h.cumulative_gain.assign(n_bins, 0.0);

    if (mode == BinningMode::FixedWidth) {
        for (int b = 0; b < n_bins; ++b) {
            h.bin_low[b] = static_cast<double>(b) / n_bins;
            h.bin_high[b] = static_cast<double>(b + 1) / n_bins;
        }
        for (std::size_t k = 0; k < n; ++k) {
            int b = std::min(n_bins - 1, static_cast<int>(error[k] * n_bins));
            bin_of[k] = b;
        }
    } else {
        // rank-based deciles: every dyad lands in exactly one bin even with ties
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0u);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return error[a] < error[b]; });
        h.bin_low.assign(n_bins, std::numeric_limits<double>::infinity());
        h.bin_high.assign(n_bins, -std::numeric_limits<double>::infinity());
        for (std::size_t rank = 0; rank < n; ++rank) {
            int b = static_cast<int>(rank * static_cast<std::size_t>(n_bins) / n);
            bin_of[idx[rank]] = b;
            h.bin_low[b] = std::min(h.bin_low[b], error[idx[rank]]);
            h.bin_high[b] = std::max(h.bin_high[b], error[idx[rank]]);
        }
        for (int b = 0; b < n_bins; ++b)
            if (h.bin_low[b] > h.bin_high[b]) h.bin_low[b] = h.bin_high[b] = 0.0;  // empty bin
    }

    for (std::size_t k = 0; k < n; ++k) {
        int b = bin_of[k];
        h.counts[b] += 1;
        h.total_improvement[b] += improvement[k];
    }
    double running = 0.0;
    for (int b = 0; b < n_bins; ++b) {
        h.mean_improvement[b] =
            h.counts[b] ? h.total_improvement[b] / static_cast<double>(h.counts[b]) : 0.0;
        running += h.total_improvement[b];
        h.cumulative_gain[b] = running;
    }
    return h;
}

DyadData make_star_graph(int M) {
    if (M < 1) throw UsageError("star graph needs at least one leaf");
    DyadData d;
    d.n_nodes = M + 1;
    d.labels.assign(dyad_count(d.n_nodes), 0);
    for (int leaf = 1; leaf <= M; ++leaf) d.labels[dyad_index(0, leaf, d.n_nodes)] = 1;
    return d;
}

DyadData make_complete_bipartite(int n1, int n2) {
    if (n1 < 1 || n2 < 1) throw UsageError("bipartite sides must be nonempty");
    DyadData d;
    d.n_nodes = n1 + n2;
    d.labels.assign(dyad_count(d.n_nodes), 0);
    for (int u = 0; u < n1; ++u)
        for (int v = n1; v < n1 + n2; ++v) d.labels[dyad_index(u, v, d.n_nodes)] = 1;
    return d;
}

double best_pure_state_loss(const DyadData& data, double alpha, const DemoOptions& opt,
                            bool* converged) {
    data.validate();
    const int n = data.n_nodes;
    const GeometryKind g = GeometryKind::Euclidean;
    DyadMask all = DyadMask::all(data.n_dyads());

    double best = std::numeric_limits<double>::infinity();
    bool best_converged = false;

    for (int start = 0; start < opt.n_starts; ++start) {
        std::mt19937_64 rng(seed_mix(opt.seed, {0x64656d6fULL, static_cast<std::uint64_t>(start)}));
        std::normal_distribution<double> normal(0.0, 1.0);
        LatentState s;
        s.n_nodes = n;
        s.chart_dim = 2;
        s.z.resize(static_cast<std::size_t>(n) * 2);
        for (auto& v : s.z) v = normal(rng);
        s.rho = 0.25 * normal(rng);

        // Adam ascent on the total log-likelihood
        const double lr = 0.02, b1 = 0.9, b2 = 0.999, eps = 1e-8;
        std::size_t dim = s.z.size() + 1;
        std::vector<double> m(dim, 0.0), v2(dim, 0.0), grad;
        double ll = -std::numeric_limits<double>::infinity();
        for (int it = 1; it <= opt.n_iters; ++it) {
            ll = masked_log_lik_grad(s, data, all, g, alpha, grad);
            double c1 = 1.0 - std::pow(b1, it), c2 = 1.0 - std::pow(b2, it);
            for (std::size_t k = 0; k < dim; ++k) {
                m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
                v2[k] = b2 * v2[k] + (1.0 - b2) * grad[k] * grad[k];
                double step = lr * (m[k] / c1) / (std::sqrt(v2[k] / c2) + eps);
                if (k + 1 < dim)
                    s.z[k] += step;
                else
                    s.rho += step;
            }
        }
        ll = masked_log_lik_grad(s, data, all, g, alpha, grad);
        double gmax = 0.0;
        for (double gv : grad) gmax = std::max(gmax, std::fabs(gv));
        double loss = -ll;
        if (loss < best) {
            best = loss;
            best_converged = gmax < 1e-2;
        }
    }
    if (converged) *converged = best_converged;
    return best;
}

DemoResult star_graph_demo(int M, double alpha, const DemoOptions& opt) {
    if (M < 1) throw UsageError("star graph needs at least one leaf");
    DyadData data = make_star_graph(M);

    // Mixture accounting: M components, each mapping one leaf onto the hub and
    // the rest to infinity. Hub edges get probability 1/M, leaf pairs 0.
    double per_edge = -std::log(1.0 / static_cast<double>(M));
    double mixture = 0.0;
    for (int leaf = 1; leaf <= M; ++leaf) mixture += per_edge;  // leaf pairs contribute 0
    double closed_form = static_cast<double>(M) * std::log(static_cast<double>(M));
    if (std::fabs(mixture - closed_form) > 1e-9 * std::max(1.0, closed_form))
        throw NumericError("star mixture accounting does not match its closed form");

    DemoResult out;
    out.mixture_loss = mixture;
    out.pure_state_loss = best_pure_state_loss(data, alpha, opt, &out.pure_converged);
    return out;
}

DemoResult bipartite_demo(int n1, int n2, double alpha, const DemoOptions& opt) {
    if (n1 < 1 || n2 < 1) throw UsageError("bipartite sides must be nonempty");
    DyadData data = make_complete_bipartite(n1, n2);

    // Two-component mixture: each cross edge is realized (distance ~0) in
    // exactly one component, so it carries probability 1/2; intra-side pairs
    // are infinitely separated in every component and cost nothing.
    double mixture = 0.0;
    for (int u = 0; u < n1; ++u)
        for (int v = 0; v < n2; ++v) mixture += -std::log(0.5);
    double closed_form = static_cast<double>(n1) * n2 * std::log(2.0);
    if (std::fabs(mixture - closed_form) > 1e-9 * std::max(1.0, closed_form))
        throw NumericError("bipartite mixture accounting does not match its closed form");

    DemoResult out;
    out.mixture_loss = mixture;
    out.pure_state_loss = best_pure_state_loss(data, alpha, opt, &out.pure_converged);
    return out;
}

}  // namespace rggsb
