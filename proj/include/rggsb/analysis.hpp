#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rggsb/data_io.hpp"
#include "rggsb/prequential.hpp"

namespace rggsb {

struct ProcrustesResult {
    std::vector<double> aligned;  // row-major n x d
    double residual = 0.0;        // Frobenius distance to the reference after alignment
    bool degenerate = false;      // rank-deficient cross-covariance; best effort result
};

// Orthogonal Procrustes: centers both point sets, rotates (reflections allowed)
// X onto Y_ref by SVD of the cross-covariance, recenters at Y_ref's mean.
ProcrustesResult procrustes_align(const std::vector<double>& X, const std::vector<double>& Y_ref,
                                  int n, int d);

// ---- sensitivity ablations (prequential hyperparameters and data ordering) ----

enum class AblationVariable { K, Rho, Shuffle };

struct Ablation {
    AblationVariable vary = AblationVariable::K;
    std::vector<double> values;  // K values, rho values, or shuffle seeds
};

struct AblationCurve {
    double setting = 0.0;        // the varied value
    GeometryKind geometry;
    std::vector<double> eta_grid;
    std::vector<double> cum_log_loss;  // per eta; NaN for failed cells
    double argmin_eta = 0.0;
};

struct SensitivityResult {
    std::vector<AblationCurve> curves;  // one per (setting, geometry)
    // Shuffle ablation only: per-geometry mean curve with per-eta standard
    // deviation across seeds, and the argmin of the mean curve.
    struct MeanCurve {
        GeometryKind geometry;
        std::vector<double> eta_grid;
        std::vector<double> mean;
        std::vector<double> std_dev;
        double argmin_eta = 0.0;
    };
    std::vector<MeanCurve> mean_curves;
};

SensitivityResult sensitivity_sweep(const DyadData& data, const SweepConfig& base,
                                    const Ablation& ablation);

// ---- overfitting gap (selected eta vs standard Bayes eta = 1) ----

struct OverfittingRow {
    GeometryKind geometry;
    double eta_star = 1.0;
    bool baseline_available = false;  // table held an eta = 1.0 cell
    double log_loss_star = 0.0, log_loss_one = 0.0;
    double sq_loss_star = 0.0, sq_loss_one = 0.0;
    double abs_reduction_log = 0.0, rel_reduction_log = 0.0;
    double abs_reduction_sq = 0.0, rel_reduction_sq = 0.0;
};

std::vector<OverfittingRow> overfitting_report(const RiskTable& table);

// ---- per-dyad improvement distribution ----

enum class BinningMode { ErrorDecile, FixedWidth };

struct ImprovementHistogram {
    std::vector<double> bin_low;   // error-bin lower edges
    std::vector<double> bin_high;  // error-bin upper edges
    std::vector<std::size_t> counts;
    std::vector<double> mean_improvement;
    std::vector<double> total_improvement;
    std::vector<double> cumulative_gain;  // running sum of total improvement
};

// Per-dyad error under the standard posterior |p_std - a|, per-dyad log-loss
// improvement l(p_std, a) - l(p_safe, a); positive = tempered posterior better.
ImprovementHistogram improvement_histogram(const std::vector<double>& p_hat_safe,
                                           const std::vector<double>& p_hat_std,
                                           const std::vector<std::uint8_t>& labels,
                                           BinningMode mode = BinningMode::ErrorDecile,
                                           int n_bins = 10);

// ---- misspecification demonstrations --------------------------------------
// Total negative log-likelihood of the best single Euclidean embedding (found
// by multi-start gradient ascent) versus the closed-form mixture that the
// packing / heterophily arguments construct.

struct DemoOptions {
    int n_starts = 20;
    int n_iters = 2000;
    std::uint64_t seed = 0;
};

struct DemoResult {
    double pure_state_loss = 0.0;  // best found; an upper bound on the infimum
    double mixture_loss = 0.0;     // exact closed form
    bool pure_converged = true;    // final gradient norm below tolerance
};

// Star K_{1,M}: hub edges at probability 1/M in the M-component mixture, leaf
// pairs at probability 0; mixture loss M ln M.
DemoResult star_graph_demo(int M, double alpha, const DemoOptions& opt = {});

// Complete bipartite K_{n1,n2}: cross edges at probability 1/2 in the
// two-component mixture, intra-side pairs at 0; mixture loss n1*n2*ln 2.
DemoResult bipartite_demo(int n1, int n2, double alpha, const DemoOptions& opt = {});

// Exposed for tests: the optimizer behind the demos (total NLL of `data`
// under a single Euclidean soft-threshold embedding).
double best_pure_state_loss(const DyadData& data, double alpha, const DemoOptions& opt,
                            bool* converged = nullptr);

DyadData make_star_graph(int M);
DyadData make_complete_bipartite(int n1, int n2);

}  // namespace rggsb
