#pragma once

#include <array>
#include <vector>

#include "rggsb/manifold.hpp"
#include "rggsb/sampler.hpp"

namespace rggsb {

// Split-R-hat: each chain is halved and the between/within variance ratio is
// computed over the half-chains. Constant input returns 1.0 by convention.
double split_rhat(const std::vector<std::vector<double>>& chains);

// Rank-normalized bulk effective sample size: split chains, rank-normalize the
// pooled draws, sum autocorrelations with Geyer initial-monotone truncation.
// Constant input returns 0 by convention.
double ess_bulk(const std::vector<std::vector<double>>& chains);

// Convergence summaries are computed on isometry-invariant scalars only (the
// latent coordinates themselves are non-identified): the log-posterior value,
// the threshold radius, and the mean pairwise latent distance.
struct Diagnostics {
    static constexpr std::array<const char*, 3> scalar_names{"log_posterior", "radius",
                                                             "mean_pairwise_distance"};
    std::array<double, 3> rhat{1.0, 1.0, 1.0};
    std::array<double, 3> ess{0.0, 0.0, 0.0};

    double worst_rhat() const;
    double min_ess() const;
};

Diagnostics batch_diagnostics(const SampleBatch& batch, int n_nodes, GeometryKind g);

}  // namespace rggsb
