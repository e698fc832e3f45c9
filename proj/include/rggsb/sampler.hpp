#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rggsb {

// Returns log density at q and fills grad (same size as q).
using LogProbGradFn = std::function<double(std::span<const double>, std::span<double>)>;
using LogProbFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<std::vector<double>(std::span<const double>)>;

struct ChainConfig {
    int n_chains = 4;
    int n_warmup = 500;
    int n_samples = 1000;
    double target_accept = 0.8;
    int max_tree_depth = 10;
    std::uint64_t seed = 0;

    void validate() const;  // counts >= 1, 0 < target_accept < 1, depth <= 12
};

// Posterior draws across chains with per-chain bookkeeping. Draws are stored
// flat: draw(c, s) is the s-th retained state of chain c.
struct SampleBatch {
    std::size_t n_chains = 0;
    std::size_t n_samples = 0;
    std::size_t dim = 0;
    std::vector<double> draws;        // n_chains * n_samples * dim
    std::vector<double> log_density;  // n_chains * n_samples
    std::vector<double> accept_rate;      // per chain, mean post-warmup accept stat
    std::vector<int> divergence_count;    // per chain, post-warmup
    std::vector<double> step_size;        // per chain, adapted step size
    bool divergence_warning = false;      // >10% divergent transitions post-warmup

    std::span<const double> draw(std::size_t chain, std::size_t s) const {
        return {draws.data() + (chain * n_samples + s) * dim, dim};
    }
    double lp(std::size_t chain, std::size_t s) const { return log_density[chain * n_samples + s]; }
    std::size_t total_draws() const { return n_chains * n_samples; }
};

// One leapfrog update of the Hamiltonian with potential -log density and
// kinetic 0.5 * sum p_i^2 / mass_diag_i. Time-reversible; a non-finite
// gradient leaves non-finite entries for the caller to flag (never throws).
void leapfrog_step(std::span<double> position, std::span<double> momentum, double step_size,
                   const LogProbGradFn& fn, std::span<const double> mass_diag);

// No-U-Turn sampling with dual-averaging step size adaptation and windowed
// diagonal mass adaptation during warmup. One init per chain. Deterministic in
// cfg.seed; chains may run in parallel (n_threads = 0 means RGG_THREADS).
SampleBatch sample_posterior(const LogProbGradFn& fn, const std::vector<std::vector<double>>& inits,
                             const ChainConfig& cfg, int n_threads = 0);

// Convenience overload taking separate density and gradient callables.
SampleBatch sample_posterior(const LogProbFn& log_density_fn, const GradFn& gradient_fn,
                             const std::vector<std::vector<double>>& inits, const ChainConfig& cfg,
                             int n_threads = 0);

}  // namespace rggsb
