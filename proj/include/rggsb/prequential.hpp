#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rggsb/diagnostics.hpp"
#include "rggsb/model.hpp"
#include "rggsb/sampler.hpp"

namespace rggsb {

// Randomized disjoint dyad blocks: B0 is training-only, B1..BK are scored in
// order and then assimilated.
struct DyadPartition {
    std::vector<std::uint32_t> initial_block;
    std::vector<std::vector<std::uint32_t>> test_blocks;

    std::uint64_t content_hash() const;
};

struct SweepConfig {
    std::vector<GeometryKind> geometries{GeometryKind::Euclidean, GeometryKind::Spherical,
                                         GeometryKind::Hyperboloid};
    std::vector<double> eta_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    int K = 5;
    double rho = 0.2;
    std::uint64_t seed = 0;
    // Separate stream for the dyad shuffle so data-order ablations can vary the
    // partition while keeping the sampling streams fixed.
    std::optional<std::uint64_t> partition_seed;
    ChainConfig chain_cfg;
    Hyperparams hyper;  // eta field ignored; supplied per grid point

    void validate(std::size_t n_dyads) const;
};

struct RiskCell {
    GeometryKind geometry = GeometryKind::Euclidean;
    double eta = 0.0;
    bool ok = false;           // false = missing (sampler failure), excluded from argmin
    std::string error;         // failure note when !ok
    double cum_log_loss = 0.0;
    double cum_sq_loss = 0.0;
    std::vector<double> per_block_log_loss;
    std::vector<double> per_block_sq_loss;
    std::vector<Diagnostics> diagnostics;  // one per block
    std::vector<double> predictions;       // prequential p-hat over scored dyads, block order
    bool divergence_warning = false;
};

// Cumulative prequential risks per (geometry, eta) cell plus the selected
// learning rates and best geometry.
struct RiskTable {
    std::string dataset;
    std::vector<GeometryKind> geometries;
    std::vector<double> eta_grid;
    std::vector<RiskCell> cells;  // geometry-major, eta-minor
    std::vector<std::uint32_t> scored_dyads;  // B1..BK concatenated (shared by all cells)
    std::vector<std::uint8_t> scored_labels;
    std::uint64_t partition_hash = 0;
    std::vector<double> eta_star;  // per geometry; NaN when all cells of a geometry failed
    GeometryKind best_geometry = GeometryKind::Euclidean;
    bool has_best = false;
    std::vector<std::string> warnings;

    RiskCell& cell(std::size_t gi, std::size_t ei) { return cells[gi * eta_grid.size() + ei]; }
    const RiskCell& cell(std::size_t gi, std::size_t ei) const {
        return cells[gi * eta_grid.size() + ei];
    }
    const RiskCell* find_cell(GeometryKind g, double eta) const;

    std::string to_json() const;  // deterministic key and cell order
    static RiskTable from_json(const std::string& text);
    bool operator==(const RiskTable& other) const;
};

// Uniform shuffle of all dyads (deterministic in seed), |B0| = round(rho * D),
// remainder split into K blocks with sizes differing by at most one.
DyadPartition partition_dyads(int n_nodes, double rho, int K, std::uint64_t seed);

// Monte Carlo posterior-predictive link probabilities for the requested dyads,
// pooling all chains and draws.
std::vector<double> posterior_predictive(const SampleBatch& samples,
                                         const std::vector<std::uint32_t>& dyads, int n_nodes,
                                         GeometryKind g, double alpha);

// Mean negative Bernoulli log-likelihood and mean squared (Brier) loss.
std::pair<double, double> block_losses(const std::vector<double>& p_hat,
                                       const std::vector<std::uint8_t>& labels);

// Fits the eta-posterior on the masked dyads: one NUTS run, chain inits drawn
// from the prior with seeds derived from cfg.seed.
SampleBatch fit_eta_posterior(const DyadData& data, const DyadMask& mask, GeometryKind g,
                              const Hyperparams& h, const ChainConfig& cfg, int n_threads = 1);

// Link-Sequential R-SafeBayes: one shared partition, then for every
// (geometry, eta) cell sequential block scoring and assimilation.
RiskTable run_sweep(const DyadData& data, const SweepConfig& cfg,
                    const std::string& dataset_name = "");

// Fills eta_star / best_geometry on the table (argmin by cumulative log-loss,
// ties toward smaller eta). Throws NumericError when every geometry is missing.
void select_models(RiskTable& table);

}  // namespace rggsb
