#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rggsb/manifold.hpp"

namespace rggsb {

// ---- dyad indexing -----------------------------------------------------------
// Dyads (i,j), 0 <= i < j < n, in row-major upper-triangular order. This ordering
// is global: labels, masks and predictions all index identically.

inline std::size_t dyad_count(int n_nodes) {
    return static_cast<std::size_t>(n_nodes) * (n_nodes - 1) / 2;
}

inline std::size_t dyad_index(int i, int j, int n_nodes) {
    return static_cast<std::size_t>(i) * (2 * n_nodes - i - 1) / 2 + (j - i - 1);
}

std::pair<int, int> dyad_endpoints(std::size_t idx, int n_nodes);

// ---- domain types --------------------------------------------------------------

// Upper-triangular binary adjacency observations (undirected, no self-loops).
struct DyadData {
    int n_nodes = 0;
    std::vector<std::uint8_t> labels;  // length n_nodes*(n_nodes-1)/2, values in {0,1}

    std::size_t n_dyads() const { return labels.size(); }
    std::size_t edge_count() const;
    void validate() const;  // throws UsageError on inconsistent sizes or non-binary labels
};

// Block membership realized as an inclusion mask over the dyad index space.
struct DyadMask {
    std::vector<std::uint8_t> included;

    static DyadMask none(std::size_t n_dyads) { return DyadMask{std::vector<std::uint8_t>(n_dyads, 0)}; }
    static DyadMask all(std::size_t n_dyads) { return DyadMask{std::vector<std::uint8_t>(n_dyads, 1)}; }
    std::size_t count() const;
};

// Unconstrained sampling state: chart coordinates for every node plus the log
// threshold radius rho (r = exp(rho) > 0 by construction).
struct LatentState {
    int n_nodes = 0;
    int chart_dim = 0;
    std::vector<double> z;  // row-major n_nodes x chart_dim
    double rho = 0.0;

    double* row(int i) { return z.data() + static_cast<std::size_t>(i) * chart_dim; }
    const double* row(int i) const { return z.data() + static_cast<std::size_t>(i) * chart_dim; }
    double radius() const;
};

struct Hyperparams {
    double alpha = 5.0;          // link sharpness
    double r_scale = 1.0;        // half-normal scale of the threshold radius
    double z_prior_scale = 1.0;  // normal prior scale per chart coordinate
    double eta = 1.0;            // learning rate in (0, 1]

    void validate() const;
};

// Flat parameter vector layout used by the sampler: [z row-major ..., rho].
std::vector<double> pack_state(const LatentState& s);
LatentState unpack_state(std::span<const double> q, int n_nodes, GeometryKind g);

// ---- likelihood and posterior ----------------------------------------------------

// Numerically stable log sigmoid, branched on the sign of x.
double log_sigmoid(double x);
double sigmoid(double x);

// Soft-threshold connection probability sigma(alpha*(r - d)), kept strictly
// inside (0,1) (the upper tail is saturated one ulp below 1).
double link_prob(double d, double r, double alpha);

// Bernoulli log-likelihood of one dyad through the stable log-sigmoid form.
double dyad_log_lik(int a, double d, double r, double alpha);

// Log-likelihood over the masked dyads at the given sharpness (no prior, no
// tempering); gradient layout matches pack_state. Used by the tempered posterior
// and by the pure-state optimization demos.
double masked_log_lik(const LatentState& s, const DyadData& data, const DyadMask& mask,
                      GeometryKind g, double alpha);
double masked_log_lik_grad(const LatentState& s, const DyadData& data, const DyadMask& mask,
                           GeometryKind g, double alpha, std::vector<double>& grad);

// Generalized eta-posterior log-density: untempered priors + eta * masked log-likelihood,
// with the exp-reparameterization Jacobian for rho included.
double eta_log_posterior(const LatentState& s, const DyadData& data, const DyadMask& mask,
                         GeometryKind g, const Hyperparams& h);
std::vector<double> eta_log_posterior_gradient(const LatentState& s, const DyadData& data,
                                               const DyadMask& mask, GeometryKind g,
                                               const Hyperparams& h);

// Chain initialization: chart coordinates iid Normal(0, z_prior_scale),
// rho = log|eps * r_scale| with eps standard normal. Deterministic in seed.
LatentState sample_prior_state(int n_nodes, GeometryKind g, const Hyperparams& h,
                               std::uint64_t seed);

// Compiled posterior objective over the flat parameter vector. Immutable after
// construction; safe to evaluate from many threads concurrently.
class PosteriorTarget {
  public:
    PosteriorTarget(const DyadData& data, const DyadMask& mask, GeometryKind g, Hyperparams h);

    std::size_t dim() const { return static_cast<std::size_t>(n_) * cdim_ + 1; }
    int n_nodes() const { return n_; }
    GeometryKind geometry() const { return geom_; }
    const Hyperparams& hyper() const { return hyper_; }

    // Returns the log posterior density; fills grad (size dim()) when non-null.
    // Non-finite values are returned as-is (the sampler treats them as
    // divergences); bad_dyad, when non-null, receives the first offending dyad.
    double eval(std::span<const double> q, double* grad, long* bad_dyad) const;

    double log_prob(std::span<const double> q) const { return eval(q, nullptr, nullptr); }
    double log_prob_grad(std::span<const double> q, std::span<double> grad) const {
        return eval(q, grad.data(), nullptr);
    }

  private:
    const DyadData* data_;
    GeometryKind geom_;
    Hyperparams hyper_;
    int n_;
    int cdim_;
    std::vector<std::uint32_t> dyads_;  // included dyad indices
    std::vector<std::pair<std::uint16_t, std::uint16_t>> ends_;
};

}  // namespace rggsb
