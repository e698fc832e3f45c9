#include "rggsb/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rggsb/errors.hpp"
#include "rggsb/util.hpp"

namespace rggsb {

namespace {

constexpr double kMaxEnergyError = 1000.0;  // divergence threshold on log joint drop

struct PhasePoint {
    std::vector<double> q;
    std::vector<double> p;
    std::vector<double> grad;
    double lp = 0.0;

    explicit PhasePoint(std::size_t d) : q(d), p(d), grad(d) {}
};

double kinetic(const std::vector<double>& p, const std::vector<double>& inv_mass) {
    double k = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) k += p[i] * p[i] * inv_mass[i];
    return 0.5 * k;
}

// log joint = log density - kinetic; NaN-safe (-inf for non-finite lp)
double log_joint(double lp, const std::vector<double>& p, const std::vector<double>& inv_mass) {
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    double k = kinetic(p, inv_mass);
    if (!std::isfinite(k)) return -std::numeric_limits<double>::infinity();
    return lp - k;
}

// One leapfrog step in direction sign, using cached gradient in pt.grad.
// inv_mass is the estimated posterior variance (kinetic uses it directly).
void leapfrog_inv(PhasePoint& pt, double eps, const LogProbGradFn& fn,
                  const std::vector<double>& inv_mass) {
    const std::size_t d = pt.q.size();
    for (std::size_t i = 0; i < d; ++i) pt.p[i] += 0.5 * eps * pt.grad[i];
    for (std::size_t i = 0; i < d; ++i) pt.q[i] += eps * pt.p[i] * inv_mass[i];
    pt.lp = fn(pt.q, pt.grad);
    for (std::size_t i = 0; i < d; ++i) pt.p[i] += 0.5 * eps * pt.grad[i];
}

struct TreeResult {
    double cand_lp = 0.0;
    std::vector<double> cand_q;
    std::size_t n_valid = 0;  // leaves inside the slice
    bool ok = false;          // no divergence, no u-turn inside the subtree
    bool divergent = false;
    double alpha_sum = 0.0;  // accept-statistic accumulator
    std::size_t n_alpha = 0;
};

bool no_uturn(const std::vector<double>& q_plus, const std::vector<double>& q_minus,
              const std::vector<double>& p_plus, const std::vector<double>& p_minus,
              const std::vector<double>& inv_mass) {
    double fwd = 0.0, bwd = 0.0;
    for (std::size_t i = 0; i < q_plus.size(); ++i) {
        double dq = q_plus[i] - q_minus[i];
        fwd += dq * p_plus[i] * inv_mass[i];
        bwd += dq * p_minus[i] * inv_mass[i];
    }
    return fwd >= 0.0 && bwd >= 0.0;
}

class NutsChain {
  public:
    NutsChain(const LogProbGradFn& fn, std::vector<double> init, const ChainConfig& cfg,
              std::uint64_t seed)
        : fn_(fn),
          cfg_(cfg),
          dim_(init.size()),
          rng_(seed),
          inv_mass_(init.size(), 1.0),
          state_(init.size()),
          minus_(init.size()),
          plus_(init.size()) {
        state_.q = std::move(init);
        state_.lp = fn_(state_.q, state_.grad);
        if (!std::isfinite(state_.lp))
            throw NumericError("non-finite log density at chain initialization");
    }

    void run(std::span<double> draws_out, std::span<double> lp_out, double& accept_out,
             int& divergences_out, double& step_out) {
        find_initial_step();
        init_dual_averaging();
        setup_windows();

        for (int it = 0; it < cfg_.n_warmup; ++it) {
            transition(true);
            adapt(it);
        }
        eps_ = std::exp(log_eps_bar_);

        double accept_sum = 0.0;
        int divergences = 0;
        for (int it = 0; it < cfg_.n_samples; ++it) {
            transition(false);
            accept_sum += last_accept_;
            divergences += last_divergent_ ? 1 : 0;
            std::copy(state_.q.begin(), state_.q.end(), draws_out.begin() + it * dim_);
            lp_out[it] = state_.lp;
        }
        accept_out = accept_sum / cfg_.n_samples;
        divergences_out = divergences;
        step_out = eps_;
    }

  private:
    double uniform() { return unif_(rng_); }
    double normal() { return norm_(rng_); }

    void draw_momentum(std::vector<double>& p) {
        for (std::size_t i = 0; i < dim_; ++i) p[i] = normal() / std::sqrt(inv_mass_[i]);
    }

    // Step-size heuristic: double/halve one leapfrog step until the joint
    // density ratio crosses 1/2.
    void find_initial_step() {
        eps_ = 1.0;
        PhasePoint pt = state_;
        draw_momentum(pt.p);
        double h0 = log_joint(pt.lp, pt.p, inv_mass_);
        PhasePoint trial = pt;
        leapfrog_inv(trial, eps_, fn_, inv_mass_);
        double h1 = log_joint(trial.lp, trial.p, inv_mass_);
        int guard = 0;
        while (!std::isfinite(h1) && guard++ < 64) {
            eps_ *= 0.5;
            trial = pt;
            leapfrog_inv(trial, eps_, fn_, inv_mass_);
            h1 = log_joint(trial.lp, trial.p, inv_mass_);
        }
        if (!std::isfinite(h1)) throw NumericError("cannot find a finite initial step size");
        double a = (h1 - h0 > std::log(0.5)) ? 1.0 : -1.0;
        guard = 0;
        while (a * (h1 - h0) > -a * std::log(2.0) && guard++ < 100) {
            eps_ *= std::pow(2.0, a);
            if (eps_ < 1e-10 || eps_ > 1e7) break;
            trial = pt;
            leapfrog_inv(trial, eps_, fn_, inv_mass_);
            h1 = log_joint(trial.lp, trial.p, inv_mass_);
            if (!std::isfinite(h1)) {
                if (a > 0) {  // stepped too far; back off and stop
                    eps_ *= 0.5;
                    break;
                }
                h1 = -std::numeric_limits<double>::infinity();
            }
        }
    }

    void init_dual_averaging() {
        mu_ = std::log(10.0 * eps_);
        log_eps_bar_ = std::log(eps_);
        h_bar_ = 0.0;
        da_count_ = 0;
    }

    // Stan-style warmup phases: step-size-only buffers around doubling
    // variance-estimation windows.
    void setup_windows() {
        window_ends_.clear();
        int w = cfg_.n_warmup;
        if (w < 20) return;  // too short for mass adaptation
        int init_buf = std::max(1, static_cast<int>(0.15 * w));
        int term_buf = std::max(1, static_cast<int>(0.10 * w));
        int pos = init_buf;
        int size = 25;
        int end_adapt = w - term_buf;
        if (pos >= end_adapt) return;
        while (pos < end_adapt) {
            int next = pos + size;
            if (next > end_adapt || end_adapt - next < size * 2) next = end_adapt;
            window_ends_.push_back(next);
            pos = next;
            size *= 2;
        }
        welford_reset();
    }

    void welford_reset() {
        wf_count_ = 0;
        wf_mean_.assign(dim_, 0.0);
        wf_m2_.assign(dim_, 0.0);
    }

    void welford_add(const std::vector<double>& q) {
        ++wf_count_;
        for (std::size_t i = 0; i < dim_; ++i) {
            double delta = q[i] - wf_mean_[i];
            wf_mean_[i] += delta / wf_count_;
            wf_m2_[i] += delta * (q[i] - wf_mean_[i]);
        }
    }

    void adapt(int it) {
        // dual averaging on the acceptance statistic
        ++da_count_;
        double t = static_cast<double>(da_count_);
        h_bar_ = (1.0 - 1.0 / (t + 10.0)) * h_bar_ + (cfg_.target_accept - last_accept_) / (t + 10.0);
        double log_eps = mu_ - std::sqrt(t) / 0.05 * h_bar_;
        double w = std::pow(t, -0.75);
        log_eps_bar_ = w * log_eps + (1.0 - w) * log_eps_bar_;
        eps_ = std::exp(log_eps);

        if (window_ends_.empty()) return;
        welford_add(state_.q);
        if (it + 1 == window_ends_.front()) {
            window_ends_.erase(window_ends_.begin());
            if (wf_count_ >= 3) {
                double n = static_cast<double>(wf_count_);
                for (std::size_t i = 0; i < dim_; ++i) {
                    double var = wf_m2_[i] / (n - 1.0);
                    inv_mass_[i] = n / (n + 5.0) * var + 1e-3 * (5.0 / (n + 5.0));
                }
            }
            welford_reset();
            find_initial_step();
            init_dual_averaging();
        }
    }

    void transition(bool warming) {
        draw_momentum(state_.p);
        double joint0 = log_joint(state_.lp, state_.p, inv_mass_);
        // slice variable: log u = joint0 + log(Uniform)
        double log_u = joint0 - std::exponential_distribution<double>(1.0)(rng_);
        joint0_ = joint0;

        minus_ = state_;
        plus_ = state_;
        std::vector<double> cand_q = state_.q;
        double cand_lp = state_.lp;
        std::size_t n_total = 1;
        bool ok = true;
        last_divergent_ = false;
        double alpha_sum = 0.0;
        std::size_t n_alpha = 0;

        for (int depth = 0; depth < cfg_.max_tree_depth && ok; ++depth) {
            int dir = uniform() < 0.5 ? -1 : 1;
            TreeResult sub = build_tree(dir < 0 ? minus_ : plus_, log_u, dir, depth);
            alpha_sum += sub.alpha_sum;
            n_alpha += sub.n_alpha;
            if (sub.divergent) last_divergent_ = true;
            if (sub.ok && sub.n_valid > 0) {
                double accept_p = static_cast<double>(sub.n_valid) / static_cast<double>(n_total);
                if (uniform() < accept_p) {
                    cand_q = sub.cand_q;
                    cand_lp = sub.cand_lp;
                }
            }
            n_total += sub.n_valid;
            ok = sub.ok && no_uturn(plus_.q, minus_.q, plus_.p, minus_.p, inv_mass_);
        }

        state_.q = cand_q;
        state_.lp = fn_(state_.q, state_.grad);  // refresh gradient cache at the new point
        last_accept_ = n_alpha > 0 ? alpha_sum / static_cast<double>(n_alpha) : 0.0;
        (void)warming;
    }

    // Builds a subtree of 2^depth leapfrog steps hanging off `edge` (the
    // current trajectory endpoint in direction dir) and updates that endpoint.
    TreeResult build_tree(PhasePoint& edge, double log_u, int dir, int depth) {
        TreeResult out;
        if (depth == 0) {
            leapfrog_inv(edge, dir * eps_, fn_, inv_mass_);
            double joint = log_joint(edge.lp, edge.p, inv_mass_);
            bool divergent = !(joint - log_u > -kMaxEnergyError);
            out.cand_q = edge.q;
            out.cand_lp = edge.lp;
            out.n_valid = (log_u <= joint) ? 1 : 0;
            out.divergent = divergent;
            out.ok = !divergent;
            double ratio = std::exp(std::min(0.0, joint - joint0_));
            out.alpha_sum = std::isfinite(ratio) ? ratio : 0.0;
            out.n_alpha = 1;
            return out;
        }
        // inner half (closer to the existing trajectory)
        std::vector<double> q_inner_end;
        std::vector<double> p_inner_end;
        TreeResult first = build_tree(edge, log_u, dir, depth - 1);
        if (!first.ok) return first;
        q_inner_end = edge.q;
        p_inner_end = edge.p;
        TreeResult second = build_tree(edge, log_u, dir, depth - 1);
        out.alpha_sum = first.alpha_sum + second.alpha_sum;
        out.n_alpha = first.n_alpha + second.n_alpha;
        out.divergent = first.divergent || second.divergent;
        out.n_valid = first.n_valid + second.n_valid;
        // progressive within-subtree sampling, weight by slice counts
        if (out.n_valid > 0 &&
            uniform() < static_cast<double>(second.n_valid) / static_cast<double>(out.n_valid)) {
            out.cand_q = std::move(second.cand_q);
            out.cand_lp = second.cand_lp;
        } else {
            out.cand_q = std::move(first.cand_q);
            out.cand_lp = first.cand_lp;
        }
        bool sub_uturn;
        if (dir > 0)
            sub_uturn = !no_uturn(edge.q, q_inner_end, edge.p, p_inner_end, inv_mass_);
        else
            sub_uturn = !no_uturn(q_inner_end, edge.q, p_inner_end, edge.p, inv_mass_);
        out.ok = second.ok && !sub_uturn;
        return out;
    }

    const LogProbGradFn& fn_;
    ChainConfig cfg_;
    std::size_t dim_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};

    std::vector<double> inv_mass_;
    PhasePoint state_;
    PhasePoint minus_, plus_;

    double eps_ = 1.0;
    double mu_ = 0.0, log_eps_bar_ = 0.0, h_bar_ = 0.0;
    int da_count_ = 0;
    double joint0_ = 0.0;
    double last_accept_ = 1.0;
    bool last_divergent_ = false;

    std::vector<int> window_ends_;
    std::size_t wf_count_ = 0;
    std::vector<double> wf_mean_, wf_m2_;
};

}  // namespace

void ChainConfig::validate() const {
    if (n_chains < 1 || n_warmup < 1 || n_samples < 1)
        throw UsageError("chain counts must be at least 1");
    if (!(target_accept > 0.0 && target_accept < 1.0))
        throw UsageError("target_accept must lie in (0, 1)");
    if (max_tree_depth < 1 || max_tree_depth > 12)
        throw UsageError("max_tree_depth must lie in [1, 12]");
}

void leapfrog_step(std::span<double> position, std::span<double> momentum, double step_size,
                   const LogProbGradFn& fn, std::span<const double> mass_diag) {
    const std::size_t d = position.size();
    std::vector<double> grad(d);
    fn(position, grad);
    for (std::size_t i = 0; i < d; ++i) momentum[i] += 0.5 * step_size * grad[i];
    for (std::size_t i = 0; i < d; ++i) position[i] += step_size * momentum[i] / mass_diag[i];
    fn(position, grad);
    for (std::size_t i = 0; i < d; ++i) momentum[i] += 0.5 * step_size * grad[i];
}

SampleBatch sample_posterior(const LogProbGradFn& fn, const std::vector<std::vector<double>>& inits,
                             const ChainConfig& cfg, int n_threads) {
    cfg.validate();
    if (inits.size() != static_cast<std::size_t>(cfg.n_chains))
        throw UsageError("need exactly one init per chain");
    const std::size_t dim = inits[0].size();
    for (const auto& q : inits)
        if (q.size() != dim) throw UsageError("chain inits disagree on dimension");

    SampleBatch batch;
    batch.n_chains = cfg.n_chains;
    batch.n_samples = cfg.n_samples;
    batch.dim = dim;
    batch.draws.resize(batch.n_chains * batch.n_samples * dim);
    batch.log_density.resize(batch.n_chains * batch.n_samples);
    batch.accept_rate.resize(batch.n_chains);
    batch.divergence_count.resize(batch.n_chains);
    batch.step_size.resize(batch.n_chains);

    parallel_for(
        batch.n_chains,
        [&](std::size_t c) {
            NutsChain chain(fn, inits[c], cfg, seed_mix(cfg.seed, {0x636861696eULL, c}));
            std::span<double> draws(batch.draws.data() + c * batch.n_samples * dim,
                                    batch.n_samples * dim);
            std::span<double> lps(batch.log_density.data() + c * batch.n_samples, batch.n_samples);
            chain.run(draws, lps, batch.accept_rate[c], batch.divergence_count[c],
                      batch.step_size[c]);
        },
        n_threads);

    for (std::size_t c = 0; c < batch.n_chains; ++c)
        if (batch.divergence_count[c] > 0.10 * cfg.n_samples) batch.divergence_warning = true;
    return batch;
}

SampleBatch sample_posterior(const LogProbFn& log_density_fn, const GradFn& gradient_fn,
                             const std::vector<std::vector<double>>& inits, const ChainConfig& cfg,
                             int n_threads) {
    LogProbGradFn fused = [&](std::span<const double> q, std::span<double> grad) {
        std::vector<double> g = gradient_fn(q);
        std::copy(g.begin(), g.end(), grad.begin());
        return log_density_fn(q);
    };
    return sample_posterior(fused, inits, cfg, n_threads);
}

}  // namespace rggsb
