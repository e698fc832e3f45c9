#include "rggsb/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "rggsb/errors.hpp"
#include "rggsb/util.hpp"

namespace rggsb {

namespace {

constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log(sqrt(2*pi))
// log density of a half-normal with scale s at r > 0, constant part:
// log(sqrt(2/pi)/s) - r^2/(2 s^2)
constexpr double kLogSqrt2OverPi = -0.22579135264472741;  // log(sqrt(2/pi))

double next_below_one() { return std::nextafter(1.0, 0.0); }

}  // namespace

std::pair<int, int> dyad_endpoints(std::size_t idx, int n_nodes) {
    // invert the row-major upper-triangular index with a row scan; n is small here
    std::size_t row_start = 0;
    for (int i = 0; i < n_nodes - 1; ++i) {
        std::size_t row_len = static_cast<std::size_t>(n_nodes - 1 - i);
        if (idx < row_start + row_len) return {i, static_cast<int>(idx - row_start) + i + 1};
        row_start += row_len;
    }
    throw UsageError("dyad index " + std::to_string(idx) + " out of range for n=" +
                     std::to_string(n_nodes));
}

std::size_t DyadData::edge_count() const {
    std::size_t c = 0;
    for (auto a : labels) c += a;
    return c;
}

void DyadData::validate() const {
    if (n_nodes < 2) throw UsageError("DyadData requires at least 2 nodes");
    if (labels.size() != dyad_count(n_nodes))
        throw UsageError("DyadData label vector length does not match n_nodes");
    for (auto a : labels)
        if (a > 1) throw UsageError("DyadData labels must be binary");
}

std::size_t DyadMask::count() const {
    std::size_t c = 0;
    for (auto m : included) c += (m != 0);
    return c;
}

double LatentState::radius() const { return std::exp(rho); }

void Hyperparams::validate() const {
    if (!(alpha > 0)) throw UsageError("alpha must be positive");
    if (!(r_scale > 0)) throw UsageError("r_scale must be positive");
    if (!(z_prior_scale > 0)) throw UsageError("z_prior_scale must be positive");
    if (!(eta > 0 && eta <= 1)) throw UsageError("eta must lie in (0, 1]");
}

std::vector<double> pack_state(const LatentState& s) {
    std::vector<double> q(s.z.begin(), s.z.end());
    q.push_back(s.rho);
    return q;
}

LatentState unpack_state(std::span<const double> q, int n_nodes, GeometryKind g) {
    int cdim = chart_dim(g);
    std::size_t expect = static_cast<std::size_t>(n_nodes) * cdim + 1;
    if (q.size() != expect) throw UsageError("flat state size does not match n_nodes and geometry");
    LatentState s;
    s.n_nodes = n_nodes;
    s.chart_dim = cdim;
    s.z.assign(q.begin(), q.end() - 1);
    s.rho = q.back();
    return s;
}

double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double link_prob(double d, double r, double alpha) {
    double p = sigmoid(alpha * (r - d));
    if (p >= 1.0) p = next_below_one();  // keep the open interval for downstream logs
    if (p <= 0.0) p = std::numeric_limits<double>::min();
    return p;
}

double dyad_log_lik(int a, double d, double r, double alpha) {
    double x = alpha * (r - d);
    return a ? log_sigmoid(x) : log_sigmoid(-x);
}

namespace {

struct LikGradAccum {
    double* gz = nullptr;  // n x cdim, likelihood part only
    double dr_sum = 0.0;   // sum of alpha*(a - q) over dyads
};

// Shared evaluation core: log-likelihood over `ends` dyads, optionally with
// gradient accumulation. Returns the log-lik; records the first non-finite dyad.
double log_lik_core(const double* z, double rho, int n, int cdim, GeometryKind g,
                    const DyadData& data, const std::vector<std::uint32_t>& dyads,
                    const std::vector<std::pair<std::uint16_t, std::uint16_t>>& ends,
                    double alpha, LikGradAccum* acc, long* bad_dyad) {
    thread_local std::vector<double> emb_buf;
    const int edim = embed_dim(g);
    emb_buf.resize(static_cast<std::size_t>(n) * edim);
    for (int i = 0; i < n; ++i)
        manifold_detail::embed_raw(z + static_cast<std::size_t>(i) * cdim, g,
                                   emb_buf.data() + static_cast<std::size_t>(i) * edim);

    const double r = std::exp(rho);
    double ll = 0.0;
    bool bad = false;
    double ga[3], gb[3];
    for (std::size_t k = 0; k < ends.size(); ++k) {
        const int i = ends[k].first;
        const int j = ends[k].second;
        const double* ci = z + static_cast<std::size_t>(i) * cdim;
        const double* cj = z + static_cast<std::size_t>(j) * cdim;
        const double* ei = emb_buf.data() + static_cast<std::size_t>(i) * edim;
        const double* ej = emb_buf.data() + static_cast<std::size_t>(j) * edim;
        const int a = data.labels[dyads[k]];
        double d, term;
        if (acc) {
            d = manifold_detail::dist_grad_raw(ci, ei, cj, ej, g, ga, gb);
            double x = alpha * (r - d);
            term = a ? log_sigmoid(x) : log_sigmoid(-x);
            double q = sigmoid(x);
            double dd = alpha * (q - a);  // d(term)/d(distance)
            double* gi = acc->gz + static_cast<std::size_t>(i) * cdim;
            double* gj = acc->gz + static_cast<std::size_t>(j) * cdim;
            for (int c = 0; c < cdim; ++c) {
                gi[c] += dd * ga[c];
                gj[c] += dd * gb[c];
            }
            acc->dr_sum += alpha * (a - q);
        } else {
            d = manifold_detail::dist_raw(ci, ei, g);
            double x = alpha * (r - d);
            term = a ? log_sigmoid(x) : log_sigmoid(-x);
        }
        ll += term;
        if (!bad && !std::isfinite(term)) {
            bad = true;
            if (bad_dyad) *bad_dyad = static_cast<long>(dyads[k]);
        }
    }
    return ll;
}

std::vector<std::uint32_t> mask_to_indices(const DyadData& data, const DyadMask& mask) {
    if (mask.included.size() != data.n_dyads())
        throw UsageError("mask length does not match dyad count");
    std::vector<std::uint32_t> idx;
    idx.reserve(mask.count());
    for (std::size_t k = 0; k < mask.included.size(); ++k)
        if (mask.included[k]) idx.push_back(static_cast<std::uint32_t>(k));
    return idx;
}

std::vector<std::pair<std::uint16_t, std::uint16_t>> endpoints_of(
    const std::vector<std::uint32_t>& dyads, int n) {
    std::vector<std::pair<std::uint16_t, std::uint16_t>> ends;
    ends.reserve(dyads.size());
    // walk rows once instead of inverting every index
    std::size_t row_start = 0;
    int i = 0;
    for (std::uint32_t d : dyads) {
        while (d >= row_start + static_cast<std::size_t>(n - 1 - i)) {
            row_start += static_cast<std::size_t>(n - 1 - i);
            ++i;
        }
        int j = static_cast<int>(d - row_start) + i + 1;
        ends.emplace_back(static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(j));
    }
    return ends;
}

void check_state(const LatentState& s, const DyadData& data, GeometryKind g) {
    if (s.n_nodes != data.n_nodes) throw UsageError("state and data disagree on n_nodes");
    if (s.chart_dim != chart_dim(g)) throw UsageError("state chart dimension does not match geometry");
    if (s.z.size() != static_cast<std::size_t>(s.n_nodes) * s.chart_dim)
        throw UsageError("state coordinate matrix has wrong size");
}

double prior_log_density(std::span<const double> q, int n, int cdim, const Hyperparams& h) {
    double lp = 0.0;
    const double s2 = h.z_prior_scale * h.z_prior_scale;
    const double log_s = std::log(h.z_prior_scale);
    std::size_t nz = static_cast<std::size_t>(n) * cdim;
    for (std::size_t k = 0; k < nz; ++k) lp += -0.5 * q[k] * q[k] / s2 - log_s - kLogSqrt2Pi;
    const double rho = q[nz];
    const double r = std::exp(rho);
    // half-normal on r expressed in rho-space, Jacobian term +rho
    lp += kLogSqrt2OverPi - std::log(h.r_scale) - r * r / (2.0 * h.r_scale * h.r_scale) + rho;
    return lp;
}

void prior_gradient(std::span<const double> q, int n, int cdim, const Hyperparams& h,
                    double* grad) {
    const double s2 = h.z_prior_scale * h.z_prior_scale;
    std::size_t nz = static_cast<std::size_t>(n) * cdim;
    for (std::size_t k = 0; k < nz; ++k) grad[k] += -q[k] / s2;
    const double r = std::exp(q[nz]);
    grad[nz] += 1.0 - r * r / (h.r_scale * h.r_scale);
}

}  // namespace

double masked_log_lik(const LatentState& s, const DyadData& data, const DyadMask& mask,
                      GeometryKind g, double alpha) {
    check_state(s, data, g);
    auto dyads = mask_to_indices(data, mask);
    auto ends = endpoints_of(dyads, data.n_nodes);
    long bad = -1;
    double ll = log_lik_core(s.z.data(), s.rho, s.n_nodes, s.chart_dim, g, data, dyads, ends,
                             alpha, nullptr, &bad);
    if (!std::isfinite(ll))
        throw NumericError("non-finite log-likelihood at dyad " + std::to_string(bad), bad);
    return ll;
}

double masked_log_lik_grad(const LatentState& s, const DyadData& data, const DyadMask& mask,
                           GeometryKind g, double alpha, std::vector<double>& grad) {
    check_state(s, data, g);
    auto dyads = mask_to_indices(data, mask);
    auto ends = endpoints_of(dyads, data.n_nodes);
    grad.assign(static_cast<std::size_t>(s.n_nodes) * s.chart_dim + 1, 0.0);
    LikGradAccum acc;
    acc.gz = grad.data();
    long bad = -1;
    double ll = log_lik_core(s.z.data(), s.rho, s.n_nodes, s.chart_dim, g, data, dyads, ends,
                             alpha, &acc, &bad);
    grad.back() = acc.dr_sum * std::exp(s.rho);  // chain rule through r = exp(rho)
    if (!std::isfinite(ll))
        throw NumericError("non-finite log-likelihood at dyad " + std::to_string(bad), bad);
    return ll;
}

double eta_log_posterior(const LatentState& s, const DyadData& data, const DyadMask& mask,
                         GeometryKind g, const Hyperparams& h) {
    h.validate();
    check_state(s, data, g);
    std::vector<double> q = pack_state(s);
    double lp = prior_log_density(q, s.n_nodes, s.chart_dim, h);
    lp += h.eta * masked_log_lik(s, data, mask, g, h.alpha);
    return lp;
}

std::vector<double> eta_log_posterior_gradient(const LatentState& s, const DyadData& data,
                                               const DyadMask& mask, GeometryKind g,
                                               const Hyperparams& h) {
    h.validate();
    check_state(s, data, g);
    std::vector<double> grad;
    masked_log_lik_grad(s, data, mask, g, h.alpha, grad);
    for (auto& v : grad) v *= h.eta;
    std::vector<double> q = pack_state(s);
    prior_gradient(q, s.n_nodes, s.chart_dim, h, grad.data());
    return grad;
}

LatentState sample_prior_state(int n_nodes, GeometryKind g, const Hyperparams& h,
                               std::uint64_t seed) {
    if (n_nodes < 2) throw UsageError("need at least 2 nodes");
    h.validate();
    std::mt19937_64 rng(splitmix64(seed));
    std::normal_distribution<double> normal(0.0, 1.0);
    LatentState s;
    s.n_nodes = n_nodes;
    s.chart_dim = chart_dim(g);
    s.z.resize(static_cast<std::size_t>(n_nodes) * s.chart_dim);
    for (auto& v : s.z) v = h.z_prior_scale * normal(rng);
    double eps = normal(rng);
    s.rho = std::log(std::fabs(eps) * h.r_scale);
    return s;
}

PosteriorTarget::PosteriorTarget(const DyadData& data, const DyadMask& mask, GeometryKind g,
                                 Hyperparams h)
    : data_(&data), geom_(g), hyper_(h), n_(data.n_nodes), cdim_(chart_dim(g)) {
    data.validate();
    h.validate();
    if (data.n_nodes > 65535) throw UsageError("node count exceeds supported range");
    dyads_ = mask_to_indices(data, mask);
    if (dyads_.empty()) throw UsageError("training mask must include at least one dyad");
    ends_ = endpoints_of(dyads_, n_);
}

double PosteriorTarget::eval(std::span<const double> q, double* grad, long* bad_dyad) const {
    if (q.size() != dim()) throw UsageError("flat state has wrong dimension");
    double lp;
    if (grad) {
        std::fill(grad, grad + dim(), 0.0);
        LikGradAccum acc;
        acc.gz = grad;
        double ll = log_lik_core(q.data(), q[dim() - 1], n_, cdim_, geom_, *data_, dyads_, ends_,
                                 hyper_.alpha, &acc, bad_dyad);
        const std::size_t nz = dim() - 1;
        for (std::size_t k = 0; k < nz; ++k) grad[k] *= hyper_.eta;
        grad[nz] = hyper_.eta * acc.dr_sum * std::exp(q[nz]);
        prior_gradient(q, n_, cdim_, hyper_, grad);
        lp = prior_log_density(q, n_, cdim_, hyper_) + hyper_.eta * ll;
    } else {
        double ll = log_lik_core(q.data(), q[dim() - 1], n_, cdim_, geom_, *data_, dyads_, ends_,
                                 hyper_.alpha, nullptr, bad_dyad);
        lp = prior_log_density(q, n_, cdim_, hyper_) + hyper_.eta * ll;
    }
    return lp;
}

}  // namespace rggsb
