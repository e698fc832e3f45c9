#include "rggsb/prequential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "rggsb/errors.hpp"
#include "rggsb/util.hpp"

namespace rggsb {

using ordered_json = nlohmann::ordered_json;

std::uint64_t DyadPartition::content_hash() const {
    std::vector<std::uint32_t> seq;
    seq.push_back(static_cast<std::uint32_t>(initial_block.size()));
    seq.insert(seq.end(), initial_block.begin(), initial_block.end());
    for (const auto& b : test_blocks) {
        seq.push_back(static_cast<std::uint32_t>(b.size()));
        seq.insert(seq.end(), b.begin(), b.end());
    }
    return sequence_hash(seq);
}

void SweepConfig::validate(std::size_t n_dyads) const {
    if (eta_grid.empty()) throw UsageError("eta grid must be nonempty");
    for (std::size_t i = 0; i < eta_grid.size(); ++i) {
        if (!(eta_grid[i] > 0.0 && eta_grid[i] <= 1.0))
            throw UsageError("eta grid values must lie in (0, 1]");
        if (i > 0 && !(eta_grid[i] > eta_grid[i - 1]))
            throw UsageError("eta grid must be strictly increasing");
    }
    if (!(rho > 0.0 && rho < 1.0)) throw UsageError("rho must lie in (0, 1)");
    if (K < 1) throw UsageError("K must be at least 1");
    if (geometries.empty()) throw UsageError("need at least one geometry");
    chain_cfg.validate();
    Hyperparams h = hyper;
    h.eta = eta_grid.front();
    h.validate();
    if (n_dyads < static_cast<std::size_t>(K) + 1)
        throw UsageError("not enough dyads for the requested block count");
}

DyadPartition partition_dyads(int n_nodes, double rho, int K, std::uint64_t seed) {
    if (n_nodes < 3) throw UsageError("need at least 3 nodes to partition");
    if (K < 1) throw UsageError("K must be at least 1");
    if (!(rho > 0.0 && rho < 1.0)) throw UsageError("rho must lie in (0, 1)");

    const std::size_t total = dyad_count(n_nodes);
    std::vector<std::uint32_t> order(total);
    std::iota(order.begin(), order.end(), 0u);
    std::mt19937_64 rng(splitmix64(seed ^ 0x7061727469746eULL));
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t b0 = static_cast<std::size_t>(std::llround(rho * static_cast<double>(total)));
    std::size_t rest = total - std::min(b0, total);
    if (b0 == 0 || rest < static_cast<std::size_t>(K))
        throw UsageError("partition would produce an empty block");

    DyadPartition part;
    part.initial_block.assign(order.begin(), order.begin() + b0);
    std::size_t base = rest / K;
    std::size_t extra = rest % K;  // first `extra` blocks get one more dyad
    std::size_t pos = b0;
    for (int k = 0; k < K; ++k) {
        std::size_t len = base + (static_cast<std::size_t>(k) < extra ? 1 : 0);
        part.test_blocks.emplace_back(order.begin() + pos, order.begin() + pos + len);
        pos += len;
    }
    return part;
}

std::vector<double> posterior_predictive(const SampleBatch& samples,
                                         const std::vector<std::uint32_t>& dyads, int n_nodes,
                                         GeometryKind g, double alpha) {
    if (samples.total_draws() == 0) throw UsageError("empty sample set");
    if (dyads.empty()) return {};
    const int cdim = chart_dim(g);
    const int edim = embed_dim(g);
    if (samples.dim != static_cast<std::size_t>(n_nodes) * cdim + 1)
        throw UsageError("sample dimension does not match n_nodes and geometry");

    std::vector<std::pair<int, int>> ends;
    ends.reserve(dyads.size());
    for (auto didx : dyads) ends.push_back(dyad_endpoints(didx, n_nodes));

    std::vector<double> acc(dyads.size(), 0.0);
    std::vector<double> emb(static_cast<std::size_t>(n_nodes) * edim);
    for (std::size_t c = 0; c < samples.n_chains; ++c) {
        for (std::size_t s = 0; s < samples.n_samples; ++s) {
            auto q = samples.draw(c, s);
            double r = std::exp(q[samples.dim - 1]);
            for (int i = 0; i < n_nodes; ++i)
                manifold_detail::embed_raw(q.data() + static_cast<std::size_t>(i) * cdim, g,
                                           emb.data() + static_cast<std::size_t>(i) * edim);
            for (std::size_t k = 0; k < ends.size(); ++k) {
                double d = manifold_detail::dist_raw(
                    emb.data() + static_cast<std::size_t>(ends[k].first) * edim,
                    emb.data() + static_cast<std::size_t>(ends[k].second) * edim, g);
                acc[k] += link_prob(d, r, alpha);
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(samples.total_draws());
    for (auto& v : acc) v *= inv;
    return acc;
}

std::pair<double, double> block_losses(const std::vector<double>& p_hat,
                                       const std::vector<std::uint8_t>& labels) {
    if (p_hat.size() != labels.size() || p_hat.empty())
        throw UsageError("predictions and labels must have equal nonzero length");
    double ll = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < p_hat.size(); ++k) {
        double p = p_hat[k];
        if (!(p > 0.0 && p < 1.0))
            throw NumericError("predictive probability outside (0,1) at position " +
                               std::to_string(k));
        double a = static_cast<double>(labels[k]);
        ll -= a * std::log(p) + (1.0 - a) * std::log(1.0 - p);
        sq += (p - a) * (p - a);
    }
    double inv = 1.0 / static_cast<double>(p_hat.size());
    return {ll * inv, sq * inv};
}

SampleBatch fit_eta_posterior(const DyadData& data, const DyadMask& mask, GeometryKind g,
                              const Hyperparams& h, const ChainConfig& cfg, int n_threads) {
    PosteriorTarget target(data, mask, g, h);
    std::vector<std::vector<double>> inits;
    inits.reserve(cfg.n_chains);
    for (int c = 0; c < cfg.n_chains; ++c) {
        LatentState s = sample_prior_state(data.n_nodes, g, h,
                                           seed_mix(cfg.seed, {0x696e6974ULL, static_cast<std::uint64_t>(c)}));
        inits.push_back(pack_state(s));
    }
    LogProbGradFn fn = [&target](std::span<const double> q, std::span<double> grad) {
        return target.log_prob_grad(q, grad);
    };
    return sample_posterior(fn, inits, cfg, n_threads);
}

namespace {

void run_cell(const DyadData& data, const SweepConfig& cfg, const DyadPartition& part,
              std::size_t gi, std::size_t ei, RiskCell& cell) {
    const GeometryKind g = cfg.geometries[gi];
    const double eta = cfg.eta_grid[ei];
    cell.geometry = g;
    cell.eta = eta;

    Hyperparams h = cfg.hyper;
    h.eta = eta;

    DyadMask train = DyadMask::none(data.n_dyads());
    for (auto d : part.initial_block) train.included[d] = 1;

    try {
        for (std::size_t k = 0; k < part.test_blocks.size(); ++k) {
            const auto& block = part.test_blocks[k];
            ChainConfig ccfg = cfg.chain_cfg;
            ccfg.seed = seed_mix(cfg.seed,
                                 {static_cast<std::uint64_t>(g), ei, k});
            SampleBatch batch = fit_eta_posterior(data, train, g, h, ccfg, 1);
            if (batch.divergence_warning) cell.divergence_warning = true;

            std::vector<double> p_hat = posterior_predictive(batch, block, data.n_nodes, g, h.alpha);
            std::vector<std::uint8_t> labels(block.size());
            for (std::size_t t = 0; t < block.size(); ++t) labels[t] = data.labels[block[t]];
            auto [ll, sq] = block_losses(p_hat, labels);

            cell.per_block_log_loss.push_back(ll);
            cell.per_block_sq_loss.push_back(sq);
            cell.cum_log_loss += ll;
            cell.cum_sq_loss += sq;
            cell.diagnostics.push_back(batch_diagnostics(batch, data.n_nodes, g));
            cell.predictions.insert(cell.predictions.end(), p_hat.begin(), p_hat.end());

            for (auto d : block) train.included[d] = 1;  // prequential update
        }
        cell.ok = true;
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
        cell.per_block_log_loss.clear();
        cell.per_block_sq_loss.clear();
        cell.diagnostics.clear();
        cell.predictions.clear();
        cell.cum_log_loss = 0.0;
        cell.cum_sq_loss = 0.0;
    }
}

}  // namespace

RiskTable run_sweep(const DyadData& data, const SweepConfig& cfg,
                    const std::string& dataset_name) {
    data.validate();
    cfg.validate(data.n_dyads());

    DyadPartition part = partition_dyads(data.n_nodes, cfg.rho, cfg.K,
                                         cfg.partition_seed.value_or(cfg.seed));

    RiskTable table;
    table.dataset = dataset_name;
    table.geometries = cfg.geometries;
    table.eta_grid = cfg.eta_grid;
    table.partition_hash = part.content_hash();
    for (const auto& block : part.test_blocks) {
        for (auto d : block) {
            table.scored_dyads.push_back(d);
            table.scored_labels.push_back(data.labels[d]);
        }
    }
    table.cells.resize(cfg.geometries.size() * cfg.eta_grid.size());

    const std::size_t n_cells = table.cells.size();
    parallel_for(n_cells, [&](std::size_t idx) {
        std::size_t gi = idx / cfg.eta_grid.size();
        std::size_t ei = idx % cfg.eta_grid.size();
        run_cell(data, cfg, part, gi, ei, table.cells[idx]);
    });

    for (const auto& c : table.cells)
        if (!c.ok)
            table.warnings.push_back("cell (" + std::string(geometry_name(c.geometry)) + ", eta=" +
                                     std::to_string(c.eta) + ") failed: " + c.error);
    select_models(table);
    return table;
}

void select_models(RiskTable& table) {
    const std::size_t ne = table.eta_grid.size();
    table.eta_star.assign(table.geometries.size(), std::numeric_limits<double>::quiet_NaN());
    double best_loss = std::numeric_limits<double>::infinity();
    table.has_best = false;
    for (std::size_t gi = 0; gi < table.geometries.size(); ++gi) {
        double min_loss = std::numeric_limits<double>::infinity();
        double star = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t ei = 0; ei < ne; ++ei) {
            const RiskCell& c = table.cell(gi, ei);
            if (!c.ok) continue;
            if (c.cum_log_loss < min_loss) {  // strict <: ties resolve to the smaller eta
                min_loss = c.cum_log_loss;
                star = c.eta;
            }
        }
        if (std::isnan(star)) {
            table.warnings.push_back(std::string("geometry ") +
                                     geometry_name(table.geometries[gi]) +
                                     " has no successful cells; excluded from selection");
            continue;
        }
        table.eta_star[gi] = star;
        if (min_loss < best_loss) {
            best_loss = min_loss;
            table.best_geometry = table.geometries[gi];
            table.has_best = true;
        }
    }
    if (!table.has_best) throw NumericError("every geometry failed; no model can be selected");
}

const RiskCell* RiskTable::find_cell(GeometryKind g, double eta) const {
    for (const auto& c : cells)
        if (c.geometry == g && std::fabs(c.eta - eta) < 1e-12) return &c;
    return nullptr;
}

namespace {

ordered_json diagnostics_to_json(const Diagnostics& d) {
    ordered_json j;
    for (int k = 0; k < 3; ++k) {
        j[Diagnostics::scalar_names[k]] = {{"rhat", d.rhat[k]}, {"ess_bulk", d.ess[k]}};
    }
    return j;
}

Diagnostics diagnostics_from_json(const ordered_json& j) {
    Diagnostics d;
    for (int k = 0; k < 3; ++k) {
        const auto& s = j.at(Diagnostics::scalar_names[k]);
        d.rhat[k] = s.at("rhat").get<double>();
        d.ess[k] = s.at("ess_bulk").get<double>();
    }
    return d;
}

}  // namespace

std::string RiskTable::to_json() const {
    ordered_json j;
    j["dataset"] = dataset;
    j["geometries"] = ordered_json::array();
    for (auto g : geometries) j["geometries"].push_back(geometry_name(g));
    j["eta_grid"] = eta_grid;
    j["partition_hash"] = partition_hash;
    j["scored_dyads"] = scored_dyads;
    j["scored_labels"] = scored_labels;
    j["cells"] = ordered_json::array();
    for (const auto& c : cells) {
        ordered_json jc;
        jc["geometry"] = geometry_name(c.geometry);
        jc["eta"] = c.eta;
        jc["ok"] = c.ok;
        if (!c.ok) jc["error"] = c.error;
        jc["cum_log_loss"] = c.cum_log_loss;
        jc["cum_sq_loss"] = c.cum_sq_loss;
        jc["per_block_log_loss"] = c.per_block_log_loss;
        jc["per_block_sq_loss"] = c.per_block_sq_loss;
        jc["diagnostics"] = ordered_json::array();
        for (const auto& d : c.diagnostics) jc["diagnostics"].push_back(diagnostics_to_json(d));
        jc["predictions"] = c.predictions;
        jc["divergence_warning"] = c.divergence_warning;
        j["cells"].push_back(std::move(jc));
    }
    j["eta_star"] = ordered_json::object();
    for (std::size_t gi = 0; gi < geometries.size(); ++gi) {
        if (std::isnan(eta_star[gi]))
            j["eta_star"][geometry_name(geometries[gi])] = nullptr;
        else
            j["eta_star"][geometry_name(geometries[gi])] = eta_star[gi];
    }
    j["best_geometry"] = has_best ? ordered_json(geometry_name(best_geometry)) : ordered_json(nullptr);
    j["warnings"] = warnings;
    return j.dump(2);
}

RiskTable RiskTable::from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    RiskTable t;
    t.dataset = j.at("dataset").get<std::string>();
    for (const auto& name : j.at("geometries")) {
        auto g = parse_geometry(name.get<std::string>());
        if (!g) throw UsageError("unknown geometry in JSON: " + name.get<std::string>());
        t.geometries.push_back(*g);
    }
    t.eta_grid = j.at("eta_grid").get<std::vector<double>>();
    t.partition_hash = j.at("partition_hash").get<std::uint64_t>();
    t.scored_dyads = j.at("scored_dyads").get<std::vector<std::uint32_t>>();
    t.scored_labels = j.at("scored_labels").get<std::vector<std::uint8_t>>();
    for (const auto& jc : j.at("cells")) {
        RiskCell c;
        auto g = parse_geometry(jc.at("geometry").get<std::string>());
        if (!g) throw UsageError("unknown geometry in JSON cell");
        c.geometry = *g;
        c.eta = jc.at("eta").get<double>();
        c.ok = jc.at("ok").get<bool>();
        if (jc.contains("error")) c.error = jc.at("error").get<std::string>();
        c.cum_log_loss = jc.at("cum_log_loss").get<double>();
        c.cum_sq_loss = jc.at("cum_sq_loss").get<double>();
        c.per_block_log_loss = jc.at("per_block_log_loss").get<std::vector<double>>();
        c.per_block_sq_loss = jc.at("per_block_sq_loss").get<std::vector<double>>();
        for (const auto& jd : jc.at("diagnostics")) c.diagnostics.push_back(diagnostics_from_json(jd));
        c.predictions = jc.at("predictions").get<std::vector<double>>();
        c.divergence_warning = jc.at("divergence_warning").get<bool>();
        t.cells.push_back(std::move(c));
    }
    t.eta_star.assign(t.geometries.size(), std::numeric_limits<double>::quiet_NaN());
    const auto& je = j.at("eta_star");
    for (std::size_t gi = 0; gi < t.geometries.size(); ++gi) {
        const auto& v = je.at(geometry_name(t.geometries[gi]));
        if (!v.is_null()) t.eta_star[gi] = v.get<double>();
    }
    if (!j.at("best_geometry").is_null()) {
        t.best_geometry = *parse_geometry(j.at("best_geometry").get<std::string>());
        t.has_best = true;
    }
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    return t;
}

bool RiskTable::operator==(const RiskTable& other) const {
    return to_json() == other.to_json();
}

}  // namespace rggsb
