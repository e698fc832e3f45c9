// rgg-safebayes: robust Bayesian inference for latent space network models.
// Subcommands: generate, fit, sweep, ablate, demo, report.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "rggsb/analysis.hpp"
#include "rggsb/data_io.hpp"
#include "rggsb/errors.hpp"
#include "rggsb/prequential.hpp"
#include "rggsb/util.hpp"

namespace fs = std::filesystem;
using namespace rggsb;

namespace {

// ---- config file: flat "key = value" lines mirroring ExperimentConfig -------

struct ExperimentConfig {
    std::optional<std::string> dataset_path;
    std::optional<GeneratorSpec> dataset_generator;
    SweepConfig sweep;
    std::string output = "out";
    std::optional<Ablation> ablation;
    std::string dataset_name = "dataset";
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        std::size_t a = item.find_first_not_of(" \t");
        std::size_t b = item.find_last_not_of(" \t");
        if (a == std::string::npos) continue;
        out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x;
    try {
        x = std::stod(v, &used);
    } catch (const std::logic_error&) {
        throw UsageError("config key '" + key + "': cannot parse number from '" + v + "'");
    }
    if (used != v.size()) throw UsageError("config key '" + key + "': trailing junk in '" + v + "'");
    return x;
}

long parse_int(const std::string& key, const std::string& v) {
    double x = parse_double(key, v);
    if (x != std::floor(x)) throw UsageError("config key '" + key + "' expects an integer");
    return static_cast<long>(x);
}

void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dataset.path") {
        cfg.dataset_path = value;
    } else if (key == "dataset.kind") {
        auto k = parse_generator(value);
        if (!k) throw UsageError("unknown generator kind '" + value + "'");
        if (!cfg.dataset_generator) cfg.dataset_generator.emplace();
        cfg.dataset_generator->kind = *k;
    } else if (key == "dataset.n_nodes" || key == "dataset.seed" || key == "dataset.R" ||
               key == "dataset.p_in" || key == "dataset.p_out" || key == "dataset.core_frac" ||
               key == "dataset.p_cc" || key == "dataset.p_cp" || key == "dataset.p_pp") {
        if (!cfg.dataset_generator) cfg.dataset_generator.emplace();
        GeneratorSpec& g = *cfg.dataset_generator;
        if (key == "dataset.n_nodes") g.n_nodes = static_cast<int>(parse_int(key, value));
        else if (key == "dataset.seed") g.seed = static_cast<std::uint64_t>(parse_int(key, value));
        else if (key == "dataset.R") g.R = parse_double(key, value);
        else if (key == "dataset.p_in") g.p_in = parse_double(key, value);
        else if (key == "dataset.p_out") g.p_out = parse_double(key, value);
        else if (key == "dataset.core_frac") g.core_frac = parse_double(key, value);
        else if (key == "dataset.p_cc") g.p_cc = parse_double(key, value);
        else if (key == "dataset.p_cp") g.p_cp = parse_double(key, value);
        else g.p_pp = parse_double(key, value);
    } else if (key == "dataset.name") {
        cfg.dataset_name = value;
    } else if (key == "sweep.geometries") {
        cfg.sweep.geometries.clear();
        for (const auto& name : split_list(value)) {
            auto g = parse_geometry(name);
            if (!g) throw UsageError("unknown geometry '" + name + "'");
            cfg.sweep.geometries.push_back(*g);
        }
    } else if (key == "sweep.eta_grid") {
        cfg.sweep.eta_grid.clear();
        for (const auto& s : split_list(value)) cfg.sweep.eta_grid.push_back(parse_double(key, s));
    } else if (key == "sweep.K") {
        cfg.sweep.K = static_cast<int>(parse_int(key, value));
    } else if (key == "sweep.rho") {
        cfg.sweep.rho = parse_double(key, value);
    } else if (key == "sweep.seed") {
        cfg.sweep.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "sweep.partition_seed") {
        cfg.sweep.partition_seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "sweep.chain_cfg.n_chains") {
        cfg.sweep.chain_cfg.n_chains = static_cast<int>(parse_int(key, value));
    } else if (key == "sweep.chain_cfg.n_warmup") {
        cfg.sweep.chain_cfg.n_warmup = static_cast<int>(parse_int(key, value));
    } else if (key == "sweep.chain_cfg.n_samples") {
        cfg.sweep.chain_cfg.n_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "sweep.chain_cfg.target_accept") {
        cfg.sweep.chain_cfg.target_accept = parse_double(key, value);
    } else if (key == "sweep.chain_cfg.max_tree_depth") {
        cfg.sweep.chain_cfg.max_tree_depth = static_cast<int>(parse_int(key, value));
    } else if (key == "sweep.hyper.alpha") {
        cfg.sweep.hyper.alpha = parse_double(key, value);
    } else if (key == "sweep.hyper.r_scale") {
        cfg.sweep.hyper.r_scale = parse_double(key, value);
    } else if (key == "sweep.hyper.z_prior_scale") {
        cfg.sweep.hyper.z_prior_scale = parse_double(key, value);
    } else if (key == "output") {
        cfg.output = value;
    } else if (key == "ablation.vary") {
        if (!cfg.ablation) cfg.ablation.emplace();
        if (value == "K") cfg.ablation->vary = AblationVariable::K;
        else if (value == "rho") cfg.ablation->vary = AblationVariable::Rho;
        else if (value == "shuffle") cfg.ablation->vary = AblationVariable::Shuffle;
        else throw UsageError("ablation.vary must be one of K, rho, shuffle");
    } else if (key == "ablation.values") {
        if (!cfg.ablation) cfg.ablation.emplace();
        cfg.ablation->values.clear();
        for (const auto& s : split_list(value)) cfg.ablation->values.push_back(parse_double(key, s));
    } else {
        throw UsageError("unknown config key '" + key + "'");  // fail fast on typos
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || line[first] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(line_no) + " is not 'key = value'");
        auto trim = [](std::string s) {
            std::size_t a = s.find_first_not_of(" \t\r\n");
            std::size_t b = s.find_last_not_of(" \t\r\n");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        apply_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

DyadData resolve_dataset(ExperimentConfig& cfg) {
    if (cfg.dataset_path.has_value() == cfg.dataset_generator.has_value())
        throw UsageError("config must set exactly one of dataset.path and dataset.kind");
    if (cfg.dataset_path) {
        if (cfg.dataset_name == "dataset")
            cfg.dataset_name = fs::path(*cfg.dataset_path).stem().string();
        return load_edge_list(*cfg.dataset_path);
    }
    if (cfg.dataset_name == "dataset")
        cfg.dataset_name = generator_name(cfg.dataset_generator->kind);
    return generate(*cfg.dataset_generator).data;
}

struct CommonFlags {
    std::string config_path;
    std::optional<long> seed;
    std::optional<std::string> out;
    std::optional<std::string> geometry;
    std::optional<std::string> eta_grid;
    std::optional<int> blocks;
    std::optional<double> rho;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config file")->required();
    cmd->add_option("--seed", flags.seed, "override sweep seed");
    cmd->add_option("--out", flags.out, "override output directory");
    cmd->add_option("--geometry", flags.geometry, "restrict to one geometry");
    cmd->add_option("--eta-grid", flags.eta_grid, "override eta grid, comma separated");
    cmd->add_option("--blocks", flags.blocks, "override block count K");
    cmd->add_option("--rho", flags.rho, "override initial training fraction");
}

ExperimentConfig finalize_config(const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(flags.config_path);
    if (flags.seed) cfg.sweep.seed = static_cast<std::uint64_t>(*flags.seed);
    if (flags.out) cfg.output = *flags.out;
    if (flags.geometry) apply_config_key(cfg, "sweep.geometries", *flags.geometry);
    if (flags.eta_grid) apply_config_key(cfg, "sweep.eta_grid", *flags.eta_grid);
    if (flags.blocks) cfg.sweep.K = *flags.blocks;
    if (flags.rho) cfg.sweep.rho = *flags.rho;
    return cfg;
}

std::string csv_num(double v) {
    std::ostringstream ss;
    ss.imbue(std::locale::classic());
    ss.precision(12);
    ss << v;
    return ss.str();
}

// ---- subcommand bodies ------------------------------------------------------

int cmd_generate(const CommonFlags& flags) {
    ExperimentConfig cfg = finalize_config(flags);
    if (!cfg.dataset_generator) throw UsageError("generate requires dataset.kind in the config");
    GeneratedGraph g = generate(*cfg.dataset_generator);
    fs::create_directories(cfg.output);
    std::string edges = (fs::path(cfg.output) / (cfg.dataset_name + "_edges.txt")).string();
    write_edge_list(g.data, edges, cfg.dataset_name + " generated network");
    std::cout << "wrote " << edges << " (" << g.data.n_nodes << " nodes, "
              << g.data.edge_count() << " edges)\n";
    if (!g.positions.empty()) {
        std::string pos = (fs::path(cfg.output) / (cfg.dataset_name + "_positions.csv")).string();
        std::ofstream out(pos);
        out << "node";
        for (int d = 0; d < g.pos_dim; ++d) out << ",x" << d;
        if (!g.labels.empty()) out << ",label";
        out << "\n";
        for (int i = 0; i < g.data.n_nodes; ++i) {
            out << i + 1;
            for (int d = 0; d < g.pos_dim; ++d) out << "," << csv_num(g.positions[i * g.pos_dim + d]);
            if (!g.labels.empty()) out << "," << g.labels[i];
            out << "\n";
        }
        std::cout << "wrote " << pos << "\n";
    }
    return 0;
}

int cmd_fit(const CommonFlags& flags, double eta) {
    ExperimentConfig cfg = finalize_config(flags);
    DyadData data = resolve_dataset(cfg);
    if (cfg.sweep.geometries.size() != 1)
        throw UsageError("fit requires exactly one geometry (use --geometry)");
    GeometryKind g = cfg.sweep.geometries[0];
    Hyperparams h = cfg.sweep.hyper;
    h.eta = eta;
    h.validate();

    ChainConfig ccfg = cfg.sweep.chain_cfg;
    ccfg.seed = cfg.sweep.seed;
    SampleBatch batch =
        fit_eta_posterior(data, DyadMask::all(data.n_dyads()), g, h, ccfg, worker_count());
    Diagnostics diag = batch_diagnostics(batch, data.n_nodes, g);

    // posterior mean embedding, draws aligned to the first retained draw
    const int edim = embed_dim(g);
    const int cdim = chart_dim(g);
    auto embed_all = [&](std::span<const double> q) {
        std::vector<double> e(static_cast<std::size_t>(data.n_nodes) * edim);
        for (int i = 0; i < data.n_nodes; ++i)
            manifold_detail::embed_raw(q.data() + static_cast<std::size_t>(i) * cdim, g,
                                       e.data() + static_cast<std::size_t>(i) * edim);
        return e;
    };
    std::vector<double> ref = embed_all(batch.draw(0, 0));
    std::vector<double> mean(ref.size(), 0.0);
    for (std::size_t c = 0; c < batch.n_chains; ++c)
        for (std::size_t s = 0; s < batch.n_samples; ++s) {
            auto aligned = procrustes_align(embed_all(batch.draw(c, s)), ref, data.n_nodes, edim);
            for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += aligned.aligned[k];
        }
    for (auto& v : mean) v /= static_cast<double>(batch.total_draws());

    fs::create_directories(cfg.output);
    std::string emb_path = (fs::path(cfg.output) / "embedding.csv").string();
    {
        std::ofstream out(emb_path);
        out << "node";
        for (int d = 0; d < edim; ++d) out << ",x" << d;
        out << "\n";
        for (int i = 0; i < data.n_nodes; ++i) {
            out << i + 1;
            for (int d = 0; d < edim; ++d) out << "," << csv_num(mean[i * edim + d]);
            out << "\n";
        }
    }
    std::string diag_path = (fs::path(cfg.output) / "fit_diagnostics.csv").string();
    {
        std::ofstream out(diag_path);
        out << "scalar,rhat,ess_bulk\n";
        for (int k = 0; k < 3; ++k)
            out << Diagnostics::scalar_names[k] << "," << csv_num(diag.rhat[k]) << ","
                << csv_num(diag.ess[k]) << "\n";
    }
    std::cout << "fit " << cfg.dataset_name << " on " << geometry_name(g) << " at eta=" << eta
              << ": worst rhat " << diag.worst_rhat() << ", min ess " << diag.min_ess() << "\n"
              << "wrote " << emb_path << " and " << diag_path << "\n";
    if (batch.divergence_warning)
        std::cout << "warning: more than 10% divergent transitions in at least one chain\n";
    return 0;
}

int cmd_sweep(const CommonFlags& flags) {
    ExperimentConfig cfg = finalize_config(flags);
    DyadData data = resolve_dataset(cfg);
    RiskTable table = run_sweep(data, cfg.sweep, cfg.dataset_name);
    auto written = write_results(table, make_curve_rows(table), {}, 0, cfg.output);
    for (const auto& p : written) std::cout << "wrote " << p << "\n";
    for (const auto& w : table.warnings) std::cout << "warning: " << w << "\n";
    for (std::size_t gi = 0; gi < table.geometries.size(); ++gi)
        if (!std::isnan(table.eta_star[gi]))
            std::cout << geometry_name(table.geometries[gi]) << ": eta* = " << table.eta_star[gi]
                      << "\n";
    if (table.has_best)
        std::cout << "best geometry: " << geometry_name(table.best_geometry) << "\n";
    return 0;
}

int cmd_ablate(const CommonFlags& flags) {
    ExperimentConfig cfg = finalize_config(flags);
    DyadData data = resolve_dataset(cfg);
    if (!cfg.ablation) throw UsageError("ablate requires ablation.vary and ablation.values");
    SensitivityResult res = sensitivity_sweep(data, cfg.sweep, *cfg.ablation);

    fs::create_directories(cfg.output);
    std::string path = (fs::path(cfg.output) / "ablation_curves.csv").string();
    {
        std::ofstream out(path);
        out << "setting,geometry,eta,cum_log_loss,argmin_eta\n";
        for (const auto& c : res.curves)
            for (std::size_t ei = 0; ei < c.eta_grid.size(); ++ei)
                out << csv_num(c.setting) << "," << geometry_name(c.geometry) << ","
                    << csv_num(c.eta_grid[ei]) << "," << csv_num(c.cum_log_loss[ei]) << ","
                    << csv_num(c.argmin_eta) << "\n";
    }
    std::cout << "wrote " << path << "\n";
    if (!res.mean_curves.empty()) {
        std::string mpath = (fs::path(cfg.output) / "ablation_mean.csv").string();
        std::ofstream out(mpath);
        out << "geometry,eta,mean_cum_log_loss,std_cum_log_loss,argmin_eta\n";
        for (const auto& mc : res.mean_curves)
            for (std::size_t ei = 0; ei < mc.eta_grid.size(); ++ei)
                out << geometry_name(mc.geometry) << "," << csv_num(mc.eta_grid[ei]) << ","
                    << csv_num(mc.mean[ei]) << "," << csv_num(mc.std_dev[ei]) << ","
                    << csv_num(mc.argmin_eta) << "\n";
        std::cout << "wrote " << mpath << "\n";
    }
    return 0;
}

int cmd_demo(const std::string& which, int star_leaves, int side_a, int side_b, double alpha,
             int starts, int iters, long seed, const std::string& out_dir) {
    DemoOptions opt;
    opt.n_starts = starts;
    opt.n_iters = iters;
    opt.seed = static_cast<std::uint64_t>(seed);
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "demo_results.csv");
    out << "demo,pure_state_loss,mixture_loss,pure_converged\n";
    auto report = [&](const std::string& name, const DemoResult& r) {
        std::cout << name << ": pure-state loss " << r.pure_state_loss << ", mixture loss "
                  << r.mixture_loss << (r.mixture_loss < r.pure_state_loss
                                            ? "  (mixture wins)"
                                            : "  (pure state wins)")
                  << (r.pure_converged ? "" : "  [optimizer not fully converged]") << "\n";
        out << name << "," << csv_num(r.pure_state_loss) << "," << csv_num(r.mixture_loss) << ","
            << (r.pure_converged ? 1 : 0) << "\n";
    };
    if (which == "star" || which == "both")
        report("star_K1_" + std::to_string(star_leaves), star_graph_demo(star_leaves, alpha, opt));
    if (which == "bipartite" || which == "both")
        report("bipartite_K" + std::to_string(side_a) + "_" + std::to_string(side_b),
               bipartite_demo(side_a, side_b, alpha, opt));
    return 0;
}

int cmd_report(const std::string& table_path, const std::string& geometry,
               const std::string& out_dir) {
    std::ifstream in(table_path);
    if (!in) throw IoError("cannot open " + table_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RiskTable table = RiskTable::from_json(text);

    fs::create_directories(out_dir);
    auto rows = overfitting_report(table);
    std::string over_path = (fs::path(out_dir) / "overfitting_report.csv").string();
    {
        std::ofstream out(over_path);
        out << "geometry,eta_star,baseline_available,log_loss_star,log_loss_eta1,"
               "abs_reduction_log,rel_reduction_log,sq_loss_star,sq_loss_eta1,"
               "abs_reduction_sq,rel_reduction_sq\n";
        for (const auto& r : rows)
            out << geometry_name(r.geometry) << "," << csv_num(r.eta_star) << ","
                << (r.baseline_available ? 1 : 0) << "," << csv_num(r.log_loss_star) << ","
                << csv_num(r.log_loss_one) << "," << csv_num(r.abs_reduction_log) << ","
                << csv_num(r.rel_reduction_log) << "," << csv_num(r.sq_loss_star) << ","
                << csv_num(r.sq_loss_one) << "," << csv_num(r.abs_reduction_sq) << ","
                << csv_num(r.rel_reduction_sq) << "\n";
    }
    std::cout << "wrote " << over_path << "\n";

    auto gk = parse_geometry(geometry);
    if (!gk) throw UsageError("unknown geometry '" + geometry + "'");
    std::size_t gi = 0;
    bool found = false;
    for (std::size_t i = 0; i < table.geometries.size(); ++i)
        if (table.geometries[i] == *gk) {
            gi = i;
            found = true;
        }
    if (!found) throw UsageError("geometry not present in the table");
    if (std::isnan(table.eta_star[gi])) throw NumericError("no selected eta for that geometry");
    const RiskCell* safe = table.find_cell(*gk, table.eta_star[gi]);
    const RiskCell* std_cell = table.find_cell(*gk, 1.0);
    if (!safe || !std_cell || !std_cell->ok)
        throw UsageError("table lacks the eta* or eta=1.0 cell needed for the histogram");
    if (safe->predictions.empty() || std_cell->predictions.empty())
        throw UsageError("table was saved without per-dyad predictions");

    auto hist = improvement_histogram(safe->predictions, std_cell->predictions,
                                      table.scored_labels);
    std::string hist_path = (fs::path(out_dir) / "improvement_histogram.csv").string();
    {
        std::ofstream out(hist_path);
        out << "bin_low,bin_high,count,mean_improvement,total_improvement,cumulative_gain\n";
        for (std::size_t b = 0; b < hist.counts.size(); ++b)
            out << csv_num(hist.bin_low[b]) << "," << csv_num(hist.bin_high[b]) << ","
                << hist.counts[b] << "," << csv_num(hist.mean_improvement[b]) << ","
                << csv_num(hist.total_improvement[b]) << "," << csv_num(hist.cumulative_gain[b])
                << "\n";
    }
    std::cout << "wrote " << hist_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust Bayesian inference for latent space network models"};
    app.require_subcommand(1);

    CommonFlags generate_flags, fit_flags, sweep_flags, ablate_flags;
    double fit_eta = 1.0;

    CLI::App* generate = app.add_subcommand("generate", "write a synthetic network");
    add_common_flags(generate, generate_flags);

    CLI::App* fit = app.add_subcommand("fit", "fit one tempered posterior and export the embedding");
    add_common_flags(fit, fit_flags);
    fit->add_option("--eta", fit_eta, "learning rate in (0, 1]")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "run the full learning-rate and geometry sweep");
    add_common_flags(sweep, sweep_flags);

    CLI::App* ablate = app.add_subcommand("ablate", "prequential hyperparameter sensitivity");
    add_common_flags(ablate, ablate_flags);

    std::string demo_which = "both", demo_out = "out";
    int demo_star = 50, demo_a = 5, demo_b = 5, demo_starts = 20, demo_iters = 2000;
    double demo_alpha = 20.0;
    long demo_seed = 0;
    CLI::App* demo = app.add_subcommand("demo", "misspecification demonstrations");
    demo->add_option("--which", demo_which, "star | bipartite | both");
    demo->add_option("--star-leaves", demo_star, "leaf count for the star demo");
    demo->add_option("--side-a", demo_a, "bipartite side size");
    demo->add_option("--side-b", demo_b, "bipartite side size");
    demo->add_option("--alpha", demo_alpha, "link sharpness");
    demo->add_option("--starts", demo_starts, "optimizer multi-starts");
    demo->add_option("--iters", demo_iters, "optimizer iterations");
    demo->add_option("--seed", demo_seed, "optimizer seed");
    demo->add_option("--out", demo_out, "output directory");

    std::string report_table, report_geometry = "euclidean", report_out = "out";
    CLI::App* report = app.add_subcommand("report", "overfitting and improvement reports");
    report->add_option("--table", report_table, "risk_table.json from a sweep")->required();
    report->add_option("--geometry", report_geometry, "geometry for the improvement histogram");
    report->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(generate_flags);
        if (fit->parsed()) return cmd_fit(fit_flags, fit_eta);
        if (sweep->parsed()) return cmd_sweep(sweep_flags);
        if (ablate->parsed()) return cmd_ablate(ablate_flags);
        if (demo->parsed())
            return cmd_demo(demo_which, demo_star, demo_a, demo_b, demo_alpha, demo_starts,
                            demo_iters, demo_seed, demo_out);
        if (report->parsed()) return cmd_report(report_table, report_geometry, report_out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
