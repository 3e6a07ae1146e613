// Batch interface: ingest scenario/tree/model files, run
// calibrate/price/hedge/frontier/pide/backtest, emit JSON/CSV reports.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "entropic/backtest.hpp"
#include "entropic/errors.hpp"
#include "entropic/io.hpp"
#include "entropic/kernels.hpp"
#include "entropic/moments.hpp"
#include "entropic/pide.hpp"
#include "entropic/tree.hpp"
#include "entropic/version.hpp"

namespace {

using entropic::Error;
using entropic::ErrorKind;
using nlohmann::json;

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level() {
    const char* env = std::getenv("ENTROPIC_PRICER_LOG");
    if (!env) return LogLevel::warn;
    const std::string value(env);
    if (value == "error") return LogLevel::error;
    if (value == "warn") return LogLevel::warn;
    if (value == "info") return LogLevel::info;
    if (value == "debug") return LogLevel::debug;
    return LogLevel::warn;
}

void log(LogLevel level, const std::string& message) {
    static const LogLevel threshold = log_level();
    if (level > threshold) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

struct Options {
    std::vector<std::string> inputs; ///< role-tagged, e.g. scenario=path.json
    std::string out = ".";
    std::uint64_t seed = 0;
    double tol = 1e-10;
    int threads = 1;
    std::string format = "json";
    std::string arrangement = "collateralised";
    double rate = 0.0;
    std::string policy = "minimum_variance";
    std::string sample_measure = "pricing";
    long paths = 1000;
    double risk_scale = 1.0;

    std::map<std::string, std::string> roles() const {
        std::map<std::string, std::string> map;
        for (const auto& entry : inputs) {
            const auto eq = entry.find('=');
            if (eq == std::string::npos) {
                entropic::throw_input("--input expects role=path, got '" + entry + "'");
            }
            map[entry.substr(0, eq)] = entry.substr(eq + 1);
        }
        return map;
    }

    std::string input(const std::string& role) const {
        const auto map = roles();
        auto it = map.find(role);
        if (it == map.end()) entropic::throw_input("missing --input " + role + "=PATH");
        if (!std::filesystem::exists(it->second)) {
            entropic::throw_input("input file '" + it->second + "' does not exist");
        }
        return it->second;
    }

    json resolved(const std::string& command) const {
        return json{{"command", command},   {"input", inputs},
                    {"out", out},           {"seed", seed},
                    {"tol", tol},           {"threads", threads},
                    {"format", format},     {"arrangement", arrangement},
                    {"rate", rate},         {"policy", policy},
                    {"sample_measure", sample_measure},
                    {"paths", paths},       {"risk_scale", risk_scale}};
    }

    entropic::FundingArrangement funding() const {
        entropic::FundingArrangement arr;
        arr.kind = entropic::funding_kind_from_string(arrangement);
        if (arr.kind == entropic::FundingKind::cleared) arr.rate = rate;
        return arr;
    }
};

void write_report(const Options& options, const std::string& command, json report) {
    report["config"] = options.resolved(command);
    report["version"] = entropic::kVersion;
    std::filesystem::create_directories(options.out);
    const std::string path = options.out + "/report.json";
    entropic::io::write_json_file(path, report);
    log(LogLevel::info, "wrote " + path);
}

json vector_json(const Eigen::VectorXd& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

int cmd_calibrate(const Options& options) {
    const auto measure = entropic::io::scenario_from_json(
        entropic::io::load_json_file(options.input("scenario")));
    const auto slice =
        entropic::io::slice_from_json(entropic::io::load_json_file(options.input("slice")));
    entropic::CalibrationControls controls;
    controls.tol = options.tol;
    const entropic::CalibrationResult result = entropic::calibrate(measure, slice, controls);
    write_report(options, "calibrate",
                 json{{"alpha", vector_json(result.kernel.alpha)},
                      {"kernel_weights", vector_json(result.kernel.values)},
                      {"tilted_weights", vector_json(result.kernel.tilted_weights(measure))},
                      {"kl", result.kl},
                      {"iterations", result.iterations},
                      {"residual_norm", result.residual_norm}});
    return 0;
}

int cmd_price(const Options& options) {
    const auto tree =
        entropic::io::tree_from_json(entropic::io::load_json_file(options.input("tree")));
    entropic::TreePricingControls controls;
    controls.calibration.tol = options.tol;
    controls.threads = options.threads;
    const entropic::TreePricing pricing =
        entropic::price_on_tree(tree, options.funding(), controls);
    json nodes = json::object();
    json alphas = json::object();
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        nodes[tree.nodes[k].id] = pricing.price[k];
        if (!tree.nodes[k].is_leaf()) alphas[tree.nodes[k].id] = vector_json(pricing.alpha[k]);
    }
    write_report(options, "price",
                 json{{"root_price", pricing.root_price},
                      {"node_prices", nodes},
                      {"node_alpha", alphas}});
    return 0;
}

int cmd_hedge(const Options& options) {
    const auto moments = entropic::io::moments_from_json(
        entropic::io::load_json_file(options.input("moments")));
    json report;
    const entropic::HedgeResult hedge = entropic::hedge_weights(moments);
    report["beta"] = vector_json(hedge.beta);
    report["residual_mean"] = hedge.residual_mean;
    report["residual_variance"] = hedge.residual_variance;
    const entropic::SharpeDecomposition sharpe = entropic::incremental_sharpe(moments);
    report["sharpe_base"] = sharpe.base;
    report["sharpe_increment"] = sharpe.increment;
    if (moments.sector) {
        const entropic::TwoSectorHedge two = entropic::two_sector_hedge(moments);
        report["beta_p"] = vector_json(two.beta_p);
        report["beta_o"] = vector_json(two.beta_o);
        report["two_sector_residual_variance"] = two.residual_variance;
    }
    write_report(options, "hedge", report);
    return 0;
}

int cmd_frontier(const Options& options) {
    const auto moments = entropic::io::moments_from_json(
        entropic::io::load_json_file(options.input("moments")));
    const entropic::ArbitrageCheck arbitrage = entropic::check_no_arbitrage(moments);
    if (!arbitrage.pass) {
        entropic::throw_numeric("frontier: the moment instance admits arbitrage");
    }
    const Eigen::VectorXd weights = entropic::optimal_portfolio(moments, options.risk_scale);
    const double mean = weights.dot(moments.mean_p);
    const double variance = weights.dot(moments.cov_p * weights);
    write_report(options, "frontier",
                 json{{"weights", vector_json(weights)},
                      {"slope", entropic::frontier_slope(moments)},
                      {"mean", mean},
                      {"variance", variance},
                      {"risk_scale", options.risk_scale}});
    return 0;
}

int cmd_pide(const Options& options) {
    auto loaded = entropic::io::pide_problem_from_json(
        entropic::io::load_json_file(options.input("problem")));
    loaded.problem.controls.threads = options.threads;
    const entropic::PideSolution solution = entropic::solve_pide(loaded.problem);
    const double price = solution.price(loaded.query_s, loaded.query_sigma);
    std::filesystem::create_directories(options.out);
    const std::string surface_path = options.out + "/surface_t0.csv";
    entropic::io::write_text_file(
        surface_path, entropic::io::surface_to_csv(loaded.problem.grid, solution.surface));
    write_report(options, "pide",
                 json{{"price", price},
                      {"query", {{"s", loaded.query_s}, {"sigma", loaded.query_sigma}}},
                      {"off_grid_jumps", solution.off_grid_jumps},
                      {"surface_csv", surface_path}});
    return 0;
}

int cmd_backtest(const Options& options) {
    const auto tree =
        entropic::io::tree_from_json(entropic::io::load_json_file(options.input("tree")));
    entropic::TreePricingControls pricing_controls;
    pricing_controls.calibration.tol = options.tol;
    pricing_controls.threads = options.threads;
    const entropic::TreePricing pricing =
        entropic::price_on_tree(tree, options.funding(), pricing_controls);

    entropic::BacktestConfig config;
    config.policy = entropic::hedge_policy_from_string(options.policy);
    config.measure = options.sample_measure == "economic" ? entropic::SampleMeasure::economic
                                                          : entropic::SampleMeasure::pricing;
    config.paths = options.paths;
    config.seed = options.seed;
    config.threads = options.threads;
    const entropic::BacktestResult result =
        entropic::run_backtest(tree, pricing, options.funding(), config);

    std::filesystem::create_directories(options.out);
    const std::string ledger_path = options.out + "/ledger.csv";
    entropic::io::write_text_file(ledger_path, entropic::io::ledger_to_csv(result));
    write_report(options, "backtest",
                 json{{"root_price", pricing.root_price},
                      {"mean_hedged", result.mean_hedged},
                      {"variance_hedged", result.variance_hedged},
                      {"std_error", result.std_error},
                      {"mean_carry", result.mean_carry},
                      {"mean_gamma", result.mean_gamma},
                      {"paths", result.paths},
                      {"truncated_paths", result.truncated_paths},
                      {"errors", result.errors},
                      {"carry_convention", result.carry_convention},
                      {"ledger_csv", ledger_path}});
    return 0;
}

void apply_config_file(const std::string& path, Options& options, const CLI::App& app) {
    const json config = entropic::io::load_json_file(path);
    // Flags win: only fill fields the user did not set on the command line.
    auto unset = [&](const std::string& flag) { return app.count("--" + flag) == 0; };
    if (config.contains("input") && unset("input")) {
        options.inputs = config["input"].get<std::vector<std::string>>();
    }
    if (config.contains("out") && unset("out")) options.out = config["out"];
    if (config.contains("seed") && unset("seed")) options.seed = config["seed"];
    if (config.contains("tol") && unset("tol")) options.tol = config["tol"];
    if (config.contains("threads") && unset("threads")) options.threads = config["threads"];
    if (config.contains("format") && unset("format")) options.format = config["format"];
    if (config.contains("arrangement") && unset("arrangement")) {
        options.arrangement = config["arrangement"];
    }
    if (config.contains("rate") && unset("rate")) options.rate = config["rate"];
    if (config.contains("policy") && unset("policy")) options.policy = config["policy"];
    if (config.contains("sample_measure") && unset("sample-measure")) {
        options.sample_measure = config["sample_measure"];
    }
    if (config.contains("paths") && unset("paths")) options.paths = config["paths"];
    if (config.contains("risk_scale") && unset("risk-scale")) {
        options.risk_scale = config["risk_scale"];
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropic-pricer: entropy-calibrated pricing, hedging and backtesting"};
    app.require_subcommand(1);

    Options options;
    std::string config_path;

    app.add_option("--config", config_path, "JSON config file; flags override its fields");
    app.add_option("--input", options.inputs,
                   "role-tagged input, e.g. scenario=s.json, slice=m.json, tree=t.json, "
                   "moments=mm.json, problem=p.json");
    app.add_option("--out", options.out, "output directory");
    app.add_option("--seed", options.seed, "64-bit seed for randomized commands");
    app.add_option("--tol", options.tol, "calibration tolerance")->check(CLI::PositiveNumber);
    app.add_option("--threads", options.threads, "worker thread cap")
        ->check(CLI::PositiveNumber);
    app.add_option("--format", options.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--arrangement", options.arrangement, "funding arrangement")
        ->check(CLI::IsMember({"futures", "cleared", "collateralised", "uncollateralised"}));
    app.add_option("--rate", options.rate, "clearing rate (cleared arrangement)");
    app.add_option("--policy", options.policy, "hedge policy for backtests")
        ->check(CLI::IsMember({"minimum_variance", "tangent_delta"}));
    app.add_option("--sample-measure", options.sample_measure, "path sampling measure")
        ->check(CLI::IsMember({"economic", "pricing"}));
    app.add_option("--paths", options.paths, "number of backtest paths")
        ->check(CLI::PositiveNumber);
    app.add_option("--risk-scale", options.risk_scale, "frontier risk scale")
        ->check(CLI::PositiveNumber);

    auto* calibrate = app.add_subcommand("calibrate", "calibrate the exponential tilt kernel");
    auto* price = app.add_subcommand("price", "price a scenario tree by backward induction");
    auto* hedge = app.add_subcommand("hedge", "minimum-variance hedge from return moments");
    auto* frontier = app.add_subcommand("frontier", "optimal portfolio and frontier slope");
    auto* pide = app.add_subcommand("pide", "solve the stochastic-volatility fair-price PIDE");
    auto* backtest = app.add_subcommand("backtest", "sample hedged paths and book the ledger");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) apply_config_file(config_path, options, app);
        log(LogLevel::debug, "resolved config: " + options.resolved("-").dump());
        if (calibrate->parsed()) return cmd_calibrate(options);
        if (price->parsed()) return cmd_price(options);
        if (hedge->parsed()) return cmd_hedge(options);
        if (frontier->parsed()) return cmd_frontier(options);
        if (pide->parsed()) return cmd_pide(options);
        if (backtest->parsed()) return cmd_backtest(options);
        entropic::throw_input("no command given");
    } catch (const Error& e) {
        log(LogLevel::error, e.what());
        switch (e.kind()) {
            case ErrorKind::input: return 1;
            case ErrorKind::numeric: return 2;
            case ErrorKind::internal: return 3;
        }
    } catch (const std::exception& e) {
        log(LogLevel::error, std::string("internal failure: ") + e.what());
        return 3;
    }
    return 3;
}
