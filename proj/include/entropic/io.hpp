#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "entropic/backtest.hpp"
#include "entropic/levy.hpp"
#include "entropic/market.hpp"
#include "entropic/moments.hpp"
#include "entropic/pide.hpp"
#include "entropic/scenario.hpp"
#include "entropic/tree.hpp"

namespace entropic::io {

using nlohmann::json;

json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& value);
void write_text_file(const std::string& path, const std::string& text);

/// {"scenarios": [...], "weights": [...], "observables": {"name": [...]}}
ScenarioMeasure scenario_from_json(const json& j);
json scenario_to_json(const ScenarioMeasure& measure);

/// {"p0": [...], "p1": [[...]], "q0": [...], "q1": [[...]],
///  "u0": x, "u1": [...], "b0": x, "b1": [...], "f": x, "w0": x, "w1": [...]}
MarketSlice slice_from_json(const json& j);
json slice_to_json(const MarketSlice& slice);

/// {"M_p": [...], "V_p": [[...]], "M_a": x, "V_a": x, "C_pa": [...]}
/// with optional "V_o", "C_po", "C_oa".
ReturnMoments moments_from_json(const json& j);
json moments_to_json(const ReturnMoments& moments);

/// Nodes listed with {"id", "time", "children": [{"id", "weight"}],
/// "slice": {...}}; leaf payoffs under "terminal".
ScenarioTree tree_from_json(const json& j);
json tree_to_json(const ScenarioTree& tree);

/// {"mu": [...], "nu": [[...]], "jumps": [{"j": [...], "rate": x}]}
LevyTriple levy_triple_from_json(const json& j);
json levy_triple_to_json(const LevyTriple& triple);

/// LevyTriple fields plus "f" and the named (f, s, c) block labels.
ConvexityModel convexity_model_from_json(const json& j);
json convexity_model_to_json(const ConvexityModel& model);

/// {"kind": "bsm" | "heston" | "sabr", ...kind-specific parameters}.
/// Returns the model plus the initial volatility state implied by the
/// parameters (sigma0 / v0; 0 for bsm).
struct LoadedModel {
    StochVolModel model;
    double initial_sigma = 0.0;
    json parameters;
};
LoadedModel stochvol_model_from_json(const json& j);

/// Full PIDE problem: {"model": {...}, "grid": {...}, "payoff": {...},
/// optional "controls", optional "query": {"s": x, "sigma": x}}.
struct LoadedProblem {
    PideProblem problem;
    double query_s = 0.0;
    double query_sigma = 0.0;
    json description;
};
LoadedProblem pide_problem_from_json(const json& j);

/// Surface CSV: header row "s,<sigma values...>", one row per s node.
std::string surface_to_csv(const PideGrid& grid, const Eigen::MatrixXd& surface);

/// Ledger CSV with columns (period, beta..., carry, gamma_pnl, hedged_pnl,
/// cum_pnl), path-major.
std::string ledger_to_csv(const BacktestResult& result);

/// 17-significant-digit decimal rendering used for all CSV numerics.
std::string format_number(double value);

} // namespace entropic::io
