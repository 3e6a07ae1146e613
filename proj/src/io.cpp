#include "entropic/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "entropic/errors.hpp"

namespace entropic::io {

namespace {

Eigen::VectorXd vector_from_json(const json& j, const std::string& field) {
    if (!j.is_array()) throw_input("field '" + field + "' must be an array of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw_input("field '" + field + "' must contain plain decimals (index " +
                        std::to_string(i) + ")");
        }
        v[i] = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) throw_input("field '" + field + "' must be an array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) throw_input("field '" + field + "' must contain non-empty rows");
    Eigen::MatrixXd m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) {
            throw_input("field '" + field + "' has ragged rows");
        }
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(row);
    }
    return j;
}

const json& require(const json& j, const std::string& field) {
    auto it = j.find(field);
    if (it == j.end()) throw_input("missing field '" + field + "'");
    return *it;
}

} // namespace

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_input("cannot open file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw_input("malformed JSON in '" + path + "': " + e.what());
    }
}

void write_json_file(const std::string& path, const json& value) {
    std::ofstream out(path);
    if (!out) throw_input("cannot write file '" + path + "'");
    out << value.dump(2) << '\n';
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw_input("cannot write file '" + path + "'");
    out << text;
}

ScenarioMeasure scenario_from_json(const json& j) {
    const json& ids_json = require(j, "scenarios");
    std::vector<std::string> ids;
    for (const auto& id : ids_json) ids.push_back(id.get<std::string>());
    Eigen::VectorXd weights = vector_from_json(require(j, "weights"), "weights");
    std::map<std::string, Eigen::VectorXd> observables;
    if (j.contains("observables")) {
        for (const auto& [name, values] : j.at("observables").items()) {
            observables[name] = vector_from_json(values, "observables." + name);
        }
    }
    return ScenarioMeasure(std::move(ids), std::move(weights), std::move(observables));
}

json scenario_to_json(const ScenarioMeasure& measure) {
    json j;
    j["scenarios"] = measure.ids();
    j["weights"] = vector_to_json(measure.weights());
    json obs = json::object();
    for (const auto& [name, values] : measure.observables()) obs[name] = vector_to_json(values);
    j["observables"] = obs;
    return j;
}

MarketSlice slice_from_json(const json& j) {
    MarketSlice slice;
    slice.p0 = vector_from_json(require(j, "p0"), "p0");
    slice.p1 = matrix_from_json(require(j, "p1"), "p1");
    const int n_scen = slice.scenarios();
    const int n_assets = slice.assets();
    slice.q0 = j.contains("q0") ? vector_from_json(j["q0"], "q0") : Eigen::VectorXd::Ones(n_assets);
    slice.q1 = j.contains("q1") ? matrix_from_json(j["q1"], "q1")
                                : Eigen::MatrixXd::Ones(n_scen, n_assets);
    slice.u0 = j.value("u0", 1.0);
    slice.u1 = j.contains("u1") ? vector_from_json(j["u1"], "u1") : Eigen::VectorXd::Ones(n_scen);
    slice.b0 = j.value("b0", 1.0);
    slice.b1 = j.contains("b1") ? vector_from_json(j["b1"], "b1") : Eigen::VectorXd::Ones(n_scen);
    if (j.contains("f")) slice.funding_ratio = j["f"].get<double>();
    if (j.contains("w0")) slice.w0 = j["w0"].get<double>();
    if (j.contains("w1")) slice.w1 = vector_from_json(j["w1"], "w1");
    slice.validate();
    return slice;
}

json slice_to_json(const MarketSlice& slice) {
    json j;
    j["p0"] = vector_to_json(slice.p0);
    j["p1"] = matrix_to_json(slice.p1);
    j["q0"] = vector_to_json(slice.q0);
    j["q1"] = matrix_to_json(slice.q1);
    j["u0"] = slice.u0;
    j["u1"] = vector_to_json(slice.u1);
    j["b0"] = slice.b0;
    j["b1"] = vector_to_json(slice.b1);
    j["f"] = slice.funding_ratio;
    if (slice.w0) j["w0"] = *slice.w0;
    if (slice.w1) j["w1"] = vector_to_json(*slice.w1);
    return j;
}

ReturnMoments moments_from_json(const json& j) {
    ReturnMoments m;
    m.mean_p = vector_from_json(require(j, "M_p"), "M_p");
    m.cov_p = matrix_from_json(require(j, "V_p"), "V_p");
    m.mean_a = require(j, "M_a").get<double>();
    m.var_a = require(j, "V_a").get<double>();
    m.cross_pa = vector_from_json(require(j, "C_pa"), "C_pa");
    if (j.contains("V_o") || j.contains("C_po") || j.contains("C_oa")) {
        SectorMoments sector;
        sector.cov_o = matrix_from_json(require(j, "V_o"), "V_o");
        sector.cross_po = matrix_from_json(require(j, "C_po"), "C_po");
        sector.cross_oa = vector_from_json(require(j, "C_oa"), "C_oa");
        m.sector = std::move(sector);
    }
    m.validate();
    return m;
}

json moments_to_json(const ReturnMoments& m) {
    json j;
    j["M_p"] = vector_to_json(m.mean_p);
    j["V_p"] = matrix_to_json(m.cov_p);
    j["M_a"] = m.mean_a;
    j["V_a"] = m.var_a;
    j["C_pa"] = vector_to_json(m.cross_pa);
    if (m.sector) {
        j["V_o"] = matrix_to_json(m.sector->cov_o);
        j["C_po"] = matrix_to_json(m.sector->cross_po);
        j["C_oa"] = vector_to_json(m.sector->cross_oa);
    }
    return j;
}

ScenarioTree tree_from_json(const json& j) {
    const json& nodes_json = require(j, "nodes");
    ScenarioTree tree;
    std::map<std::string, int> index;
    for (const auto& node_json : nodes_json) {
        TreeNode node;
        node.id = require(node_json, "id").get<std::string>();
        node.time = require(node_json, "time").get<double>();
        if (index.count(node.id)) throw_input("tree: duplicate node id '" + node.id + "'");
        index[node.id] = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(std::move(node));
    }
    for (std::size_t k = 0; k < nodes_json.size(); ++k) {
        const json& node_json = nodes_json[k];
        TreeNode& node = tree.nodes[k];
        if (node_json.contains("children")) {
            const json& children = node_json["children"];
            node.child_weights.resize(children.size());
            int i = 0;
            for (const auto& child : children) {
                const std::string child_id = require(child, "id").get<std::string>();
                if (!index.count(child_id)) {
                    throw_input("tree node '" + node.id + "': unknown child '" + child_id + "'");
                }
                node.children.push_back(index[child_id]);
                node.child_weights[i++] = require(child, "weight").get<double>();
            }
            node.slice = slice_from_json(require(node_json, "slice"));
        }
        if (node_json.contains("terminal")) node.terminal = node_json["terminal"].get<double>();
    }
    if (j.contains("root")) {
        const std::string root_id = j["root"].get<std::string>();
        if (!index.count(root_id)) throw_input("tree: unknown root id '" + root_id + "'");
        tree.root = index[root_id];
    }
    tree.validate();
    return tree;
}

json tree_to_json(const ScenarioTree& tree) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
        json nj;
        nj["id"] = node.id;
        nj["time"] = node.time;
        if (!node.is_leaf()) {
            json children = json::array();
            for (std::size_t i = 0; i < node.children.size(); ++i) {
                children.push_back({{"id", tree.nodes[node.children[i]].id},
                                    {"weight", node.child_weights[static_cast<int>(i)]}});
            }
            nj["children"] = children;
            nj["slice"] = slice_to_json(*node.slice);
        }
        if (node.terminal) nj["terminal"] = *node.terminal;
        nodes.push_back(nj);
    }
    return json{{"nodes", nodes}, {"root", tree.nodes[tree.root].id}};
}

LevyTriple levy_triple_from_json(const json& j) {
    LevyTriple triple;
    triple.drift = vector_from_json(require(j, "mu"), "mu");
    triple.covariance = matrix_from_json(require(j, "nu"), "nu");
    if (j.contains("jumps")) {
        for (const auto& jump_json : j["jumps"]) {
            JumpEntry entry;
            entry.jump = vector_from_json(require(jump_json, "j"), "jumps.j");
            entry.rate = require(jump_json, "rate").get<double>();
            triple.jumps.push_back(std::move(entry));
        }
    }
    triple.validate();
    return triple;
}

json levy_triple_to_json(const LevyTriple& triple) {
    json j;
    j["mu"] = vector_to_json(triple.drift);
    j["nu"] = matrix_to_json(triple.covariance);
    json jumps = json::array();
    for (const auto& entry : triple.jumps) {
        jumps.push_back({{"j", vector_to_json(entry.jump)}, {"rate", entry.rate}});
    }
    j["jumps"] = jumps;
    return j;
}

ConvexityModel convexity_model_from_json(const json& j) {
    ConvexityModel model;
    model.funding_ratio = j.value("f", 1.0);
    model.mu_f = j.value("mu_f", 0.0);
    model.mu_s = vector_from_json(require(j, "mu_s"), "mu_s");
    model.mu_c = j.value("mu_c", 0.0);
    model.nu_f = j.value("nu_f", 0.0);
    const int n = static_cast<int>(model.mu_s.size());
    model.nu_fs = j.contains("nu_fs") ? vector_from_json(j["nu_fs"], "nu_fs")
                                      : Eigen::VectorXd::Zero(n);
    model.nu_fc = j.value("nu_fc", 0.0);
    model.nu_s = matrix_from_json(require(j, "nu_s"), "nu_s");
    model.nu_sc = vector_from_json(require(j, "nu_sc"), "nu_sc");
    model.nu_c = require(j, "nu_c").get<double>();
    if (j.contains("jumps")) {
        for (const auto& jump_json : j["jumps"]) {
            ConvexityModel::Jump jump;
            jump.jf = jump_json.value("jf", 0.0);
            jump.js = vector_from_json(require(jump_json, "js"), "jumps.js");
            jump.jc = jump_json.value("jc", 0.0);
            jump.rate = require(jump_json, "rate").get<double>();
            model.jumps.push_back(std::move(jump));
        }
    }
    model.validate();
    return model;
}

json convexity_model_to_json(const ConvexityModel& model) {
    json j;
    j["f"] = model.funding_ratio;
    j["mu_f"] = model.mu_f;
    j["mu_s"] = vector_to_json(model.mu_s);
    j["mu_c"] = model.mu_c;
    j["nu_f"] = model.nu_f;
    j["nu_fs"] = vector_to_json(model.nu_fs);
    j["nu_fc"] = model.nu_fc;
    j["nu_s"] = matrix_to_json(model.nu_s);
    j["nu_sc"] = vector_to_json(model.nu_sc);
    j["nu_c"] = model.nu_c;
    json jumps = json::array();
    for (const auto& jump : model.jumps) {
        jumps.push_back({{"jf", jump.jf},
                         {"js", vector_to_json(jump.js)},
                         {"jc", jump.jc},
                         {"rate", jump.rate}});
    }
    j["jumps"] = jumps;
    return j;
}

LoadedModel stochvol_model_from_json(const json& j) {
    const std::string kind = require(j, "kind").get<std::string>();
    LoadedModel loaded;
    loaded.parameters = j;
    if (kind == "bsm") {
        std::vector<std::pair<double, double>> jumps;
        if (j.contains("jumps")) {
            for (const auto& jump : j["jumps"]) {
                jumps.emplace_back(require(jump, "j").get<double>(),
                                   require(jump, "rate").get<double>());
            }
        }
        loaded.model = StochVolModel::bsm(require(j, "mu").get<double>(),
                                          require(j, "sigma").get<double>(), std::move(jumps));
        loaded.initial_sigma = j.value("sigma", 0.0);
    } else if (kind == "heston") {
        loaded.model = StochVolModel::heston(
            require(j, "mu").get<double>(), require(j, "kappa").get<double>(),
            require(j, "theta").get<double>(), require(j, "xi").get<double>(),
            require(j, "rho").get<double>());
        loaded.initial_sigma = require(j, "v0").get<double>();
    } else if (kind == "sabr") {
        loaded.model = StochVolModel::sabr(require(j, "alpha").get<double>(),
                                           require(j, "beta").get<double>(),
                                           require(j, "rho").get<double>());
        loaded.initial_sigma = require(j, "sigma0").get<double>();
    } else {
        throw_input("unknown model kind '" + kind + "'");
    }
    return loaded;
}

LoadedProblem pide_problem_from_json(const json& j) {
    LoadedProblem loaded;
    loaded.description = j;

    LoadedModel model = stochvol_model_from_json(require(j, "model"));
    loaded.problem.model = model.model;

    const json& grid_json = require(j, "grid");
    PideGrid grid;
    auto axis = [&](const json& spec, const char* name) -> Eigen::VectorXd {
        if (spec.is_array()) return vector_from_json(spec, name);
        return PideGrid::uniform(require(spec, "min").get<double>(),
                                 require(spec, "max").get<double>(),
                                 require(spec, "count").get<int>());
    };
    grid.s = axis(require(grid_json, "s"), "grid.s");
    if (grid_json.contains("sigma")) {
        grid.sigma = axis(grid_json["sigma"], "grid.sigma");
    } else {
        grid.sigma = Eigen::VectorXd::Constant(1, model.initial_sigma);
    }
    grid.time_steps = require(grid_json, "time_steps").get<int>();
    grid.maturity = require(grid_json, "maturity").get<double>();
    loaded.problem.grid = grid;

    const json& payoff = require(j, "payoff");
    const std::string type = require(payoff, "type").get<std::string>();
    Eigen::MatrixXd terminal(grid.ns(), grid.nsigma());
    if (type == "call" || type == "put") {
        const double strike = require(payoff, "strike").get<double>();
        for (int i = 0; i < grid.ns(); ++i) {
            const double intrinsic =
                type == "call" ? std::max(grid.s[i] - strike, 0.0) : std::max(strike - grid.s[i], 0.0);
            terminal.row(i).setConstant(intrinsic);
        }
    } else if (type == "values") {
        terminal = matrix_from_json(require(payoff, "values"), "payoff.values");
    } else {
        throw_input("unknown payoff type '" + type + "'");
    }
    loaded.problem.terminal = terminal;

    if (j.contains("controls")) {
        const json& controls = j["controls"];
        loaded.problem.controls.theta = controls.value("theta", 0.5);
        loaded.problem.controls.rannacher_steps = controls.value("rannacher_steps", 2);
        loaded.problem.controls.threads = controls.value("threads", 1);
        loaded.problem.controls.stability_factor = controls.value("stability_factor", 10.0);
    }

    loaded.query_s = j.contains("query") ? j["query"].value("s", grid.s[grid.ns() / 2])
                                         : grid.s[grid.ns() / 2];
    loaded.query_sigma = j.contains("query") ? j["query"].value("sigma", model.initial_sigma)
                                             : model.initial_sigma;
    loaded.problem.validate();
    return loaded;
}

std::string format_number(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

std::string surface_to_csv(const PideGrid& grid, const Eigen::MatrixXd& surface) {
    std::ostringstream out;
    out << "s";
    for (int j = 0; j < grid.nsigma(); ++j) out << ',' << format_number(grid.sigma[j]);
    out << '\n';
    for (int i = 0; i < grid.ns(); ++i) {
        out << format_number(grid.s[i]);
        for (int j = 0; j < grid.nsigma(); ++j) out << ',' << format_number(surface(i, j));
        out << '\n';
    }
    return out.str();
}

std::string ledger_to_csv(const BacktestResult& result) {
    std::ostringstream out;
    const int n_beta = result.rows.empty() ? 0 : static_cast<int>(result.rows.front().beta.size());
    out << "period";
    for (int a = 0; a < n_beta; ++a) out << ",beta_" << a;
    out << ",carry,gamma_pnl,hedged_pnl,cum_pnl\n";
    for (const auto& row : result.rows) {
        out << row.period;
        for (int a = 0; a < n_beta; ++a) out << ',' << format_number(row.beta[a]);
        out << ',' << format_number(row.carry) << ',' << format_number(row.gamma_pnl) << ','
            << format_number(row.hedged_pnl) << ',' << format_number(row.cum_pnl) << '\n';
    }
    return out.str();
}

} // namespace entropic::io
