#include "entropic/pide.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "entropic/errors.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace entropic {

namespace {

// ---------------------------------------------------------------------
// Non-uniform finite-difference stencils
// ---------------------------------------------------------------------

struct Stencil {
    double lo = 0.0, mid = 0.0, hi = 0.0;
};

Stencil second_derivative(double h_minus, double h_plus) {
    Stencil s;
    s.lo = 2.0 / (h_minus * (h_minus + h_plus));
    s.hi = 2.0 / (h_plus * (h_minus + h_plus));
    s.mid = -s.lo - s.hi;
    return s;
}

Stencil first_derivative_central(double h_minus, double h_plus) {
    Stencil s;
    s.lo = -h_plus / (h_minus * (h_minus + h_plus));
    s.hi = h_minus / (h_plus * (h_minus + h_plus));
    s.mid = -s.lo - s.hi;
    return s;
}

// ---------------------------------------------------------------------
// Grid interpolation (bilinear; linear extrapolation beyond the s edges,
// clamping beyond the sigma edges to match the zero-flux condition)
// ---------------------------------------------------------------------

struct AxisLocation {
    int lo = 0;
    double weight_hi = 0.0; // fraction of the upper node
    bool off_grid = false;
};

AxisLocation locate(const Eigen::VectorXd& axis, double x, bool clamp) {
    AxisLocation loc;
    const int n = static_cast<int>(axis.size());
    if (n == 1) return loc;
    if (x < axis[0]) {
        loc.off_grid = true;
        if (clamp) return loc; // weight 0 on node 1
        loc.lo = 0;
        loc.weight_hi = (x - axis[0]) / (axis[1] - axis[0]); // negative: extrapolates
        return loc;
    }
    if (x > axis[n - 1]) {
        loc.off_grid = true;
        loc.lo = n - 2;
        loc.weight_hi = clamp ? 1.0 : (x - axis[n - 2]) / (axis[n - 1] - axis[n - 2]);
        return loc;
    }
    int lo = 0;
    int hi = n - 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (axis[mid] <= x ? lo : hi) = mid;
    }
    loc.lo = lo;
    loc.weight_hi = (x - axis[lo]) / (axis[lo + 1] - axis[lo]);
    return loc;
}

double interpolate(const Eigen::VectorXd& s_axis, const Eigen::VectorXd& sigma_axis,
                   const Eigen::MatrixXd& surface, double s, double sigma, long* off_grid) {
    const AxisLocation is = locate(s_axis, s, /*clamp=*/false);
    const AxisLocation ig = locate(sigma_axis, sigma, /*clamp=*/true);
    if (off_grid && (is.off_grid || ig.off_grid)) ++*off_grid;

    auto value_at_sigma = [&](int i) {
        if (sigma_axis.size() == 1) return surface(i, 0);
        return (1.0 - ig.weight_hi) * surface(i, ig.lo) + ig.weight_hi * surface(i, ig.lo + 1);
    };
    if (s_axis.size() == 1) return value_at_sigma(0);
    return (1.0 - is.weight_hi) * value_at_sigma(is.lo) + is.weight_hi * value_at_sigma(is.lo + 1);
}

// ---------------------------------------------------------------------
// Per-time-level coefficient tables
// ---------------------------------------------------------------------

struct JumpTable {
    Eigen::MatrixXd js;          ///< absolute jump in s at each node
    Eigen::MatrixXd jsigma;      ///< absolute jump in sigma at each node
    Eigen::MatrixXd tilted_rate; ///< rate * exp(-alpha js)
    Eigen::MatrixXd rate;        ///< economic rate
};

struct Tables {
    Eigen::MatrixXd nu_s, nu_sigma, nu_cross;
    Eigen::MatrixXd sigma_drift; ///< mu_sigma - alpha nu_s_sigma
    std::vector<JumpTable> jumps;
};

Tables evaluate_tables(const PideProblem& problem, double t) {
    const auto& grid = problem.grid;
    const auto& model = problem.model;
    const int ns = grid.ns();
    const int nsig = grid.nsigma();

    Tables tables;
    tables.nu_s.resize(ns, nsig);
    tables.nu_sigma.resize(ns, nsig);
    tables.nu_cross.resize(ns, nsig);
    tables.sigma_drift.resize(ns, nsig);
    tables.jumps.resize(model.jumps.size());
    for (auto& jt : tables.jumps) {
        jt.js.resize(ns, nsig);
        jt.jsigma.resize(ns, nsig);
        jt.tilted_rate.resize(ns, nsig);
        jt.rate.resize(ns, nsig);
    }

    for (int j = 0; j < nsig; ++j) {
        const double sig = grid.sigma[j];
        for (int i = 0; i < ns; ++i) {
            const double s = grid.s[i];
            const double nu = model.nu_s(t, s, sig);
            const double cross = model.nu_s_sigma(t, s, sig);
            tables.nu_s(i, j) = nu;
            tables.nu_sigma(i, j) = model.nu_sigma(t, s, sig);
            tables.nu_cross(i, j) = cross;

            bool any_price_jump = false;
            for (const auto& jump : model.jumps) {
                if (jump.rate(t, s, sig) > 0.0 && jump.size_s(t, s, sig) != 0.0) {
                    any_price_jump = true;
                    break;
                }
            }

            double alpha = 0.0;
            double tilt_term = 0.0;
            if (any_price_jump) {
                alpha = calibration_alpha(model, t, s, sig).alpha;
                tilt_term = alpha * cross;
            } else if (nu > 0.0) {
                alpha = model.mu_s(t, s, sig) / nu;
                tilt_term = alpha * cross;
            }
            // Degenerate states (nu_s = 0, no jumps) force cross = 0 by PSD,
            // so the tilt term vanishes there.
            tables.sigma_drift(i, j) = model.mu_sigma(t, s, sig) - tilt_term;

            for (std::size_t a = 0; a < model.jumps.size(); ++a) {
                const auto& jump = model.jumps[a];
                const double js = jump.size_s(t, s, sig);
                const double rate = jump.rate(t, s, sig);
                tables.jumps[a].js(i, j) = js;
                tables.jumps[a].jsigma(i, j) = jump.size_sigma(t, s, sig);
                tables.jumps[a].rate(i, j) = rate;
                tables.jumps[a].tilted_rate(i, j) = rate * std::exp(-alpha * js);
            }
        }
    }
    return tables;
}

// ---------------------------------------------------------------------
// Directional operators as per-node stencil coefficients, shared between
// the explicit predictor and the implicit line solves
// ---------------------------------------------------------------------

struct LineCoeffs {
    Eigen::MatrixXd lo, diag, hi;
};

LineCoeffs build_s_coeffs(const PideGrid& grid, const Tables& tables) {
    const int ns = grid.ns();
    const int nsig = grid.nsigma();
    LineCoeffs c{Eigen::MatrixXd::Zero(ns, nsig), Eigen::MatrixXd::Zero(ns, nsig),
                 Eigen::MatrixXd::Zero(ns, nsig)};
    // Boundary rows stay zero: the far-field condition is vanishing second
    // derivative (linear continuation).
    for (int i = 1; i + 1 < ns; ++i) {
        const Stencil d2 = second_derivative(grid.s[i] - grid.s[i - 1], grid.s[i + 1] - grid.s[i]);
        for (int j = 0; j < nsig; ++j) {
            const double half_nu = 0.5 * tables.nu_s(i, j);
            c.lo(i, j) = half_nu * d2.lo;
            c.diag(i, j) = half_nu * d2.mid;
            c.hi(i, j) = half_nu * d2.hi;
        }
    }
    return c;
}

LineCoeffs build_sigma_coeffs(const PideGrid& grid, const Tables& tables) {
    const int ns = grid.ns();
    const int nsig = grid.nsigma();
    LineCoeffs c{Eigen::MatrixXd::Zero(ns, nsig), Eigen::MatrixXd::Zero(ns, nsig),
                 Eigen::MatrixXd::Zero(ns, nsig)};
    if (nsig == 1) return c;
    for (int j = 0; j < nsig; ++j) {
        const bool lower_edge = (j == 0);
        const bool upper_edge = (j == nsig - 1);
        const double h_minus = lower_edge ? 0.0 : grid.sigma[j] - grid.sigma[j - 1];
        const double h_plus = upper_edge ? 0.0 : grid.sigma[j + 1] - grid.sigma[j];
        for (int i = 0; i < ns; ++i) {
            double lo = 0.0, mid = 0.0, hi = 0.0;
            if (!lower_edge && !upper_edge) {
                const Stencil d2 = second_derivative(h_minus, h_plus);
                const double half_nu = 0.5 * tables.nu_sigma(i, j);
                lo += half_nu * d2.lo;
                mid += half_nu * d2.mid;
                hi += half_nu * d2.hi;
            }
            // First-order upwinded drift; at the edges only the inward
            // one-sided difference exists.
            const double drift = tables.sigma_drift(i, j);
            if ((drift >= 0.0 && !upper_edge) || lower_edge) {
                mid += -drift / h_plus;
                hi += drift / h_plus;
            } else {
                lo += -drift / h_minus;
                mid += drift / h_minus;
            }
            c.lo(i, j) = lo;
            c.diag(i, j) = mid;
            c.hi(i, j) = hi;
        }
    }
    return c;
}

void apply_s(const LineCoeffs& c, const Eigen::MatrixXd& in, Eigen::MatrixXd& out) {
    const int ns = static_cast<int>(in.rows());
    const int nsig = static_cast<int>(in.cols());
    for (int j = 0; j < nsig; ++j) {
        out(0, j) += c.diag(0, j) * in(0, j);
        for (int i = 1; i + 1 < ns; ++i) {
            out(i, j) += c.lo(i, j) * in(i - 1, j) + c.diag(i, j) * in(i, j) +
                         c.hi(i, j) * in(i + 1, j);
        }
        out(ns - 1, j) += c.diag(ns - 1, j) * in(ns - 1, j);
    }
}

void apply_sigma(const LineCoeffs& c, const Eigen::MatrixXd& in, Eigen::MatrixXd& out) {
    const int ns = static_cast<int>(in.rows());
    const int nsig = static_cast<int>(in.cols());
    if (nsig == 1) return;
    for (int j = 0; j < nsig; ++j) {
        for (int i = 0; i < ns; ++i) {
            double v = c.diag(i, j) * in(i, j);
            if (j > 0) v += c.lo(i, j) * in(i, j - 1);
            if (j + 1 < nsig) v += c.hi(i, j) * in(i, j + 1);
            out(i, j) += v;
        }
    }
}

/// First derivative in s of a surface, central in the interior, one-sided
/// at the edges.
Eigen::MatrixXd d_ds(const PideGrid& grid, const Eigen::MatrixXd& in) {
    const int ns = grid.ns();
    const int nsig = static_cast<int>(in.cols());
    Eigen::MatrixXd out(ns, nsig);
    for (int j = 0; j < nsig; ++j) {
        out(0, j) = (in(1, j) - in(0, j)) / (grid.s[1] - grid.s[0]);
        for (int i = 1; i + 1 < ns; ++i) {
            const Stencil d1 =
                first_derivative_central(grid.s[i] - grid.s[i - 1], grid.s[i + 1] - grid.s[i]);
            out(i, j) = d1.lo * in(i - 1, j) + d1.mid * in(i, j) + d1.hi * in(i + 1, j);
        }
        out(ns - 1, j) = (in(ns - 1, j) - in(ns - 2, j)) / (grid.s[ns - 1] - grid.s[ns - 2]);
    }
    return out;
}

Eigen::MatrixXd d_dsigma(const PideGrid& grid, const Eigen::MatrixXd& in) {
    const int ns = static_cast<int>(in.rows());
    const int nsig = grid.nsigma();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ns, nsig);
    if (nsig == 1) return out;
    for (int j = 0; j < nsig; ++j) {
        for (int i = 0; i < ns; ++i) {
            if (j == 0) {
                out(i, j) = (in(i, 1) - in(i, 0)) / (grid.sigma[1] - grid.sigma[0]);
            } else if (j == nsig - 1) {
                out(i, j) =
                    (in(i, j) - in(i, j - 1)) / (grid.sigma[j] - grid.sigma[j - 1]);
            } else {
                const Stencil d1 = first_derivative_central(grid.sigma[j] - grid.sigma[j - 1],
                                                            grid.sigma[j + 1] - grid.sigma[j]);
                out(i, j) = d1.lo * in(i, j - 1) + d1.mid * in(i, j) + d1.hi * in(i, j + 1);
            }
        }
    }
    return out;
}

/// Cross and jump contributions (the explicit-only part of the operator).
Eigen::MatrixXd explicit_terms(const PideProblem& problem, const Tables& tables,
                               const Eigen::MatrixXd& in, long* off_grid) {
    const auto& grid = problem.grid;
    const int ns = grid.ns();
    const int nsig = grid.nsigma();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ns, nsig);

    const Eigen::MatrixXd grad_s = d_ds(grid, in);
    if (nsig > 1) {
        const Eigen::MatrixXd cross = d_dsigma(grid, grad_s);
        out += tables.nu_cross.cwiseProduct(cross);
    }

    for (const auto& jt : tables.jumps) {
        for (int j = 0; j < nsig; ++j) {
            for (int i = 0; i < ns; ++i) {
                const double rate = jt.tilted_rate(i, j);
                if (rate == 0.0) continue;
                const double js = jt.js(i, j);
                const double jsig = jt.jsigma(i, j);
                const double shifted = interpolate(grid.s, grid.sigma, in, grid.s[i] + js,
                                                   (nsig > 1 ? grid.sigma[j] + jsig : 0.0),
                                                   off_grid);
                out(i, j) += rate * (shifted - in(i, j) - grad_s(i, j) * js);
            }
        }
    }
    return out;
}

/// Thomas solve of (I - w A_dir) x = rhs along one line; `a`, `b`, `c` are
/// the A_dir stencil coefficients on that line.
void tridiagonal_solve(const double* a, const double* b, const double* c, double w,
                       const double* rhs, double* x, int n, std::vector<double>& scratch) {
    scratch.resize(2 * n);
    double* cp = scratch.data();
    double* dp = scratch.data() + n;
    double diag0 = 1.0 - w * b[0];
    cp[0] = (n > 1 ? -w * c[0] : 0.0) / diag0;
    dp[0] = rhs[0] / diag0;
    for (int i = 1; i < n; ++i) {
        const double lower = -w * a[i];
        const double diag = 1.0 - w * b[i];
        const double upper = -w * c[i];
        const double denom = diag - lower * cp[i - 1];
        cp[i] = (i + 1 < n ? upper : 0.0) / denom;
        dp[i] = (rhs[i] - lower * dp[i - 1]) / denom;
    }
    x[n - 1] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
}

struct StepWorkspace {
    Eigen::MatrixXd explicit_part, y0, y1, y2, as_old, asig_old;
};

/// One backward Douglas step: explicit predictor with the full operator,
/// then implicit corrections per direction with weight theta.
void step_once(const PideProblem& problem, const Tables& tables, double theta, double dt,
               const Eigen::MatrixXd& c_old, Eigen::MatrixXd& c_new, long* off_grid,
               int threads, StepWorkspace& ws) {
    const auto& grid = problem.grid;
    const int ns = grid.ns();
    const int nsig = grid.nsigma();

    const LineCoeffs as = build_s_coeffs(grid, tables);
    const LineCoeffs asig = build_sigma_coeffs(grid, tables);

    ws.as_old = Eigen::MatrixXd::Zero(ns, nsig);
    apply_s(as, c_old, ws.as_old);
    ws.asig_old = Eigen::MatrixXd::Zero(ns, nsig);
    apply_sigma(asig, c_old, ws.asig_old);

    ws.explicit_part = explicit_terms(problem, tables, c_old, off_grid);
    ws.y0 = c_old + dt * (ws.as_old + ws.asig_old + ws.explicit_part);

    // s sweep: parallel across sigma lines.
    ws.y1.resize(ns, nsig);
    {
        const double w = theta * dt;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) num_threads(std::max(1, threads)) if (threads > 1)
#endif
        for (int j = 0; j < nsig; ++j) {
            std::vector<double> rhs(ns), sol(ns), scratch;
            std::vector<double> a(ns), b(ns), c(ns);
            for (int i = 0; i < ns; ++i) {
                rhs[i] = ws.y0(i, j) - w * ws.as_old(i, j);
                a[i] = as.lo(i, j);
                b[i] = as.diag(i, j);
                c[i] = as.hi(i, j);
            }
            tridiagonal_solve(a.data(), b.data(), c.data(), w, rhs.data(), sol.data(), ns,
                              scratch);
            for (int i = 0; i < ns; ++i) ws.y1(i, j) = sol[i];
        }
    }

    if (nsig == 1) {
        c_new = ws.y1;
        return;
    }

    // sigma sweep: parallel across s lines.
    ws.y2.resize(ns, nsig);
    {
        const double w = theta * dt;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) num_threads(std::max(1, threads)) if (threads > 1)
#endif
        for (int i = 0; i < ns; ++i) {
            std::vector<double> rhs(nsig), sol(nsig), scratch;
            std::vector<double> a(nsig), b(nsig), c(nsig);
            for (int j = 0; j < nsig; ++j) {
                rhs[j] = ws.y1(i, j) - w * ws.asig_old(i, j);
                a[j] = asig.lo(i, j);
                b[j] = asig.diag(i, j);
                c[j] = asig.hi(i, j);
            }
            tridiagonal_solve(a.data(), b.data(), c.data(), w, rhs.data(), sol.data(), nsig,
                              scratch);
            for (int j = 0; j < nsig; ++j) ws.y2(i, j) = sol[j];
        }
    }
    c_new = ws.y2;
}

double terminal_bound(const PideProblem& problem) {
    return problem.terminal.cwiseAbs().maxCoeff();
}

} // namespace

Eigen::VectorXd PideGrid::uniform(double lo, double hi, int count) {
    if (count < 1 || !(hi > lo)) throw_input("PideGrid::uniform: bad axis request");
    if (count == 1) return Eigen::VectorXd::Constant(1, lo);
    return Eigen::VectorXd::LinSpaced(count, lo, hi);
}

void PideGrid::validate() const {
    if (ns() < 3) throw_input("PideGrid: need at least 3 s nodes");
    if (nsigma() < 1) throw_input("PideGrid: need at least 1 sigma node");
    for (int i = 1; i < ns(); ++i) {
        if (!(s[i] > s[i - 1])) throw_input("PideGrid: s axis must be strictly increasing");
    }
    for (int j = 1; j < nsigma(); ++j) {
        if (!(sigma[j] > sigma[j - 1])) {
            throw_input("PideGrid: sigma axis must be strictly increasing");
        }
    }
    if (time_steps < 1) throw_input("PideGrid: need at least one time step");
    if (!(maturity > 0.0)) throw_input("PideGrid: maturity must be positive");
}

void PideProblem::validate() const {
    grid.validate();
    if (terminal.rows() != grid.ns() || terminal.cols() != grid.nsigma()) {
        throw_input("PideProblem: terminal payoff shape does not match the grid");
    }
    if (!terminal.allFinite()) throw_input("PideProblem: terminal payoff must be finite");
    if (!(controls.theta > 0.0 && controls.theta <= 1.0)) {
        throw_input("PideProblem: theta must lie in (0, 1]");
    }
    if (grid.nsigma() > 1 && !model.has_sigma_state) {
        throw_input("PideProblem: sigma grid given for a model without a sigma state");
    }
    model.check_state(0.0, grid.s[grid.ns() / 2],
                      grid.nsigma() > 1 ? grid.sigma[grid.nsigma() / 2] : grid.sigma[0]);
}

double PideSolution::price(double s, double sigma) const {
    return interpolate(grid.s, grid.sigma, surface, s, sigma, nullptr);
}

Eigen::MatrixXd pide_drift_operator(const PideProblem& problem, const Eigen::MatrixXd& surface,
                                    double t, long* off_grid_count) {
    problem.validate();
    if (surface.rows() != problem.grid.ns() || surface.cols() != problem.grid.nsigma()) {
        throw_input("pide_drift_operator: surface shape does not match the grid");
    }
    if (!surface.allFinite()) throw_input("pide_drift_operator: surface must be finite");
    const Tables tables = evaluate_tables(problem, t);
    const LineCoeffs as = build_s_coeffs(problem.grid, tables);
    const LineCoeffs asig = build_sigma_coeffs(problem.grid, tables);
    Eigen::MatrixXd out = explicit_terms(problem, tables, surface, off_grid_count);
    apply_s(as, surface, out);
    apply_sigma(asig, surface, out);
    return out;
}

PideSolution solve_pide(const PideProblem& problem) {
    problem.validate();
    const auto& grid = problem.grid;
    const double dt = grid.maturity / grid.time_steps;
    const double bound =
        problem.controls.stability_factor * std::max(1.0, terminal_bound(problem));

    PideSolution solution;
    solution.grid = grid;
    Eigen::MatrixXd c = problem.terminal;
    Eigen::MatrixXd next;
    StepWorkspace ws;

    for (int step = 0; step < grid.time_steps; ++step) {
        const double t_new = grid.maturity - (step + 1) * dt;
        const Tables tables = evaluate_tables(problem, t_new);
        const double theta = step < problem.controls.rannacher_steps ? 1.0 : problem.controls.theta;
        step_once(problem, tables, theta, dt, c, next, &solution.off_grid_jumps,
                  problem.controls.threads, ws);
        c.swap(next);
        if (!c.allFinite() || c.cwiseAbs().maxCoeff() > bound) {
            throw_numeric("solve_pide: instability detected at step " + std::to_string(step) +
                          " (surface magnitude " + std::to_string(c.cwiseAbs().maxCoeff()) +
                          " exceeds bound " + std::to_string(bound) + ")");
        }
    }
    solution.surface = std::move(c);
    return solution;
}

CompleteHedge complete_hedge_weights(const PideProblem& problem,
                                     const std::vector<Eigen::MatrixXd>& option_surfaces,
                                     const Eigen::MatrixXd& derivative_surface, int i, int j) {
    const auto& grid = problem.grid;
    if (i < 0 || i >= grid.ns() || j < 0 || j >= grid.nsigma()) {
        throw_input("complete_hedge_weights: grid node out of range");
    }
    const Eigen::MatrixXd c_s = d_ds(grid, derivative_surface);
    const Eigen::MatrixXd c_sig = d_dsigma(grid, derivative_surface);

    CompleteHedge hedge;
    if (option_surfaces.empty()) {
        hedge.beta_s = c_s(i, j);
        hedge.beta_o = Eigen::VectorXd();
        return hedge;
    }
    if (option_surfaces.size() != 1 || grid.nsigma() < 2) {
        throw_input("complete_hedge_weights: exactly one option surface marks the single "
                    "sigma state");
    }
    const Eigen::MatrixXd o_s = d_ds(grid, option_surfaces[0]);
    const Eigen::MatrixXd o_sig = d_dsigma(grid, option_surfaces[0]);
    const double dod_sigma = o_sig(i, j);
    const double scale = std::max({1.0, std::abs(o_s(i, j)), std::abs(c_sig(i, j))});
    if (std::abs(dod_sigma) < 1e-12 * scale) {
        throw_numeric("complete_hedge_weights: option surface does not mark sigma at state (s=" +
                      std::to_string(grid.s[i]) + ", sigma=" + std::to_string(grid.sigma[j]) +
                      "): do/dsigma is singular");
    }
    hedge.beta_o = Eigen::VectorXd::Constant(1, c_sig(i, j) / dod_sigma);
    hedge.beta_s = c_s(i, j) - o_s(i, j) * hedge.beta_o[0];
    return hedge;
}

ResidualVariance residual_variance_rate(const PideProblem& problem, double beta_s,
                                        const Eigen::VectorXd& beta_o,
                                        const std::vector<Eigen::MatrixXd>& option_surfaces,
                                        const Eigen::MatrixXd& derivative_surface, int i, int j,
                                        double t) {
    const auto& grid = problem.grid;
    const double s = grid.s[i];
    const double sig = grid.sigma[grid.nsigma() == 1 ? 0 : j];

    const Eigen::MatrixXd c_s = d_ds(grid, derivative_surface);
    const Eigen::MatrixXd c_sig = d_dsigma(grid, derivative_surface);

    double hedge_ds = beta_s;
    double hedge_dsig = 0.0;
    if (beta_o.size() > 0) {
        if (option_surfaces.size() != static_cast<std::size_t>(beta_o.size())) {
            throw_input("residual_variance_rate: option surfaces and weights mismatch");
        }
        for (Eigen::Index k = 0; k < beta_o.size(); ++k) {
            hedge_ds += beta_o[k] * d_ds(grid, option_surfaces[k])(i, j);
            hedge_dsig += beta_o[k] * d_dsigma(grid, option_surfaces[k])(i, j);
        }
    }
    const double gap_s = c_s(i, j) - hedge_ds;
    const double gap_sig = c_sig(i, j) - hedge_dsig;

    ResidualVariance v;
    v.continuous_s = gap_s * gap_s * problem.model.nu_s(t, s, sig);
    v.continuous_sigma = gap_sig * gap_sig * problem.model.nu_sigma(t, s, sig);
    v.continuous_cross = 2.0 * gap_s * gap_sig * problem.model.nu_s_sigma(t, s, sig);

    for (const auto& jump : problem.model.jumps) {
        const double rate = jump.rate(t, s, sig);
        if (rate <= 0.0) continue;
        const double js = jump.size_s(t, s, sig);
        const double jsig = jump.size_sigma(t, s, sig);
        const double target_s = s + js;
        const double target_sig = grid.nsigma() == 1 ? 0.0 : sig + jsig;
        const double jc = interpolate(grid.s, grid.sigma, derivative_surface, target_s,
                                      target_sig, nullptr) -
                          derivative_surface(i, j);
        double hedged = jc - beta_s * js;
        for (Eigen::Index k = 0; k < beta_o.size(); ++k) {
            const double jo = interpolate(grid.s, grid.sigma, option_surfaces[k], target_s,
                                          target_sig, nullptr) -
                              option_surfaces[k](i, j);
            hedged -= beta_o[k] * jo;
        }
        v.discontinuous += hedged * hedged * rate;
    }
    return v;
}

} // namespace entropic
