#include <cmath>
#include <string>
#include <vector>

#include "entropic/errors.hpp"
#include "entropic/pide.hpp"

// Straight-line serial implementation of the same Douglas IMEX scheme,
// kept as an independent reference for testing and benchmarking the
// parallel solver. No shared kernels with pide.cpp beyond the public
// headers; everything is recomputed point by point.

namespace entropic {

namespace {

double lerp_surface(const PideGrid& grid, const Eigen::MatrixXd& surface, double x, double y) {
    const int ns = grid.ns();
    const int nsig = grid.nsigma();

    // sigma axis: clamp (zero-flux continuation)
    int j0 = 0;
    double wy = 0.0;
    if (nsig > 1) {
        if (y <= grid.sigma[0]) {
            j0 = 0;
            wy = 0.0;
        } else if (y >= grid.sigma[nsig - 1]) {
            j0 = nsig - 2;
            wy = 1.0;
        } else {
            while (j0 + 2 < nsig && grid.sigma[j0 + 1] <= y) ++j0;
            wy = (y - grid.sigma[j0]) / (grid.sigma[j0 + 1] - grid.sigma[j0]);
        }
    }

    // s axis: linear extrapolation beyond the edges
    int i0 = 0;
    if (x >= grid.s[ns - 1]) {
        i0 = ns - 2;
    } else if (x > grid.s[0]) {
        while (i0 + 2 < ns && grid.s[i0 + 1] <= x) ++i0;
    }
    const double wx = (x - grid.s[i0]) / (grid.s[i0 + 1] - grid.s[i0]);

    auto column = [&](int i) {
        if (nsig == 1) return surface(i, 0);
        return (1.0 - wy) * surface(i, j0) + wy * surface(i, j0 + 1);
    };
    return (1.0 - wx) * column(i0) + wx * column(i0 + 1);
}

} // namespace

PideSolution solve_pide_reference(const PideProblem& problem) {
    problem.validate();
    const PideGrid& grid = problem.grid;
    const StochVolModel& model = problem.model;
    const int ns = grid.ns();
    const int nsig = grid.nsigma();
    const double dt = grid.maturity / grid.time_steps;
    const double bound = problem.controls.stability_factor *
                         std::max(1.0, problem.terminal.cwiseAbs().maxCoeff());

    PideSolution solution;
    solution.grid = grid;
    Eigen::MatrixXd c = problem.terminal;

    Eigen::MatrixXd nu_s(ns, nsig), nu_sig(ns, nsig), nu_x(ns, nsig), drift(ns, nsig);
    std::vector<Eigen::MatrixXd> jrate, js_tab, jsig_tab;

    for (int step = 0; step < grid.time_steps; ++step) {
        const double t = grid.maturity - (step + 1) * dt;
        const double theta =
            step < problem.controls.rannacher_steps ? 1.0 : problem.controls.theta;

        jrate.assign(model.jumps.size(), Eigen::MatrixXd(ns, nsig));
        js_tab.assign(model.jumps.size(), Eigen::MatrixXd(ns, nsig));
        jsig_tab.assign(model.jumps.size(), Eigen::MatrixXd(ns, nsig));
        for (int j = 0; j < nsig; ++j) {
            for (int i = 0; i < ns; ++i) {
                const double s = grid.s[i];
                const double sg = grid.sigma[j];
                nu_s(i, j) = model.nu_s(t, s, sg);
                nu_sig(i, j) = model.nu_sigma(t, s, sg);
                nu_x(i, j) = model.nu_s_sigma(t, s, sg);

                bool jumpy = false;
                for (const auto& jump : model.jumps) {
                    if (jump.rate(t, s, sg) > 0.0 && jump.size_s(t, s, sg) != 0.0) jumpy = true;
                }
                double alpha = 0.0;
                double tilt = 0.0;
                if (jumpy) {
                    alpha = calibration_alpha(model, t, s, sg).alpha;
                    tilt = alpha * nu_x(i, j);
                } else if (nu_s(i, j) > 0.0) {
                    alpha = model.mu_s(t, s, sg) / nu_s(i, j);
                    tilt = alpha * nu_x(i, j);
                }
                drift(i, j) = model.mu_sigma(t, s, sg) - tilt;
                for (std::size_t a = 0; a < model.jumps.size(); ++a) {
                    const double jsv = model.jumps[a].size_s(t, s, sg);
                    js_tab[a](i, j) = jsv;
                    jsig_tab[a](i, j) = model.jumps[a].size_sigma(t, s, sg);
                    jrate[a](i, j) = model.jumps[a].rate(t, s, sg) * std::exp(-alpha * jsv);
                }
            }
        }

        auto a_s = [&](const Eigen::MatrixXd& u, int i, int j) {
            if (i == 0 || i == ns - 1) return 0.0;
            const double hm = grid.s[i] - grid.s[i - 1];
            const double hp = grid.s[i + 1] - grid.s[i];
            const double d2 = 2.0 * (u(i - 1, j) / (hm * (hm + hp)) - u(i, j) / (hm * hp) +
                                     u(i + 1, j) / (hp * (hm + hp)));
            return 0.5 * nu_s(i, j) * d2;
        };
        auto a_sig = [&](const Eigen::MatrixXd& u, int i, int j) {
            if (nsig == 1) return 0.0;
            double value = 0.0;
            if (j > 0 && j < nsig - 1) {
                const double hm = grid.sigma[j] - grid.sigma[j - 1];
                const double hp = grid.sigma[j + 1] - grid.sigma[j];
                value += 0.5 * nu_sig(i, j) * 2.0 *
                         (u(i, j - 1) / (hm * (hm + hp)) - u(i, j) / (hm * hp) +
                          u(i, j + 1) / (hp * (hm + hp)));
            }
            const double mu = drift(i, j);
            if ((mu >= 0.0 && j < nsig - 1) || j == 0) {
                value += mu * (u(i, j + 1) - u(i, j)) / (grid.sigma[j + 1] - grid.sigma[j]);
            } else {
                value += mu * (u(i, j) - u(i, j - 1)) / (grid.sigma[j] - grid.sigma[j - 1]);
            }
            return value;
        };
        auto ds = [&](const Eigen::MatrixXd& u, int i, int j) {
            if (i == 0) return (u(1, j) - u(0, j)) / (grid.s[1] - grid.s[0]);
            if (i == ns - 1) {
                return (u(ns - 1, j) - u(ns - 2, j)) / (grid.s[ns - 1] - grid.s[ns - 2]);
            }
            const double hm = grid.s[i] - grid.s[i - 1];
            const double hp = grid.s[i + 1] - grid.s[i];
            return -hp / (hm * (hm + hp)) * u(i - 1, j) +
                   (hp - hm) / (hm * hp) * u(i, j) + hm / (hp * (hm + hp)) * u(i + 1, j);
        };

        // Explicit predictor with the full operator.
        Eigen::MatrixXd grad_s(ns, nsig);
        for (int j = 0; j < nsig; ++j) {
            for (int i = 0; i < ns; ++i) grad_s(i, j) = ds(c, i, j);
        }
        Eigen::MatrixXd y0(ns, nsig);
        for (int j = 0; j < nsig; ++j) {
            for (int i = 0; i < ns; ++i) {
                double full = a_s(c, i, j) + a_sig(c, i, j);
                if (nsig > 1) {
                    // cross term as the sigma-derivative of the s-gradient
                    double cross;
                    if (j == 0) {
                        cross = (grad_s(i, 1) - grad_s(i, 0)) / (grid.sigma[1] - grid.sigma[0]);
                    } else if (j == nsig - 1) {
                        cross = (grad_s(i, j) - grad_s(i, j - 1)) /
                                (grid.sigma[j] - grid.sigma[j - 1]);
                    } else {
                        const double hm = grid.sigma[j] - grid.sigma[j - 1];
                        const double hp = grid.sigma[j + 1] - grid.sigma[j];
                        cross = -hp / (hm * (hm + hp)) * grad_s(i, j - 1) +
                                (hp - hm) / (hm * hp) * grad_s(i, j) +
                                hm / (hp * (hm + hp)) * grad_s(i, j + 1);
                    }
                    full += nu_x(i, j) * cross;
                }
                for (std::size_t a = 0; a < model.jumps.size(); ++a) {
                    const double rate = jrate[a](i, j);
                    if (rate == 0.0) continue;
                    const double target_s = grid.s[i] + js_tab[a](i, j);
                    const double target_sig =
                        nsig > 1 ? grid.sigma[j] + jsig_tab[a](i, j) : grid.sigma[0];
                    if (target_s < grid.s[0] || target_s > grid.s[ns - 1] ||
                        (nsig > 1 && (target_sig < grid.sigma[0] || target_sig > grid.sigma[nsig - 1]))) {
                        ++solution.off_grid_jumps;
                    }
                    const double shifted = lerp_surface(grid, c, target_s, target_sig);
                    full += rate * (shifted - c(i, j) - grad_s(i, j) * js_tab[a](i, j));
                }
                y0(i, j) = c(i, j) + dt * full;
            }
        }

        // Implicit s sweep.
        const double w = theta * dt;
        Eigen::MatrixXd y1(ns, nsig);
        for (int j = 0; j < nsig; ++j) {
            std::vector<double> sub(ns, 0.0), diag(ns, 0.0), sup(ns, 0.0), rhs(ns, 0.0);
            for (int i = 0; i < ns; ++i) {
                rhs[i] = y0(i, j) - w * a_s(c, i, j);
                diag[i] = 1.0;
                if (i > 0 && i < ns - 1) {
                    const double hm = grid.s[i] - grid.s[i - 1];
                    const double hp = grid.s[i + 1] - grid.s[i];
                    const double half_nu = 0.5 * nu_s(i, j);
                    sub[i] = -w * half_nu * 2.0 / (hm * (hm + hp));
                    sup[i] = -w * half_nu * 2.0 / (hp * (hm + hp));
                    diag[i] = 1.0 + w * half_nu * 2.0 / (hm * hp);
                }
            }
            // Thomas
            for (int i = 1; i < ns; ++i) {
                const double m = sub[i] / diag[i - 1];
                diag[i] -= m * sup[i - 1];
                rhs[i] -= m * rhs[i - 1];
            }
            y1(ns - 1, j) = rhs[ns - 1] / diag[ns - 1];
            for (int i = ns - 2; i >= 0; --i) {
                y1(i, j) = (rhs[i] - sup[i] * y1(i + 1, j)) / diag[i];
            }
        }

        Eigen::MatrixXd y2;
        if (nsig == 1) {
            y2 = y1;
        } else {
            y2.resize(ns, nsig);
            for (int i = 0; i < ns; ++i) {
                std::vector<double> sub(nsig, 0.0), diag(nsig, 0.0), sup(nsig, 0.0),
                    rhs(nsig, 0.0);
                for (int j = 0; j < nsig; ++j) {
                    rhs[j] = y1(i, j) - w * a_sig(c, i, j);
                    double coeff_lo = 0.0, coeff_mid = 0.0, coeff_hi = 0.0;
                    if (j > 0 && j < nsig - 1) {
                        const double hm = grid.sigma[j] - grid.sigma[j - 1];
                        const double hp = grid.sigma[j + 1] - grid.sigma[j];
                        const double half_nu = 0.5 * nu_sig(i, j);
                        coeff_lo += half_nu * 2.0 / (hm * (hm + hp));
                        coeff_mid += -half_nu * 2.0 / (hm * hp);
                        coeff_hi += half_nu * 2.0 / (hp * (hm + hp));
                    }
                    const double mu = drift(i, j);
                    if ((mu >= 0.0 && j < nsig - 1) || j == 0) {
                        const double h = grid.sigma[j + 1] - grid.sigma[j];
                        coeff_mid += -mu / h;
                        coeff_hi += mu / h;
                    } else {
                        const double h = grid.sigma[j] - grid.sigma[j - 1];
                        coeff_lo += -mu / h;
                        coeff_mid += mu / h;
                    }
                    sub[j] = -w * coeff_lo;
                    diag[j] = 1.0 - w * coeff_mid;
                    sup[j] = -w * coeff_hi;
                }
                for (int j = 1; j < nsig; ++j) {
                    const double m = sub[j] / diag[j - 1];
                    diag[j] -= m * sup[j - 1];
                    rhs[j] -= m * rhs[j - 1];
                }
                y2(i, nsig - 1) = rhs[nsig - 1] / diag[nsig - 1];
                for (int j = nsig - 2; j >= 0; --j) {
                    y2(i, j) = (rhs[j] - sup[j] * y2(i, j + 1)) / diag[j];
                }
            }
        }

        c = y2;
        if (!c.allFinite() || c.cwiseAbs().maxCoeff() > bound) {
            throw_numeric("solve_pide_reference: instability detected at step " +
                          std::to_string(step));
        }
    }

    solution.surface = std::move(c);
    return solution;
}

} // namespace entropic
