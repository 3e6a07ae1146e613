#include "entropic/stochvol.hpp"

#include <cmath>

#include "entropic/errors.hpp"

namespace entropic {

namespace {

Coefficient constant(double value) {
    return [value](double, double, double) { return value; };
}

} // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::bsm: return "bsm";
        case ModelKind::heston: return "heston";
        case ModelKind::sabr: return "sabr";
        case ModelKind::custom: return "custom";
    }
    throw_internal("unhandled model kind");
}

StochVolModel StochVolModel::bsm(double mu, double sigma,
                                 std::vector<std::pair<double, double>> relative_jumps) {
    if (!(sigma >= 0.0)) throw_input("bsm: sigma must be nonnegative");
    StochVolModel model;
    model.kind = ModelKind::bsm;
    model.has_sigma_state = false;
    model.mu_s = [mu](double, double s, double) { return mu * s; };
    model.nu_s = [sigma](double, double s, double) { return sigma * sigma * s * s; };
    model.mu_sigma = constant(0.0);
    model.nu_sigma = constant(0.0);
    model.nu_s_sigma = constant(0.0);
    for (const auto& [j, rate] : relative_jumps) {
        if (j <= -1.0) throw_input("bsm: relative jump must keep the price positive (j > -1)");
        if (!(rate >= 0.0)) throw_input("bsm: jump rate must be nonnegative");
        StateJump jump;
        jump.size_s = [j](double, double s, double) { return j * s; };
        jump.size_sigma = constant(0.0);
        jump.rate = constant(rate);
        model.jumps.push_back(std::move(jump));
    }
    return model;
}

StochVolModel StochVolModel::heston(double mu, double kappa, double theta, double xi, double rho) {
    if (!(kappa > 0.0) || !(theta > 0.0) || !(xi > 0.0)) {
        throw_input("heston: kappa, theta, xi must be positive");
    }
    if (std::abs(rho) > 1.0) throw_input("heston: |rho| must be at most 1");
    StochVolModel model;
    model.kind = ModelKind::heston;
    // sigma names the instantaneous variance state v.
    model.mu_s = [mu](double, double s, double) { return mu * s; };
    model.nu_s = [](double, double s, double v) { return std::max(v, 0.0) * s * s; };
    model.mu_sigma = [kappa, theta](double, double, double v) { return kappa * (theta - v); };
    model.nu_sigma = [xi](double, double, double v) { return xi * xi * std::max(v, 0.0); };
    model.nu_s_sigma = [rho, xi](double, double s, double v) {
        return rho * xi * std::max(v, 0.0) * s;
    };
    return model;
}

StochVolModel StochVolModel::sabr(double alpha_vol, double beta_cev, double rho) {
    if (!(alpha_vol > 0.0)) throw_input("sabr: alpha must be positive");
    if (beta_cev < 0.0 || beta_cev > 1.0) throw_input("sabr: beta must lie in [0, 1]");
    if (std::abs(rho) > 1.0) throw_input("sabr: |rho| must be at most 1");
    StochVolModel model;
    model.kind = ModelKind::sabr;
    model.mu_s = constant(0.0);
    model.nu_s = [beta_cev](double, double s, double sigma) {
        return sigma * sigma * std::pow(std::max(s, 0.0), 2.0 * beta_cev);
    };
    model.mu_sigma = constant(0.0);
    model.nu_sigma = [alpha_vol](double, double, double sigma) {
        return alpha_vol * alpha_vol * sigma * sigma;
    };
    model.nu_s_sigma = [rho, alpha_vol, beta_cev](double, double s, double sigma) {
        return rho * alpha_vol * sigma * sigma * std::pow(std::max(s, 0.0), beta_cev);
    };
    return model;
}

void StochVolModel::check_state(double t, double s, double sigma) const {
    if (!mu_s || !nu_s || !mu_sigma || !nu_sigma || !nu_s_sigma) {
        throw_input("StochVolModel: missing coefficient evaluator");
    }
    const double vs = nu_s(t, s, sigma);
    const double vsig = nu_sigma(t, s, sigma);
    const double cross = nu_s_sigma(t, s, sigma);
    if (!std::isfinite(vs) || !std::isfinite(vsig) || !std::isfinite(cross) ||
        !std::isfinite(mu_s(t, s, sigma)) || !std::isfinite(mu_sigma(t, s, sigma))) {
        throw_input("StochVolModel: non-finite coefficient at the queried state");
    }
    if (vs < 0.0 || vsig < 0.0) throw_input("StochVolModel: negative variance rate");
    // 2x2 PSD check within tolerance.
    if (cross * cross > vs * vsig * (1.0 + 1e-10) + 1e-14) {
        throw_input("StochVolModel: joint covariance not PSD at the queried state");
    }
    for (const auto& jump : jumps) {
        if (!jump.size_s || !jump.size_sigma || !jump.rate) {
            throw_input("StochVolModel: incomplete jump evaluators");
        }
        if (jump.rate(t, s, sigma) < 0.0) throw_input("StochVolModel: negative jump rate");
    }
}

AlphaSolve calibration_alpha(const StochVolModel& model, double t, double s, double sigma,
                             double tol, int max_iter) {
    model.check_state(t, s, sigma);
    const double mu = model.mu_s(t, s, sigma);
    const double nu = model.nu_s(t, s, sigma);

    struct Atom {
        double js;
        double rate;
    };
    std::vector<Atom> atoms;
    for (const auto& jump : model.jumps) {
        const double rate = jump.rate(t, s, sigma);
        const double js = jump.size_s(t, s, sigma);
        if (rate > 0.0 && js != 0.0) atoms.push_back({js, rate});
    }

    if (atoms.empty()) {
        if (!(nu > 0.0)) {
            throw_numeric("calibration_alpha: no price diffusion and no price jumps at the state");
        }
        return AlphaSolve{mu / nu, 0, 0.0};
    }

    auto residual = [&](double alpha) {
        double r = mu - alpha * nu;
        for (const auto& atom : atoms) r += atom.js * std::exp(-alpha * atom.js) * atom.rate;
        return r;
    };
    auto slope = [&](double alpha) {
        double d = -nu;
        for (const auto& atom : atoms) {
            d -= atom.js * atom.js * std::exp(-alpha * atom.js) * atom.rate;
        }
        return d; // strictly negative: the residual is monotone decreasing
    };

    double alpha = nu > 0.0 ? mu / nu : 0.0;
    double r = residual(alpha);
    int iter = 0;
    while (std::abs(r) > tol && iter < max_iter) {
        const double d = slope(alpha);
        double step = -r / d;
        double scale = 1.0;
        double next = alpha;
        double rn = r;
        for (int halving = 0; halving <= 20; ++halving) {
            next = alpha + scale * step;
            rn = residual(next);
            if (std::abs(rn) < std::abs(r) || halving == 20) break;
            scale *= 0.5;
        }
        if (!(std::abs(rn) < std::abs(r))) {
            throw_numeric("calibration_alpha: no descent; residual " + std::to_string(r));
        }
        alpha = next;
        r = rn;
        ++iter;
    }
    if (std::abs(r) > tol) {
        throw_numeric("calibration_alpha: did not converge; residual " + std::to_string(r));
    }
    return AlphaSolve{alpha, iter, std::abs(r)};
}

} // namespace entropic
