#include "entropic/moments.hpp"

#include <cmath>
#include <string>

#include "entropic/errors.hpp"

namespace entropic {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kPsdTol = -1e-10;

void check_psd(const Eigen::MatrixXd& m, const std::string& what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, std::abs(eig.eigenvalues().maxCoeff()));
    if (eig.eigenvalues().minCoeff() < kPsdTol * scale) {
        throw_input(what + " is not positive semidefinite (min eigenvalue " +
                    std::to_string(eig.eigenvalues().minCoeff()) + ")");
    }
}

Eigen::MatrixXd joint_matrix(const ReturnMoments& m) {
    const int n = m.assets();
    Eigen::MatrixXd joint(n + 1, n + 1);
    joint.topLeftCorner(n, n) = m.cov_p;
    joint.topRightCorner(n, 1) = m.cross_pa;
    joint.bottomLeftCorner(1, n) = m.cross_pa.transpose();
    joint(n, n) = m.var_a;
    return joint;
}

/// Solves V x = rhs through the eigendecomposition of the symmetric V,
/// failing on condition number above the limit. Pseudo-inverse mode
/// drops near-null directions instead (minimum-norm solution).
class SymmetricSolver {
public:
    SymmetricSolver(const Eigen::MatrixXd& v, const SolveOptions& options, const std::string& what)
        : eig_(v) {
        const Eigen::VectorXd& lambda = eig_.eigenvalues();
        const double lmax = std::max(std::abs(lambda.maxCoeff()), std::abs(lambda.minCoeff()));
        if (lmax <= 0.0) {
            if (!options.allow_pseudo_inverse) {
                throw_numeric(what + " is identically zero; run check_no_arbitrage and supply "
                              "a nondegenerate covariance");
            }
            cutoff_ = 1.0; // everything dropped
            return;
        }
        cutoff_ = lmax / options.condition_limit;
        if (!options.allow_pseudo_inverse && lambda.minCoeff() < cutoff_) {
            throw_numeric(what + " is rank deficient at condition limit 1e12 (eigenvalues [" +
                          std::to_string(lambda.minCoeff()) + ", " + std::to_string(lmax) +
                          "]); run check_no_arbitrage or enable pseudo-inverse mode");
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        const Eigen::VectorXd& lambda = eig_.eigenvalues();
        Eigen::VectorXd y = eig_.eigenvectors().transpose() * rhs;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            y[i] = lambda[i] > cutoff_ ? y[i] / lambda[i] : 0.0;
        }
        return eig_.eigenvectors() * y;
    }

    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
        Eigen::MatrixXd out(rhs.rows(), rhs.cols());
        for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solve(Eigen::VectorXd(rhs.col(c)));
        return out;
    }

private:
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
    double cutoff_ = 0.0;
};

} // namespace

void ReturnMoments::validate() const {
    const int n = assets();
    if (n == 0) throw_input("ReturnMoments: empty underlying");
    if (cov_p.rows() != n || cov_p.cols() != n || cross_pa.size() != n) {
        throw_input("ReturnMoments: inconsistent dimensions");
    }
    const double asym = (cov_p - cov_p.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol * std::max(1.0, cov_p.cwiseAbs().maxCoeff())) {
        throw_input("ReturnMoments: V_p asymmetric by " + std::to_string(asym));
    }
    check_psd(cov_p, "V_p");
    check_psd(joint_matrix(*this), "joint covariance [[V_p, C_pa],[C_pa^t, V_a]]");
    if (sector) {
        const int no = static_cast<int>(sector->cov_o.rows());
        if (sector->cov_o.cols() != no || sector->cross_po.rows() != n ||
            sector->cross_po.cols() != no || sector->cross_oa.size() != no) {
            throw_input("ReturnMoments: second-sector block dimensions inconsistent");
        }
        check_psd(sector->cov_o, "V_o");
    }
}

ReturnMoments moments_from_measure(const ScenarioMeasure& measure, const MarketSlice& slice,
                                   const Eigen::VectorXd& derivative_end, double derivative_start) {
    if (measure.size() != slice.scenarios()) {
        throw_input("moments_from_measure: measure and slice scenario counts differ");
    }
    const Eigen::MatrixXd rp = normalized_return(slice);
    const Eigen::VectorXd ra = derivative_return(slice, derivative_start, derivative_end);
    const Eigen::VectorXd& z = measure.weights();

    ReturnMoments m;
    m.mean_p = rp.transpose() * z;
    m.mean_a = z.dot(ra);

    const int n = slice.assets();
    m.cov_p = Eigen::MatrixXd::Zero(n, n);
    m.cross_pa = Eigen::VectorXd::Zero(n);
    m.var_a = 0.0;
    for (int i = 0; i < slice.scenarios(); ++i) {
        const Eigen::VectorXd dp = rp.row(i).transpose() - m.mean_p;
        const double da = ra[i] - m.mean_a;
        m.cov_p += z[i] * dp * dp.transpose();
        m.cross_pa += z[i] * da * dp;
        m.var_a += z[i] * da * da;
    }
    m.cov_p = (0.5 * (m.cov_p + m.cov_p.transpose())).eval();
    return m;
}

ArbitrageCheck check_no_arbitrage(const ReturnMoments& moments, double tol) {
    moments.validate();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moments.cov_p);
    ArbitrageCheck result;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        if (eig.eigenvalues()[i] >= tol) continue;
        const Eigen::VectorXd v = eig.eigenvectors().col(i);
        const double overlap = std::abs(v.dot(moments.mean_p));
        result.worst_overlap = std::max(result.worst_overlap, overlap);
        if (overlap > tol) {
            result.pass = false;
            // Orient the witness toward positive mean: a free lunch portfolio.
            result.witness = v.dot(moments.mean_p) > 0 ? v : Eigen::VectorXd(-v);
        }
    }
    return result;
}

Eigen::VectorXd optimal_portfolio(const ReturnMoments& moments, double risk_scale,
                                  const SolveOptions& options) {
    moments.validate();
    if (!(risk_scale > 0.0)) throw_input("optimal_portfolio: risk_scale must be positive");
    SymmetricSolver solver(moments.cov_p, options, "V_p");
    return risk_scale * solver.solve(moments.mean_p);
}

double frontier_slope(const ReturnMoments& moments, const SolveOptions& options) {
    SymmetricSolver solver(moments.cov_p, options, "V_p");
    return std::sqrt(std::max(0.0, solver.solve(moments.mean_p).dot(moments.mean_p)));
}

HedgeResult hedge_weights(const ReturnMoments& moments, const SolveOptions& options) {
    moments.validate();
    SymmetricSolver solver(moments.cov_p, options, "V_p");
    HedgeResult result;
    result.beta = solver.solve(moments.cross_pa);
    result.residual_mean = moments.mean_a - solver.solve(moments.mean_p).dot(moments.cross_pa);
    result.residual_variance = moments.var_a - result.beta.dot(moments.cross_pa);
    if (result.residual_variance < -1e-10) {
        throw_numeric("hedge_weights: negative residual variance " +
                      std::to_string(result.residual_variance) + "; joint moments inconsistent");
    }
    return result;
}

SharpeDecomposition incremental_sharpe(const ReturnMoments& moments, const SolveOptions& options) {
    moments.validate();
    SymmetricSolver solver(moments.cov_p, options, "V_p");
    SharpeDecomposition d;
    d.base = solver.solve(moments.mean_p).dot(moments.mean_p);
    const HedgeResult hedge = hedge_weights(moments, options);
    if (hedge.residual_variance <= 0.0) {
        if (std::abs(hedge.residual_mean) > 1e-10) {
            throw_numeric("incremental_sharpe: perfectly replicated derivative with nonzero "
                          "residual mean " + std::to_string(hedge.residual_mean));
        }
        d.increment = 0.0;
        return d;
    }
    d.increment = hedge.residual_mean * hedge.residual_mean / hedge.residual_variance;
    return d;
}

TwoSectorHedge two_sector_hedge(const ReturnMoments& moments, const SolveOptions& options) {
    moments.validate();
    if (!moments.sector) throw_input("two_sector_hedge: second-sector moments missing");
    const SectorMoments& s = *moments.sector;

    SymmetricSolver vp(moments.cov_p, options, "V_p");
    const Eigen::VectorXd beta_single = vp.solve(moments.cross_pa);
    const Eigen::MatrixXd vp_inv_cpo = vp.solve(s.cross_po);
    const Eigen::MatrixXd schur = s.cov_o - s.cross_po.transpose() * vp_inv_cpo;
    const Eigen::VectorXd coa_adj = s.cross_oa - s.cross_po.transpose() * beta_single;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> schur_eig(schur, Eigen::EigenvaluesOnly);
    const double lmax = std::max(1e-300, std::abs(schur_eig.eigenvalues().cwiseAbs().maxCoeff()));
    if (schur_eig.eigenvalues().minCoeff() < lmax / options.condition_limit &&
        !options.allow_pseudo_inverse) {
        throw_numeric("two_sector_hedge: second sector is redundant with the first "
                      "(singular Schur complement)");
    }
    SolveOptions schur_options = options;
    SymmetricSolver schur_solver(schur, schur_options, "sector Schur complement");

    TwoSectorHedge result;
    result.beta_o = schur_solver.solve(coa_adj);
    result.beta_p = beta_single - vp_inv_cpo * result.beta_o;
    result.residual_variance =
        moments.var_a - beta_single.dot(moments.cross_pa) - result.beta_o.dot(coa_adj);
    return result;
}

} // namespace entropic
