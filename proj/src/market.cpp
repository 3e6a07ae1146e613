#include "entropic/market.hpp"

#include <cmath>
#include <string>

#include "entropic/errors.hpp"

namespace entropic {

namespace {

void require_positive(double value, const std::string& what, int scenario) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw_input(what + " must be strictly positive and finite in scenario " +
                    std::to_string(scenario) + " (got " + std::to_string(value) + ")");
    }
}

} // namespace

MarketSlice MarketSlice::unit_funding(Eigen::VectorXd p0, Eigen::MatrixXd p1) {
    MarketSlice slice;
    const int n_scen = static_cast<int>(p1.rows());
    const int n_assets = static_cast<int>(p0.size());
    slice.p0 = std::move(p0);
    slice.p1 = std::move(p1);
    slice.q0 = Eigen::VectorXd::Ones(n_assets);
    slice.q1 = Eigen::MatrixXd::Ones(n_scen, n_assets);
    slice.u0 = 1.0;
    slice.u1 = Eigen::VectorXd::Ones(n_scen);
    slice.b0 = 1.0;
    slice.b1 = Eigen::VectorXd::Ones(n_scen);
    slice.validate();
    return slice;
}

void MarketSlice::validate() const {
    const int n_assets = assets();
    const int n_scen = scenarios();
    if (n_assets == 0) throw_input("MarketSlice: no underlying assets");
    if (n_scen == 0) throw_input("MarketSlice: no scenarios");
    if (q0.size() != n_assets) throw_input("MarketSlice: q0 and p0 dimensions differ");
    if (p1.cols() != n_assets || q1.rows() != n_scen || q1.cols() != n_assets) {
        throw_input("MarketSlice: p1/q1 dimensions inconsistent with p0/q0");
    }
    if (u1.size() != n_scen || b1.size() != n_scen) {
        throw_input("MarketSlice: u1/b1 must have one entry per scenario");
    }
    if (!(u0 > 0.0)) throw_input("MarketSlice: u0 must be strictly positive");
    if (!(b0 > 0.0)) throw_input("MarketSlice: b0 must be strictly positive");
    for (int a = 0; a < n_assets; ++a) {
        if (!(q0[a] > 0.0)) {
            throw_input("MarketSlice: q0[" + std::to_string(a) + "] must be strictly positive");
        }
    }
    for (int i = 0; i < n_scen; ++i) {
        require_positive(u1[i], "u1", i);
        require_positive(b1[i], "b1", i);
        for (int a = 0; a < n_assets; ++a) {
            require_positive(q1(i, a), "q1[" + std::to_string(a) + "]", i);
            if (!std::isfinite(p1(i, a))) {
                throw_input("MarketSlice: p1 non-finite in scenario " + std::to_string(i));
            }
        }
    }
    if (w1 && w1->size() != n_scen) throw_input("MarketSlice: w1 must have one entry per scenario");
    if (!(funding_ratio > 0.0)) throw_input("MarketSlice: funding ratio must be strictly positive");
}

Eigen::MatrixXd normalized_return(const MarketSlice& slice) {
    slice.validate();
    const int n_scen = slice.scenarios();
    const int n_assets = slice.assets();
    Eigen::MatrixXd r(n_scen, n_assets);
    for (int i = 0; i < n_scen; ++i) {
        for (int a = 0; a < n_assets; ++a) {
            const double ratio_end = slice.p1(i, a) / slice.q1(i, a);
            const double ratio_start = slice.p0[a] / slice.q0[a];
            r(i, a) = (slice.q1(i, a) / slice.u1[i]) * (ratio_end - ratio_start);
        }
    }
    return r;
}

Eigen::MatrixXd normalized_return_difference_form(const MarketSlice& slice) {
    slice.validate();
    const int n_scen = slice.scenarios();
    const int n_assets = slice.assets();
    Eigen::MatrixXd r(n_scen, n_assets);
    for (int i = 0; i < n_scen; ++i) {
        for (int a = 0; a < n_assets; ++a) {
            const double dp = slice.p1(i, a) - slice.p0[a];
            const double dq = slice.q1(i, a) - slice.q0[a];
            r(i, a) = (dp - (slice.p0[a] / slice.q0[a]) * dq) / slice.u1[i];
        }
    }
    return r;
}

Eigen::VectorXd derivative_return(const MarketSlice& slice, double a0,
                                  const Eigen::VectorXd& a1) {
    slice.validate();
    const int n_scen = slice.scenarios();
    if (a1.size() != n_scen) throw_input("derivative_return: a1 must have one value per scenario");
    Eigen::VectorXd r(n_scen);
    for (int i = 0; i < n_scen; ++i) {
        r[i] = (slice.b1[i] / slice.u1[i]) * (a1[i] / slice.b1[i] - a0 / slice.b0);
    }
    return r;
}

} // namespace entropic
