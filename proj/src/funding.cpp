#include "entropic/funding.hpp"

#include <cmath>

#include "entropic/errors.hpp"

namespace entropic {

FundingKind funding_kind_from_string(const std::string& name) {
    if (name == "futures") return FundingKind::futures;
    if (name == "cleared") return FundingKind::cleared;
    if (name == "collateralised") return FundingKind::collateralised;
    if (name == "uncollateralised") return FundingKind::uncollateralised;
    throw_input("unknown funding arrangement '" + name + "'");
}

std::string to_string(FundingKind kind) {
    switch (kind) {
        case FundingKind::futures: return "futures";
        case FundingKind::cleared: return "cleared";
        case FundingKind::collateralised: return "collateralised";
        case FundingKind::uncollateralised: return "uncollateralised";
    }
    throw_internal("unhandled funding kind");
}

std::pair<double, double> implied_funding(const FundingArrangement& arrangement, double b0,
                                          double b1, double u0, double u1, double t0, double dt) {
    switch (arrangement.kind) {
        case FundingKind::futures:
            return {1.0, 1.0};
        case FundingKind::cleared: {
            if (!arrangement.rate) {
                throw_input("cleared arrangement requires a clearing rate");
            }
            if (!(dt > 0.0)) throw_input("cleared arrangement requires dt > 0");
            // Cash account (1 + r dt)^(t/dt), compounded per settlement period.
            const double start = std::pow(1.0 + *arrangement.rate * dt, t0 / dt);
            return {start, start * (1.0 + *arrangement.rate * dt)};
        }
        case FundingKind::collateralised:
            if (!(b0 > 0.0) || !(b1 > 0.0)) {
                throw_input("collateralised arrangement requires a strictly positive "
                            "collateral price path");
            }
            return {b0, b1};
        case FundingKind::uncollateralised:
            return {u0, u1};
    }
    throw_internal("unhandled funding kind");
}

double settlement_increment(const FundingArrangement& arrangement, double a0, double a1,
                            double b0, double b1, double u0, double u1, double dt) {
    const auto [f0, f1] = implied_funding(arrangement, b0, b1, u0, u1, 0.0, dt);
    return (a1 - a0) - (a0 / f0) * (f1 - f0);
}

} // namespace entropic
