#pragma once

#include <optional>
#include <string>

namespace entropic {

/// Contractual funding convention for the derivative's margin settlements.
enum class FundingKind { futures, cleared, collateralised, uncollateralised };

FundingKind funding_kind_from_string(const std::string& name);
std::string to_string(FundingKind kind);

struct FundingArrangement {
    FundingKind kind = FundingKind::collateralised;
    std::optional<double> rate; ///< clearing-house rate, cleared only
};

/// Net settlement amount over one period for the self-funded position.
///
/// futures:          da
/// cleared:          da - a r dt
/// collateralised:   da - (a/b) db
/// uncollateralised: da - (a/u) du
///
/// All four are the generic da - (a/b) db under the kind's implied funding
/// price b (unit, cash account, collateral, unsecured).
double settlement_increment(const FundingArrangement& arrangement, double a0, double a1,
                            double b0, double b1, double u0, double u1, double dt);

/// The funding price pair (b0, b1) implied by the arrangement for one
/// period: unit for futures, compounding cash account for cleared, the
/// given collateral path for collateralised, the unsecured path otherwise.
/// `t0` is the period start time, used by the cleared cash account
/// b = (1 + r dt)^(t/dt).
std::pair<double, double> implied_funding(const FundingArrangement& arrangement, double b0,
                                          double b1, double u0, double u1, double t0, double dt);

} // namespace entropic
