#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace entropic {

/// Finite probability measure over labelled scenarios, with named
/// per-scenario observable columns attached.
///
/// Weights are validated on construction: nonnegative, summing to one
/// within 1e-12. Sums off by up to 1e-9 are renormalized; anything
/// worse is rejected as an input error.
class ScenarioMeasure {
public:
    ScenarioMeasure(std::vector<std::string> ids, Eigen::VectorXd weights,
                    std::map<std::string, Eigen::VectorXd> observables = {});

    /// Equal-weight measure with synthetic ids "s0", "s1", ...
    static ScenarioMeasure uniform(int n);

    int size() const { return static_cast<int>(weights_.size()); }
    const std::vector<std::string>& ids() const { return ids_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    const Eigen::VectorXd& observable(const std::string& name) const;
    bool has_observable(const std::string& name) const;
    const std::map<std::string, Eigen::VectorXd>& observables() const { return observables_; }

    /// Adds or replaces an observable column (one finite value per scenario).
    void set_observable(const std::string& name, Eigen::VectorXd values);

    /// Expectation of a per-scenario value vector under the measure.
    double expect(const Eigen::VectorXd& values) const;

    /// Measure with the same scenarios reweighted by `weights` (validated).
    ScenarioMeasure reweighted(Eigen::VectorXd weights) const;

private:
    std::vector<std::string> ids_;
    Eigen::VectorXd weights_;
    std::map<std::string, Eigen::VectorXd> observables_;
};

/// Relative entropy sum c_i log(c_i / r_i) with 0 log 0 = 0.
///
/// Candidate mass on a zero-reference scenario is an absolute-continuity
/// violation and returns +infinity rather than throwing; forecast and
/// empirical measures are allowed to be non-equivalent.
double kl_divergence(const Eigen::VectorXd& candidate, const Eigen::VectorXd& reference);

struct PriceFunctionalCheck {
    std::string name;
    double slack = 0.0; // >= 0 means the check holds with this margin
    bool pass = false;
};

struct PriceFunctionalReport {
    PriceFunctionalCheck linearity;
    PriceFunctionalCheck positivity;
    PriceFunctionalCheck cauchy_schwarz;
    bool all_pass() const { return linearity.pass && positivity.pass && cauchy_schwarz.pass; }
};

/// Checks the price-functional axioms on two observables:
/// linearity E[a+b] = E[a] + E[b], positivity (a >= 0 pointwise implies
/// E[a] >= 0, reported as vacuous when a is not pointwise nonnegative),
/// and (E[ab])^2 <= E[a^2] E[b^2].
PriceFunctionalReport price_functional_checks(const ScenarioMeasure& measure,
                                              const Eigen::VectorXd& a,
                                              const Eigen::VectorXd& b);

} // namespace entropic
