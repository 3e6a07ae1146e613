#include "entropic/scenario.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "entropic/errors.hpp"

namespace entropic {

namespace {

constexpr double kSumTolerance = 1e-12;
constexpr double kRenormTolerance = 1e-9;

void check_finite(const Eigen::VectorXd& values, const std::string& what) {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw_input(what + " has non-finite value at scenario index " + std::to_string(i));
        }
    }
}

} // namespace

ScenarioMeasure::ScenarioMeasure(std::vector<std::string> ids, Eigen::VectorXd weights,
                                 std::map<std::string, Eigen::VectorXd> observables)
    : ids_(std::move(ids)), weights_(std::move(weights)), observables_(std::move(observables)) {
    if (ids_.empty()) throw_input("ScenarioMeasure: no scenarios");
    if (static_cast<Eigen::Index>(ids_.size()) != weights_.size()) {
        throw_input("ScenarioMeasure: weights size " + std::to_string(weights_.size()) +
                    " does not match " + std::to_string(ids_.size()) + " scenario ids");
    }
    std::set<std::string> seen;
    for (const auto& id : ids_) {
        if (!seen.insert(id).second) throw_input("ScenarioMeasure: duplicate scenario id '" + id + "'");
    }
    check_finite(weights_, "weights");
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
        if (weights_[i] < 0.0) {
            throw_input("ScenarioMeasure: negative weight for scenario '" + ids_[i] + "'");
        }
    }
    const double sum = weights_.sum();
    if (std::abs(sum - 1.0) > kRenormTolerance) {
        throw_input("ScenarioMeasure: weights sum to " + std::to_string(sum) +
                    ", outside the renormalization tolerance 1e-9");
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        weights_ /= sum;
    }
    for (auto& [name, column] : observables_) {
        if (column.size() != weights_.size()) {
            throw_input("observable '" + name + "' has " + std::to_string(column.size()) +
                        " values for " + std::to_string(weights_.size()) + " scenarios");
        }
        check_finite(column, "observable '" + name + "'");
    }
}

ScenarioMeasure ScenarioMeasure::uniform(int n) {
    if (n <= 0) throw_input("ScenarioMeasure::uniform: n must be positive");
    std::vector<std::string> ids;
    ids.reserve(n);
    for (int i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
    return ScenarioMeasure(std::move(ids), Eigen::VectorXd::Constant(n, 1.0 / n));
}

const Eigen::VectorXd& ScenarioMeasure::observable(const std::string& name) const {
    auto it = observables_.find(name);
    if (it == observables_.end()) throw_input("unknown observable '" + name + "'");
    return it->second;
}

bool ScenarioMeasure::has_observable(const std::string& name) const {
    return observables_.count(name) > 0;
}

void ScenarioMeasure::set_observable(const std::string& name, Eigen::VectorXd values) {
    if (values.size() != weights_.size()) {
        throw_input("observable '" + name + "' has wrong length");
    }
    check_finite(values, "observable '" + name + "'");
    observables_[name] = std::move(values);
}

double ScenarioMeasure::expect(const Eigen::VectorXd& values) const {
    if (values.size() != weights_.size()) throw_input("expect: value vector has wrong length");
    return weights_.dot(values);
}

ScenarioMeasure ScenarioMeasure::reweighted(Eigen::VectorXd weights) const {
    return ScenarioMeasure(ids_, std::move(weights), observables_);
}

double kl_divergence(const Eigen::VectorXd& candidate, const Eigen::VectorXd& reference) {
    if (candidate.size() != reference.size()) {
        throw_input("kl_divergence: weight vectors have different lengths");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < candidate.size(); ++i) {
        const double c = candidate[i];
        const double r = reference[i];
        if (c < 0.0 || r < 0.0) throw_input("kl_divergence: negative weight");
        if (c == 0.0) continue;
        if (r == 0.0) return std::numeric_limits<double>::infinity();
        sum += c * std::log(c / r);
    }
    // Rounding can push tiny negative; divergence is nonnegative by Gibbs.
    return std::max(sum, 0.0);
}

PriceFunctionalReport price_functional_checks(const ScenarioMeasure& measure,
                                              const Eigen::VectorXd& a,
                                              const Eigen::VectorXd& b) {
    constexpr double kSlack = 1e-12;
    PriceFunctionalReport report;

    const double ea = measure.expect(a);
    const double eb = measure.expect(b);
    const double eab_sum = measure.expect((a + b).eval());
    report.linearity.name = "linearity";
    report.linearity.slack = -std::abs(eab_sum - (ea + eb));
    report.linearity.pass = report.linearity.slack >= -kSlack;

    report.positivity.name = "positivity";
    if (a.minCoeff() >= 0.0) {
        report.positivity.slack = ea;
        report.positivity.pass = ea >= -kSlack;
    } else {
        // Hypothesis empty: the implication holds vacuously.
        report.positivity.slack = 0.0;
        report.positivity.pass = true;
    }

    const double e_ab = measure.expect(a.cwiseProduct(b).eval());
    const double e_a2 = measure.expect(a.cwiseProduct(a).eval());
    const double e_b2 = measure.expect(b.cwiseProduct(b).eval());
    report.cauchy_schwarz.name = "cauchy_schwarz";
    report.cauchy_schwarz.slack = e_a2 * e_b2 - e_ab * e_ab;
    const double scale = std::max(1.0, e_a2 * e_b2);
    report.cauchy_schwarz.pass = report.cauchy_schwarz.slack >= -kSlack * scale;

    return report;
}

} // namespace entropic
