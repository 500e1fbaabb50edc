// Two SIS fields, each with an endemic equilibrium, switched at rate 20:
// the linearized growth rate is negative, so the infection dies out.

#include "pdmp/lyapunov.hpp"
#include "pdmp/persistence.hpp"
#include "pdmp/scenarios.hpp"

#include <iostream>

int main() {
    const pdmp::Scenario s = pdmp::make_ainscosta();
    const pdmp::SwitchedSystem system = s.system();

    const pdmp::Trajectory path = pdmp::simulate(system, s.initial_states.front(), 0, 200.0, 7);
    const pdmp::ExtinctionFit fit = pdmp::extinction_rate(path, 0.5);
    std::cout << "jumps: " << path.jumps.size() << ", final |X| = " << path.state(path.size() - 1).norm()
              << ", slope of log|X| = " << fit.slope << '\n';

    const pdmp::LinearSwitchedSystem lin = s.linearization();
    const auto est = pdmp::estimate_lambda_lognorm(lin, 500.0, 50, 1.0, 7);
    std::cout << "lambda_1 ~ " << est.value << " +- " << est.std_error << '\n';

    const auto bounds = pdmp::analytic_bounds(lin);
    std::cout << "symmetric-part bounds: [" << bounds.symmetric_lower << ", " << bounds.symmetric_upper << "]\n";
    std::cout << "fast-switching limit: " << pdmp::averaged_limit(lin).lambda << '\n';
}
