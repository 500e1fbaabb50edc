// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion failed. Artifacts go to the directory given as
// the first argument (default: acceptance_out).

#include "pdmp/acceptance.hpp"

#include <iostream>

int main(int argc, char** argv) {
    const std::filesystem::path out = argc > 1 ? argv[1] : "acceptance_out";
    const auto results = pdmp::verify_all(out, &std::cout);
    int failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
