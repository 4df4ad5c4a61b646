#pragma once

#include <string>
#include <vector>

namespace gcal::oracle {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Gradient, 2-approximation and sampler oracle suites at a small size.
std::vector<SuiteResult> run_verify_suites();

}  // namespace gcal::oracle
