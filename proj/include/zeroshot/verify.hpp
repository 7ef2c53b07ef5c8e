#pragma once

#include "zeroshot/mdp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace zsrl {

/// Property suites shared by the CLI `verify` command and the acceptance run.
struct SuiteOptions {
    std::optional<FiniteMdp> mdp;  // replaces the suite's own instances where that makes sense
    std::string mdp_id = "random";
    int seeds = 0;                 // instance count; 0 = suite default
};

struct SuiteResult {
    std::string suite;
    bool pass = true;
    std::string summary;                // one line of headline numbers
    std::vector<std::string> failures;  // first few violations
    std::string csv;                    // per-instance rows
    double seconds = 0.0;
    int violations = 0;

    void expect(bool ok, const std::string& what);
};

const std::vector<std::string>& suite_names();
SuiteResult run_suite(const std::string& name, const SuiteOptions& opt = {});

}  // namespace zsrl
