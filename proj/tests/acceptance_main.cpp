// Runs the release criteria; one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "cnca/verify.hpp"

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

int main(int argc, char** argv) {
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string only;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--jobs" && i + 1 < argc) jobs = std::atoi(argv[++i]);
        else if (arg == "--only" && i + 1 < argc) only = argv[++i];
    }
    std::vector<cnca::Check> checks;
    for (auto& c : cnca::acceptance_checks())
        if (only.empty() || c.name.find(only) != std::string::npos) checks.push_back(std::move(c));
    auto results = cnca::run_checks(checks, jobs, &std::cout);
    int failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::cout << (failed ? "FAILED " : "OK ") << results.size() - failed << "/" << results.size()
              << " acceptance criteria passed\n";
    return failed ? 1 : 0;
}
