// Acceptance gate: one PASS/FAIL line per criterion, details indented below it.
// Exit status is nonzero when any criterion fails.

#include <cstdlib>
#include <iostream>
#include <string>

#include "satsol/verify.hpp"

int main(int argc, char** argv) {
  satsol::VerifyOptions o;
  for (int i = 1; i < argc; ++i) o.only.push_back(std::atoi(argv[i]));
  int failed = 0;
  satsol::run_acceptance(o, [&](const satsol::CriterionResult& c) {
    std::cout << (c.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title << "\n";
    for (const auto& l : c.lines) std::cout << "    " << l << "\n";
    if (!c.error.empty()) std::cout << "    error: " << c.error << "\n";
    std::cout << std::flush;
    failed += !c.pass;
  });
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failed ? EXIT_FAILURE : EXIT_SUCCESS;
}
