// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "criteria.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  const fs::path scratch =
      argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "siamsa_acceptance";
  const auto results = siamsa::acceptance::run_all(scratch);
  int failed = 0;
  for (const auto& r : results) {
    std::cout << siamsa::acceptance::format_result(r) << "\n";
    failed += !r.passed;
  }
  std::cout << (failed == 0 ? "all " : "") << results.size() - static_cast<std::size_t>(failed)
            << "/" << results.size() << " criteria passed\n";
  fs::remove_all(scratch);
  return failed == 0 ? 0 : 1;
}
