// Release gate: runs every acceptance check and fails if any of them fails.

#include "sgobs/acceptance.hpp"

#include <iostream>

int main() {
  const auto results = sgobs::run_acceptance(std::cout);
  const bool ok = sgobs::all_passed(results);
  std::cout << (ok ? "all criteria passed" : "FAILURES present") << '\n';
  return ok ? 0 : 1;
}
