// Standalone golden-vector check, also compiled with a second toolchain.
//
//   golden_check <golden-dir>

#include <iostream>

#include "golden.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: golden_check <golden-dir>\n";
    return 2;
  }
  bool ok = true;
  try {
    for (const auto& c : ntc::testing::golden_cases()) {
      const auto o = ntc::testing::check_golden(argv[1], c);
      const bool pass = o.encode_matches && o.decode_matches && o.encode_repeatable;
      std::cout << (pass ? "ok   " : "FAIL ") << o.detail << '\n';
      ok = ok && pass;
    }
  } catch (const std::exception& e) {
    std::cout << "FAIL " << e.what() << '\n';
    return 1;
  }
  return ok ? 0 : 1;
}
