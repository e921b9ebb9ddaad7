// SPDX-License-Identifier: Apache-2.0
//
// razorq-goldens verify|regenerate --fixtures DIR

#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "razorq/goldens.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Verify or regenerate the checked-in fixtures"};
  app.require_subcommand(1);
  std::string dir = "fixtures";
  auto* verify = app.add_subcommand("verify", "Recompute every golden case and compare");
  verify->add_option("--fixtures", dir, "Fixtures directory")->capture_default_str();
  auto* regen = app.add_subcommand("regenerate", "Rewrite manifests and golden files");
  regen->add_option("--fixtures", dir, "Fixtures directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    if (regen->parsed()) {
      razorq::regenerate_goldens(dir);
      for (const auto& name : razorq::golden_case_names()) std::cout << "wrote " << name << "\n";
      return 0;
    }
    int failed = 0;
    for (const auto& r : razorq::verify_goldens(dir)) {
      std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "\n";
      for (const auto& m : r.mismatches) std::cout << "  " << m << "\n";
      failed += r.passed ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
