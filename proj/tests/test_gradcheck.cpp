// Runs every shared gradient case and requires the analytic/numeric agreement
// to stay under 1e-4 relative error.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grad_cases.hpp"

TEST_CASE("analytic gradients match central differences") {
  for (auto& c : gradcases::all_grad_cases()) {
    SUBCASE(c.name.c_str()) {
      std::string worst;
      const double err = c.run(&worst);
      CAPTURE(c.name);
      CAPTURE(worst);
      CHECK(err < 1e-4);
    }
  }
}
