#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "smcnet/gradcheck.hpp"

using namespace smcnet;

TEST_CASE("relative error metric") {
  const std::vector<double> a{1.0, 2.0}, b{1.0, 2.0002}, z{0.0, 0.0};
  CHECK(relative_error(a, a) == 0.0);
  CHECK(relative_error(a, b) == doctest::Approx(0.0002 / 2.0002));
  CHECK(relative_error(z, z) == 0.0);
  CHECK(relative_error(z, std::vector<double>{1e-10, 0.0}, 1e-5) == doctest::Approx(1e-5));
}

TEST_CASE("numeric gradient of a quadratic") {
  std::vector<double> x{1.0, -2.0, 0.5};
  auto loss = [&] { return x[0] * x[0] + 3 * x[1] * x[1] - x[2]; };
  const auto g = numeric_gradient(loss, x, 1e-6);
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(-12.0));
  CHECK(g[2] == doctest::Approx(-1.0));
  CHECK(x == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("every layer passes finite differences over five seeds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto results = run_gradcheck_suite(seed);
    std::set<std::string> layers;
    for (const auto& r : results) {
      CAPTURE(seed);
      CAPTURE(r.layer);
      CAPTURE(r.tensor);
      CHECK(r.passed);
      CHECK(r.max_rel_error < 1e-4);
      layers.insert(r.layer);
    }
    CHECK(layers.size() >= 8);
  }
}

TEST_CASE("a corrupted conv backward is caught") {
  GradCheckOptions opts;
  opts.corrupt_conv_backward = true;
  bool any_failed = false;
  for (const auto& r : run_gradcheck_suite(0, opts)) any_failed |= !r.passed;
  CHECK(any_failed);
}
