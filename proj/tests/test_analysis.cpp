#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "xbarsim/analysis.hpp"
#include "xbarsim/rng.hpp"

using namespace xbarsim;

namespace {

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  rng::Sequence rs(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rs.normal());
  return v;
}

}  // namespace

TEST_CASE("pca2 hand cases") {
  SECTION("identity cloud is purely first-component") {
    const auto x = random_values(500, 1);
    PCAResult r = pca2(std::span<const float>(x), std::span<const float>(x));
    CHECK(r.pc1 == Catch::Approx(1.0).margin(1e-12));
    CHECK(r.pc2 == Catch::Approx(0.0).margin(1e-12));
    CHECK(r.pc1 + r.pc2 == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("four-point cross splits 0.8 / 0.2") {
    const std::vector<float> x{1.0f, -1.0f, 0.0f, 0.0f};
    const std::vector<float> y{0.0f, 0.0f, 0.5f, -0.5f};
    PCAResult r = pca2(std::span<const float>(x), std::span<const float>(y));
    CHECK(r.pc1 == Catch::Approx(0.8).margin(1e-12));
    CHECK(r.pc2 == Catch::Approx(0.2).margin(1e-12));
    CHECK(r.eig1 >= r.eig2);
    CHECK(r.n == 4);
  }
  SECTION("any collinear scaling has zero second component") {
    const auto x = random_values(300, 2);
    std::vector<float> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = -3.5f * x[i];
    PCAResult r = pca2(std::span<const float>(x), std::span<const float>(y));
    CHECK(r.pc2 == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("pca2 invariances") {
  const auto x = random_values(400, 3);
  auto y = random_values(400, 4);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + 0.1f * y[i];
  const PCAResult base = pca2(std::span<const float>(x), std::span<const float>(y));
  CHECK(base.pc2 > 0.0);

  SECTION("swapping the coordinates") {
    PCAResult sw = pca2(std::span<const float>(y), std::span<const float>(x));
    CHECK(sw.pc2 == Catch::Approx(base.pc2).margin(1e-12));
  }
  SECTION("common scaling of both axes") {
    std::vector<float> xs(x.size()), ys(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xs[i] = 10.0f * x[i];
      ys[i] = 10.0f * y[i];
    }
    PCAResult sc = pca2(std::span<const float>(xs), std::span<const float>(ys));
    CHECK(sc.pc2 == Catch::Approx(base.pc2).margin(1e-12));
  }
}

TEST_CASE("pca2 degenerate input") {
  const std::vector<float> constant(10, 2.0f);
  CHECK_THROWS_AS(pca2(std::span<const float>(constant), std::span<const float>(constant)),
                  std::invalid_argument);
  const std::vector<float> one{1.0f};
  CHECK_THROWS_AS(pca2(std::span<const float>(one), std::span<const float>(one)),
                  std::invalid_argument);
  const std::vector<float> two{1.0f, 2.0f};
  CHECK_THROWS_AS(pca2(std::span<const float>(one), std::span<const float>(two)),
                  std::invalid_argument);
}

TEST_CASE("pc2 projection") {
  CHECK(pc2_projected(0.37, 1.0, 1.0, 0.1) == Catch::Approx(0.37));
  CHECK(pc2_projected(1e-3, 1e10, 1.0, 0.1) == Catch::Approx(1e-2).epsilon(1e-9));
  CHECK(pc2_projected(0.5, 1e8, 1.0, 0.0) == Catch::Approx(0.5));
}

TEST_CASE("dist_stats") {
  SECTION("constant tensor") {
    DistStats s = dist_stats(Tensor::full({5, 5}, 3.25f), 8);
    CHECK(s.min == 3.25);
    CHECK(s.max == 3.25);
    CHECK(s.std == 0.0);
    CHECK(s.counts[0] == 25);
    std::int64_t total = 0;
    for (auto c : s.counts) total += c;
    CHECK(total == s.n);
  }
  SECTION("uniform grid of 101 values over ten bins") {
    Tensor t({101});
    for (int i = 0; i <= 100; ++i) t[i] = -1.0f + 0.02f * static_cast<float>(i);
    DistStats s = dist_stats(t, 10);
    CHECK(s.min == Catch::Approx(-1.0));
    CHECK(s.max == Catch::Approx(1.0));
    for (int b = 0; b < 9; ++b) CHECK(s.counts[static_cast<std::size_t>(b)] == 10);
    CHECK(s.counts[9] == 11);  // the closed right edge collects the max
  }
  SECTION("moments") {
    Tensor t({4}, {1.0f, 2.0f, 3.0f, 4.0f});
    DistStats s = dist_stats(t, 2);
    CHECK(s.mean == Catch::Approx(2.5));
    CHECK(s.std == Catch::Approx(std::sqrt(1.25)));
    CHECK(s.min <= s.mean);
    CHECK(s.mean <= s.max);
  }
  SECTION("empty rejected") { CHECK_THROWS_AS(dist_stats(Tensor(), 4), std::invalid_argument); }
}
