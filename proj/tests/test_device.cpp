#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "xbarsim/device.hpp"
#include "xbarsim/rng.hpp"

using namespace xbarsim;

TEST_CASE("builtin device table") {
  const auto devices = builtin_devices();
  REQUIRE(devices.size() == 4);
  for (const auto& d : devices) d.validate();

  const DeviceSpec& fefet = devices[0];
  CHECK(fefet.name == "FeFET");
  CHECK(fefet.bits == 4);
  CHECK(fefet.nu == Catch::Approx(0.1));
  CHECK(fefet.g_max_us() == Catch::Approx(4.50).margin(1e-3));
  CHECK(fefet.g_min_us() == Catch::Approx(0.045).margin(1e-4));

  const DeviceSpec& pcm1 = devices[1];
  CHECK(pcm1.name == "PCM-i");
  CHECK(pcm1.on_off_ratio == 40.0);
  CHECK(pcm1.nu == Catch::Approx(0.04));
  CHECK(pcm1.g_max_us() == Catch::Approx(4.0));

  const DeviceSpec& pcm2 = devices[2];
  CHECK(pcm2.name == "PCM-ii");
  CHECK(pcm2.g_max_us() == Catch::Approx(8.0));
  CHECK(pcm2.g_min_us() == Catch::Approx(0.1));

  const DeviceSpec& rram = devices[3];
  CHECK(rram.name == "RRAM");
  CHECK(rram.g_max_us() == Catch::Approx(20.0));
  CHECK(rram.g_min_us() == Catch::Approx(2.0));
  CHECK(std::get<FractionalNoise>(rram.read_noise).sigma == Catch::Approx(0.1));

  CHECK_THROWS_AS(find_device("nonexistent"), std::invalid_argument);
}

TEST_CASE("quantize_layer") {
  QuantSpec q;
  SECTION("half-scale weight rounds away from zero") {
    Tensor w({2, 1, 1, 1}, {0.25f, 0.5f});
    QuantizedLayer ql = quantize_layer(w, q);
    CHECK(ql.delta == Catch::Approx(0.5 / 127.0).epsilon(1e-12));
    CHECK(ql.levels[0] == 64);  // 0.25/delta = 63.5
    CHECK(ql.levels[1] == 127);
  }
  SECTION("range endpoints hit the extreme levels") {
    Tensor w({2, 1, 1, 1}, {-0.8f, 0.8f});
    QuantizedLayer ql = quantize_layer(w, q);
    CHECK(ql.levels[0] == -127);
    CHECK(ql.levels[1] == 127);
  }
  SECTION("all-zero layer") {
    Tensor w({3, 1, 1, 1});
    QuantizedLayer ql = quantize_layer(w, q);
    CHECK(ql.delta == 1.0);
    Tensor back = dequantize_layer(ql);
    for (std::int64_t i = 0; i < back.numel(); ++i) CHECK(back[i] == 0.0f);
  }
  SECTION("non-finite weights rejected") {
    Tensor w({1, 1, 1, 1}, {std::numeric_limits<float>::infinity()});
    CHECK_THROWS_AS(quantize_layer(w, q), std::invalid_argument);
  }
  SECTION("dequantization error bounded by delta/2") {
    rng::Sequence rs(5);
    Tensor w({16, 4, 3, 3});
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(rs.normal() * 0.2);
    QuantizedLayer ql = quantize_layer(w, q);
    Tensor back = dequantize_layer(ql);
    for (std::int64_t i = 0; i < w.numel(); ++i)
      CHECK(std::abs(static_cast<double>(back[i]) - static_cast<double>(w[i])) <=
            ql.delta / 2.0 + 1e-12);
  }
}

TEST_CASE("slice encoding") {
  QuantSpec q;
  SECTION("hand cases") {
    CHECK(encode_slices(64, q) == std::vector<std::int32_t>{12, 0});
    CHECK(encode_slices(-128, q) == std::vector<std::int32_t>{0, 0});
    CHECK(encode_slices(127, q) == std::vector<std::int32_t>{15, 15});
  }
  SECTION("roundtrip over the full signed range") {
    for (std::int32_t level = -128; level <= 127; ++level)
      CHECK(decode_slices(encode_slices(level, q), q) == level);
  }
  SECTION("out-of-range rejected") {
    CHECK_THROWS_AS(encode_slices(128, q), std::invalid_argument);
    CHECK_THROWS_AS(encode_slices(-129, q), std::invalid_argument);
  }
  SECTION("single-slice config") {
    QuantSpec q4{4, 4, 8};
    CHECK(encode_slices(7, q4) == std::vector<std::int32_t>{15});
    CHECK(encode_slices(-8, q4) == std::vector<std::int32_t>{0});
  }
  SECTION("indivisible widths rejected") {
    QuantSpec bad{8, 3, 8};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}

TEST_CASE("level to conductance map") {
  const DeviceSpec rram = find_device("RRAM");
  CHECK(level_to_conductance(0, rram) == Catch::Approx(rram.g_min_us()));
  CHECK(level_to_conductance(15, rram) == Catch::Approx(rram.g_max_us()));
  CHECK(level_to_conductance(5, rram) == Catch::Approx(8.0));
  CHECK_THROWS_AS(level_to_conductance(16, rram), std::invalid_argument);
  CHECK_THROWS_AS(level_to_conductance(-1, rram), std::invalid_argument);

  SECTION("exact inverse, strictly increasing") {
    double prev = -1.0;
    for (std::int32_t l = 0; l <= 15; ++l) {
      const double g = level_to_conductance(l, rram);
      CHECK(g > prev);
      prev = g;
      CHECK(conductance_to_level(g, rram) == Catch::Approx(static_cast<double>(l)).margin(1e-12));
    }
    CHECK(conductance_to_level(rram.g_min_us(), rram) == Catch::Approx(0.0).margin(1e-15));
    CHECK(conductance_to_level(8.0, rram) == Catch::Approx(5.0).margin(1e-12));
  }
  SECTION("continuous outside the programmable window") {
    CHECK(conductance_to_level(0.0, rram) < 0.0);
    CHECK_THROWS_AS(conductance_to_level(std::numeric_limits<double>::quiet_NaN(), rram),
                    std::invalid_argument);
  }
}

TEST_CASE("read noise sigma models") {
  const DeviceSpec pcm = find_device("PCM-i");
  CHECK(read_noise_sigma(10.0, pcm) == Catch::Approx(0.43));

  const DeviceSpec fefet = find_device("FeFET");
  CHECK(read_noise_sigma(1.0, fefet) == Catch::Approx(0.22275).margin(1e-4));
  CHECK(read_noise_sigma(4.0, fefet) == read_noise_sigma(0.1, fefet));  // G-independent

  DeviceSpec quiet = fefet;
  quiet.read_noise = FractionalNoise{0.0};
  CHECK(read_noise_sigma(3.0, quiet) == 0.0);
}

TEST_CASE("wider on/off ratio widens the level step") {
  DeviceSpec narrow = find_device("RRAM");
  DeviceSpec wide = narrow;
  wide.on_off_ratio = 40.0;
  CHECK(wide.level_step_us() > narrow.level_step_us());
  // same fractional sigma, so relative per-level noise shrinks
  const double rel_narrow = read_noise_sigma(5.0, narrow) / narrow.level_step_us();
  const double rel_wide = read_noise_sigma(5.0, wide) / wide.level_step_us();
  CHECK(rel_wide < rel_narrow);
}
