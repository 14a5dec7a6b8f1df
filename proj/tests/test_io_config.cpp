#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "xbarsim/checkpoint.hpp"
#include "xbarsim/config.hpp"
#include "xbarsim/dataset.hpp"
#include "xbarsim/io.hpp"

using namespace xbarsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("xbarsim_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("portable tensor files round-trip bit-exactly") {
  const fs::path dir = temp_dir("tensor_io");
  rng::Sequence rs(77);
  for (int trial = 0; trial < 8; ++trial) {
    Shape shape;
    const int rank = 1 + static_cast<int>(rs.below(4));
    for (int i = 0; i < rank; ++i) shape.push_back(1 + static_cast<std::int64_t>(rs.below(6)));
    Tensor t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rs.normal());
    const fs::path file = dir / ("t" + std::to_string(trial) + ".tnsr");
    write_tensor_file(file, t);
    Tensor back = read_float_tensor(file);
    REQUIRE(back.shape() == t.shape());
    for (std::int64_t i = 0; i < t.numel(); ++i) REQUIRE(back[i] == t[i]);
  }

  SECTION("uint8 payloads") {
    PortableTensor t;
    t.dtype = TensorDType::Uint8;
    t.shape = {5};
    t.u8 = {0, 1, 127, 200, 255};
    write_tensor_file(dir / "labels.tnsr", t);
    PortableTensor back = read_tensor_file(dir / "labels.tnsr");
    CHECK(back.dtype == TensorDType::Uint8);
    CHECK(back.u8 == t.u8);
  }
}

TEST_CASE("tensor file validation") {
  const fs::path dir = temp_dir("tensor_bad");
  Tensor t({2, 3});
  for (std::int64_t i = 0; i < 6; ++i) t[i] = static_cast<float>(i);
  const fs::path file = dir / "ok.tnsr";
  write_tensor_file(file, t);

  SECTION("truncated payload rejected") {
    const auto size = fs::file_size(file);
    fs::resize_file(file, size - 1);
    CHECK_THROWS_WITH(read_float_tensor(file), Catch::Matchers::ContainsSubstring("length"));
  }
  SECTION("trailing bytes rejected") {
    std::ofstream os(file, std::ios::binary | std::ios::app);
    os.put(0);
    os.close();
    CHECK_THROWS_AS(read_float_tensor(file), std::runtime_error);
  }
  SECTION("bad magic rejected") {
    std::ofstream os(dir / "bad.tnsr", std::ios::binary);
    os << "NOTATNSR00000000";
    os.close();
    CHECK_THROWS_WITH(read_float_tensor(dir / "bad.tnsr"),
                      Catch::Matchers::ContainsSubstring("magic"));
  }
  SECTION("missing file") { CHECK_THROWS_AS(read_float_tensor(dir / "nope.tnsr"), std::runtime_error); }
}

TEST_CASE("checkpoint round-trip preserves every parameter bit") {
  const fs::path dir = temp_dir("ckpt");
  Model model(smallconv_spec());
  model.init_params(123);
  model.bn_state(0).running_mean[3] = 0.75f;
  model.bn_state(1).gamma[7] = -2.5f;
  save_checkpoint(dir, model);

  Model back = load_checkpoint(dir);
  CHECK(back.weight_checksum() == model.weight_checksum());
  CHECK(back.bn_state(0).running_mean == model.bn_state(0).running_mean);
  CHECK(back.bn_state(1).gamma == model.bn_state(1).gamma);
  CHECK(back.bn_state(0).eps == model.bn_state(0).eps);
  CHECK(back.spec().num_classes == model.spec().num_classes);
}

TEST_CASE("corrupt checkpoint manifests name the problem") {
  const fs::path dir = temp_dir("ckpt_bad");
  Model model(smallconv_spec());
  model.init_params(5);
  save_checkpoint(dir, model);

  SECTION("invalid JSON") {
    std::ofstream os(dir / "manifest.json");
    os << "{ not json";
    os.close();
    CHECK_THROWS_WITH(load_checkpoint(dir), Catch::Matchers::ContainsSubstring("manifest"));
  }
  SECTION("missing format field") {
    std::ofstream os(dir / "manifest.json");
    os << R"({"network": {}, "bn": [], "params": []})";
    os.close();
    CHECK_THROWS_WITH(load_checkpoint(dir), Catch::Matchers::ContainsSubstring("format"));
  }
  SECTION("unknown manifest key") {
    std::ofstream os(dir / "manifest.json");
    os << R"({"format": "xbarsim-checkpoint-1", "network": {}, "bn": [], "params": [], "extra": 1})";
    os.close();
    CHECK_THROWS_WITH(load_checkpoint(dir), Catch::Matchers::ContainsSubstring("extra"));
  }
}

TEST_CASE("experiment config parsing") {
  SECTION("defaults") {
    ExperimentConfig c = experiment_from_json(json::object());
    CHECK(c.network.name == "smallconv");
    CHECK(c.device.name == "FeFET");
    CHECK(c.quant.weight_bits == 8);
    CHECK(c.xbar.rows == 64);
    CHECK(c.mode == TuneMode::None);
    CHECK(c.seeds == std::vector<std::uint64_t>{1});
  }
  SECTION("unknown keys rejected everywhere") {
    CHECK_THROWS_WITH(experiment_from_json(json{{"unknown_key", 1}}),
                      Catch::Matchers::ContainsSubstring("unknown_key"));
    CHECK_THROWS_WITH(experiment_from_json(json{{"noise", {{"read_nois", true}}}}),
                      Catch::Matchers::ContainsSubstring("read_nois"));
    CHECK_THROWS_WITH(experiment_from_json(json{{"quant", {{"weight_bit", 8}}}}),
                      Catch::Matchers::ContainsSubstring("weight_bit"));
  }
  SECTION("device presets, overrides and files") {
    ExperimentConfig c = experiment_from_json(json{{"device", "RRAM"}});
    CHECK(c.device.name == "RRAM");

    c = experiment_from_json(json{{"device", {{"name", "FeFET"}, {"sigma", 0.15}}}});
    CHECK(std::get<FractionalNoise>(c.device.read_noise).sigma == Catch::Approx(0.15));

    CHECK_THROWS_WITH(
        experiment_from_json(json{{"device", {{"name", "PCM-i"}, {"sigma", 0.15}}}}),
        Catch::Matchers::ContainsSubstring("fractional"));

    const fs::path dir = temp_dir("devjson");
    {
      std::ofstream os(dir / "dev.json");
      os << R"({"name": "custom", "bits": 4, "r_on_ohm": 100000.0, "on_off_ratio": 20.0,
                "nu": 0.02, "read_noise": {"type": "affine", "a": 0.01, "b": 0.2}})";
    }
    c = experiment_from_json(json{{"device", {{"file", (dir / "dev.json").string()}}}});
    CHECK(c.device.name == "custom");
    CHECK(c.device.g_max_us() == Catch::Approx(10.0));
    CHECK(std::get<AffineNoise>(c.device.read_noise).b == Catch::Approx(0.2));
  }
  SECTION("drift validation") {
    CHECK_THROWS_AS(experiment_from_json(json{{"noise", {{"drift", {{"T", 0.5}, {"T0", 1.0}}}}}}),
                    ConfigError);
    ExperimentConfig c =
        experiment_from_json(json{{"noise", {{"drift", {{"T", 1e5}}}}}});
    CHECK(c.noise.drift);
    CHECK(c.noise.drift_cfg.t_seconds == Catch::Approx(1e5));
    CHECK(c.noise.drift_cfg.t0_seconds == 1.0);
  }
  SECTION("empty seed list rejected") {
    CHECK_THROWS_WITH(experiment_from_json(json{{"seeds", json::array()}}),
                      Catch::Matchers::ContainsSubstring("seed"));
  }
  SECTION("sweep entries") {
    ExperimentConfig c = experiment_from_json(
        json{{"sweep", json::array({json{{"sigma", 0.05}}, json{{"T", 100.0}},
                                    json{{"parasitics", true}}})}});
    REQUIRE(c.sweep.size() == 3);
    CHECK(c.sweep[0].sigma == 0.05);
    CHECK(c.sweep[1].t_seconds == 100.0);
    CHECK(c.sweep[2].parasitics == true);
    CHECK_THROWS_WITH(
        experiment_from_json(json{{"sweep", json::array({json{{"sigm", 0.05}}})}}),
        Catch::Matchers::ContainsSubstring("sigm"));
  }
}

TEST_CASE("synthetic dataset is deterministic and well-formed") {
  SyntheticDatasetSpec spec;
  spec.train_per_class = 12;
  spec.test_per_class = 6;
  DatasetPair a = make_synthetic_dataset(spec);
  DatasetPair b = make_synthetic_dataset(spec);
  CHECK(a.train.images.vec() == b.train.images.vec());
  CHECK(a.train.labels == b.train.labels);
  CHECK(a.train.size() == 48);
  CHECK(a.test.size() == 24);
  CHECK(a.train.images.shape() == Shape{48, 1, 16, 16});

  std::vector<int> counts(4, 0);
  for (int l : a.train.labels) ++counts[static_cast<std::size_t>(l)];
  for (int c : counts) CHECK(c == 12);

  spec.seed = 8;
  DatasetPair c = make_synthetic_dataset(spec);
  CHECK(a.train.images.vec() != c.train.images.vec());

  SyntheticDatasetSpec bad;
  bad.classes = 1;
  CHECK_THROWS_AS(make_synthetic_dataset(bad), std::invalid_argument);
}
