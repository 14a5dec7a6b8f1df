#include <catch2/catch_amalgamated.hpp>

#include "xbarsim/cost.hpp"
#include "xbarsim/rng.hpp"

using namespace xbarsim;

TEST_CASE("symbolic architecture parameter counts") {
  const ArchSummary vgg = vgg16_cifar10_summary();
  const std::int64_t vgg_params = vgg.total_weight_params();
  CHECK(vgg_params >= 14'000'000);
  CHECK(vgg_params <= 16'000'000);

  const ArchSummary rn = resnet18_tinyimagenet_summary();
  const std::int64_t rn_params = rn.total_weight_params();
  CHECK(rn_params >= 10'500'000);
  CHECK(rn_params <= 12'000'000);

  CHECK(vgg.total_bn_params() == 2 * (64 + 64 + 128 + 128 + 3 * 256 + 6 * 512));
}

TEST_CASE("memory savings hit the reference points") {
  CostModelParams p;
  const CostReport vgg = memory_savings(vgg16_cifar10_summary(), p);
  CHECK(vgg.mem_savings_pct == Catch::Approx(95.0).margin(3.0));

  const CostReport rn = memory_savings(resnet18_tinyimagenet_summary(), p);
  CHECK(rn.mem_savings_pct == Catch::Approx(52.0).margin(5.0));

  CHECK(vgg.bnonly_mem_bytes <= vgg.baseline_mem_bytes);
  CHECK(rn.bnonly_mem_bytes <= rn.baseline_mem_bytes);
  CHECK(vgg.mem_savings_pct ==
        Catch::Approx(100.0 * (1.0 - vgg.bnonly_mem_bytes / vgg.baseline_mem_bytes)));
}

TEST_CASE("architecture with no trainable weights saves nothing") {
  ArchSummary bn_only;
  bn_only.name = "bn_only";
  LayerCostEntry e;
  e.name = "bn";
  e.bn_params = 32;
  e.act_elems = 1024;
  bn_only.layers.push_back(e);
  CostModelParams p;
  const CostReport r = memory_savings(bn_only, p);
  CHECK(r.mem_savings_pct == Catch::Approx(0.0));
  const CostReport en = energy_savings(bn_only, p, 1, 100);
  CHECK(en.energy_savings_pct == Catch::Approx(0.0));
}

TEST_CASE("energy model properties") {
  const ArchSummary vgg = vgg16_cifar10_summary();
  CostModelParams p;

  SECTION("all dropped terms zeroed gives zero savings") {
    CostModelParams z = p;
    z.e_write_j = 0.0;
    z.e_mac_bwd_j = 0.0;
    const CostReport r = energy_savings(vgg, z, 1, 1000);
    CHECK(r.energy_savings_pct == Catch::Approx(0.0));
  }
  SECTION("write energy only shows up in the baseline") {
    const CostReport base = energy_savings(vgg, p, 1, 1000);
    CostModelParams doubled = p;
    doubled.e_write_j *= 2.0;
    const CostReport more = energy_savings(vgg, doubled, 1, 1000);
    CHECK(more.energy_savings_pct > base.energy_savings_pct);
    CHECK(more.bnonly_energy_j == Catch::Approx(base.bnonly_energy_j));
  }
  SECTION("BN-only never costs more") {
    rng::Sequence rs(31);
    for (int trial = 0; trial < 20; ++trial) {
      CostModelParams rp;
      rp.e_write_j = rs.uniform() * 1e-9;
      rp.e_mac_fwd_j = rs.uniform() * 1e-12;
      rp.e_mac_bwd_j = rs.uniform() * 1e-12;
      rp.devices_per_weight = 1 + static_cast<int>(rs.below(4));
      const CostReport r = energy_savings(vgg, rp, 1, 50);
      CHECK(r.bnonly_energy_j <= r.baseline_energy_j);
    }
  }
  SECTION("memory percentages ignore energy constants and vice versa") {
    CostModelParams a = p, b = p;
    b.e_write_j *= 100.0;
    b.e_mac_fwd_j *= 3.0;
    CHECK(memory_savings(vgg, a).mem_savings_pct == memory_savings(vgg, b).mem_savings_pct);
    CostModelParams c = p;
    c.bytes_per_act = 4.0;
    c.bytes_per_weight_grad = 2.0;
    CHECK(energy_savings(vgg, p, 2, 100).energy_savings_pct ==
          energy_savings(vgg, c, 2, 100).energy_savings_pct);
  }
}

TEST_CASE("arch_from_network matches the hand summary for a known layout") {
  const ArchSummary a = arch_from_network(smallconv_spec());
  // conv 16x1x3x3 + conv 32x16x3x3 + fc (512+1)x4
  CHECK(a.total_weight_params() == 144 + 4608 + 4 * 512 + 4);
  CHECK(a.total_bn_params() == 2 * 16 + 2 * 32);
  // conv1/bn1 16x16x16, pool 16x8x8, conv2/bn2 32x8x8, pool 32x4x4, fc 4
  CHECK(a.total_act_elems() == 2 * 4096 + 1024 + 2 * 2048 + 512 + 4);
  // conv1 144*256, conv2 4608*64, fc 2048
  CHECK(a.total_macs() == 144 * 256 + 4608 * 64 + 512 * 4);
}
