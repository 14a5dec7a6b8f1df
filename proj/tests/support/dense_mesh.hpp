#ifndef XBARSIM_TESTS_DENSE_MESH_HPP
#define XBARSIM_TESTS_DENSE_MESH_HPP

// Brute-force dense nodal-analysis oracle for the crossbar parasitic mesh.
// Deliberately independent of the production solver: full MNA system over
// every node with explicit branch unknowns for zero-resistance segments and
// the voltage sources, solved densely per excitation.

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "xbarsim/parasitics.hpp"

namespace xbarsim::testing {

inline std::vector<double> dense_mesh_oracle(const std::vector<double>& g_dev_us,
                                             const XbarConfig& cfg) {
  const int R = cfg.rows, C = cfg.cols;
  if (g_dev_us.size() != static_cast<std::size_t>(R) * static_cast<std::size_t>(C))
    throw std::invalid_argument("dense_mesh_oracle: bad matrix size");

  // Node numbering: sources, row nodes, column nodes. Ground is the
  // eliminated reference.
  const int n_src = R;
  const int row0 = n_src;
  const int col0 = n_src + R * C;
  const int n_nodes = n_src + 2 * R * C;
  auto rn = [&](int r, int c) { return row0 + r * C + c; };
  auto cn = [&](int r, int c) { return col0 + r * C + c; };
  constexpr int kGround = -1;

  struct Branch {  // zero-resistance segment or voltage source, MNA style
    int a, b;      // current flows a -> b; b may be ground
    double emf;    // enforced V_a - V_b (0 for shorted wire segments)
    bool is_src;
    int src_row;
  };
  struct Res {
    int a, b;
    double g;
  };
  std::vector<Branch> branches;
  std::vector<Res> resistors;

  auto add_edge = [&](int a, int b, double r_ohm) {
    if (r_ohm == 0.0)
      branches.push_back({a, b, 0.0, false, -1});
    else
      resistors.push_back({a, b, 1.0 / r_ohm});
  };

  const double r_in = cfg.rdriver_ohm + cfg.rwire_row_ohm;
  const double r_out = cfg.rwire_col_ohm + cfg.rsense_ohm;
  std::vector<int> sense_branch(static_cast<std::size_t>(C), -1);
  for (int r = 0; r < R; ++r) {
    branches.push_back({r, kGround, 0.0, true, r});  // source value set per excitation
    add_edge(r, rn(r, 0), r_in);
    for (int c = 0; c + 1 < C; ++c) add_edge(rn(r, c), rn(r, c + 1), cfg.rwire_row_ohm);
  }
  for (int c = 0; c < C; ++c) {
    for (int r = 0; r + 1 < R; ++r) add_edge(cn(r, c), cn(r + 1, c), cfg.rwire_col_ohm);
    if (r_out == 0.0) sense_branch[static_cast<std::size_t>(c)] = static_cast<int>(branches.size());
    add_edge(cn(R - 1, c), kGround, r_out);
  }
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) {
      const double g = g_dev_us[static_cast<std::size_t>(r) * C + c] * 1e-6;
      if (g != 0.0) resistors.push_back({rn(r, c), cn(r, c), g});
    }

  const int nb = static_cast<int>(branches.size());
  const int dim = n_nodes + nb;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (const Res& e : resistors) {
    if (e.a != kGround) m(e.a, e.a) += e.g;
    if (e.b != kGround) m(e.b, e.b) += e.g;
    if (e.a != kGround && e.b != kGround) {
      m(e.a, e.b) -= e.g;
      m(e.b, e.a) -= e.g;
    }
  }
  for (int k = 0; k < nb; ++k) {
    const Branch& br = branches[static_cast<std::size_t>(k)];
    const int idx = n_nodes + k;
    if (br.a != kGround) {
      m(br.a, idx) += 1.0;
      m(idx, br.a) += 1.0;
    }
    if (br.b != kGround) {
      m(br.b, idx) -= 1.0;
      m(idx, br.b) -= 1.0;
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw std::runtime_error("dense_mesh_oracle: singular MNA system");

  std::vector<double> g_eff(static_cast<std::size_t>(R) * static_cast<std::size_t>(C), 0.0);
  Eigen::VectorXd rhs(dim), x(dim);
  for (int exc = 0; exc < R; ++exc) {
    rhs.setZero();
    for (int k = 0; k < nb; ++k)
      if (branches[static_cast<std::size_t>(k)].is_src)
        rhs[n_nodes + k] = branches[static_cast<std::size_t>(k)].src_row == exc ? 1.0 : 0.0;
    x = lu.solve(rhs);
    for (int c = 0; c < C; ++c) {
      double i_sense;
      if (sense_branch[static_cast<std::size_t>(c)] >= 0) {
        i_sense = x[n_nodes + sense_branch[static_cast<std::size_t>(c)]];
      } else {
        i_sense = x[cn(R - 1, c)] / r_out;  // current into ground through the sense path
      }
      g_eff[static_cast<std::size_t>(exc) * C + c] = i_sense * 1e6;
    }
  }
  return g_eff;
}

}  // namespace xbarsim::testing

#endif
