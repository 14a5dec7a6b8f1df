#ifndef XBARSIM_PARASITICS_HPP
#define XBARSIM_PARASITICS_HPP

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace xbarsim {

struct XbarConfig {
  int rows = 64;
  int cols = 64;
  double rdriver_ohm = 1000.0;
  double rwire_row_ohm = 5.0;
  double rwire_col_ohm = 10.0;
  double rsense_ohm = 1000.0;

  void validate() const {
    if (rows < 1 || cols < 1) throw std::invalid_argument("XbarConfig: tile must be >= 1x1");
    if (rdriver_ohm < 0 || rwire_row_ohm < 0 || rwire_col_ohm < 0 || rsense_ohm < 0)
      throw std::invalid_argument("XbarConfig: negative resistance");
  }

  bool ideal_wiring() const {
    return rdriver_ohm == 0 && rwire_row_ohm == 0 && rwire_col_ohm == 0 && rsense_ohm == 0;
  }
};

/// Effective conductances of one tile: I_j = sum_i G'_ij * V_i holds exactly
/// for the parasitic network (the network is linear, so the R unit-row
/// excitations characterize it completely).
struct EffectiveConductances {
  int rows = 0, cols = 0;
  std::vector<double> g_us;  // row-major

  double at(int r, int c) const { return g_us[static_cast<std::size_t>(r) * cols + c]; }
};

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(a)] = b;
  }
};

}  // namespace detail

/// Solves the resistive mesh of one crossbar tile.
///
/// Geometry: input i reaches its row line through rdriver plus one row-wire
/// segment, then one segment more per crossed column; every device hangs
/// between its row and column node; column current drains through one
/// column-wire segment per remaining row plus rsense into the sense amplifier
/// at 0 V. Zero-resistance segments are handled by node merging, so ideal
/// wiring reproduces G exactly. One factorization is reused for all `rows`
/// unit excitations of the tile.
inline EffectiveConductances effective_conductance_parasitic(const std::vector<double>& g_dev_us,
                                                             const XbarConfig& cfg) {
  cfg.validate();
  const int R = cfg.rows, C = cfg.cols;
  if (g_dev_us.size() != static_cast<std::size_t>(R) * static_cast<std::size_t>(C))
    throw std::invalid_argument("effective_conductance_parasitic: conductance matrix is not rows*cols");

  bool any_dev = false;
  for (double g : g_dev_us)
    if (g != 0.0) any_dev = true;
  if (!any_dev && cfg.ideal_wiring())
    throw std::runtime_error("effective_conductance_parasitic: singular network (no conductances, no parasitics)");

  // Node ids: row nodes, column nodes, one source per row, ground last.
  const int n_row = R * C, n_col = R * C;
  const int source0 = n_row + n_col;
  const int ground = source0 + R;
  const int n_nodes = ground + 1;
  auto row_node = [C](int r, int c) { return r * C + c; };
  auto col_node = [C, n_row](int r, int c) { return n_row + r * C + c; };

  const double r_in = cfg.rdriver_ohm + cfg.rwire_row_ohm;   // source to first row node
  const double r_out = cfg.rwire_col_ohm + cfg.rsense_ohm;   // last column node to ground

  detail::UnionFind uf(n_nodes);
  struct Edge {
    int a, b;
    double g;  // siemens
  };
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(3 * R * C));

  auto add_resistor = [&](int a, int b, double r_ohm) {
    if (r_ohm == 0.0)
      uf.unite(a, b);
    else
      edges.push_back({a, b, 1.0 / r_ohm});
  };

  for (int r = 0; r < R; ++r) {
    add_resistor(source0 + r, row_node(r, 0), r_in);
    for (int c = 0; c + 1 < C; ++c)
      add_resistor(row_node(r, c), row_node(r, c + 1), cfg.rwire_row_ohm);
  }
  for (int c = 0; c < C; ++c) {
    for (int r = 0; r + 1 < R; ++r)
      add_resistor(col_node(r, c), col_node(r + 1, c), cfg.rwire_col_ohm);
    add_resistor(col_node(R - 1, c), ground, r_out);
  }
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) {
      const double g = g_dev_us[static_cast<std::size_t>(r) * C + c] * 1e-6;
      if (g != 0.0) edges.push_back({row_node(r, c), col_node(r, c), g});
    }

  // Cluster numbering. Clusters holding a source or ground have a known
  // voltage per excitation; the rest are unknowns of the nodal system.
  std::vector<int> cluster_of(static_cast<std::size_t>(n_nodes));
  std::vector<int> cluster_ids;
  {
    std::vector<int> remap(static_cast<std::size_t>(n_nodes), -1);
    for (int i = 0; i < n_nodes; ++i) {
      const int root = uf.find(i);
      if (remap[static_cast<std::size_t>(root)] < 0) {
        remap[static_cast<std::size_t>(root)] = static_cast<int>(cluster_ids.size());
        cluster_ids.push_back(root);
      }
      cluster_of[static_cast<std::size_t>(i)] = remap[static_cast<std::size_t>(root)];
    }
  }
  const int n_clusters = static_cast<int>(cluster_ids.size());
  // fixed_source[k] = source row index if cluster k holds a source, R for ground, -1 otherwise
  std::vector<int> fixed_source(static_cast<std::size_t>(n_clusters), -1);
  for (int r = 0; r < R; ++r) fixed_source[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(source0 + r)])] = r;
  fixed_source[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(ground)])] = R;

  std::vector<int> unknown_index(static_cast<std::size_t>(n_clusters), -1);
  int n_unknown = 0;
  for (int k = 0; k < n_clusters; ++k)
    if (fixed_source[static_cast<std::size_t>(k)] < 0) unknown_index[static_cast<std::size_t>(k)] = n_unknown++;

  // Assemble the Laplacian over unknown clusters plus the coupling to each
  // source cluster (right-hand sides are per-excitation superpositions).
  std::vector<Eigen::Triplet<double>> trips;
  // rhs_coupling[r] lists (unknown, g) pairs driven by source r at 1 V.
  std::vector<std::vector<std::pair<int, double>>> rhs_coupling(static_cast<std::size_t>(R));
  for (const Edge& e : edges) {
    const int ka = cluster_of[static_cast<std::size_t>(e.a)];
    const int kb = cluster_of[static_cast<std::size_t>(e.b)];
    if (ka == kb) continue;
    const int ua = unknown_index[static_cast<std::size_t>(ka)];
    const int ub = unknown_index[static_cast<std::size_t>(kb)];
    if (ua >= 0) trips.emplace_back(ua, ua, e.g);
    if (ub >= 0) trips.emplace_back(ub, ub, e.g);
    if (ua >= 0 && ub >= 0) {
      trips.emplace_back(ua, ub, -e.g);
      trips.emplace_back(ub, ua, -e.g);
    } else if (ua >= 0 || ub >= 0) {
      const int u = ua >= 0 ? ua : ub;
      const int fs = fixed_source[static_cast<std::size_t>(ua >= 0 ? kb : ka)];
      if (fs >= 0 && fs < R) rhs_coupling[static_cast<std::size_t>(fs)].emplace_back(u, e.g);
    }
  }

  Eigen::SparseMatrix<double> lap(n_unknown, n_unknown);
  lap.setFromTriplets(trips.begin(), trips.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool use_lu = false;
  if (n_unknown > 0) {
    for (int k = 0; k < lap.outerSize(); ++k) {
      bool has_diag = false;
      for (Eigen::SparseMatrix<double>::InnerIterator it(lap, k); it; ++it)
        if (it.row() == it.col() && it.value() != 0.0) has_diag = true;
      if (!has_diag)
        throw std::runtime_error("effective_conductance_parasitic: singular network (floating node)");
    }
    ldlt.compute(lap);
    if (ldlt.info() != Eigen::Success) {
      // Noise-perturbed device conductances can be negative; fall back to LU.
      lu.compute(lap);
      if (lu.info() != Eigen::Success)
        throw std::runtime_error("effective_conductance_parasitic: singular nodal system");
      use_lu = true;
    }
  }

  EffectiveConductances out;
  out.rows = R;
  out.cols = C;
  out.g_us.assign(static_cast<std::size_t>(R) * static_cast<std::size_t>(C), 0.0);

  Eigen::VectorXd rhs(n_unknown), v(n_unknown);
  std::vector<double> node_v(static_cast<std::size_t>(n_clusters), 0.0);
  for (int exc = 0; exc < R; ++exc) {
    rhs.setZero();
    for (const auto& [u, g] : rhs_coupling[static_cast<std::size_t>(exc)]) rhs[u] += g;
    if (n_unknown > 0) {
      if (use_lu)
        v = lu.solve(rhs);
      else
        v = ldlt.solve(rhs);
    }

    for (int k = 0; k < n_clusters; ++k) {
      const int fs = fixed_source[static_cast<std::size_t>(k)];
      if (fs < 0)
        node_v[static_cast<std::size_t>(k)] = v[unknown_index[static_cast<std::size_t>(k)]];
      else
        node_v[static_cast<std::size_t>(k)] = (fs == exc) ? 1.0 : 0.0;
    }
    // Sense current of column j = net device current entering its column line.
    for (int c = 0; c < C; ++c) {
      double i_col = 0.0;
      for (int r = 0; r < R; ++r) {
        const double g = g_dev_us[static_cast<std::size_t>(r) * C + c] * 1e-6;
        if (g == 0.0) continue;
        const double vr = node_v[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(row_node(r, c))])];
        const double vc = node_v[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(col_node(r, c))])];
        i_col += g * (vr - vc);
      }
      out.g_us[static_cast<std::size_t>(exc) * C + c] = i_col * 1e6;  // 1 V excitation
    }
  }
  return out;
}

/// Ideal crossbar MAC: column currents in microamps for conductances in
/// microsiemens and row voltages in volts.
inline std::vector<double> ideal_mac(const std::vector<double>& g_us, int rows, int cols,
                                     const std::vector<double>& v) {
  if (g_us.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) ||
      v.size() != static_cast<std::size_t>(rows))
    throw std::invalid_argument("ideal_mac: dimension mismatch");
  std::vector<double> i_ua(static_cast<std::size_t>(cols), 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      i_ua[static_cast<std::size_t>(c)] += g_us[static_cast<std::size_t>(r) * cols + c] * v[static_cast<std::size_t>(r)];
  return i_ua;
}

}  // namespace xbarsim

#endif
