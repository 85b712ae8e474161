#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace ulr {

// Undirected connected communication graph over m agents.
struct Topology {
  int m = 0;
  std::vector<std::pair<int, int>> edges;        // stored with i < j, no self-loops
  std::vector<std::array<double, 2>> positions;  // optional layout (geometric graphs)

  std::vector<std::vector<int>> adjacency() const;  // neighbor lists, self excluded
  std::vector<int> degrees() const;
  bool is_connected() const;
  bool is_complete() const;
  // m >= 1, indices in range, normalized edges, no duplicates, connected.
  void validate() const;

  static Topology complete(int m);
  static Topology ring(int m);
};

// Symmetric doubly stochastic mixing weights plus the quantities appearing in
// the consensus contraction bound: eta is the smallest positive entry and
// lambda_bound = 1 - eta / (4 m^2).
struct MixingMatrix {
  int m = 0;
  std::vector<double> weights;  // row-major m x m
  double eta = 0.0;
  double lambda_bound = 1.0;

  double at(int i, int j) const {
    return weights[static_cast<size_t>(i) * static_cast<size_t>(m) + static_cast<size_t>(j)];
  }
  // Row/column sums 1 within 1e-12, entries >= 0, symmetric, diagonal > 0.
  void validate() const;
};

// Samples m points uniformly on the unit square and connects pairs within
// Euclidean distance radius; whole layouts are resampled until the graph is
// connected (at most 10^4 attempts).
Topology random_geometric_graph(int m, double radius, std::mt19937_64& rng);

// Lazy Metropolis weights: A_ij = 1 / (2 max(d_i, d_j)) on edges, with the
// compensating self-weight A_ii = 1 - sum of the off-diagonal row.
MixingMatrix lazy_metropolis(const Topology& topology);

// Uniform averaging weights A_ij = 1/m; valid only for complete topologies.
MixingMatrix uniform_complete(const Topology& topology);

// Spectral norm of A^t - (1/m) 1 1^T.
double consensus_gap(const MixingMatrix& matrix, long long t);

// Spectral norm of an arbitrary m x m row-major matrix, via power iteration on
// M^T M with a deterministic start vector and 1e-12 relative tolerance.
double spectral_norm(const std::vector<double>& matrix, int m);

// Edge-list text format: first line m, then one "i j" pair per line (0-based).
Topology load_edge_list(std::istream& in);
Topology load_edge_list_file(const std::string& path);
void save_edge_list(const Topology& topology, std::ostream& out);
void save_edge_list_file(const Topology& topology, const std::string& path);

// Full-precision CSV dump of the weight matrix, one row per line.
void save_matrix_csv(const MixingMatrix& matrix, const std::string& path);

}  // namespace ulr
