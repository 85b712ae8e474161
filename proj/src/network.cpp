#include "ulrsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ulr {

namespace {

double unit_draw(std::mt19937_64& rng) {
  // Canonical 53-bit uniform in [0, 1); stable across standard libraries.
  return std::ldexp(static_cast<double>(rng() >> 11), -53);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<std::vector<int>> Topology::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<size_t>(m));
  for (const auto& [i, j] : edges) {
    adj[static_cast<size_t>(i)].push_back(j);
    adj[static_cast<size_t>(j)].push_back(i);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

std::vector<int> Topology::degrees() const {
  std::vector<int> deg(static_cast<size_t>(m), 0);
  for (const auto& [i, j] : edges) {
    ++deg[static_cast<size_t>(i)];
    ++deg[static_cast<size_t>(j)];
  }
  return deg;
}

bool Topology::is_connected() const {
  if (m <= 0) return false;
  const auto adj = adjacency();
  std::vector<char> seen(static_cast<size_t>(m), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[static_cast<size_t>(v)]) {
      if (!seen[static_cast<size_t>(w)]) {
        seen[static_cast<size_t>(w)] = 1;
        ++visited;
        stack.push_back(w);
      }
    }
  }
  return visited == m;
}

bool Topology::is_complete() const {
  return static_cast<long long>(edges.size()) ==
         static_cast<long long>(m) * (m - 1) / 2;
}

void Topology::validate() const {
  if (m < 1) throw std::invalid_argument("Topology: need at least one agent");
  std::set<std::pair<int, int>> seen;
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= m || j >= m) {
      throw std::invalid_argument("Topology: edge index out of range");
    }
    if (i == j) throw std::invalid_argument("Topology: self-loop in edge set");
    if (i >= j) throw std::invalid_argument("Topology: edges must be stored with i < j");
    if (!seen.insert({i, j}).second) {
      throw std::invalid_argument("Topology: duplicate edge");
    }
  }
  if (!positions.empty() && static_cast<int>(positions.size()) != m) {
    throw std::invalid_argument("Topology: positions size does not match m");
  }
  if (!is_connected()) throw std::invalid_argument("Topology: graph is not connected");
}

Topology Topology::complete(int m) {
  if (m < 1) throw std::invalid_argument("Topology::complete: need at least one agent");
  Topology t;
  t.m = m;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) t.edges.emplace_back(i, j);
  return t;
}

Topology Topology::ring(int m) {
  if (m < 1) throw std::invalid_argument("Topology::ring: need at least one agent");
  Topology t;
  t.m = m;
  if (m == 2) {
    t.edges.emplace_back(0, 1);
  } else if (m > 2) {
    for (int i = 0; i + 1 < m; ++i) t.edges.emplace_back(i, i + 1);
    t.edges.emplace_back(0, m - 1);
  }
  return t;
}

Topology random_geometric_graph(int m, double radius, std::mt19937_64& rng) {
  if (m < 1) throw std::invalid_argument("random_geometric_graph: need at least one agent");
  if (!(radius > 0.0) || radius > std::sqrt(2.0)) {
    throw std::invalid_argument("random_geometric_graph: radius must be in (0, sqrt(2)]");
  }
  const int kMaxAttempts = 10000;
  const double r2 = radius * radius;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    Topology t;
    t.m = m;
    t.positions.resize(static_cast<size_t>(m));
    for (auto& pos : t.positions) {
      pos[0] = unit_draw(rng);
      pos[1] = unit_draw(rng);
    }
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        const double dx = t.positions[static_cast<size_t>(i)][0] - t.positions[static_cast<size_t>(j)][0];
        const double dy = t.positions[static_cast<size_t>(i)][1] - t.positions[static_cast<size_t>(j)][1];
        if (dx * dx + dy * dy <= r2) t.edges.emplace_back(i, j);
      }
    }
    if (t.is_connected()) return t;
  }
  throw std::runtime_error("random_geometric_graph: radius too small, no connected layout in " +
                           std::to_string(kMaxAttempts) + " attempts");
}

void MixingMatrix::validate() const {
  if (m < 1 || weights.size() != static_cast<size_t>(m) * static_cast<size_t>(m)) {
    throw std::invalid_argument("MixingMatrix: bad dimensions");
  }
  for (int i = 0; i < m; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < m; ++j) {
      const double w = at(i, j);
      if (!(w >= 0.0)) throw std::invalid_argument("MixingMatrix: negative entry");
      if (std::abs(w - at(j, i)) > 1e-12) {
        throw std::invalid_argument("MixingMatrix: not symmetric");
      }
      row += w;
      col += at(j, i);
    }
    if (std::abs(row - 1.0) > 1e-12 || std::abs(col - 1.0) > 1e-12) {
      throw std::invalid_argument("MixingMatrix: row/column sums must equal 1");
    }
    if (!(at(i, i) > 0.0)) {
      throw std::invalid_argument("MixingMatrix: diagonal entries must be positive");
    }
  }
}

namespace {

MixingMatrix finish_matrix(int m, std::vector<double> w) {
  MixingMatrix a;
  a.m = m;
  a.weights = std::move(w);
  double eta = 1.0;
  for (double v : a.weights) {
    if (v > 0.0) eta = std::min(eta, v);
  }
  a.eta = eta;
  a.lambda_bound = 1.0 - eta / (4.0 * static_cast<double>(m) * static_cast<double>(m));
  a.validate();
  return a;
}

}  // namespace

MixingMatrix lazy_metropolis(const Topology& topology) {
  topology.validate();
  const int m = topology.m;
  const auto deg = topology.degrees();
  std::vector<double> w(static_cast<size_t>(m) * static_cast<size_t>(m), 0.0);
  for (const auto& [i, j] : topology.edges) {
    const double v = 1.0 / (2.0 * static_cast<double>(std::max(deg[static_cast<size_t>(i)],
                                                               deg[static_cast<size_t>(j)])));
    w[static_cast<size_t>(i) * m + j] = v;
    w[static_cast<size_t>(j) * m + i] = v;
  }
  for (int i = 0; i < m; ++i) {
    double off = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j != i) off += w[static_cast<size_t>(i) * m + j];
    }
    w[static_cast<size_t>(i) * m + i] = 1.0 - off;
  }
  return finish_matrix(m, std::move(w));
}

MixingMatrix uniform_complete(const Topology& topology) {
  topology.validate();
  if (!topology.is_complete()) {
    throw std::invalid_argument("uniform_complete: topology must be a complete graph");
  }
  const int m = topology.m;
  std::vector<double> w(static_cast<size_t>(m) * static_cast<size_t>(m),
                        1.0 / static_cast<double>(m));
  return finish_matrix(m, std::move(w));
}

double spectral_norm(const std::vector<double>& matrix, int m) {
  if (m < 1 || matrix.size() != static_cast<size_t>(m) * static_cast<size_t>(m)) {
    throw std::invalid_argument("spectral_norm: bad dimensions");
  }
  const auto mat = [&](int i, int j) {
    return matrix[static_cast<size_t>(i) * static_cast<size_t>(m) + static_cast<size_t>(j)];
  };
  // Deterministic pseudo-random start vector with no special structure.
  std::vector<double> v(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    v[static_cast<size_t>(i)] =
        std::ldexp(static_cast<double>(splitmix64(static_cast<std::uint64_t>(i) + 1) >> 11), -53) - 0.5;
  }
  double vnorm = 0.0;
  for (double x : v) vnorm += x * x;
  vnorm = std::sqrt(vnorm);
  for (double& x : v) x /= vnorm;

  std::vector<double> w(static_cast<size_t>(m)), z(static_cast<size_t>(m));
  double lambda_prev = 0.0;
  const int kMaxIters = 200000;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    // w = M v ; z = M^T w
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int j = 0; j < m; ++j) acc += mat(i, j) * v[static_cast<size_t>(j)];
      w[static_cast<size_t>(i)] = acc;
    }
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int i = 0; i < m; ++i) acc += mat(i, j) * w[static_cast<size_t>(i)];
      z[static_cast<size_t>(j)] = acc;
    }
    double lambda = 0.0;  // Rayleigh quotient of M^T M at v (v is unit)
    for (int i = 0; i < m; ++i) lambda += z[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
    double znorm = 0.0;
    for (double x : z) znorm += x * x;
    znorm = std::sqrt(znorm);
    if (znorm < 1e-300) return 0.0;
    for (int i = 0; i < m; ++i) v[static_cast<size_t>(i)] = z[static_cast<size_t>(i)] / znorm;
    if (iter > 0 && std::abs(lambda - lambda_prev) <= 1e-12 * std::max(std::abs(lambda), 1e-300)) {
      return std::sqrt(std::max(lambda, 0.0));
    }
    lambda_prev = lambda;
  }
  return std::sqrt(std::max(lambda_prev, 0.0));
}

double consensus_gap(const MixingMatrix& matrix, long long t) {
  if (t < 0) throw std::invalid_argument("consensus_gap: t must be >= 0");
  const int m = matrix.m;
  const size_t mm = static_cast<size_t>(m);
  // A^t by square-and-multiply.
  std::vector<double> result(mm * mm, 0.0), base = matrix.weights, tmp(mm * mm);
  for (int i = 0; i < m; ++i) result[static_cast<size_t>(i) * mm + i] = 1.0;
  const auto matmul = [&](const std::vector<double>& a, const std::vector<double>& b,
                          std::vector<double>& out) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int k = 0; k < m; ++k) acc += a[static_cast<size_t>(i) * mm + k] * b[static_cast<size_t>(k) * mm + j];
        out[static_cast<size_t>(i) * mm + j] = acc;
      }
    }
  };
  long long e = t;
  while (e > 0) {
    if (e & 1) {
      matmul(result, base, tmp);
      result.swap(tmp);
    }
    e >>= 1;
    if (e > 0) {
      matmul(base, base, tmp);
      base.swap(tmp);
    }
  }
  const double uniform = 1.0 / static_cast<double>(m);
  for (double& v : result) v -= uniform;
  return spectral_norm(result, m);
}

Topology load_edge_list(std::istream& in) {
  Topology t;
  if (!(in >> t.m)) throw std::invalid_argument("edge list: missing agent count");
  int i = 0, j = 0;
  while (in >> i >> j) {
    if (i > j) std::swap(i, j);
    t.edges.emplace_back(i, j);
  }
  std::sort(t.edges.begin(), t.edges.end());
  t.validate();
  return t;
}

Topology load_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("edge list: cannot open " + path);
  try {
    return load_edge_list(in);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void save_edge_list(const Topology& topology, std::ostream& out) {
  out << topology.m << "\n";
  auto edges = topology.edges;
  std::sort(edges.begin(), edges.end());
  for (const auto& [i, j] : edges) out << i << " " << j << "\n";
}

void save_edge_list_file(const Topology& topology, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("edge list: cannot write " + path);
  save_edge_list(topology, out);
}

void save_matrix_csv(const MixingMatrix& matrix, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("matrix csv: cannot write " + path);
  out << std::setprecision(17);
  for (int i = 0; i < matrix.m; ++i) {
    for (int j = 0; j < matrix.m; ++j) {
      if (j > 0) out << ",";
      out << matrix.at(i, j);
    }
    out << "\n";
  }
}

}  // namespace ulr
