#include "hiergibbs/multigrid.hpp"

#include <Eigen/LU>
#include <cmath>

#include "hiergibbs/errors.hpp"
#include "hiergibbs/rates.hpp"

namespace hiergibbs {

namespace {

// Aggregates level-d values up to level p through the walk steps.
std::vector<double> aggregate(int p, int d,
                              const std::vector<double>& level_values,
                              const AuxWalk& walk) {
  const HierarchyTree& tree = *walk.tree;
  if (p > d) throw ModelError("coarseness must not exceed the value level");
  if (level_values.size() != tree.level_nodes(d).size())
    throw ModelError("value count does not match the level width");
  std::vector<double> cur = level_values;
  for (int l = d; l > p; --l) {
    const auto& fine = tree.level_nodes(l);
    const auto& coarse = tree.level_nodes(l - 1);
    std::vector<double> next(coarse.size(), 0.0);
    std::vector<int> slot(tree.size(), -1);
    for (size_t i = 0; i < coarse.size(); ++i) slot[coarse[i]] = static_cast<int>(i);
    for (size_t i = 0; i < fine.size(); ++i) {
      const int t = fine[i];
      next[slot[tree.parent(t)]] += walk.step[t] * cur[i];
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

std::vector<double> phi(int p, int d, const std::vector<double>& level_values,
                        const AuxWalk& walk) {
  return aggregate(p, d, level_values, walk);
}

std::vector<double> delta(int p, int d, const std::vector<double>& level_values,
                          const AuxWalk& walk) {
  if (p == 0) return aggregate(0, d, level_values, walk);
  const HierarchyTree& tree = *walk.tree;
  const std::vector<double> at_p = aggregate(p, d, level_values, walk);
  const std::vector<double> above = aggregate(p - 1, d, level_values, walk);
  std::vector<int> slot(tree.size(), -1);
  const auto& coarse = tree.level_nodes(p - 1);
  for (size_t i = 0; i < coarse.size(); ++i) slot[coarse[i]] = static_cast<int>(i);
  const auto& nodes = tree.level_nodes(p);
  std::vector<double> out(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i)
    out[i] = at_p[i] - above[slot[tree.parent(nodes[i])]];
  return out;
}

std::vector<int> reduced_basis(int p, const HierarchyTree& tree) {
  if (p < 0 || p >= tree.depth())
    throw ModelError("coarseness index out of range");
  if (p == 0) return {0};
  std::vector<int> out;
  for (int t : tree.level_nodes(p)) {
    if (tree.children(tree.parent(t)).front() != t) out.push_back(t);
  }
  return out;
}

ResidualDecomposition residual_decomposition(const AuxWalk& walk,
                                             const HierarchyTree& tree,
                                             const Vector* scale) {
  const int n = tree.size();
  const int k = tree.depth();
  ResidualDecomposition decomp;
  decomp.scale = scale ? *scale : Vector::Ones(n);
  decomp.map = Matrix::Zero(n, n);
  decomp.block_begin.assign(k + 1, 0);
  int row = 0;
  for (int p = 0; p < k; ++p) {
    decomp.block_begin[p] = row;
    const std::vector<int> basis = reduced_basis(p, tree);
    for (int d = p; d < k; ++d) {
      for (int r : basis) {
        for (int t : tree.level_nodes(d)) {
          double w = walk.cond(t, r);
          if (p > 0) w -= walk.cond(t, tree.parent(r));
          if (w != 0.0) decomp.map(row, t) = w * decomp.scale(t);
        }
        decomp.rows.push_back({p, d, r});
        ++row;
      }
    }
  }
  decomp.block_begin[k] = row;
  if (row != n)
    throw ModelError("residual basis does not span the state space");
  Eigen::PartialPivLU<Matrix> lu(decomp.map);
  decomp.inverse = lu.inverse();
  return decomp;
}

std::vector<Trace> decompose_trace(const Trace& trace,
                                   const ResidualDecomposition& decomp) {
  const Matrix all = trace.states * decomp.map.transpose();
  std::vector<Trace> out;
  for (int p = 0; p < decomp.blocks(); ++p) {
    Trace sub;
    sub.seed = trace.seed;
    sub.param_tag = trace.param_tag + "/residual" + std::to_string(p);
    sub.thin = trace.thin;
    const int begin = decomp.block_begin[p];
    const int size = decomp.block_size(p);
    sub.states = all.middleCols(begin, size);
    for (int i = 0; i < size; ++i) {
      const auto& meta = decomp.rows[begin + i];
      sub.labels.push_back("p" + std::to_string(meta.p) + ".L" +
                           std::to_string(meta.d) + "." +
                           std::to_string(meta.node));
    }
    out.push_back(std::move(sub));
  }
  return out;
}

std::vector<Trace> decompose_trace(const Trace& trace, const AuxWalk& walk) {
  return decompose_trace(trace, residual_decomposition(walk, *walk.tree));
}

FactorizationReport verify_factorization(const GibbsUpdate& update,
                                         const ResidualDecomposition& decomp) {
  const Matrix m = decomp.map * update.b * decomp.inverse;
  const int n = static_cast<int>(m.rows());
  FactorizationReport report;
  std::vector<int> block_of(n);
  for (int p = 0; p < decomp.blocks(); ++p) {
    for (int i = decomp.block_begin[p]; i < decomp.block_begin[p + 1]; ++i)
      block_of[i] = p;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (block_of[i] == block_of[j]) continue;
      const double mag = std::abs(m(i, j));
      if (mag > report.max_off_block) {
        report.max_off_block = mag;
        report.worst_row = i;
        report.worst_col = j;
      }
    }
  }
  for (int p = 0; p < decomp.blocks(); ++p) {
    Matrix block = m.block(decomp.block_begin[p], decomp.block_begin[p],
                           decomp.block_size(p), decomp.block_size(p));
    report.block_rate.push_back(spectral_radius(block));
    report.block_update.push_back(std::move(block));
  }
  return report;
}

}  // namespace hiergibbs
