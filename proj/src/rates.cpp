#include "hiergibbs/rates.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "hiergibbs/errors.hpp"
#include "hiergibbs/rng.hpp"

namespace hiergibbs {

namespace {

// Parlett-Reinsch balancing (radix 2); similarity transform, eigenvalues
// unchanged.
void balance_in_place(Matrix& a) {
  const int n = static_cast<int>(a.rows());
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 0; i < n; ++i) {
      double col = 0.0, row = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        col += std::abs(a(j, i));
        row += std::abs(a(i, j));
      }
      if (col == 0.0 || row == 0.0) continue;
      const double total = col + row;
      double f = 1.0;
      while (col < row / 2.0) {
        col *= 2.0;
        row /= 2.0;
        f *= 2.0;
      }
      while (col >= row * 2.0) {
        col /= 2.0;
        row *= 2.0;
        f /= 2.0;
      }
      if (f != 1.0 && col + row < 0.95 * total) {
        done = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
}

// Larger root of x^2 - trace x + det = 0 when real, modulus sqrt(det) when
// the pair is complex.
double quadratic_top(double trace, double det) {
  const double disc = trace * trace - 4.0 * det;
  if (disc >= 0.0) return 0.5 * (trace + std::sqrt(disc));
  return std::sqrt(det);
}

}  // namespace

double spectral_radius(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  if (n == 0) return 0.0;
  if (n == 1) return std::abs(m(0, 0));
  Matrix a = m;
  balance_in_place(a);
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_rate(const Matrix& q) {
  if (!is_positive_definite(q))
    throw ModelError("spectral rate needs a positive-definite precision");
  const Matrix a = a_matrix(q);
  const int n = static_cast<int>(a.rows());
  const Matrix l = a.triangularView<Eigen::StrictlyLower>();
  const Matrix u = a.triangularView<Eigen::StrictlyUpper>();
  const Matrix b =
      (Matrix::Identity(n, n) - l).triangularView<Eigen::Lower>().solve(u);
  return spectral_radius(b);
}

double Rates3::by_pattern(int l1, int l2) const {
  if (l1 == 0) return l2 == 0 ? cc : cn;
  return l2 == 0 ? nc : nn;
}

double Rates3::min() const { return std::min({cc, nn, cn, nc}); }

Rates3 closed_form_rates_3(const NormalizedVariances& tv) {
  if (tv.levels() != 3) throw ModelError("three normalized variances needed");
  const double a = tv.a(), b = tv.b(), e = tv.e();
  Rates3 r;
  r.cc = 1.0 - (a / (a + b)) * (b / (b + e));
  r.nn = std::max(a / (a + e), b / (b + e));
  r.cn = 1.0 - (a / (a + e)) * (e / (b + e));
  r.nc = std::max(a / (a + b), e / (b + e));
  return r;
}

std::array<std::array<double, 3>, 4> subchain_rates_3(
    const NormalizedVariances& tv) {
  const double a = tv.a(), b = tv.b(), e = tv.e();
  const double x = a / (a + b);  // ratio at the top pair
  const double y = b / (b + e);
  const double z = a / (a + e);
  const double w = e / (b + e);
  return {{
      {1.0 - x * y, x * w, 0.0},        // cc
      {std::max(z, y), z * y, 0.0},     // nn
      {1.0 - z * w, z * y, 0.0},        // cn
      {std::max(x, w), x * w, 0.0},     // nc
  }};
}

std::array<double, 8> closed_form_rates_4(const NormalizedVariances& tv) {
  if (tv.levels() != 4) throw ModelError("four normalized variances needed");
  const auto r = [&](int i, int j) {
    return tv.v[i - 1] / (tv.v[i - 1] + tv.v[j - 1]);
  };
  std::array<double, 8> out{};
  out[0b111] = std::max({r(1, 4), r(2, 4), r(3, 4)});
  out[0b110] = std::max({r(1, 3), r(2, 3), r(4, 3)});
  out[0b100] = std::max(r(1, 2), 1.0 - r(2, 3) * r(3, 4));
  out[0b101] = std::max(r(1, 2), 1.0 - r(2, 4) * r(4, 3));
  {
    const double t = 1.0 + r(2, 3) * (r(4, 3) - r(1, 2));
    out[0b000] = quadratic_top(t, r(2, 1) * r(2, 3) * r(4, 3));
  }
  {
    const double t = 1.0 + r(2, 4) * (r(3, 4) - r(1, 2));
    out[0b001] = quadratic_top(t, r(2, 1) * r(2, 4) * r(3, 4));
  }
  {
    const double t = 1.0 - r(1, 4) * r(4, 2) * r(4, 3) + r(2, 4) * r(3, 4);
    out[0b011] = quadratic_top(t, r(2, 4) * r(3, 4));
  }
  {
    const double t = 1.0 - r(1, 3) * r(3, 2) * r(3, 4) + r(2, 3) * r(4, 3);
    out[0b010] = quadratic_top(t, r(2, 3) * r(4, 3));
  }
  return out;
}

double symmetric_cp_rate_k(const std::vector<double>& tau, double tau_e,
                           const std::vector<int>& branching, int J) {
  const int k = static_cast<int>(tau.size()) + 1;
  if (static_cast<int>(branching.size()) != k - 1)
    throw ModelError("one branching factor per level below the root");
  // r[l] for l = 1..k with the conventions tau_0 = 0, tau_k = tau_e, I_k = J.
  std::vector<double> r(k + 1, 0.0);
  for (int l = 1; l <= k; ++l) {
    const double tau_prev = l == 1 ? 0.0 : tau[l - 2];
    const double tau_l = l == k ? tau_e : tau[l - 1];
    const double i_l = l == k ? static_cast<double>(J)
                              : static_cast<double>(branching[l - 1]);
    r[l] = i_l * tau_l / (tau_prev + i_l * tau_l);
  }
  Matrix m = Matrix::Zero(k, k);
  for (int d = 0; d + 1 < k; ++d) {
    m(d, d + 1) = r[d + 1];
    m(d + 1, d) = 1.0 - r[d + 2];
  }
  const double lam = spectral_radius(m);
  return lam * lam;
}

double bespoke_rate_2(const std::vector<int>& lambda, double tau_a,
                      const std::vector<double>& tau_tilde) {
  if (lambda.size() != tau_tilde.size())
    throw ModelError("one indicator per group");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < lambda.size(); ++i) {
    const double ti = tau_tilde[i];
    if (lambda[i] != 0) {
      num += ti * ti / (ti + tau_a);
      den += ti;
    } else {
      num += tau_a * tau_a / (ti + tau_a);
      den += tau_a;
    }
  }
  return num / den;
}

CpBound3 cp_upper_bound_3(const ModelInstance& model) {
  if (model.levels() != 3) throw ModelError("the bound is for 3-level models");
  const auto& tree = model.tree;
  const auto& groups = tree.level_nodes(1);
  const double var_a = 1.0 / model.node_precision[groups.front()];
  for (int g : groups) {
    if (std::abs(1.0 / model.node_precision[g] - var_a) >
        1e-12 * std::abs(var_a))
      throw ModelError("top-level variance must be shared across groups");
  }
  CpBound3 out;
  for (int g : groups) {
    const auto& kids = tree.children(g);
    const double ji = static_cast<double>(kids.size());
    const double var_b = 1.0 / model.node_precision[kids.front()];
    double acc = 0.0;
    for (int c : kids) {
      if (std::abs(1.0 / model.node_precision[c] - var_b) >
          1e-12 * std::abs(var_b))
        throw ModelError("group variance must be shared within a group");
      const double w = 1.0 / (static_cast<double>(model.leaf_count[c]) *
                              model.noise_precision[c]);
      acc += w / (var_b + w);
    }
    out.r_ab.push_back(var_a / (var_a + var_b / ji));
    out.r_eb.push_back(acc / ji);
  }
  double min_rab = 1.0, max_prod = 0.0, mean_rab = 0.0;
  for (size_t i = 0; i < out.r_ab.size(); ++i) {
    min_rab = std::min(min_rab, out.r_ab[i]);
    max_prod = std::max(max_prod, out.r_ab[i] * out.r_eb[i]);
    mean_rab += out.r_ab[i];
  }
  mean_rab /= static_cast<double>(out.r_ab.size());
  out.applicable = min_rab >= max_prod;
  if (out.applicable) out.bound = 1.0 - mean_rab + max_prod;
  return out;
}

double subchain_rate(const Matrix& c, int p) {
  const int k = static_cast<int>(c.rows());
  if (p < 0 || p >= k) throw ModelError("coarseness index out of range");
  const int m = k - p;
  const Matrix a =
      c.bottomRightCorner(m, m) - Matrix::Identity(m, m);
  const Matrix l = a.triangularView<Eigen::StrictlyLower>();
  const Matrix u = a.triangularView<Eigen::StrictlyUpper>();
  const Matrix b =
      (Matrix::Identity(m, m) - l).triangularView<Eigen::Lower>().solve(u);
  return spectral_radius(b);
}

double cp_rate_k(const Matrix& c) {
  const int k = static_cast<int>(c.rows());
  const double lam = spectral_radius(c - Matrix::Identity(k, k));
  return lam * lam;
}

namespace {

// Least-squares lag-1 coefficient matrix from the given transition pairs
// (x_s -> x_{s+1}) of an already centered series.
Matrix fit_var1_pairs(const Matrix& centered,
                      const std::vector<int>& pair_idx, bool* widened) {
  const int p = static_cast<int>(centered.cols());
  Matrix c00 = Matrix::Zero(p, p);
  Matrix c10 = Matrix::Zero(p, p);
  for (int s : pair_idx) {
    c00.noalias() += centered.row(s).transpose() * centered.row(s);
    c10.noalias() += centered.row(s + 1).transpose() * centered.row(s);
  }
  Eigen::JacobiSVD<Matrix> svd(c00);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(p - 1);
  if (!(smin > 1e-12 * smax)) {
    if (widened) *widened = true;
    c00 += (1e-10 * std::max(smax, 1.0)) * Matrix::Identity(p, p);
  }
  return c00.ldlt().solve(c10.transpose()).transpose();
}

}  // namespace

EmpiricalRate empirical_rate(const Matrix& states, int burn_in,
                             const std::vector<int>& coords, uint64_t seed) {
  const int rows = static_cast<int>(states.rows());
  if (rows - burn_in < 1000)
    throw ModelError("empirical rate needs at least 1000 post-burn-in draws");
  const int m = rows - burn_in;
  const int p = static_cast<int>(coords.size());
  Matrix x(m, p);
  for (int j = 0; j < p; ++j)
    x.col(j) = states.col(coords[j]).tail(m);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;

  const int n_pairs = m - 1;
  std::vector<int> all_pairs(n_pairs);
  for (int s = 0; s < n_pairs; ++s) all_pairs[s] = s;

  EmpiricalRate out;
  out.estimate = spectral_radius(fit_var1_pairs(centered, all_pairs,
                                                &out.widened));

  // Circular block bootstrap over transition pairs; blocks of consecutive
  // pairs preserve the short-range dependence.
  const int block =
      std::clamp(static_cast<int>(std::cbrt(n_pairs)), 10, n_pairs / 4);
  const int n_blocks = (n_pairs + block - 1) / block;
  const int reps = 40;
  const CounterRng rng(seed);
  std::vector<double> estimates;
  estimates.reserve(reps);
  std::vector<int> resampled(n_blocks * block);
  for (int rep = 0; rep < reps; ++rep) {
    const uint64_t stream = stream_id(StreamTag::kBootstrap, rep);
    int at = 0;
    for (int bi = 0; bi < n_blocks; ++bi) {
      const int start = static_cast<int>(
          rng.uniform(stream, bi) * static_cast<double>(n_pairs));
      for (int off = 0; off < block; ++off)
        resampled[at++] = (start + off) % n_pairs;
    }
    estimates.push_back(
        spectral_radius(fit_var1_pairs(centered, resampled, nullptr)));
  }
  double avg = 0.0;
  for (double v : estimates) avg += v;
  avg /= reps;
  double var = 0.0;
  for (double v : estimates) var += (v - avg) * (v - avg);
  out.stderr_est = std::sqrt(var / (reps - 1));
  return out;
}

}  // namespace hiergibbs
