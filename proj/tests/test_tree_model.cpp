#include <doctest.h>

#include <cmath>
#include <random>

#include "hiergibbs/errors.hpp"
#include "hiergibbs/model.hpp"
#include "hiergibbs/tree.hpp"
#include "test_util.hpp"

using namespace hiergibbs;

TEST_CASE("balanced tree shapes") {
  const auto t = HierarchyTree::balanced({2, 2});
  CHECK(t.size() == 7);
  CHECK(t.depth() == 3);
  CHECK(t.level_nodes(1).size() == 2);
  CHECK(t.level_nodes(2).size() == 4);
  CHECK(t.leaves().size() == 4);

  const auto chain = HierarchyTree::balanced({1});
  CHECK(chain.size() == 2);
  CHECK(chain.depth() == 2);

  const auto big = HierarchyTree::balanced({3, 2});
  CHECK(big.level_nodes(1).size() == 3);
  CHECK(big.level_nodes(2).size() == 6);
}

TEST_CASE("parent-list validation") {
  // b<-a, c<-a, d<-b puts leaves at different depths.
  CHECK_THROWS_AS(HierarchyTree::from_parents({-1, 0, 0, 1}), ModelError);
  CHECK_THROWS_AS(HierarchyTree::from_parents({-1, -1, 0}), ModelError);
  CHECK_THROWS_AS(HierarchyTree::from_parents({-1, 2, 1}), ModelError);
  CHECK_THROWS_AS(HierarchyTree::balanced({0}), ModelError);

  // Scrambled input order is fine; nodes are re-indexed breadth-first.
  const auto t = HierarchyTree::from_parents({3, 3, 0, -1, 1});
  CHECK(t.depth() == 3);
  CHECK(t.level_nodes(1).size() == 2);
  CHECK(t.level_nodes(2).size() == 2);
}

TEST_CASE("ancestor relation and labels") {
  const auto t = HierarchyTree::balanced({2, 2});
  CHECK(t.is_ancestor_or_self(0, 6));
  CHECK(t.is_ancestor_or_self(2, 5));
  CHECK_FALSE(t.is_ancestor_or_self(1, 5));
  CHECK_FALSE(t.is_ancestor_or_self(3, 4));
  CHECK(t.label(0) == "t0");
  CHECK(t.label(2) == "t0.2");
  CHECK(t.label(5) == "t0.2.1");
}

TEST_CASE("simulate_data is deterministic and respects degenerate noise") {
  auto m = ModelInstance::symmetric3(2, 2, 3, 1e-12, 1e-12, 1e-12);
  const auto d1 = simulate_data(m, 4.25, 99);
  const auto d2 = simulate_data(m, 4.25, 99);
  for (int t : m.tree.leaves()) {
    CHECK(d1.leaf_mean[t] == d2.leaf_mean[t]);
    CHECK(std::abs(d1.leaf_mean[t] - 4.25) < 1e-4);
  }
  const auto d3 = simulate_data(m, 4.25, 100);
  CHECK(d3.leaf_mean[m.tree.leaves()[0]] != d1.leaf_mean[m.tree.leaves()[0]]);
}

TEST_CASE("simulated leaf means carry the composed variance") {
  const int I = 100, J = 100, K = 5;
  const double var_a = 100.0, var_b = 0.1, var_e = 100.0;
  const auto m = simulate_data(
      ModelInstance::symmetric3(I, J, K, var_a, var_b, var_e), 0.0, 31);
  double mean = 0.0;
  for (int t : m.tree.leaves()) mean += m.leaf_mean[t];
  mean /= I * J;
  double s2 = 0.0;
  for (int t : m.tree.leaves()) {
    const double d = m.leaf_mean[t] - mean;
    s2 += d * d;
  }
  s2 /= I * J - 1;
  const double expected = var_a + var_b + var_e / K;
  // Group effects dominate the sampling error of the variance.
  const double se = std::sqrt(2.0 * (var_a * var_a / I +
                                     var_b * var_b / (I * J) +
                                     std::pow(var_e / K, 2) / (I * J)));
  CHECK(std::abs(s2 - expected) < 3.0 * se);
}

TEST_CASE("posterior precision on the 3-node chain") {
  auto m = ModelInstance::symmetric3(1, 1, 1, 1.0, 1.0, 1.0);
  m = simulate_data(m, 0.0, 7);
  const Matrix q = posterior_precision(m);
  Matrix expected(3, 3);
  expected << 1, -1, 0, -1, 2, -1, 0, -1, 2;
  CHECK((q - expected).cwiseAbs().maxCoeff() == 0.0);

  const Matrix a = a_matrix(q);
  Matrix a_expected(3, 3);
  a_expected << 0, 1, 0, 0.5, 0, 0.5, 0, 0.5, 0;
  CHECK((a - a_expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("heterogeneous leaf diagonal") {
  const auto m = simulate_data(
      ModelInstance::nonsymmetric3(1.0, {1.0}, {{2.0}}, {{4}}), 0.0, 5);
  const Matrix q = posterior_precision(m);
  const int leaf = m.tree.leaves()[0];
  CHECK(q(leaf, leaf) == doctest::Approx(1.0 / 1.0 + 4.0 / 2.0));
}

TEST_CASE("tree-structured sparsity holds on random models") {
  std::mt19937_64 gen(2024);
  for (int rep = 0; rep < 25; ++rep) {
    const auto m = testutil::random_model(gen, 2 + rep % 3);
    const Matrix q = posterior_precision(m);
    CHECK(is_positive_definite(q));
    for (int t = 0; t < m.tree.size(); ++t) {
      for (int r = 0; r < m.tree.size(); ++r) {
        if (t == r || m.tree.parent(t) == r || m.tree.parent(r) == t) continue;
        CHECK(q(t, r) == 0.0);
      }
    }
  }
}

TEST_CASE("a_matrix basics") {
  Matrix q(2, 2);
  q << 1, 0.3, 0.3, 1;
  const Matrix a = a_matrix(q);
  CHECK(a(0, 0) == 0.0);
  CHECK(a(0, 1) == doctest::Approx(-0.3));
  CHECK(a(1, 0) == doctest::Approx(-0.3));

  const Matrix diag = Matrix::Identity(3, 3) * 2.0;
  CHECK(a_matrix(diag).cwiseAbs().maxCoeff() == 0.0);

  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = bad(1, 0) = 1.0;
  CHECK_THROWS_AS(a_matrix(bad), ModelError);
}

TEST_CASE("skeleton covariance matches the collapsed 3-node model") {
  const int I = 3, J = 4, K = 2;
  auto m = simulate_data(
      ModelInstance::symmetric3(I, J, K, 1.7, 0.6, 2.3), 0.0, 11);
  const Matrix q = posterior_precision(m);
  const Matrix cov = q.inverse();
  Matrix avg = Matrix::Zero(3, m.tree.size());
  avg(0, 0) = 1.0;
  for (int t : m.tree.level_nodes(1)) avg(1, t) = 1.0 / I;
  for (int t : m.tree.level_nodes(2)) avg(2, t) = 1.0 / (I * J);
  const Matrix skel_cov = avg * cov * avg.transpose();

  const NormalizedVariances tv = m.normalized_variances();
  Matrix q3 = Matrix::Zero(3, 3);
  q3(0, 0) = 1 / tv.a();
  q3(0, 1) = q3(1, 0) = -1 / tv.a();
  q3(1, 1) = 1 / tv.a() + 1 / tv.b();
  q3(1, 2) = q3(2, 1) = -1 / tv.b();
  q3(2, 2) = 1 / tv.b() + 1 / tv.e();
  const Matrix expected = q3.inverse();
  CHECK((skel_cov - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("posterior mean recovers the generative root") {
  auto m = simulate_data(
      ModelInstance::symmetric3(40, 4, 4, 0.8, 0.5, 1.2), -2.0, 17);
  const Matrix q = posterior_precision(m);
  const Vector mean = q.ldlt().solve(information_vector(m));
  const double sd = std::sqrt(q.inverse()(0, 0));
  CHECK(std::abs(mean(0) - (-2.0)) < 5.0 * sd);
}

TEST_CASE("normalized variances of balanced models") {
  const auto m = ModelInstance::symmetric3(4, 5, 6, 8.0, 40.0, 240.0);
  const auto tv = m.normalized_variances();
  CHECK(tv.a() == doctest::Approx(2.0));
  CHECK(tv.b() == doctest::Approx(2.0));
  CHECK(tv.e() == doctest::Approx(2.0));
}
