#include <doctest.h>

#include <cmath>
#include <random>

#include "hiergibbs/errors.hpp"
#include "hiergibbs/reparam.hpp"
#include "hiergibbs/symmetry.hpp"
#include "test_util.hpp"

using namespace hiergibbs;

namespace {

// Irregular tree with level-rescaled precisions: uneven branching compensated
// by dividing each precision by the product of the branch counts above.
ModelInstance weakly_symmetric(const HierarchyTree& tree,
                               const std::vector<double>& level_tau,
                               double tau_e) {
  std::vector<double> node_prec(tree.size(), 0.0);
  std::vector<double> noise_prec(tree.size(), 0.0);
  std::vector<int64_t> counts(tree.size(), 0);
  std::vector<double> descent(tree.size(), 1.0);
  for (int t = 1; t < tree.size(); ++t) {
    const int p = tree.parent(t);
    descent[t] = descent[p] * static_cast<double>(tree.children(p).size());
    node_prec[t] = level_tau[tree.level(t) - 1] / descent[t];
  }
  for (int t : tree.leaves()) {
    counts[t] = 1;
    noise_prec[t] = tau_e / descent[t];
  }
  return ModelInstance::general(tree, std::move(node_prec),
                                std::move(noise_prec), std::move(counts));
}

}  // namespace

TEST_CASE("partial correlations") {
  Matrix q(2, 2);
  q << 1, -0.5, -0.5, 1;
  const Matrix rho = partial_correlations(q);
  CHECK(rho(0, 1) == doctest::Approx(0.5));
  CHECK(rho(0, 0) == 1.0);

  const Matrix diag = Matrix::Identity(3, 3) * 4.0;
  CHECK((partial_correlations(diag) - Matrix::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 1) = 0.0;
  CHECK_THROWS_AS(partial_correlations(bad), ModelError);
}

TEST_CASE("child correlation sums match the group ratio product") {
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 20; ++rep) {
    const int I = 2 + static_cast<int>(gen() % 3);
    std::vector<double> var_b;
    std::vector<std::vector<double>> var_e;
    std::vector<std::vector<int>> K;
    const double var_a = testutil::log_uniform(gen, 0.2, 5.0);
    for (int i = 0; i < I; ++i) {
      const int J = 1 + static_cast<int>(gen() % 3);
      var_b.push_back(testutil::log_uniform(gen, 0.2, 5.0));
      var_e.push_back({});
      K.push_back({});
      for (int j = 0; j < J; ++j) {
        var_e.back().push_back(testutil::log_uniform(gen, 0.2, 5.0));
        K.back().push_back(1 + static_cast<int>(gen() % 4));
      }
    }
    auto m = simulate_data(
        ModelInstance::nonsymmetric3(var_a, var_b, var_e, K), 0.0, gen());
    const Matrix rho = partial_correlations(posterior_precision(m));
    for (int i = 0; i < I; ++i) {
      const int g = 1 + i;
      double sum = 0.0;
      for (int c : m.tree.children(g)) sum += rho(c, g) * rho(c, g);
      const double ji = static_cast<double>(m.tree.children(g).size());
      const double r_ab = var_a / (var_a + var_b[i] / ji);
      double r_eb = 0.0;
      for (size_t j = 0; j < K[i].size(); ++j) {
        const double w = var_e[i][j] / K[i][j];
        r_eb += w / (var_b[i] + w) / ji;
      }
      CHECK(sum == doctest::Approx(r_ab * r_eb).epsilon(1e-12));
    }
  }
}

TEST_CASE("walk over a balanced model is uniform") {
  auto m = simulate_data(ModelInstance::symmetric3(4, 3, 2, 1.0, 2.0, 0.5),
                         0.0, 41);
  const Matrix q = posterior_precision(m);
  const AuxWalk walk = aux_walk(q, m.tree);
  for (int t : m.tree.level_nodes(1)) CHECK(walk.step[t] ==
                                            doctest::Approx(0.25));
  for (int t : m.tree.level_nodes(2))
    CHECK(walk.step[t] == doctest::Approx(1.0 / 3.0));
  for (int t : m.tree.level_nodes(2))
    CHECK(walk.marginal[t] == doctest::Approx(1.0 / 12.0));
  // Marginals sum to one per level.
  for (int d = 0; d < 3; ++d) {
    double sum = 0.0;
    for (int t : m.tree.level_nodes(d)) sum += walk.marginal[t];
    CHECK(sum == doctest::Approx(1.0));
  }
}

TEST_CASE("walk weights follow squared correlations") {
  // Two children with squared correlations 0.1 and 0.3.
  const auto tree = HierarchyTree::balanced({2});
  Matrix q = Matrix::Identity(3, 3);
  q(0, 1) = q(1, 0) = -std::sqrt(0.1);
  q(0, 2) = q(2, 0) = -std::sqrt(0.3);
  const AuxWalk walk = aux_walk(q, tree);
  CHECK(walk.step[1] == doctest::Approx(0.25));
  CHECK(walk.step[2] == doctest::Approx(0.75));

  Matrix degenerate = Matrix::Identity(3, 3);
  CHECK_THROWS_AS(aux_walk(degenerate, tree), ModelError);
}

TEST_CASE("balanced posteriors certify through child sums") {
  auto m = simulate_data(ModelInstance::symmetric3(3, 2, 4, 1.3, 0.4, 2.2),
                         0.0, 42);
  const Matrix q = posterior_precision(m);
  const auto result = check_symmetry(q, m.tree, 1e-9);
  REQUIRE(std::holds_alternative<SymmetryCertificate>(result));
  const auto& cert = std::get<SymmetryCertificate>(result);
  CHECK(cert.check == SymmetryCertificate::Check::kChildSums);

  // Certificate entries against the ratio expressions.
  const auto tv = m.normalized_variances();
  const double r_ab = tv.a() / (tv.a() + tv.b());
  const double r_eb = tv.e() / (tv.b() + tv.e());
  CHECK(cert.c(0, 1) ==
        doctest::Approx(std::sqrt(1.0 - r_ab)).epsilon(1e-12));
  CHECK(cert.c(1, 2) ==
        doctest::Approx(std::sqrt(r_ab * r_eb)).epsilon(1e-12));
  CHECK(cert.c(0, 2) == 0.0);
}

TEST_CASE("single-node tree certifies trivially") {
  const auto tree = HierarchyTree::from_parents({-1});
  ModelInstance m;
  m.tree = tree;
  m.node_precision = {0.0};
  m.noise_precision = {1.0};
  m.leaf_count = {3};
  m.leaf_mean = {0.7};
  m.leaf_ssd = {0.1};
  m.has_data = true;
  const Matrix q = posterior_precision(m);
  const auto result = check_symmetry(q, m.tree, 1e-9);
  REQUIRE(std::holds_alternative<SymmetryCertificate>(result));
  CHECK(std::get<SymmetryCertificate>(result).c.rows() == 1);
}

TEST_CASE("heterogeneous replication breaks certification") {
  auto m = simulate_data(
      ModelInstance::nonsymmetric3(1.0, {1.0, 1.0}, {{1.0, 1.0}, {1.0, 1.0}},
                                   {{1, 7}, {2, 3}}),
      0.0, 43);
  const auto result =
      check_symmetry(posterior_precision(m), m.tree, 1e-9);
  REQUIRE(std::holds_alternative<SymmetryRejection>(result));
  const auto& rej = std::get<SymmetryRejection>(result);
  CHECK(rej.deviation > 1e-9);
  CHECK(rej.node_a >= 0);
}

TEST_CASE("weakly symmetric instances certify on irregular trees") {
  std::mt19937_64 gen(44);
  for (int rep = 0; rep < 10; ++rep) {
    const auto tree = testutil::random_tree(gen, 4);
    const auto m = simulate_data(
        weakly_symmetric(tree,
                         {testutil::log_uniform(gen, 0.3, 3.0),
                          testutil::log_uniform(gen, 0.3, 3.0),
                          testutil::log_uniform(gen, 0.3, 3.0)},
                         testutil::log_uniform(gen, 0.3, 3.0)),
        0.0, gen());
    const Matrix q = posterior_precision(m);
    const auto result = check_symmetry(q, m.tree, 1e-9);
    REQUIRE(std::holds_alternative<SymmetryCertificate>(result));
    // The walk is the natural one: uniform over children.
    const AuxWalk walk = aux_walk(q, m.tree);
    for (int t = 1; t < m.tree.size(); ++t) {
      const double expect =
          1.0 / static_cast<double>(m.tree.children(m.tree.parent(t)).size());
      CHECK(walk.step[t] == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("child-sum certificates extend to every comparable pair") {
  std::mt19937_64 gen(48);
  for (int rep = 0; rep < 10; ++rep) {
    const auto tree = testutil::random_tree(gen, 4);
    const auto m = simulate_data(
        weakly_symmetric(tree,
                         {testutil::log_uniform(gen, 0.3, 3.0),
                          testutil::log_uniform(gen, 0.3, 3.0),
                          testutil::log_uniform(gen, 0.3, 3.0)},
                         testutil::log_uniform(gen, 0.3, 3.0)),
        0.0, gen());
    const Matrix q = posterior_precision(m);
    const auto result = check_symmetry(q, m.tree, 1e-9);
    REQUIRE(std::holds_alternative<SymmetryCertificate>(result));
    const auto& cert = std::get<SymmetryCertificate>(result);
    const Matrix rho = partial_correlations(q);
    const AuxWalk walk = aux_walk(q, m.tree);
    for (int r = 0; r < m.tree.size(); ++r) {
      for (int t = 0; t < m.tree.size(); ++t) {
        if (t == r || !m.tree.is_ancestor_or_self(r, t)) continue;
        const double expect = cert.c(m.tree.level(r), m.tree.level(t)) *
                              std::sqrt(walk.cond(t, r));
        CHECK(rho(t, r) == doctest::Approx(expect).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("rescaling puts walk marginals on the diagonal") {
  auto m = simulate_data(ModelInstance::symmetric3(3, 4, 2, 0.9, 1.7, 0.8),
                         0.0, 45);
  const Matrix q = posterior_precision(m);
  const AuxWalk walk = aux_walk(q, m.tree);
  const Rescaling scaled = rescale(q, walk);
  for (int t = 0; t < m.tree.size(); ++t)
    CHECK(scaled.q_tilde(t, t) ==
          doctest::Approx(walk.marginal[t]).epsilon(1e-12));
  // Rescaling never moves partial correlations.
  const Matrix before = partial_correlations(q);
  const Matrix after = partial_correlations(scaled.q_tilde);
  CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
  // Already-rescaled input gets the identity scaling.
  const Rescaling again = rescale(scaled.q_tilde, walk);
  CHECK((again.scale - Vector::Ones(m.tree.size())).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("rescaled off-diagonals are level constants times joint weights") {
  std::mt19937_64 gen(46);
  const auto tree = testutil::random_tree(gen, 3);
  const auto m = simulate_data(weakly_symmetric(tree, {1.1, 0.7}, 1.9), 0.0,
                               gen());
  const Matrix q = posterior_precision(m);
  const auto result = check_symmetry(q, m.tree, 1e-9);
  REQUIRE(std::holds_alternative<SymmetryCertificate>(result));
  const auto& cert = std::get<SymmetryCertificate>(result);
  const AuxWalk walk = aux_walk(q, m.tree);
  const Rescaling scaled = rescale(q, walk);
  for (int t = 1; t < m.tree.size(); ++t) {
    const int p = m.tree.parent(t);
    const double expect =
        cert.c(m.tree.level(p), m.tree.level(t)) * walk.joint(t, p);
    CHECK(-scaled.q_tilde(t, p) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("level-constant reparametrizations preserve certification") {
  std::mt19937_64 gen(47);
  const auto tree = testutil::random_tree(gen, 4);
  const auto m = simulate_data(weakly_symmetric(tree, {0.8, 1.2, 0.5}, 1.4),
                               0.0, gen());
  const Matrix q = posterior_precision(m);
  for (const std::string code : {"nnn", "ncn", "cnn", "ccn", "ncc"}) {
    const auto assign = CenteringAssignment::from_shorthand(tree, code);
    const Matrix qb = Reparametrization::from_centering(assign, tree)
                          .apply_to_precision(q);
    const auto result = check_symmetry(qb, tree, 1e-7);
    CHECK(std::holds_alternative<SymmetryCertificate>(result));
  }
}
