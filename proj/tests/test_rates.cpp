#include <doctest.h>

#include <cmath>
#include <random>

#include "hiergibbs/errors.hpp"
#include "hiergibbs/gibbs.hpp"
#include "hiergibbs/rates.hpp"
#include "hiergibbs/reparam.hpp"
#include "hiergibbs/rng.hpp"
#include "hiergibbs/symmetry.hpp"
#include "test_util.hpp"

using namespace hiergibbs;

TEST_CASE("spectral rate closed forms on tiny targets") {
  Matrix q(2, 2);
  q << 1, 0.6, 0.6, 1;
  CHECK(spectral_rate(q) == doctest::Approx(0.36).epsilon(1e-12));

  const Matrix diag = Matrix::Identity(4, 4) * 3.0;
  CHECK(spectral_rate(diag) == doctest::Approx(0.0));

  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(spectral_rate(bad), ModelError);
}

TEST_CASE("three-level closed forms at pinned points") {
  const auto r1 = closed_form_rates_3(NormalizedVariances::of3(1, 1, 1));
  CHECK(r1.cc == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(r1.nn == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r1.cn == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(r1.nc == doctest::Approx(0.5).epsilon(1e-14));

  const auto r2 = closed_form_rates_3(NormalizedVariances::of3(2, 1, 1));
  CHECK(r2.cc == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(r2.nn == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(r2.cn == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(r2.nc == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  // High-noise regime; values frozen from an independent evaluation of the
  // formulas at 30-digit precision.
  const auto r3 = closed_form_rates_3(NormalizedVariances::of3(1, 1e-5, 0.002));
  CHECK(std::abs(r3.cc - 0.995024925372636821) < 1e-15);
  CHECK(std::abs(r3.nn - 0.998003992015968064) < 1e-15);
  CHECK(std::abs(r3.cn - 0.00696120197416113048) < 1e-15);
  CHECK(std::abs(r3.nc - 0.999990000099999) < 1e-12);
}

TEST_CASE("three-level closed forms agree with the assembled sampler") {
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 50; ++rep) {
    const int I = 2 + static_cast<int>(gen() % 3);
    const int J = 1 + static_cast<int>(gen() % 4);
    const int K = 1 + static_cast<int>(gen() % 4);
    const double ta = testutil::log_uniform(gen);
    const double tb = testutil::log_uniform(gen);
    const double te = testutil::log_uniform(gen);
    auto m = simulate_data(testutil::s3_with_tvars(I, J, K, ta, tb, te), 0.0,
                           gen());
    const Matrix q = posterior_precision(m);
    const Rates3 rates =
        closed_form_rates_3(NormalizedVariances::of3(ta, tb, te));
    const char* names[] = {"cc", "nn", "cn", "nc"};
    const double expect[] = {rates.cc, rates.nn, rates.cn, rates.nc};
    for (int i = 0; i < 4; ++i) {
      const auto assign = CenteringAssignment::from_shorthand(m.tree, names[i]);
      const Matrix qb = Reparametrization::from_centering(assign, m.tree)
                            .apply_to_precision(q);
      CHECK(std::abs(spectral_rate(qb) - expect[i]) < 1e-10);
    }
  }
}

TEST_CASE("oracle agreement holds at scale and at extreme ratios") {
  const auto check = [](const ModelInstance& m, double ta, double tb,
                        double te) {
    const Matrix q = posterior_precision(m);
    const Rates3 rates =
        closed_form_rates_3(NormalizedVariances::of3(ta, tb, te));
    const char* names[] = {"cc", "nn", "cn", "nc"};
    const double expect[] = {rates.cc, rates.nn, rates.cn, rates.nc};
    for (int i = 0; i < 4; ++i) {
      const auto assign =
          CenteringAssignment::from_shorthand(m.tree, names[i]);
      const Matrix qb = Reparametrization::from_centering(assign, m.tree)
                            .apply_to_precision(q);
      CHECK(std::abs(spectral_rate(qb) - expect[i]) < 1e-10);
    }
  };
  // 183 nodes: well inside the supported dense-analysis regime.
  check(simulate_data(testutil::s3_with_tvars(13, 13, 2, 0.7, 2.2, 0.4), 0.0,
                      201),
        0.7, 2.2, 0.4);
  // Ten orders of magnitude between the largest and smallest tvar.
  check(simulate_data(testutil::s3_with_tvars(3, 2, 2, 1e3, 1.0, 1e-3), 0.0,
                      202),
        1e3, 1.0, 1e-3);
  check(simulate_data(testutil::s3_with_tvars(3, 2, 2, 1e-3, 1.0, 1e3), 0.0,
                      203),
        1e-3, 1.0, 1e3);
}

TEST_CASE("four-level closed forms at the equal-variance point") {
  const auto rates =
      closed_form_rates_4(NormalizedVariances::of4(1, 1, 1, 1));
  CHECK(rates[0b111] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(rates[0b000] - 0.853553390593273762) < 1e-15);
}

TEST_CASE("four-level closed forms collapse as the top variance vanishes") {
  const auto rates = closed_form_rates_4(
      NormalizedVariances::of4(1e-12, 0.7, 1.3, 2.1));
  const auto three = closed_form_rates_3(NormalizedVariances::of3(0.7, 1.3,
                                                                   2.1));
  CHECK(std::abs(rates[0b100] - three.cc) < 1e-9);
  CHECK(std::abs(rates[0b111] - three.nn) < 1e-9);
  CHECK(std::abs(rates[0b101] - three.cn) < 1e-9);
  CHECK(std::abs(rates[0b110] - three.nc) < 1e-9);
}

TEST_CASE("k-level centred rate via the two-band matrix") {
  // Chain model: all variances 1, single branch everywhere.
  CHECK(symmetric_cp_rate_k({1.0, 1.0}, 1.0, {1, 1}, 1) ==
        doctest::Approx(0.75).epsilon(1e-12));

  // Two levels: the classic ratio.
  for (double tau_a : {0.3, 1.0, 4.0}) {
    for (int J : {1, 5, 40}) {
      const double tau_e = 0.7;
      const double expect = tau_a / (tau_a + J * tau_e);
      CHECK(symmetric_cp_rate_k({tau_a}, tau_e, {3}, J) ==
            doctest::Approx(expect).epsilon(1e-12));
    }
  }

  // Data-rich two-level limit drives the centred rate to zero; deeper
  // hierarchies need every layer to widen.
  CHECK(symmetric_cp_rate_k({1.0}, 1.0, {3}, 1 << 20) < 1e-4);
  CHECK(symmetric_cp_rate_k({1.0, 1.0}, 1.0, {1 << 10, 1 << 10}, 1 << 10) <
        1e-2);
}

TEST_CASE("k-level centred rate cross-checked against the sampler") {
  std::mt19937_64 gen(22);
  for (int rep = 0; rep < 10; ++rep) {
    const std::vector<int> branching{2 + static_cast<int>(gen() % 2),
                                     1 + static_cast<int>(gen() % 3),
                                     1 + static_cast<int>(gen() % 2)};
    std::vector<double> tau{testutil::log_uniform(gen),
                            testutil::log_uniform(gen),
                            testutil::log_uniform(gen)};
    const double tau_e = testutil::log_uniform(gen);
    const int J = 1 + static_cast<int>(gen() % 3);
    std::vector<double> level_var;
    for (double t : tau) level_var.push_back(1.0 / t);
    auto m = simulate_data(
        ModelInstance::symmetric_k(branching, level_var, 1.0 / tau_e, J), 0.0,
        gen());
    const double expect = symmetric_cp_rate_k(tau, tau_e, branching, J);
    CHECK(std::abs(spectral_rate(posterior_precision(m)) - expect) < 1e-10);
  }
}

TEST_CASE("two-level per-branch rate formula") {
  CHECK(bespoke_rate_2({0, 1}, 1.0, {4.0, 0.25}) ==
        doctest::Approx(0.2).epsilon(1e-14));
  CHECK(bespoke_rate_2({0, 0}, 1.0, {4.0, 0.25}) ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(bespoke_rate_2({1, 0}, 1.0, {4.0, 0.25}) ==
        doctest::Approx(0.8).epsilon(1e-14));
  CHECK(bespoke_rate_2({1, 1}, 1.0, {4.0, 0.25}) ==
        doctest::Approx(13.0 / 17.0).epsilon(1e-14));

  // Symmetric all-centred: the classic ratio again.
  CHECK(bespoke_rate_2({0, 0, 0}, 2.0, {3.0, 3.0, 3.0}) ==
        doctest::Approx(2.0 / 5.0).epsilon(1e-14));

  // One group: the two options sum to one.
  const double c = bespoke_rate_2({0}, 1.7, {0.4});
  const double n = bespoke_rate_2({1}, 1.7, {0.4});
  CHECK(c + n == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("per-branch rate matches the assembled two-level sampler") {
  std::mt19937_64 gen(23);
  for (int rep = 0; rep < 25; ++rep) {
    const int I = 2 + static_cast<int>(gen() % 4);
    std::vector<double> tau_e;
    std::vector<int> J;
    std::vector<double> tau_tilde;
    for (int i = 0; i < I; ++i) {
      tau_e.push_back(testutil::log_uniform(gen));
      J.push_back(1 + static_cast<int>(gen() % 4));
      tau_tilde.push_back(J.back() * tau_e.back());
    }
    const double tau_a = testutil::log_uniform(gen);
    auto m = simulate_data(ModelInstance::two_level(tau_a, tau_e, J), 0.0,
                           gen());
    const Matrix q = posterior_precision(m);
    std::vector<int> lambda(I);
    for (int i = 0; i < I; ++i) lambda[i] = static_cast<int>(gen() % 2);
    CenteringAssignment assign{std::vector<int>(I + 1, 0)};
    for (int i = 0; i < I; ++i) assign.lambda[1 + i] = lambda[i];
    const Matrix qb = Reparametrization::from_centering(assign, m.tree)
                          .apply_to_precision(q);
    CHECK(std::abs(spectral_rate(qb) -
                   bespoke_rate_2(lambda, tau_a, tau_tilde)) < 1e-10);
  }
}

TEST_CASE("centred-parametrization bound on heterogeneous models") {
  std::mt19937_64 gen(24);
  int applicable_seen = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const int I = 2 + static_cast<int>(gen() % 3);
    std::vector<double> var_b;
    std::vector<std::vector<double>> var_e;
    std::vector<std::vector<int>> K;
    for (int i = 0; i < I; ++i) {
      const int J = 1 + static_cast<int>(gen() % 3);
      var_b.push_back(testutil::log_uniform(gen, 0.1, 10.0));
      var_e.push_back({});
      K.push_back({});
      for (int j = 0; j < J; ++j) {
        var_e.back().push_back(testutil::log_uniform(gen, 0.1, 10.0));
        K.back().push_back(1 + static_cast<int>(gen() % 4));
      }
    }
    auto m = simulate_data(ModelInstance::nonsymmetric3(
                               testutil::log_uniform(gen, 0.1, 10.0), var_b,
                               var_e, K),
                           0.0, gen());
    const CpBound3 bound = cp_upper_bound_3(m);
    if (!bound.applicable) continue;
    ++applicable_seen;
    const double exact = spectral_rate(posterior_precision(m));
    CHECK(bound.bound >= exact - 1e-10);
  }
  CHECK(applicable_seen > 10);
}

TEST_CASE("bound is tight on balanced models") {
  std::mt19937_64 gen(25);
  for (int rep = 0; rep < 25; ++rep) {
    const int I = 2 + static_cast<int>(gen() % 3);
    const int J = 1 + static_cast<int>(gen() % 3);
    const int K = 1 + static_cast<int>(gen() % 3);
    auto m = simulate_data(
        ModelInstance::symmetric3(I, J, K, testutil::log_uniform(gen),
                                  testutil::log_uniform(gen),
                                  testutil::log_uniform(gen)),
        0.0, gen());
    const CpBound3 bound = cp_upper_bound_3(m);
    REQUIRE(bound.applicable);
    const double exact = spectral_rate(posterior_precision(m));
    CHECK(std::abs(bound.bound - exact) < 1e-10);
  }
}

TEST_CASE("replication-rich groups eventually admit the bound") {
  // Scaling every replicate count pushes the ratio condition toward holding.
  auto build = [](int k_scale) {
    return ModelInstance::nonsymmetric3(
        1.0, {0.5, 2.0}, {{1.0, 3.0}, {2.0, 0.7}},
        {{k_scale, 2 * k_scale}, {k_scale, k_scale}});
  };
  bool seen_applicable = false;
  double last_bound = 1.0;
  for (int scale : {1, 4, 16, 64, 256}) {
    const auto m = simulate_data(build(scale), 0.0, 2);
    const CpBound3 bound = cp_upper_bound_3(m);
    if (bound.applicable) {
      seen_applicable = true;
      CHECK(bound.bound <= last_bound + 1e-12);
      last_bound = bound.bound;
    }
  }
  CHECK(seen_applicable);
  // The large-replication limit of the bound: one minus the mean top ratio.
  const auto m = simulate_data(build(1 << 16), 0.0, 2);
  const CpBound3 bound = cp_upper_bound_3(m);
  double mean_rab = 0.0;
  for (double r : bound.r_ab) mean_rab += r;
  mean_rab /= static_cast<double>(bound.r_ab.size());
  CHECK(bound.applicable);
  CHECK(std::abs(bound.bound - (1.0 - mean_rab)) < 1e-3);
}

TEST_CASE("residual-chain rates from a level-ratio matrix") {
  const double c0 = 0.3, c1 = 0.45;
  Matrix c(3, 3);
  c << 1, std::sqrt(c0), 0, std::sqrt(c0), 1, std::sqrt(c1), 0, std::sqrt(c1),
      1;
  CHECK(cp_rate_k(c) == doctest::Approx(c0 + c1).epsilon(1e-12));
  CHECK(subchain_rate(c, 0) == doctest::Approx(c0 + c1).epsilon(1e-12));
  CHECK(subchain_rate(c, 2) == doctest::Approx(0.0));

  // Trailing minors interlace: rates fall with the coarseness index.
  std::mt19937_64 gen(26);
  std::uniform_real_distribution<double> u(0.05, 0.45);
  for (int rep = 0; rep < 40; ++rep) {
    Matrix cm = Matrix::Identity(4, 4);
    for (int d = 0; d + 1 < 4; ++d) {
      cm(d, d + 1) = std::sqrt(u(gen));
      cm(d + 1, d) = cm(d, d + 1);
    }
    double prev = 1.0;
    for (int p = 0; p < 4; ++p) {
      const double rp = subchain_rate(cm, p);
      CHECK(rp <= prev + 1e-12);
      prev = rp;
    }
    CHECK(subchain_rate(cm, 3) == doctest::Approx(0.0));
    CHECK(std::abs(subchain_rate(cm, 0) - cp_rate_k(cm)) < 1e-12);
  }
}

TEST_CASE("diagonal growth never slows the centred sweep") {
  std::mt19937_64 gen(27);
  for (int rep = 0; rep < 20; ++rep) {
    auto m = testutil::random_model(gen, 3);
    Matrix q = posterior_precision(m);
    const double base = spectral_rate(q);
    const auto& leaves = m.tree.leaves();
    const int leaf = leaves[gen() % leaves.size()];
    q(leaf, leaf) *= 1.0 + 0.5 * (gen() % 5);
    CHECK(spectral_rate(q) <= base + 1e-12);
  }
}

TEST_CASE("empirical rate on a synthetic autoregression") {
  const int n = 100000;
  Matrix x(n, 1);
  const CounterRng rng(404);
  double v = 0.0;
  for (int s = 0; s < n; ++s) {
    v = 0.9 * v + rng.normal(1, s);
    x(s, 0) = v;
  }
  const auto est = empirical_rate(x, 0, {0}, 17);
  CHECK(std::abs(est.estimate - 0.9) < 0.02);
  CHECK(est.stderr_est < 0.02);
  CHECK_FALSE(est.widened);
}

TEST_CASE("empirical rate on sampled chains") {
  auto m = simulate_data(testutil::s3_with_tvars(2, 2, 2, 1.0, 1.0, 1.0), 0.0,
                         405);
  RunOptions opts;
  opts.iters = 100000;
  opts.seed = 406;
  // Centred scheme: the top residual chain carries the analytic rate 0.75.
  const Trace cp = run_chain(m, CenteringAssignment::all_centred(m.tree), opts);
  const Matrix skel = level_means(cp, m.tree);
  const auto cp_est = empirical_rate(skel, 1000, {0, 1, 2}, 407);
  CHECK(std::abs(cp_est.estimate - 0.75) < 0.03);

  // Decorrelated scheme: nothing to estimate but noise.
  const auto pncp = optimal_pncp(posterior_precision(m), m.tree);
  const Trace iid = run_chain(m, pncp.lambda, opts);
  std::vector<int> all_coords;
  for (int t = 0; t < m.tree.size(); ++t) all_coords.push_back(t);
  const auto iid_est = empirical_rate(iid.states, 1000, all_coords, 408);
  CHECK(iid_est.estimate < 0.05);
}

TEST_CASE("empirical rate refuses short traces") {
  Matrix x = Matrix::Zero(500, 1);
  CHECK_THROWS_AS(empirical_rate(x, 0, {0}, 1), ModelError);
}

TEST_CASE("empirical rate flags a degenerate covariance") {
  Matrix x = Matrix::Zero(2000, 2);
  const CounterRng rng(7);
  for (int s = 0; s < 2000; ++s) {
    x(s, 0) = rng.normal(1, s);
    x(s, 1) = 2.0 * x(s, 0);  // exactly collinear
  }
  const auto est = empirical_rate(x, 0, {0, 1}, 3);
  CHECK(est.widened);
}
