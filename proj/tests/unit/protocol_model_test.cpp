#include <cowqkd/errors.hpp>
#include <cowqkd/protocol_model.hpp>

#include <doctest.h>
#include <oracles.hpp>

#include <bit>
#include <cmath>
#include <functional>
#include <map>

using namespace cowqkd;

namespace {

BlockConfig make(int m, double mu, PhaseMode mode = PhaseMode::pure, int n_cut = 2) {
  BlockConfig c;
  c.m = m;
  c.mu = mu;
  c.phase_mode = mode;
  c.n_cut = n_cut;
  return c;
}

// <psi_n^i|psi_n^j> by expanding both n-photon states over Fock occupation
// vectors of the 2m slots: amplitude sqrt(n!/prod k_s!) m^{-n/2} on vectors
// supported by the occupied slots of the pattern.
double fock_overlap(int m, int n, int i, int j) {
  const int slots = 2 * m;
  std::vector<int> k(slots, 0);
  double total = 0.0;
  std::function<void(int, int)> rec = [&](int s, int left) {
    if (s == slots - 1) {
      k[s] = left;
      double amp_i = 1.0, amp_j = 1.0, multinom = std::tgamma(n + 1.0);
      for (int t = 0; t < slots; ++t) {
        multinom /= std::tgamma(k[t] + 1.0);
        if (k[t] > 0 && !occupied(i, t, m)) amp_i = 0.0;
        if (k[t] > 0 && !occupied(j, t, m)) amp_j = 0.0;
      }
      total += amp_i * amp_j * multinom / std::pow(m, n);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      k[s] = c;
      rec(s + 1, left - c);
    }
  };
  rec(0, n);
  return total;
}

std::vector<int> bits(int i, int m) {
  std::vector<int> b(m);
  for (int l = 0; l < m; ++l) b[l] = bit_of(i, l, m);
  return b;
}

CMatrix sx() {
  CMatrix s(2, 2);
  s << 0, 1, 1, 0;
  return s;
}

}  // namespace

TEST_SUITE("protocol_model") {
  TEST_CASE("configuration validation") {
    CHECK_THROWS_AS(make(1, 0.1).validate(), ArgumentError);
    CHECK_THROWS_AS(make(3, 0.0).validate(), ArgumentError);
    CHECK_THROWS_AS(make(3, 0.1, PhaseMode::randomized, 0).validate(), ArgumentError);
    CHECK(parse_phase_mode("randomized") == PhaseMode::randomized);
    CHECK_THROWS(parse_phase_mode("coherent"));
    CHECK(make(3, 0.1).bob_dim() == 7);
    CHECK(make(3, 0.1, PhaseMode::randomized).alice_dim() == 24);
  }

  TEST_CASE("single-bit marginal of the pure source") {
    for (double mu : {0.01, 0.1, 1.0}) {
      const auto rho = reduced_alice_state(make(2, mu));
      const auto one = partial_trace(rho, {0});
      CHECK(one(0, 0).real() == doctest::Approx(0.5));
      CHECK(one(1, 1).real() == doctest::Approx(0.5));
      CHECK(one(0, 1).real() == doctest::Approx(std::exp(-mu) / 2).epsilon(1e-13));
      CHECK(std::abs(one(0, 1).imag()) < 1e-15);
    }
    const auto far = partial_trace(reduced_alice_state(make(2, 60.0)), {1});
    CHECK(far.matrix().isApprox(CMatrix::Identity(2, 2) / 2.0, 1e-12));
  }

  TEST_CASE("randomized one-photon shield block follows the Gram formula") {
    const auto cfg = make(2, 0.2, PhaseMode::randomized);
    const auto rho = reduced_alice_state(cfg);
    const int levels = cfg.shield_dim();
    const double lambda = 2 * 0.2;
    const double p1 = lambda * std::exp(-lambda);
    CMatrix block(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const int delta = (bit_of(i, 0, 2) != bit_of(j, 0, 2)) + (bit_of(i, 1, 2) != bit_of(j, 1, 2));
        const double expect = ((2.0 - delta) / 2.0) / 4.0;
        block(i, j) = rho(i * levels, j * levels) / p1;
        CHECK(block(i, j).real() == doctest::Approx(expect).epsilon(1e-12));
      }
    CHECK(block.trace().real() == doctest::Approx(1.0));
    CHECK(min_eigenvalue(HermitianOperator(block)) > -1e-14);
  }

  TEST_CASE("gram overlap against explicit multinomial expansion") {
    CHECK(gram_overlap(3, 5, {0, 1, 1}, {0, 1, 1}) == doctest::Approx(1.0));
    CHECK(gram_overlap(2, 1, {0, 0}, {1, 1}) == doctest::Approx(0.0));
    CHECK(gram_overlap(3, 2, {0, 0, 0}, {0, 0, 1}) == doctest::Approx(4.0 / 9.0));
    CHECK(fock_overlap(3, 2, 0b000, 0b001) == doctest::Approx(4.0 / 9.0));
    for (int m = 2; m <= 3; ++m)
      for (int n = 0; n <= 4; ++n)
        for (int i = 0; i < (1 << m); ++i)
          for (int j = 0; j < (1 << m); ++j)
            CHECK(gram_overlap(m, n, bits(i, m), bits(j, m)) == doctest::Approx(fock_overlap(m, n, i, j)).epsilon(1e-12));
  }

  TEST_CASE("photon-number blocks are PSD with unit trace") {
    for (int m = 2; m <= 4; ++m)
      for (int n = 0; n <= 6; ++n) {
        const auto g = photon_block_state(m, n);
        CHECK(min_eigenvalue(g) > -1e-12);
        CHECK(g.trace() == doctest::Approx(1.0));
      }
  }

  TEST_CASE("reduced source state is a density matrix") {
    for (auto mode : {PhaseMode::pure, PhaseMode::randomized})
      for (int m = 2; m <= 5; ++m)
        for (double mu : {1e-3, 0.1, 1.0}) {
          const auto rho = reduced_alice_state(make(m, mu, mode));
          CHECK(min_eigenvalue(rho) > -1e-10);
          CHECK(rho.trace() == doctest::Approx(1.0).epsilon(1e-10));
        }
  }

  TEST_CASE("Walsh basis diagonalizes each shield block with the reported spectrum") {
    for (auto mode : {PhaseMode::pure, PhaseMode::randomized}) {
      const auto cfg = make(3, 0.3, mode);
      const auto rho = reduced_alice_state(cfg).matrix();
      const auto spec = alice_spectrum(cfg);
      const Eigen::MatrixXd w = walsh_matrix(3);
      const int levels = cfg.shield_dim();
      REQUIRE(static_cast<int>(spec.weight.size()) == levels);
      for (int s = 0; s < levels; ++s) {
        CMatrix block(8, 8);
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) block(i, j) = rho(i * levels + s, j * levels + s);
        const CMatrix d = w.transpose().cast<Complex>() * block * w.cast<Complex>();
        for (int k = 0; k < 8; ++k) {
          CHECK(d(k, k).real() == doctest::Approx(spec.weight[s] * spec.values[s][k]).epsilon(1e-12));
          for (int l = 0; l < 8; ++l)
            if (l != k) CHECK(std::abs(d(k, l)) < 1e-13);
        }
      }
    }
  }

  TEST_CASE("POVM families are complete and PSD") {
    const auto povm2 = bob_povm(make(2, 0.1));
    REQUIRE(povm2.size() == 2);
    CHECK(povm2[0].conclusive.size() == 4);
    HermitianOperator sum = povm2[0].inconclusive;
    for (const auto& e : povm2[0].conclusive) {
      sum += e;
      CHECK(max_eigenvalue(e) == doctest::Approx(1.0));
      CHECK(e.inner(e) == doctest::Approx(1.0));
    }
    CHECK(sum.matrix().isApprox(CMatrix::Identity(5, 5)));
    CHECK(povm2[0].inconclusive(4, 4).real() == doctest::Approx(1.0));

    const CVector plus = chi(2, 0, +1), minus = chi(2, 0, -1);
    const CMatrix& b = povm2[1].conclusive[0].matrix();
    CHECK((plus.adjoint() * b * plus)(0, 0).real() == doctest::Approx(1.0));
    CHECK(std::abs((minus.adjoint() * b * minus)(0, 0)) < 1e-15);

    for (const auto& setting : bob_povm(make(3, 0.1))) {
      HermitianOperator conclusive = HermitianOperator::zero(SubsystemLayout({7}));
      for (const auto& e : setting.conclusive) {
        CHECK(min_eigenvalue(e) > -1e-14);
        conclusive += e;
      }
      CHECK(max_eigenvalue(conclusive) <= 1.0 + 1e-12);
      CHECK(min_eigenvalue(conclusive) >= -1e-12);
      CHECK(min_eigenvalue(setting.inconclusive) >= -1e-12);
      CHECK((conclusive + setting.inconclusive).matrix().isApprox(CMatrix::Identity(7, 7)));
    }
  }

  TEST_CASE("announcement cycles and filter completeness") {
    CHECK(announcements(3).size() == 6);
    CHECK(announcements(4).size() == 8);
    const auto two = announcements(2);
    REQUIRE(two.size() == 2);
    for (const auto& a : two) CHECK(a.weight == doctest::Approx(1.0));

    for (int m = 2; m <= 4; ++m) {
      const auto cfg = make(m, 0.1);
      CMatrix sum = CMatrix::Zero(2 * m + 1, 2 * m + 1);
      std::map<int, int> seen;
      for (const auto& v : announcement_filters(cfg)) {
        sum += v.filter_bob.adjoint() * v.filter_bob;
        ++seen[v.announcement.slot];
        ++seen[v.announcement.partner];
        const CMatrix fa = v.filter_alice;
        CHECK((fa * fa.adjoint()).isApprox(CMatrix::Identity(2, 2)));
        const CMatrix proj = fa.adjoint() * fa;
        CHECK((proj * proj - proj).norm() < 1e-14);
        CHECK(proj.trace().real() == doctest::Approx(2.0));
      }
      CMatrix expect = CMatrix::Identity(2 * m + 1, 2 * m + 1);
      expect(2 * m, 2 * m) = 0.0;
      CHECK((sum - expect).norm() < 1e-14);
      for (int s = 0; s < 2 * m; ++s) CHECK(seen[s] == (m == 2 ? 1 : 2));
    }
  }

  TEST_CASE("gain operator") {
    const auto cfg = make(2, 0.1);
    const auto p = gain_operator(cfg);
    const auto layout = cfg.joint_layout();
    const auto rho_a = reduced_alice_state(cfg);
    CVector a = CVector::Zero(5);
    a(4) = 1.0;
    const auto inconclusive = kron(rho_a.relabeled(SubsystemLayout({4})), HermitianOperator::projector(a));
    CHECK(std::abs(inconclusive.relabeled(layout).inner(p)) < 1e-15);

    // Pattern 01 puts pulses in slots 0 and 3; a click in slot 0 is announced
    // as the pair (0, 2) whose two bits differ, which Alice's filter accepts.
    CVector pattern = CVector::Zero(4), click = CVector::Zero(5);
    pattern(0b01) = 1.0;
    click(0) = 1.0;
    const auto conclusive = kron(HermitianOperator::projector(pattern), HermitianOperator::projector(click));
    const double g = conclusive.relabeled(layout).inner(p);
    CHECK(g > 0.0);
    CHECK(g <= 1.0 + 1e-12);

    for (int m = 2; m <= 4; ++m) {
      const auto pm = gain_operator(make(m, 0.1));
      CHECK(max_eigenvalue(pm) <= 1.0 + 1e-12);
      CHECK(min_eigenvalue(pm) >= -1e-12);
    }
  }

  TEST_CASE("phase-error operator") {
    for (int m = 2; m <= 4; ++m) CHECK(std::abs(phase_error_x(make(m, 0.1)).trace()) < 1e-12);

    const auto cfg = make(3, 0.1);
    const auto v = announcement_filters(cfg).front();
    const CMatrix xb = 0.5 * v.filter_bob.adjoint() * sx() * v.filter_bob;
    const auto ev = eigenvalues(HermitianOperator(xb));
    CHECK(ev(0) == doctest::Approx(-0.25));
    CHECK(ev(ev.size() - 1) == doctest::Approx(0.25));
    for (int k = 1; k + 1 < ev.size(); ++k) CHECK(std::abs(ev(k)) < 1e-14);

    // 0 <= tr(rho F) <= tr(rho P) on random separable states.
    const auto cfg2 = make(2, 0.1);
    const auto f = phase_error_objective(cfg2);
    const auto p = gain_operator(cfg2);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
      CMatrix rho = CMatrix::Zero(20, 20);
      for (int term = 0; term < 3; ++term)
        rho += u(rng) * oracle::brute_kron(oracle::random_density(4, rng), oracle::random_density(5, rng));
      rho /= rho.trace().real();
      const HermitianOperator r(cfg2.joint_layout(), rho);
      const double fv = r.inner(f), pv = r.inner(p);
      CHECK(fv >= -1e-12);
      CHECK(fv <= pv + 1e-12);
    }
  }

  TEST_CASE("randomized operators act as identity on the shield") {
    const auto pure = make(2, 0.1);
    const auto rnd = make(2, 0.1, PhaseMode::randomized);
    const int levels = rnd.shield_dim(), nb = rnd.bob_dim();
    const std::pair<HermitianOperator, HermitianOperator> pairs[] = {
        {gain_operator(pure), gain_operator(rnd)}, {phase_error_objective(pure), phase_error_objective(rnd)}};
    for (const auto& [small, big] : pairs) {
      double err = 0.0;
      for (int i = 0; i < 4; ++i)
        for (int s = 0; s < levels; ++s)
          for (int b = 0; b < nb; ++b)
            for (int j = 0; j < 4; ++j)
              for (int t = 0; t < levels; ++t)
                for (int c = 0; c < nb; ++c) {
                  const Complex expect = s == t ? small(i * nb + b, j * nb + c) : Complex(0.0);
                  err = std::max(err, std::abs(big((i * levels + s) * nb + b, (j * levels + t) * nb + c) - expect));
                }
      CHECK(err < 1e-15);
    }
  }
}
