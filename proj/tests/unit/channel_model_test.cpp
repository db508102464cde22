#include <cowqkd/channel_model.hpp>
#include <cowqkd/errors.hpp>

#include <doctest.h>

#include <cmath>

using namespace cowqkd;

namespace {

BlockConfig make(int m, double mu, PhaseMode mode = PhaseMode::pure) {
  BlockConfig c;
  c.m = m;
  c.mu = mu;
  c.phase_mode = mode;
  return c;
}

ChannelParams channel(double eta, double eps, double ed, double em) {
  ChannelParams p;
  p.eta_channel = eta;
  p.epsilon = eps;
  p.e_d = ed;
  p.e_m = em;
  return p;
}

// Sifted gain, error rate and the variance weight sum_{i,d} (a_{i,d} / 2^m)^2
// rebuilt from per-(pattern, slot) data-line probabilities and the
// announcement filters, without the closed-form sifting sum. a_{i,d} is the
// sifting acceptance of a click in slot d for pattern i.
struct Sifted {
  double gain = 0.0;
  double bit_error = 0.0;
};
template <typename Prob>
Sifted sift(const BlockConfig& cfg, Prob prob) {
  const int m = cfg.m;
  double gain = 0.0, errors = 0.0;
  const auto filters = announcement_filters(cfg);
  for (int i = 0; i < cfg.bits_dim(); ++i)
    for (int d = 0; d < 2 * m; ++d)
      for (const auto& v : filters) {
        if (d != v.announcement.slot && d != v.announcement.partner) continue;
        const int l = v.announcement.slot / 2, lp = v.announcement.partner / 2;
        const int q = 2 * bit_of(i, l, m) + bit_of(i, lp, m);
        const double zero = std::norm(v.filter_alice(0, q)), one = std::norm(v.filter_alice(1, q));
        const int bob_bit = d == v.announcement.partner ? 1 : 0;
        const double w = v.announcement.weight * prob(i, d);
        gain += w * (zero + one);
        errors += w * (bob_bit == 0 ? one : zero);
      }
  return {gain, errors / gain};
}

Sifted sift_from_constraints(const BlockConfig& cfg, const ConstraintSet& set) {
  std::vector<double> table(cfg.bits_dim() * 2 * cfg.m, 0.0);
  for (const auto& c : set.constraints)
    if (c.kind == Constraint::Kind::data) table[c.pattern * 2 * cfg.m + c.outcome] = c.value;
  return sift(cfg, [&](int i, int d) { return table[i * 2 * cfg.m + d]; });
}

double four_sigma(double p, std::int64_t n) { return 4.0 * std::sqrt(std::max(p * (1 - p), 1.0 / n) / n); }

}  // namespace

TEST_SUITE("channel_model") {
  TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(channel(0.0, 0, 0, 0).validate(), ArgumentError);
    CHECK_THROWS_AS(channel(1.0, 0, 0.5, 0).validate(), ArgumentError);
    CHECK_THROWS_AS(channel(1.0, 0, 0, 0.7).validate(), ArgumentError);
    CHECK_THROWS_AS(channel(1.0, 1.0, 0, 0).validate(), ArgumentError);
    CHECK(ChannelParams::from_loss_db(20).eta_sys() == doctest::Approx(0.01));
    CHECK(ChannelParams::from_loss_db(13.5).loss_db() == doctest::Approx(13.5));
  }

  TEST_CASE("data line limits") {
    const auto cfg = make(3, 0.2);
    const double eta = 0.3, lambda = 0.6;
    const auto clean = data_click_probs(cfg, channel(eta, 0, 0, 0));
    CHECK(clean.p_correct == doctest::Approx(eta * 0.2 * std::exp(-eta * lambda)));
    CHECK(clean.p_error == 0.0);

    const double eps = 1e-3;
    const auto dark = data_click_probs(cfg, channel(1e-15, eps, 0.01, 0.005));
    CHECK(dark.p_correct == doctest::Approx(eps * std::pow(1 - eps, 5)).epsilon(1e-9));
    CHECK(dark.p_error == doctest::Approx(eps * std::pow(1 - eps, 5)).epsilon(1e-9));

    const auto noiseless = data_click_probs(make(2, 0.01), channel(1.0, 0, 0, 0));
    CHECK(noiseless.p_correct == doctest::Approx(9.802e-3).epsilon(1e-4));
  }

  TEST_CASE("single-click probabilities leave 1 - m(p_c + p_e) inconclusive") {
    for (int m = 2; m <= 4; ++m) {
      const auto d = data_click_probs(make(m, 0.3), channel(0.5, 1e-3, 0.02, 0.01));
      CHECK(d.p_inc == doctest::Approx(1.0 - m * (d.p_correct + d.p_error)));
    }
  }

  TEST_CASE("monitoring line limits and visibility") {
    const auto cfg = make(3, 0.2);
    const double eta = 0.4, base = eta * 0.2 * std::exp(-eta * 0.6);
    const auto same = monitoring_click_probs(cfg, channel(eta, 0, 0, 0), PairPattern::same_01);
    CHECK(same.odd_plus == doctest::Approx(2 * base));
    CHECK(same.odd_minus == 0.0);
    CHECK(same.even_plus == 0.0);
    const auto mirror = monitoring_click_probs(cfg, channel(eta, 0, 0, 0), PairPattern::same_10);
    CHECK(mirror.even_plus == doctest::Approx(2 * base));
    const auto diff = monitoring_click_probs(cfg, channel(eta, 0, 0, 0), PairPattern::different);
    CHECK(diff.odd_plus == doctest::Approx(base / 2));
    CHECK(diff.odd_minus == doctest::Approx(base / 2));

    // Without dark counts the bright slot keeps 1 - 2 e_m of contrast; the
    // data-line flip e_d moves weight out of the bright slot on top of that.
    CHECK(visibility(cfg, channel(eta, 0, 0.0, 0.005)) == doctest::Approx(0.99).epsilon(1e-14));
    CHECK(visibility(cfg, channel(eta, 0, 0.01, 0.005)) == doctest::Approx(0.99 * 0.99).epsilon(1e-14));
    CHECK(visibility(cfg, channel(1e-3, 1e-5, 0.01, 0.005)) < 0.99);
  }

  TEST_CASE("sifted statistics limits") {
    for (int m = 2; m <= 4; ++m)
      for (double eta : {1.0, 0.1, 1e-3}) CHECK(sifted_statistics(make(m, 0.1), channel(eta, 0, 0.013, 0.005)).bit_error == doctest::Approx(0.013).epsilon(1e-12));
    CHECK(sifted_statistics(make(3, 0.1), channel(1e-14, 1e-7, 0.01, 0.005)).bit_error == doctest::Approx(0.5).epsilon(1e-5));
  }

  TEST_CASE("constraint set shape and values") {
    const auto cfg = make(2, 0.1);
    const auto set = observed_constraints(cfg, ChannelParams::from_loss_db(5));
    CHECK(set.constraints.size() == 49);
    int counts[4] = {0, 0, 0, 0};
    for (const auto& c : set.constraints) {
      ++counts[static_cast<int>(c.kind)];
      if (c.kind == Constraint::Kind::data || c.kind == Constraint::Kind::monitoring) {
        CHECK(c.value >= 0.0);
        CHECK(c.value <= 0.25);
      }
    }
    CHECK(counts[0] == 16);
    CHECK(counts[1] == 16);
    CHECK(counts[2] == 16);
    CHECK(counts[3] == 1);

    CHECK(set.constraints.back().op.trace() == doctest::Approx(20.0));
  }

  TEST_CASE("gain and error agree with a filter-based recount") {
    for (int m = 2; m <= 4; ++m)
      for (double loss : {0.0, 10.0, 25.0}) {
        const auto cfg = make(m, 0.05);
        const auto set = observed_constraints(cfg, ChannelParams::from_loss_db(loss), false);
        const auto direct = sift_from_constraints(cfg, set);
        CHECK(set.gain == doctest::Approx(direct.gain).epsilon(1e-12));
        CHECK(set.bit_error == doctest::Approx(direct.bit_error).epsilon(1e-12));
        const auto stats = sifted_statistics(cfg, ChannelParams::from_loss_db(loss));
        CHECK(std::abs(set.gain - stats.gain) <= 1e-12);
      }
  }

  TEST_CASE("monotone behaviour") {
    const auto cfg = make(3, 0.05);
    double prev_g = 2.0, prev_e = 0.0;
    for (double loss = 0; loss <= 40; loss += 5) {
      const auto clean = sifted_statistics(cfg, ChannelParams::from_loss_db(loss, 0.0));
      CHECK(clean.gain <= prev_g);
      prev_g = clean.gain;
      const auto noisy = sifted_statistics(cfg, ChannelParams::from_loss_db(loss));
      CHECK(noisy.bit_error >= prev_e - 1e-15);
      prev_e = noisy.bit_error;
    }
    double last = 0.0;
    for (double ed : {0.0, 0.01, 0.05, 0.2}) {
      const double e = sifted_statistics(cfg, ChannelParams::from_loss_db(15, 1e-7, ed)).bit_error;
      CHECK(e >= last);
      last = e;
    }
  }

  TEST_CASE("Bob statistics do not depend on the phase mode") {
    const auto params = ChannelParams::from_loss_db(7);
    const auto pure = observed_constraints(make(3, 0.1), params, false);
    const auto rnd = observed_constraints(make(3, 0.1, PhaseMode::randomized), params, false);
    std::size_t compared = 0;
    for (std::size_t k = 0; k < pure.constraints.size(); ++k) {
      if (pure.constraints[k].kind == Constraint::Kind::tomography) break;
      CHECK(pure.constraints[k].value == rnd.constraints[k].value);
      ++compared;
    }
    CHECK(compared == 8 * 6 + 8 * 2 * 4);
  }

  TEST_CASE("Monte-Carlo oracle: vacuum, determinism and thread independence") {
    const auto vac = monte_carlo_oracle(make(2, 1e-12), channel(1.0, 0, 0.01, 0.005), 1, 0, 20000, 3);
    for (const auto& f : vac.conclusive) CHECK(f.frequency == 0.0);
    CHECK(vac.inconclusive.frequency == 1.0);

    const auto a = monte_carlo_oracle(make(3, 0.3), channel(0.5, 1e-3, 0.01, 0.005), 6, 1, 50000, 9, 1);
    const auto b = monte_carlo_oracle(make(3, 0.3), channel(0.5, 1e-3, 0.01, 0.005), 6, 1, 50000, 9, 3);
    REQUIRE(a.conclusive.size() == b.conclusive.size());
    for (std::size_t k = 0; k < a.conclusive.size(); ++k) CHECK(a.conclusive[k].frequency == b.conclusive[k].frequency);
    CHECK(a.inconclusive.frequency == b.inconclusive.frequency);
  }

  TEST_CASE("Monte-Carlo oracle reproduces the noiseless data-line click") {
    const auto cfg = make(2, 0.01);
    const auto params = channel(1.0, 0, 0, 0);
    const double p = data_click_probs(cfg, params).p_correct;
    const std::int64_t n = 10'000'000;
    const auto tab = monte_carlo_oracle(cfg, params, 0b10, 0, n, 17);
    // Pattern 10 occupies slots 1 and 2.
    CHECK(std::abs(tab.conclusive[1].frequency - p) < four_sigma(p, n));
    CHECK(std::abs(tab.conclusive[2].frequency - p) < four_sigma(p, n));
    CHECK(tab.conclusive[0].frequency == 0.0);

    // Sifted gain from sampled click frequencies of every pattern.
    std::vector<OracleTable> tables;
    for (int i = 0; i < 4; ++i) tables.push_back(monte_carlo_oracle(cfg, params, i, 0, n / 4, 100 + i));
    const auto sampled = sift(cfg, [&](int i, int d) { return tables[i].conclusive[d].frequency / 4; });
    const auto exact = sifted_statistics(cfg, params);
    // Acceptance weights are at most 1 and slot counts within a pattern are
    // negatively correlated, so this variance is an upper bound.
    double var = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int d = 0; d < 4; ++d) {
        const double f = occupied(i, d, 2) ? p : 0.0;
        var += f * (1 - f) / (n / 4) / 16;
      }
    CHECK(exact.gain > 0.0);
    CHECK(std::abs(sampled.gain - exact.gain) < 4 * std::sqrt(var));
  }

  TEST_CASE("Monte-Carlo visibility of the bright monitoring slot") {
    const auto cfg = make(3, 0.1);
    const auto params = ChannelParams::from_loss_db(3);
    const std::int64_t n = 2'000'000;
    // Pattern 000: pair (0, 1) is the same_01 case.
    const auto t = monte_carlo_oracle(cfg, params, 0, 1, n, 23);
    const double pp = t.conclusive[0].frequency, pm = t.conclusive[1].frequency;
    const double v = (pp - pm) / (pp + pm);
    const double se = 2.0 * std::sqrt(pp * pm * (pp + pm) / n) / std::pow(pp + pm, 2);
    CHECK(std::abs(v - visibility(cfg, params)) < 4 * se);
  }
}
