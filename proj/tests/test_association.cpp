#include "pfmot/mot_filter.hpp"
#include "pfmot/mou_association.hpp"
#include "da_oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace pfmot;

namespace
{

constexpr double kFpDensity = 0.1;

DetectionParams detection(double p_d = 0.85, double mu_fp = 2.0) { return {p_d, mu_fp}; }

EvaluationOptions options(std::size_t n, ProposalKind kind = ProposalKind::Flow)
{
  EvaluationOptions o;
  o.n_particles = n;
  o.proposal.kind = kind;
  return o;
}

GmmBelief standard_belief(std::size_t n_kernels = 1) { return GmmBelief{std::vector<GaussianKernel>(n_kernels)}; }

std::vector<double> spa_marginal(AssocMessages const& msg, std::vector<std::vector<double>> const& beta,
                                 std::size_t j)
{
  std::vector<double> out(beta[j].size());
  double total = 0.0;
  for (std::size_t a = 0; a < out.size(); ++a)
  {
    out[a] = beta[j][a] * msg.kappa[j][a];
    total += out[a];
  }
  for (auto& v : out)
  {
    v /= total;
  }
  return out;
}

}  // namespace

TEST_SUITE("association")
{
  TEST_CASE("missed-detection beta")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    EvaluationBlocks const b = evaluate_legacy(standard_belief(), 0.6, {}, model, detection(), options(20), Rng(1));
    REQUIRE(b.beta.size() == 1);
    CHECK(b.beta[0] == doctest::Approx(0.15 * 0.6 + 0.4).epsilon(1e-15));
    CHECK(missed_detection_beta(1.0, 0.85) == doctest::Approx(0.15).epsilon(1e-15));
  }

  TEST_CASE("association probability matches the closed-form evidence for every proposal")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    double const p = 0.7;
    double const z = 1.3;
    double const evidence = test::normal_pdf(z, 0.0, 2.0);
    double const b0 = 0.15 * p + (1 - p);
    double const b1 = 0.85 * p * evidence / (2.0 * kFpDensity);
    double const expected = b1 / (b0 + b1);
    for (auto kind : {ProposalKind::Flow, ProposalKind::Prior, ProposalKind::Unscented})
    {
      CAPTURE(static_cast<int>(kind));
      EvaluationBlocks const b =
        evaluate_legacy(standard_belief(), p, {z}, model, detection(), options(10000, kind), Rng(2));
      CHECK(b.beta[1] / (b.beta[0] + b.beta[1]) == doctest::Approx(expected).epsilon(0.05));
    }
  }

  TEST_CASE("far outlier hypothesis carries negligible weight")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    std::vector<double> const z{0.4, 15.0};
    EvaluationBlocks const b = evaluate_legacy(standard_belief(), 1.0, z, model, detection(), options(10000), Rng(3));
    double const sum = b.beta[0] + b.beta[1] + b.beta[2];
    double const outlier = b.beta[2] / sum;
    // Closed-form ratio of the outlier evidence to the inlier evidence.
    double const ratio = test::normal_pdf(15.0, 0.0, 2.0) / test::normal_pdf(0.4, 0.0, 2.0);
    CHECK(outlier < 1e-3);
    CHECK(b.beta[2] / b.beta[1] == doctest::Approx(ratio).epsilon(0.2));
  }

  TEST_CASE("betas are permuted with the measurements")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    std::vector<double> const z{0.2, -1.0, 2.5};
    std::vector<double> const zp{2.5, 0.2, -1.0};
    EvaluationBlocks const a = evaluate_legacy(standard_belief(3), 0.8, z, model, detection(), options(200), Rng(4));
    EvaluationBlocks const b = evaluate_legacy(standard_belief(3), 0.8, zp, model, detection(), options(200), Rng(4));
    CHECK(a.beta[0] == b.beta[0]);
    CHECK(a.beta[1] == b.beta[2]);
    CHECK(a.beta[2] == b.beta[3]);
    CHECK(a.beta[3] == b.beta[1]);

    AssocMessages const ma = spa_da({a.beta}, {1.5, 2.0, 3.0});
    AssocMessages const mb = spa_da({b.beta}, {3.0, 1.5, 2.0});
    CHECK(ma.kappa[0][1] == doctest::Approx(mb.kappa[0][2]).epsilon(1e-12));
    CHECK(ma.iota[2] == doctest::Approx(mb.iota[0]).epsilon(1e-12));
  }

  TEST_CASE("gating drops measurements outside every kernel's gate")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    EvaluationOptions o = options(100);
    o.gate.enabled = true;
    o.gate.g = 5.0;
    // sqrt(HPH' + R) = sqrt(2); 5 sqrt(2) ~ 7.07.
    EvaluationBlocks const b =
      evaluate_legacy(standard_belief(2), 0.9, {1.0, 7.0, 7.2}, model, detection(), o, Rng(5));
    CHECK(b.gated_in == std::vector<bool>{true, true, false});
    CHECK(b.beta[1] > 0.0);
    CHECK(b.beta[2] > 0.0);
    CHECK(b.beta[3] == 0.0);
    CHECK(b.blocks[0][3].index.empty());
  }

  TEST_CASE("flow failures fall back to the prior particles")
  {
    Sensor s;
    s.receiver_a = {0.0, 0.0, 0.0};
    s.receiver_b = {10.0, 0.0, 0.0};
    s.noise_std = 1e-3;
    TdoaModel const model(s);
    GaussianKernel k;
    k.mean.head<3>() = s.receiver_a;  // the flow cannot linearize here
    k.cov = Covariance::Identity();
    EvaluationBlocks const b =
      evaluate_legacy(GmmBelief{{k}}, 0.9, {-0.0055}, model, DetectionParams{0.85, 10.0}, options(500), Rng(6));
    CHECK(b.blocks[0][1].fallback);
    CHECK_FALSE(b.blocks[0][1].moved);
    CHECK(b.beta[1] > 0.0);
  }

  TEST_CASE("evaluation contract")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    CHECK_THROWS_AS((void)evaluate_legacy(standard_belief(), 1.2, {}, model, detection(), options(10), Rng(1)),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)evaluate_legacy(GmmBelief{}, 0.5, {}, model, detection(), options(10), Rng(1)),
                    std::invalid_argument);
    auto const no_clutter = test::coordinate_model(0, 1.0, 0.0);
    CHECK_THROWS_AS((void)evaluate_legacy(standard_belief(), 0.5, {0.0}, no_clutter, detection(), options(10), Rng(1)),
                    std::invalid_argument);
  }

  TEST_CASE("spa without legacy objects")
  {
    AssocMessages const m = spa_da({}, {1.2, 3.0, 1.0});
    CHECK(m.iota == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(m.kappa.empty());
    CHECK(new_object_existence(3.0, 1.0) == doctest::Approx(2.0 / 3.0));
    CHECK(new_object_existence(1.0, 1.0) == 0.0);
  }

  TEST_CASE("spa is exact for one legacy object")
  {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial)
    {
      std::size_t const M = 1 + static_cast<std::size_t>(trial % 5);
      std::vector<double> beta{rng.uniform(0.05, 1.0)};
      std::vector<double> xi;
      for (std::size_t m = 0; m < M; ++m)
      {
        beta.push_back(rng.uniform(0.0, 3.0));
        xi.push_back(1.0 + rng.uniform(0.0, 4.0));
      }
      AssocMessages const msg = spa_da({beta}, xi);
      test::DaMarginals const exact = test::enumerate_da({beta}, xi);
      auto const got = spa_marginal(msg, {beta}, 0);
      for (std::size_t m = 0; m < M; ++m)
      {
        CHECK(msg.kappa[0][m + 1] == doctest::Approx(1.0 / xi[m]).epsilon(1e-12));
        CHECK(std::abs(new_object_existence(xi[m], msg.iota[m]) - exact.new_object[m]) < 1e-12);
      }
      for (std::size_t a = 0; a <= M; ++a)
      {
        CHECK(std::abs(got[a] - exact.legacy[0][a]) < 1e-12);
      }
    }
  }

  TEST_CASE("spa is exact for one measurement")
  {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial)
    {
      std::size_t const J = 1 + static_cast<std::size_t>(trial % 4);
      std::vector<std::vector<double>> beta;
      for (std::size_t j = 0; j < J; ++j)
      {
        beta.push_back({rng.uniform(0.05, 1.0), rng.uniform(0.0, 3.0)});
      }
      std::vector<double> const xi{1.0 + rng.uniform(0.0, 4.0)};
      AssocMessages const msg = spa_da(beta, xi, 1000, 1e-14);
      test::DaMarginals const exact = test::enumerate_da(beta, xi);
      for (std::size_t j = 0; j < J; ++j)
      {
        auto const got = spa_marginal(msg, beta, j);
        CHECK(std::abs(got[1] - exact.legacy[j][1]) < 1e-12);
      }
      CHECK(std::abs(new_object_existence(xi[0], msg.iota[0]) - exact.new_object[0]) < 1e-12);
    }
  }

  TEST_CASE("loopy spa messages are positive and depend on beta ratios only")
  {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial)
    {
      std::vector<std::vector<double>> beta(3);
      for (auto& b : beta)
      {
        b = {rng.uniform(0.05, 1.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
      }
      std::vector<double> const xi{1.0 + rng.uniform(0.0, 3.0), 1.0 + rng.uniform(0.0, 3.0),
                                   1.0 + rng.uniform(0.0, 3.0)};
      AssocMessages const a = spa_da(beta, xi);
      auto scaled = beta;
      for (auto& v : scaled[1])
      {
        v *= 37.5;
      }
      AssocMessages const b = spa_da(scaled, xi);
      for (std::size_t j = 0; j < 3; ++j)
      {
        for (std::size_t m = 0; m <= 3; ++m)
        {
          CHECK(std::isfinite(a.kappa[j][m]));
          CHECK(a.kappa[j][m] > 0.0);
          CHECK(a.kappa[j][m] == doctest::Approx(b.kappa[j][m]).epsilon(1e-9));
        }
      }
      for (std::size_t m = 0; m < 3; ++m)
      {
        CHECK(a.iota[m] > 0.0);
        CHECK(a.iota[m] <= 1.0);
        CHECK(a.iota[m] == doctest::Approx(b.iota[m]).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("spa input contract")
  {
    CHECK_THROWS_AS((void)spa_da({{0.5, 1.0}}, {0.5}), std::invalid_argument);
    CHECK_THROWS_AS((void)spa_da({{0.5}}, {1.5}), std::invalid_argument);
    CHECK_THROWS_AS((void)spa_da({{0.0, 1.0}}, {1.5}), std::invalid_argument);
  }

  TEST_CASE("missed-detection existence update")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    for (double p : {0.0, 0.1, 0.5, 0.93, 1.0})
    {
      for (double p_d : {0.0, 0.3, 0.85, 1.0})
      {
        CAPTURE(p);
        CAPTURE(p_d);
        EvaluationBlocks const b =
          evaluate_legacy(standard_belief(2), p, {}, model, detection(p_d), options(50), Rng(10));
        LegacyUpdate const u = update_legacy(b, {1.0}, 2, Rng(11));
        double const denom = p * (1 - p_d) + (1 - p);
        double const expected = denom > 0.0 ? p * (1 - p_d) / denom : 0.0;
        CHECK(std::abs(u.existence - expected) < 1e-12);
      }
    }
    EvaluationBlocks const b = evaluate_legacy(standard_belief(3), 1.0, {}, model, detection(0.0), options(40), Rng(12));
    LegacyUpdate const u = update_legacy(b, {1.0}, 3, Rng(13));
    CHECK(u.existence == 1.0);
    REQUIRE(u.belief.size() == 3);
    // Kernels re-centre on prior draws.
    for (auto const& k : u.belief.kernels)
    {
      CHECK(k.mean.norm() < 8.0);
    }
  }

  TEST_CASE("single-measurement update matches the two-component mixture posterior")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    double const z = 1.5;
    double const p = 0.6;
    DetectionParams const det = detection(0.85, 2.0);
    double const clutter = det.mu_fp * kFpDensity;
    double const evidence = test::normal_pdf(z, 0.0, 2.0);
    double const w_miss = p * (1 - det.p_d);
    double const w_det = p * det.p_d * evidence / clutter;
    double const r = w_det / (w_miss + w_det);
    double const mean = r * z / 2.0;
    double const second = (1 - r) * 1.0 + r * (0.5 + 0.25 * z * z);
    double const var = second - mean * mean;
    double const existence = (w_miss + w_det) / (w_miss + w_det + (1 - p));

    EvaluationBlocks const b = evaluate_legacy(standard_belief(), p, {z}, model, det, options(10000), Rng(14));
    LegacyPosterior const post = legacy_posterior(b, {1.0, 1.0});
    test::Moments const m = test::weighted_moments(post.particles[0], post.weights[0]);
    CHECK(m.mean(0) == doctest::Approx(mean).epsilon(0.05));
    CHECK(m.cov(0, 0) == doctest::Approx(var).epsilon(0.05));
    CHECK(post.existence == doctest::Approx(existence).epsilon(0.02));
    LegacyUpdate const u = update_legacy(b, {1.0, 1.0}, 1, Rng(15));
    CHECK(u.existence == doctest::Approx(post.existence).epsilon(1e-14));
  }

  TEST_CASE("proposal kernel covariance is the moment-matched hypothesis mixture")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    double const z = 1.5;
    double const p = 0.6;
    DetectionParams const det = detection(0.85, 2.0);
    double const clutter = det.mu_fp * kFpDensity;
    double const w_miss = p * (1 - det.p_d);
    double const w_det = p * det.p_d * test::normal_pdf(z, 0.0, 2.0) / clutter;
    double const r = w_det / (w_miss + w_det);
    double const mean = r * z / 2.0;
    double const var = (1 - r) * 1.0 + r * (0.5 + 0.25 * z * z) - mean * mean;

    for (ProposalKind kind : {ProposalKind::Flow, ProposalKind::Unscented})
    {
      EvaluationBlocks const b = evaluate_legacy(standard_belief(), p, {z}, model, det, options(20000, kind), Rng(21));
      LegacyUpdate const u =
        update_legacy(b, {1.0, 1.0}, 1, Rng(22), UpdateNumerator::KappaWeighted, KernelCovariance::Proposal);
      REQUIRE(u.belief.size() == 1);
      Covariance const& cov = u.belief.kernels[0].cov;
      CHECK(cov(0, 0) == doctest::Approx(var).epsilon(0.02));
      // Off-diagonal terms are the sample spread of the hypothesis means only.
      for (int i = 1; i < kStateDim; ++i)
      {
        CHECK(cov(i, i) == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(std::abs(cov(0, i)) < 1e-3);
      }
    }

    // Only the missed-detection hypothesis: the prior covariance is kept up to the SPD floor.
    EvaluationBlocks const miss = evaluate_legacy(standard_belief(), p, {}, model, det, options(30), Rng(23));
    LegacyUpdate const u =
      update_legacy(miss, {1.0}, 1, Rng(24), UpdateNumerator::KappaWeighted, KernelCovariance::Proposal);
    CHECK((u.belief.kernels[0].cov - Covariance::Identity()).norm() < 1e-8);

    // Certain detection: the flow image of the prior, Euler error included.
    EvaluationBlocks const hit = evaluate_legacy(standard_belief(), p, {z}, model, detection(1.0), options(30), Rng(25));
    LegacyUpdate const v =
      update_legacy(hit, {1.0, 1.0}, 1, Rng(26), UpdateNumerator::KappaWeighted, KernelCovariance::Proposal);
    CHECK(v.belief.kernels[0].cov(0, 0) == doctest::Approx(0.5).epsilon(0.02));
  }

  TEST_CASE("proposal kernel covariance falls back to the particles for prior proposals")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    EvaluationBlocks const b =
      evaluate_legacy(standard_belief(), 0.7, {0.4}, model, detection(), options(200, ProposalKind::Prior), Rng(27));
    LegacyUpdate const a = update_legacy(b, {1.0, 1.0}, 1, Rng(28));
    LegacyUpdate const c =
      update_legacy(b, {1.0, 1.0}, 1, Rng(28), UpdateNumerator::KappaWeighted, KernelCovariance::Proposal);
    CHECK((a.belief.kernels[0].cov - c.belief.kernels[0].cov).norm() == 0.0);
  }

  TEST_CASE("plain numerator ignores kappa in the particle weights")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    EvaluationBlocks const b = evaluate_legacy(standard_belief(), 0.8, {0.5, -0.5}, model, detection(), options(500),
                                               Rng(16));
    LegacyPosterior const weighted = legacy_posterior(b, {1.0, 0.2, 0.9});
    LegacyPosterior const plain = legacy_posterior(b, {1.0, 0.2, 0.9}, UpdateNumerator::Plain);
    LegacyPosterior const ones = legacy_posterior(b, {1.0, 1.0, 1.0});
    CHECK(plain.total_mass == doctest::Approx(ones.total_mass).epsilon(1e-14));
    CHECK(weighted.total_mass < plain.total_mass);
  }

  TEST_CASE("legacy existence stays in [0, 1]")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial)
    {
      double const p = rng.uniform();
      std::size_t const M = static_cast<std::size_t>(trial % 4);
      std::vector<double> z;
      std::vector<double> kappa{1.0};
      for (std::size_t m = 0; m < M; ++m)
      {
        z.push_back(rng.normal(0.0, 3.0));
        kappa.push_back(rng.uniform(0.0, 2.0));
      }
      EvaluationBlocks const b = evaluate_legacy(standard_belief(2), p, z, model, detection(rng.uniform()),
                                                 options(30), rng.split(static_cast<std::uint64_t>(trial)));
      LegacyUpdate const u = update_legacy(b, kappa, 2, rng.split(1000 + static_cast<std::uint64_t>(trial)));
      CHECK(u.existence >= 0.0);
      CHECK(u.existence <= 1.0);
    }
    EvaluationBlocks const b = evaluate_legacy(standard_belief(), 0.5, {}, model, detection(), options(10), Rng(1));
    CHECK_THROWS_AS((void)update_legacy(b, {0.5}, 1, Rng(1)), std::invalid_argument);
  }

  TEST_CASE("single-object update")
  {
    auto const model = test::coordinate_model(0, 1.0, kFpDensity);
    // p_d = 1 and vanishing clutter: the only hypothesis is the measurement.
    GmmBelief const prior = standard_belief(50);
    GmmBelief const post = single_object_update(prior, {1.0}, model, DetectionParams{1.0, 1e-9}, options(200), Rng(18));
    REQUIRE(post.size() == 50);
    double var = 0.0;
    for (auto const& k : post.kernels)
    {
      var += k.cov(0, 0) / 50.0;
    }
    CHECK(var == doctest::Approx(0.5).epsilon(0.1));
    CHECK(gmm_point_estimate(post)(0) == doctest::Approx(0.5).epsilon(0.25));

    GmmBelief const unchanged = single_object_update(prior, {}, model, detection(), options(200), Rng(19));
    CHECK(unchanged.size() == 50);
    CHECK(std::abs(gmm_point_estimate(unchanged)(0)) < 0.6);
  }
}
