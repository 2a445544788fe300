// Randomised property checks of the closed-form bounds, reported as JSON.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deadrelu/bounds.hpp"
#include "deadrelu/experiments.hpp"
#include "deadrelu/rng.hpp"

namespace deadrelu {

/// Random architecture with input dim in [1, 3], depth in [min_depth, max_depth]
/// and hidden widths in [1, max_width]; output width 1.
inline Architecture random_architecture(Rng& rng, std::size_t min_depth, std::size_t max_depth,
                                        std::size_t max_width) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
  };
  const std::size_t depth = pick(min_depth, max_depth);
  std::vector<std::size_t> dims{pick(1, 3)};
  for (std::size_t j = 1; j < depth; ++j) dims.push_back(pick(1, max_width));
  dims.push_back(1);
  return Architecture(std::move(dims));
}

inline nlohmann::json verify_bounds(std::uint64_t seed, std::size_t trials) {
  Rng rng(seed);
  nlohmann::json checks = nlohmann::json::array();
  bool all_ok = true;
  auto record = [&](const std::string& name, std::size_t n, std::size_t failures,
                    nlohmann::json extra = nlohmann::json::object()) {
    extra["name"] = name;
    extra["trials"] = n;
    extra["failures"] = failures;
    extra["passed"] = failures == 0;
    all_ok = all_ok && failures == 0;
    checks.push_back(std::move(extra));
  };

  {  // exact probability dominates the (p, W, D, N) lower bound
    std::size_t fail = 0;
    for (std::size_t i = 0; i < trials; ++i) {
      const Architecture a = random_architecture(rng, 3, 10, 4);
      const double p = rng.uniform(0.05, 0.95);
      const auto N = static_cast<double>(1 + static_cast<std::size_t>(rng.uniform() * 5.0));
      const std::vector<double> q(param_count(a), p);
      const double exact = all_runs_inactive_prob(inactivity_prob_exact(a, q).value,
                                                  static_cast<std::size_t>(N));
      const double lower = inactivity_prob_lower_bound(
                               p, static_cast<double>(a.max_hidden_width()),
                               static_cast<double>(a.depth()), N)
                               .value;
      if (exact < lower * (1.0 - 1e-12)) ++fail;
      if (risk_lower_bound(exact, rng.uniform(0.0, 3.0)) > 1.0) ++fail;
    }
    record("exact_dominates_lower_bound", trials, fail);
  }

  {  // kappa inequality at the extreme admissible D and N
    std::size_t fail = 0;
    for (std::size_t i = 0; i < trials; ++i) {
      const double p = rng.uniform(0.05, 0.95);
      const double kappa = rng.uniform(0.01, 0.99);
      const double W = rng.uniform(0.5, 6.0);
      const double D = std::abs(std::log(p)) * W * std::pow(p, -W);
      const double N = std::abs(std::log(kappa)) * std::exp((1.0 - D) * std::log1p(-std::pow(p, W)));
      try {
        const KappaCheck k = kappa_bound_check(D, N, W, kappa, p);
        if (!k.conclusion_holds) ++fail;
      } catch (const std::logic_error&) {
        ++fail;
      }
    }
    record("kappa_lemma_at_extremes", trials, fail);
  }

  {  // monotonicity of the lower bound
    std::size_t fail = 0;
    for (std::size_t i = 0; i < trials; ++i) {
      const double p = rng.uniform(0.05, 0.9);
      const double W = 1.0 + std::floor(rng.uniform() * 3.0);
      const double D = 3.0 + std::floor(rng.uniform() * 40.0);
      const double N = 1.0 + std::floor(rng.uniform() * 10.0);
      const double f = inactivity_prob_lower_bound(p, W, D, N).value;
      const double tol = 1e-12 * f;
      if (inactivity_prob_lower_bound(p, W, D + 1.0, N).value < f - tol) ++fail;
      if (inactivity_prob_lower_bound(p, W, D, N + 1.0).value > f + tol) ++fail;
      if (inactivity_prob_lower_bound(p + 0.05, W, D, N).value < f - tol) ++fail;
    }
    record("lower_bound_monotone", trials, fail);
  }

  {  // every certified schedule entry satisfies the kappa bound with D - 2
    std::size_t fail = 0, certified = 0;
    for (std::size_t i = 0; i < trials; ++i) {
      const double p = rng.uniform(0.3, 0.95);
      const double kappa = rng.uniform(0.05, 0.95);
      const auto W = 1 + static_cast<std::size_t>(rng.uniform() * 3.0);
      const ScheduleEntry e = make_schedule_entry(W, kappa, p);
      if (!e.certified) continue;
      ++certified;
      const double lower = inactivity_prob_lower_bound(p, static_cast<double>(W),
                                                       static_cast<double>(e.D),
                                                       static_cast<double>(e.N))
                               .value;
      if (lower < kappa) ++fail;
    }
    record("schedule_entries_certified", trials, fail, {{"certified", certified}});
  }

  {  // Monte Carlo frequency of I_a against the exact formula
    std::size_t fail = 0;
    const std::size_t archs = 5, samples = 100000;
    nlohmann::json cases = nlohmann::json::array();
    for (std::size_t i = 0; i < archs; ++i) {
      const Architecture a = i == 0 ? Architecture{1, 1, 1, 1, 1, 1, 1, 1, 1}
                                    : random_architecture(rng, 3, 8, 3);
      const McInactivity m = mc_inactivity(a, InitSpec::uniform(2.0), samples, rng());
      if (!m.within_4_sigma) ++fail;
      cases.push_back({{"arch", to_json(a)}, {"estimate", m.estimate}, {"analytic", m.analytic},
                       {"sigma", m.sigma}});
    }
    record("monte_carlo_agreement", archs, fail, {{"cases", cases}});
  }

  return {{"seed", seed}, {"checks", checks}, {"passed", all_ok}};
}

}  // namespace deadrelu
