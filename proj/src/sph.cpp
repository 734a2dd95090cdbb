#include "phylomoments/sph.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include <boost/math/tools/minima.hpp>

#include "phylomoments/seqsim.h"
#include "phylomoments/stats.h"

namespace phylomoments {

namespace {

constexpr std::pair<SphVariant, const char*> k_names[] = {
    {SphVariant::all_original, "all_original"},
    {SphVariant::all_modified, "all_modified"},
    {SphVariant::sub_marginal_original, "sub_marginal_original"},
    {SphVariant::sub_marginal_modified, "sub_marginal_modified"},
    {SphVariant::sub_conditional_original, "sub_conditional_original"},
    {SphVariant::ratio_modified, "ratio_modified"},
};

auto count_label(const RateModel& model) -> SummaryLabel { return SummaryLabel::all_substitutions(model.num_states()); }

auto sum_means(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache,
               const BranchSet& omega) -> double {
  auto total = 0.0;
  for (const auto& r : per_site_moments(phylo, cache, omega, columns)) {
    total += r.mean;
  }
  return total;
}

auto unscaled(const Phylogeny& phylo, double rho) -> Phylogeny {
  return scale_phylogeny(phylo, rho, 1.0, BranchSet{});
}

}  // namespace

auto variant_name(SphVariant v) -> std::string {
  for (auto [variant, name] : k_names) {
    if (variant == v) {
      return name;
    }
  }
  return "unknown";
}

auto parse_variant(const std::string& name) -> SphVariant {
  for (auto [variant, n] : k_names) {
    if (name == n) {
      return variant;
    }
  }
  // short aliases used on the command line
  if (name == "all") {
    return SphVariant::all_modified;
  }
  if (name == "sub-marginal") {
    return SphVariant::sub_marginal_modified;
  }
  if (name == "sub-conditional-ratio" || name == "ratio") {
    return SphVariant::ratio_modified;
  }
  throw std::invalid_argument("unknown test variant '" + name + "'");
}

auto needs_subtree(SphVariant v) -> bool {
  return v != SphVariant::all_original && v != SphVariant::all_modified;
}

auto stat_all(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache) -> double {
  return sum_means(columns, phylo, cache, BranchSet::all(phylo.num_branches()));
}

auto stat_sub(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache, BranchIndex b)
    -> double {
  return sum_means(columns, phylo, cache, subtree_branches(phylo, b));
}

auto stat_ratio(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache,
                BranchIndex b) -> double {
  const auto all = stat_all(columns, phylo, cache);
  if (!(all > 0.0)) {
    throw SphError("ratio statistic undefined: expected substitution total is zero");
  }
  return stat_sub(columns, phylo, cache, b) / all;
}

auto null_moments(const Phylogeny& phylo, const RateModel& model, const BranchSet& subtree, int num_datasets,
                  Rng* rng) -> NullMoments {
  const auto cache = build_cache(model, phylo, count_label(model));
  const auto all = BranchSet::all(phylo.num_branches());
  const auto has_sub = subtree.num_branches() > 0 && !subtree.empty();
  auto nm = NullMoments{};
  if (has_sub) {
    const auto prior = prior_covariance(phylo, cache, subtree, all);
    nm.mean_sub = prior.mean1;
    nm.variance_sub = prior.variance1;
    nm.mean_all = prior.mean2;
    nm.variance_all = prior.variance2;
    nm.covariance = prior.covariance;
  } else {
    const auto prior = prior_moments(phylo, cache, all);
    nm.mean_all = prior.mean;
    nm.variance_all = prior.variance;
  }
  if (num_datasets > 0) {
    if (rng == nullptr) {
      throw std::invalid_argument("simulated null moments need a random generator");
    }
    nm.num_datasets = num_datasets;
    if (has_sub) {
      const auto ec = expected_conditional_moments(phylo, cache, model, subtree, all, num_datasets, *rng);
      nm.cond_variance_sub = ec.variance1.mean;
      nm.cond_variance_sub_se = ec.variance1.se_mean;
      nm.cond_variance_all = ec.variance2.mean;
      nm.cond_variance_all_se = ec.variance2.se_mean;
      nm.cond_covariance = ec.covariance.mean;
      nm.cond_covariance_se = ec.covariance.se_mean;
    } else {
      const auto ec = expected_conditional_moments(phylo, cache, model, all, num_datasets, *rng);
      nm.cond_variance_all = ec.variance1.mean;
      nm.cond_variance_all_se = ec.variance1.se_mean;
    }
  }
  return nm;
}

auto make_null(SphVariant variant, const NullMoments& nm, int sites, double observed_all) -> NullDistribution {
  if (sites < 1) {
    throw std::invalid_argument("null distribution needs at least one site");
  }
  const auto needs_mc = variant == SphVariant::all_modified || variant == SphVariant::sub_marginal_modified ||
                        variant == SphVariant::ratio_modified;
  if (needs_mc && nm.num_datasets == 0) {
    throw std::invalid_argument(variant_name(variant) + " needs simulated conditional moments");
  }
  const auto L = static_cast<double>(sites);
  auto null = NullDistribution{variant, sites, 0.0, 0.0, 0.0, false, nm};
  switch (variant) {
    case SphVariant::all_original:
      null.mean = L * nm.mean_all;
      null.variance = L * nm.variance_all;
      break;
    case SphVariant::all_modified:
      null.mean = L * nm.mean_all;
      null.variance = L * (nm.variance_all - nm.cond_variance_all);
      null.variance_se = L * nm.cond_variance_all_se;
      break;
    case SphVariant::sub_marginal_original:
      null.mean = L * nm.mean_sub;
      null.variance = L * nm.variance_sub;
      break;
    case SphVariant::sub_marginal_modified:
      null.mean = L * nm.mean_sub;
      null.variance = L * (nm.variance_sub - nm.cond_variance_sub);
      null.variance_se = L * nm.cond_variance_sub_se;
      break;
    case SphVariant::sub_conditional_original: {
      // bivariate normal for the summed counts (sub, all), conditioned on all = observed
      if (!(nm.variance_all > 0.0)) {
        throw SphError("degenerate null: prior variance of the total count is zero");
      }
      const auto slope = nm.covariance / nm.variance_all;
      null.mean = L * nm.mean_sub + slope * (observed_all - L * nm.mean_all);
      null.variance = L * (nm.variance_sub - nm.covariance * slope);
      null.approximate = true;
      break;
    }
    case SphVariant::ratio_modified: {
      if (!(nm.mean_all > 0.0)) {
        throw SphError("degenerate null: expected total count is zero");
      }
      const auto r = nm.mean_sub / nm.mean_all;
      const auto vb = nm.variance_sub - nm.cond_variance_sub;
      const auto va = nm.variance_all - nm.cond_variance_all;
      const auto c = nm.covariance - nm.cond_covariance;
      const auto denom = L * nm.mean_all * nm.mean_all;
      null.mean = r;
      null.variance = (vb - 2.0 * r * c + r * r * va) / denom;
      null.variance_se = std::sqrt(nm.cond_variance_sub_se * nm.cond_variance_sub_se +
                                   4.0 * r * r * nm.cond_covariance_se * nm.cond_covariance_se +
                                   r * r * r * r * nm.cond_variance_all_se * nm.cond_variance_all_se) /
                         denom;
      break;
    }
  }
  if (!(null.variance > 0.0) || !std::isfinite(null.variance)) {
    throw SphError("degenerate null for " + variant_name(variant) + ": variance " + std::to_string(null.variance));
  }
  return null;
}

auto null_all(const RateModel& model, const Phylogeny& phylo, int sites, int m_mc, Rng& rng) -> NullDistribution {
  if (m_mc < 2) {
    throw std::invalid_argument("need at least two simulated datasets");
  }
  const auto nm = null_moments(phylo, model, BranchSet{}, m_mc, &rng);
  return make_null(SphVariant::all_modified, nm, sites);
}

auto null_all_original(const RateModel& model, const Phylogeny& phylo, int sites) -> NullDistribution {
  const auto nm = null_moments(phylo, model, BranchSet{}, 0, nullptr);
  return make_null(SphVariant::all_original, nm, sites);
}

auto estimate_rho(std::span<const TipData> columns, const Phylogeny& phylo, const RateModel& model) -> RhoEstimate {
  if (columns.empty()) {
    throw std::invalid_argument("cannot estimate rho from an empty alignment");
  }
  // distinct column patterns with multiplicities
  auto patterns = std::map<std::vector<StateSet>, int>{};
  for (const auto& c : columns) {
    ++patterns[c.states];
  }
  auto log_lik = [&](double rho) {
    const auto tree = unscaled(phylo, rho);
    const auto cache = build_transition_cache(model, tree);
    auto total = 0.0;
    for (const auto& [states, count] : patterns) {
      total += count * log_likelihood(tree, cache, TipData{states});
    }
    return total;
  };
  auto objective = [&](double rho) {
    const auto v = log_lik(rho);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
  };
  auto iterations = std::uintmax_t{500};
  const auto [inner, inner_obj] =
      boost::math::tools::brent_find_minima(objective, 0.0, 1.0, std::numeric_limits<double>::digits / 2, iterations);
  auto best = RhoEstimate{inner, -inner_obj, false};
  for (auto edge : {0.0, 1.0}) {
    const auto v = log_lik(edge);
    if (v >= best.log_likelihood) {
      best = {edge, v, true};
    }
  }
  if (best.rho < 1e-6 || best.rho > 1.0 - 1e-6) {
    best.at_boundary = true;
  }
  return best;
}

auto test_variants(std::span<const TipData> columns, const Phylogeny& phylo, const RateModel& model,
                   std::span<const SphVariant> variants, const TestOptions& options, Rng& rng,
                   const NullMoments* all_null) -> std::vector<TestResult> {
  if (columns.empty()) {
    throw std::invalid_argument("conservation tests need at least one column");
  }
  const auto sites = static_cast<int>(columns.size());
  const auto has = [&](SphVariant v) { return std::find(variants.begin(), variants.end(), v) != variants.end(); };
  const auto label = count_label(model);
  auto results = std::vector<TestResult>{};

  auto finish = [&](SphVariant v, double statistic, const NullMoments& nm, double observed_all,
                    std::optional<double> rho) {
    auto r = TestResult{};
    r.variant = v;
    r.statistic = statistic;
    r.rho_hat = rho;
    r.null = make_null(v, nm, sites, observed_all);
    r.p_value = normal_cdf(statistic, r.null.mean, r.null.variance);
    return r;
  };

  auto all_stat = 0.0;
  auto all_moments = NullMoments{};
  if (has(SphVariant::all_original) || has(SphVariant::all_modified)) {
    const auto cache = build_cache(model, phylo, label);
    all_stat = stat_all(columns, phylo, cache);
    if (all_null != nullptr) {
      all_moments = *all_null;
    } else {
      all_moments = null_moments(phylo, model, BranchSet{}, has(SphVariant::all_modified) ? options.m_mc : 0, &rng);
    }
  }

  auto rho = RhoEstimate{};
  auto sub_stat = 0.0;
  auto sub_all_stat = 0.0;
  auto sub_moments = NullMoments{};
  const auto any_sub = std::any_of(variants.begin(), variants.end(), needs_subtree);
  if (any_sub) {
    const auto b = options.subtree_branch;
    if (b < 0 || b >= phylo.num_branches()) {
      throw std::invalid_argument("subtree tests need a valid subtree branch");
    }
    const auto sub = subtree_branches(phylo, b);
    rho = estimate_rho(columns, phylo, model);
    const auto tree = unscaled(phylo, rho.rho);
    const auto cache = build_cache(model, tree, label);
    for (const auto& r : per_site_covariances(tree, cache, sub, BranchSet::all(phylo.num_branches()), columns)) {
      sub_stat += r.mean1;
      sub_all_stat += r.mean2;
    }
    const auto mc = has(SphVariant::sub_marginal_modified) || has(SphVariant::ratio_modified);
    sub_moments = null_moments(tree, model, sub, mc ? options.m_mc : 0, &rng);
  }

  for (auto v : variants) {
    switch (v) {
      case SphVariant::all_original:
      case SphVariant::all_modified:
        results.push_back(finish(v, all_stat, all_moments, 0.0, std::nullopt));
        break;
      case SphVariant::sub_marginal_original:
      case SphVariant::sub_marginal_modified:
        results.push_back(finish(v, sub_stat, sub_moments, 0.0, rho.rho));
        break;
      case SphVariant::sub_conditional_original:
        results.push_back(finish(v, sub_stat, sub_moments, sub_all_stat, rho.rho));
        break;
      case SphVariant::ratio_modified:
        if (!(sub_all_stat > 0.0)) {
          throw SphError("ratio statistic undefined: expected substitution total is zero");
        }
        results.push_back(finish(v, sub_stat / sub_all_stat, sub_moments, 0.0, rho.rho));
        break;
    }
  }
  return results;
}

auto test_conservation(std::span<const TipData> columns, const Phylogeny& phylo, const RateModel& model,
                       SphVariant variant, const TestOptions& options, Rng& rng) -> TestResult {
  return test_variants(columns, phylo, model, std::span{&variant, 1}, options, rng).front();
}

auto power_simulation(const Phylogeny& phylo, const RateModel& model, const PowerConfig& config)
    -> std::vector<PowerCell> {
  if (config.reps < 1) {
    throw std::invalid_argument("power simulation needs at least one replicate");
  }
  if (config.variants.empty()) {
    throw std::invalid_argument("power simulation needs at least one test variant");
  }
  const auto has_sub = config.subtree_branch != k_no_index;
  const auto sub = has_sub ? subtree_branches(phylo, config.subtree_branch) : BranchSet{};
  auto options = TestOptions{config.subtree_branch, config.m_mc};

  // the unscaled null is shared by every replicate of every grid point
  auto all_null = std::optional<NullMoments>{};
  if (std::find(config.variants.begin(), config.variants.end(), SphVariant::all_modified) != config.variants.end() ||
      std::find(config.variants.begin(), config.variants.end(), SphVariant::all_original) != config.variants.end()) {
    auto rng = make_rng(config.seed, ~std::uint64_t{0});
    all_null = null_moments(phylo, model, BranchSet{}, config.m_mc_all > 0 ? config.m_mc_all : config.m_mc, &rng);
  }

  auto cells = std::vector<PowerCell>{};
  auto grid = std::uint64_t{0};
  for (auto sites : config.sites) {
    for (auto rho : config.rhos) {
      for (auto lambda : config.lambdas) {
        if (lambda != 1.0 && !has_sub) {
          throw std::invalid_argument("lambda != 1 needs a subtree branch");
        }
        const auto truth = scale_phylogeny(phylo, rho, lambda, sub);
        const auto sim = ColumnSimulator{truth, model};
        auto pvals = std::vector<std::vector<double>>(config.variants.size(), std::vector<double>(config.reps));
        auto failed = std::vector<std::vector<char>>(config.variants.size(), std::vector<char>(config.reps, 0));
        auto work = [&](int worker, int stride) {
          for (auto r = worker; r < config.reps; r += stride) {
            auto rng = make_rng(config.seed, (grid << 32) | static_cast<std::uint64_t>(r));
            auto columns = std::vector<TipData>{};
            columns.reserve(sites);
            for (auto i = 0; i < sites; ++i) {
              columns.push_back(sim.sample(rng));
            }
            auto results = std::vector<TestResult>{};
            try {
              results = test_variants(columns, phylo, model, config.variants, options, rng,
                                      all_null ? &*all_null : nullptr);
            } catch (const SphError&) {
              // retry one variant at a time so a degenerate subtree null does not sink the others
              for (auto k = std::size_t{0}; k < config.variants.size(); ++k) {
                try {
                  auto one = test_variants(columns, phylo, model, std::span{&config.variants[k], 1}, options, rng,
                                           all_null ? &*all_null : nullptr);
                  pvals[k][r] = one.front().p_value;
                } catch (const SphError&) {
                  pvals[k][r] = 1.0;
                  failed[k][r] = 1;
                }
              }
              continue;
            }
            for (auto k = std::size_t{0}; k < results.size(); ++k) {
              pvals[k][r] = results[k].p_value;
            }
          }
        };
        const auto threads = std::clamp(config.threads, 1, config.reps);
        if (threads == 1) {
          work(0, 1);
        } else {
          auto pool = std::vector<std::jthread>{};
          for (auto t = 0; t < threads; ++t) {
            pool.emplace_back(work, t, threads);
          }
        }
        for (auto k = std::size_t{0}; k < config.variants.size(); ++k) {
          auto cell = PowerCell{sites, rho, lambda, config.variants[k], std::move(pvals[k]), 0};
          cell.failures = static_cast<int>(std::count(failed[k].begin(), failed[k].end(), 1));
          cells.push_back(std::move(cell));
        }
        ++grid;
      }
    }
  }
  return cells;
}

auto rejection_rate(std::span<const double> p_values, double alpha) -> double {
  if (p_values.empty()) {
    return 0.0;
  }
  const auto n = std::count_if(p_values.begin(), p_values.end(), [&](double p) { return p <= alpha; });
  return static_cast<double>(n) / static_cast<double>(p_values.size());
}

}  // namespace phylomoments
