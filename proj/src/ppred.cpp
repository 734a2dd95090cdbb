#include "phylomoments/ppred.h"

#include <algorithm>
#include <charconv>
#include <limits>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "phylomoments/seqsim.h"

namespace phylomoments {

auto compute_discrepancies(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache,
                           int threads) -> Discrepancies {
  const auto all = BranchSet::all(phylo.num_branches());
  const auto sites = per_site_moments(phylo, cache, all, columns, threads);
  auto d = Discrepancies{};
  for (const auto& r : sites) {
    d.t_var += r.variance;
    d.total_mean += r.mean;
  }
  d.t_disp = d.total_mean > 0.0 ? d.t_var / d.total_mean : std::numeric_limits<double>::quiet_NaN();
  return d;
}

auto t_var(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache) -> double {
  return compute_discrepancies(columns, phylo, cache).t_var;
}

auto t_disp(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache) -> double {
  const auto d = compute_discrepancies(columns, phylo, cache);
  if (!(d.total_mean > 0.0)) {
    throw std::domain_error("dispersion index undefined: expected substitution total is zero");
  }
  return d.t_disp;
}

auto PosteriorSample::model() const -> RateModel {
  return build_gtr(exchangeabilities, base_freqs, true);
}

namespace {

auto split_tabs(const std::string& line) -> std::vector<std::string> {
  auto fields = std::vector<std::string>{};
  auto start = std::size_t{0};
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) {
      break;
    }
    start = tab + 1;
  }
  return fields;
}

auto parse_number(const std::string& s, double& out) -> bool {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  while (first < last && *first == ' ') {
    ++first;
  }
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) {
    --last;
  }
  auto [end, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && end == last && first != last;
}

}  // namespace

auto read_posterior_samples(const std::string& path) -> std::vector<PosteriorSample> {
  auto in = std::ifstream{path};
  if (!in) {
    throw std::runtime_error("cannot open posterior file '" + path + "'");
  }
  auto samples = std::vector<PosteriorSample>{};
  auto line = std::string{};
  auto line_no = 0;
  auto first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line.front() == '#') {
      continue;
    }
    const auto fields = split_tabs(line);
    auto where = [&](const std::string& what) {
      return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
    };
    double probe = 0.0;
    if (first_row && fields.size() > 1 && !parse_number(fields[1], probe)) {
      first_row = false;  // column header
      continue;
    }
    first_row = false;
    if (fields.size() != 11) {
      throw where("expected 11 tab-separated fields, found " + std::to_string(fields.size()));
    }
    auto sample = PosteriorSample{[&] {
      try {
        return parse_newick(fields[0]);
      } catch (const std::exception& e) {
        throw where(e.what());
      }
    }()};
    for (auto k = 0; k < 6; ++k) {
      if (!parse_number(fields[1 + k], sample.exchangeabilities[k])) {
        throw where("bad exchangeability '" + fields[1 + k] + "'");
      }
    }
    for (auto k = 0; k < 4; ++k) {
      if (!parse_number(fields[7 + k], sample.base_freqs[k])) {
        throw where("bad base frequency '" + fields[7 + k] + "'");
      }
    }
    try {
      (void)sample.model();
    } catch (const std::exception& e) {
      throw where(e.what());
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

auto posterior_predictive_p(std::span<const double> observed, std::span<const double> replicated) -> double {
  if (observed.size() != replicated.size() || observed.empty()) {
    throw std::invalid_argument("posterior predictive p needs matching, nonempty series");
  }
  auto exceed = 0;
  for (auto i = std::size_t{0}; i < observed.size(); ++i) {
    if (replicated[i] > observed[i]) {
      ++exceed;
    }
  }
  return static_cast<double>(exceed) / static_cast<double>(observed.size());
}

auto run_ppred(const Alignment& observed, std::span<const PosteriorSample> posterior, const PpredOptions& options)
    -> PpredReport {
  const auto n = options.num_replicates;
  if (n < 1) {
    throw std::invalid_argument("need at least one posterior predictive replicate");
  }
  if (n > static_cast<int>(posterior.size())) {
    throw std::invalid_argument("asked for " + std::to_string(n) + " replicates but the posterior has " +
                                std::to_string(posterior.size()) + " samples");
  }
  if (observed.num_states != 4) {
    throw std::invalid_argument("posterior predictive checks use nucleotide data");
  }
  auto report = PpredReport{};
  report.num_replicates = n;
  report.t_var_observed.resize(n);
  report.t_var_replicated.resize(n);
  report.t_disp_observed.resize(n);
  report.t_disp_replicated.resize(n);
  const auto label = SummaryLabel::all_substitutions(4);

  auto errors = std::vector<std::exception_ptr>(n);
  auto one = [&](int i) {
    const auto& sample = posterior[i];
    const auto model = sample.model();
    const auto cache = build_cache(model, sample.tree, label);
    const auto obs = match_to_tree(observed, sample.tree);
    auto rng = make_rng(options.seed, static_cast<std::uint64_t>(i));
    const auto rep = simulate_alignment(sample.tree, model, observed.num_sites(), rng);
    const auto d_obs = compute_discrepancies(obs.columns, sample.tree, cache);
    const auto d_rep = compute_discrepancies(rep.columns, sample.tree, cache);
    report.t_var_observed[i] = d_obs.t_var;
    report.t_var_replicated[i] = d_rep.t_var;
    report.t_disp_observed[i] = d_obs.t_disp;
    report.t_disp_replicated[i] = d_rep.t_disp;
  };
  auto work = [&](int worker, int stride) {
    for (auto i = worker; i < n; i += stride) {
      try {
        one(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::clamp(options.threads, 1, n);
  if (threads == 1) {
    work(0, 1);
  } else {
    auto pool = std::vector<std::jthread>{};
    for (auto t = 0; t < threads; ++t) {
      pool.emplace_back(work, t, threads);
    }
  }
  for (auto i = 0; i < n; ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        throw std::runtime_error("posterior sample " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  if (options.want_t_var) {
    report.ppp_t_var = posterior_predictive_p(report.t_var_observed, report.t_var_replicated);
  }
  if (options.want_t_disp) {
    report.ppp_t_disp = posterior_predictive_p(report.t_disp_observed, report.t_disp_replicated);
  }
  return report;
}

}  // namespace phylomoments
