#pragma once

#include <array>
#include <string>
#include <vector>

#include "phylomoments/alignment.h"
#include "phylomoments/ctmc.h"
#include "phylomoments/moments.h"

namespace phylomoments {

// Sum over columns of Var(H | D_i) and its ratio to the sum of E(H | D_i), with H the
// number of labelled substitutions over the whole tree.
struct Discrepancies {
  double t_var = 0.0;
  double t_disp = 0.0;
  double total_mean = 0.0;
};

auto compute_discrepancies(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache,
                           int threads = 1) -> Discrepancies;
auto t_var(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache) -> double;
// Throws when the summed posterior mean is zero.
auto t_disp(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache) -> double;

// One posterior draw of tree, GTR exchangeabilities (AC AG AT CG CT GT) and base frequencies.
struct PosteriorSample {
  Phylogeny tree;
  std::array<double, 6> exchangeabilities{};
  std::array<double, 4> base_freqs{};

  auto model() const -> RateModel;
};

// Tab-separated rows: newick, 6 exchangeabilities, 4 frequencies.  Blank lines and
// lines starting with '#' are skipped; so is a first row whose second field is not numeric.
auto read_posterior_samples(const std::string& path) -> std::vector<PosteriorSample>;

// Fraction of replicates with rep > obs (ties count as not exceeding).
auto posterior_predictive_p(std::span<const double> observed, std::span<const double> replicated) -> double;

struct PpredOptions {
  int num_replicates = 0;   // the first N posterior samples are used, in file order
  std::uint64_t seed = 1;   // replicate i simulates from make_rng(seed, i)
  bool want_t_var = true;
  bool want_t_disp = true;
  int threads = 1;
};

struct PpredReport {
  int num_replicates = 0;
  std::vector<double> t_var_observed, t_var_replicated;
  std::vector<double> t_disp_observed, t_disp_replicated;
  double ppp_t_var = 0.0;
  double ppp_t_disp = 0.0;
};

// H counts every substitution (all ordered pairs of distinct states).
auto run_ppred(const Alignment& observed, std::span<const PosteriorSample> posterior, const PpredOptions& options)
    -> PpredReport;

}  // namespace phylomoments
