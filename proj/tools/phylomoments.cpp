#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "phylomoments/alignment.h"
#include "phylomoments/model_config.h"
#include "phylomoments/moments.h"
#include "phylomoments/ppred.h"
#include "phylomoments/random_tree.h"
#include "phylomoments/seqsim.h"
#include "phylomoments/simmap.h"
#include "phylomoments/sph.h"

namespace pm = phylomoments;

namespace {

constexpr const char* k_version = "0.1.0";

struct Inputs {
  std::string tree;
  std::string model;
  std::string alignment;
  std::string format;
  std::string out;
  int threads = 0;
  std::uint64_t seed = 1;
};

auto resolve_threads(int flag) -> int {
  if (flag > 0) {
    return flag;
  }
  if (const char* env = std::getenv("PHYLOMOMENTS_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const auto v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) {
      throw std::runtime_error(std::string{"PHYLOMOMENTS_THREADS must be a positive integer, got '"} + env + "'");
    }
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Output stream plus the '#' header every table starts with.
class Output {
 public:
  Output(const std::string& path, const CLI::App& sub) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) {
        throw std::runtime_error("cannot write '" + path + "'");
      }
    }
    auto& o = stream();
    o << std::setprecision(17);
    o << "# phylomoments " << k_version << "\n# command: " << sub.get_name() << '\n';
    auto config = std::istringstream{sub.config_to_str(true, false)};
    auto line = std::string{};
    while (std::getline(config, line)) {
      if (!line.empty()) {
        o << "# " << line << '\n';
      }
    }
  }

  auto stream() -> std::ostream& { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

auto load_tree(const std::string& path) -> pm::Phylogeny {
  if (path.empty()) {
    throw std::runtime_error("--tree is required");
  }
  return pm::read_newick_file(path);
}

auto load_model(const std::string& path) -> pm::ModelConfig {
  return path.empty() ? pm::default_model_config() : pm::read_model_config(path);
}

auto load_alignment(const Inputs& in, const pm::Phylogeny& tree, int num_states) -> pm::Alignment {
  if (in.alignment.empty()) {
    throw std::runtime_error("--alignment is required");
  }
  const auto format = in.format.empty() ? pm::guess_alignment_format(in.alignment) : pm::parse_alignment_format(in.format);
  return pm::match_to_tree(pm::read_alignment_file(in.alignment, format, num_states), tree);
}

// all | internal | terminal | none | subtree:<b> | comma-separated branch indices
auto parse_omega(const std::string& text, const pm::Phylogeny& tree) -> pm::BranchSet {
  const auto nb = tree.num_branches();
  if (text == "all") {
    return pm::BranchSet::all(nb);
  }
  if (text == "internal") {
    return tree.internal_branches();
  }
  if (text == "terminal") {
    return tree.terminal_branches();
  }
  if (text == "none") {
    return pm::BranchSet::none(nb);
  }
  auto branch = [&](const std::string& s) {
    auto pos = std::size_t{0};
    int b = 0;
    try {
      b = std::stoi(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || s.empty()) {
      throw std::runtime_error("bad branch index '" + s + "' in omega '" + text + "'");
    }
    if (b < 0 || b >= nb) {
      throw std::runtime_error("branch " + s + " out of range (tree has " + std::to_string(nb) + " branches)");
    }
    return b;
  };
  if (text.rfind("subtree:", 0) == 0) {
    return pm::subtree_branches(tree, branch(text.substr(8)));
  }
  auto set = pm::BranchSet::none(nb);
  auto in = std::istringstream{text};
  auto item = std::string{};
  while (std::getline(in, item, ',')) {
    set.insert(branch(item));
  }
  return set;
}

template <typename T>
auto parse_list(const std::string& text, const char* what) -> std::vector<T> {
  auto out = std::vector<T>{};
  auto in = std::istringstream{text};
  auto item = std::string{};
  while (std::getline(in, item, ',')) {
    auto is = std::istringstream{item};
    T v{};
    if (!(is >> v) || !is.eof()) {
      throw std::runtime_error(std::string{"bad value '"} + item + "' in " + what);
    }
    out.push_back(v);
  }
  if (out.empty()) {
    throw std::runtime_error(std::string{what} + " is empty");
  }
  return out;
}

void list_branches(std::ostream& o, const pm::Phylogeny& tree) {
  o << "branch\tparent_node\tchild_node\tlength\ttips_below\n";
  for (auto b = 0; b < tree.num_branches(); ++b) {
    auto below = std::string{};
    for (auto c : pm::subtree_branches(tree, b).members()) {
      if (tree.is_terminal(c)) {
        below += (below.empty() ? "" : ",") + tree.tip_names()[tree.tip_of(tree.child_node(c))];
      }
    }
    o << b << '\t' << tree.parent_node(b) << '\t' << tree.child_node(b) << '\t' << tree.length(b) << '\t' << below
      << '\n';
  }
}

template <typename F>
auto seconds(F&& f, double min_total = 0.2) -> double {
  using clock = std::chrono::steady_clock;
  auto runs = 0;
  const auto start = clock::now();
  auto elapsed = 0.0;
  do {
    f();
    ++runs;
    elapsed = std::chrono::duration<double>(clock::now() - start).count();
  } while (elapsed < min_total);
  return elapsed / runs;
}

}  // namespace

int main(int argc, char** argv) {
  auto app = CLI::App{"Exact moments of stochastic mapping summaries on phylogenies"};
  app.set_version_flag("--version", std::string{"phylomoments "} + k_version);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  auto in = Inputs{};
  auto add_common = [&](CLI::App* s, bool alignment) {
    s->add_option("--tree", in.tree, "Newick tree file")->check(CLI::ExistingFile);
    s->add_option("--model", in.model, "model file (default: JC69, all substitutions)")->check(CLI::ExistingFile);
    if (alignment) {
      s->add_option("--alignment", in.alignment, "alignment file")->check(CLI::ExistingFile);
      s->add_option("--format", in.format, "fasta, phylip or tokens (default: from extension)");
    }
    s->add_option("--out,-o", in.out, "output file (default: stdout)");
    s->add_option("--threads", in.threads, "worker threads (default: $PHYLOMOMENTS_THREADS, else all cores)");
  };
  std::function<void()> run;

  // moments
  auto omega = std::string{"all"};
  auto omega2 = std::string{};
  auto list = false;
  auto* moments = app.add_subcommand("moments", "per-site posterior mean and variance of H_omega");
  add_common(moments, true);
  moments->add_option("--omega", omega, "all | internal | terminal | subtree:<b> | b1,b2,...");
  moments->add_flag("--list-branches", list, "print the branch numbering and exit");
  moments->callback([&] {
    run = [&] {
      const auto tree = load_tree(in.tree);
      if (list) {
        auto out = Output{in.out, *moments};
        list_branches(out.stream(), tree);
        return;
      }
      const auto cfg = load_model(in.model);
      const auto aln = load_alignment(in, tree, cfg.model.num_states());
      const auto set = parse_omega(omega, tree);
      const auto cache = pm::build_cache(cfg.model, tree, cfg.label);
      const auto res = pm::per_site_moments(tree, cache, set, aln.columns, resolve_threads(in.threads));
      auto out = Output{in.out, *moments};
      auto& o = out.stream();
      o << "site\tlogP\tmean\tvariance\n";
      for (auto i = std::size_t{0}; i < res.size(); ++i) {
        o << i + 1 << '\t' << res[i].log_likelihood << '\t' << res[i].mean << '\t' << res[i].variance << '\n';
      }
    };
  });

  // cov
  auto omega1 = std::string{"all"};
  auto* cov = app.add_subcommand("cov", "per-site posterior covariance of H_omega1 and H_omega2");
  add_common(cov, true);
  cov->add_option("--omega1", omega1, "first branch set");
  cov->add_option("--omega2", omega2, "second branch set")->required();
  cov->callback([&] {
    run = [&] {
      const auto tree = load_tree(in.tree);
      const auto cfg = load_model(in.model);
      const auto aln = load_alignment(in, tree, cfg.model.num_states());
      const auto cache = pm::build_cache(cfg.model, tree, cfg.label);
      const auto res = pm::per_site_covariances(tree, cache, parse_omega(omega1, tree), parse_omega(omega2, tree),
                                                aln.columns, resolve_threads(in.threads));
      auto out = Output{in.out, *cov};
      auto& o = out.stream();
      o << "site\tlogP\tmean1\tmean2\tvariance1\tvariance2\tcovariance\n";
      for (auto i = std::size_t{0}; i < res.size(); ++i) {
        const auto& r = res[i];
        o << i + 1 << '\t' << r.log_likelihood << '\t' << r.mean1 << '\t' << r.mean2 << '\t' << r.variance1 << '\t'
          << r.variance2 << '\t' << r.covariance << '\n';
      }
    };
  });

  // prior
  auto* prior = app.add_subcommand("prior", "prior mean, variance and covariance (no data)");
  add_common(prior, false);
  prior->add_option("--omega", omega, "branch set");
  prior->add_option("--omega2", omega2, "second branch set for a covariance");
  prior->callback([&] {
    run = [&] {
      const auto tree = load_tree(in.tree);
      const auto cfg = load_model(in.model);
      const auto cache = pm::build_cache(cfg.model, tree, cfg.label);
      auto out = Output{in.out, *prior};
      auto& o = out.stream();
      if (omega2.empty()) {
        const auto r = pm::prior_moments(tree, cache, parse_omega(omega, tree));
        o << "mean\tvariance\n" << r.mean << '\t' << r.variance << '\n';
      } else {
        const auto r = pm::prior_covariance(tree, cache, parse_omega(omega, tree), parse_omega(omega2, tree));
        o << "mean1\tmean2\tvariance1\tvariance2\tcovariance\n"
          << r.mean1 << '\t' << r.mean2 << '\t' << r.variance1 << '\t' << r.variance2 << '\t' << r.covariance << '\n';
      }
    };
  });

  // simulate
  auto sites = 100;
  auto rho = 1.0;
  auto lambda = 1.0;
  auto subtree_branch = int{pm::k_no_index};
  auto* simulate = app.add_subcommand("simulate", "simulate an alignment under the (scaled) model");
  add_common(simulate, false);
  simulate->add_option("--format", in.format, "fasta, phylip or tokens (default: fasta, tokens when m != 4)");
  simulate->add_option("--sites,-L", sites, "number of columns")->check(CLI::NonNegativeNumber);
  simulate->add_option("--seed", in.seed, "random seed");
  simulate->add_option("--rho", rho, "scale every branch")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--lambda", lambda, "additional scale inside the subtree")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--subtree-branch", subtree_branch, "branch above the scaled subtree");
  simulate->callback([&] {
    run = [&] {
      const auto tree = load_tree(in.tree);
      const auto cfg = load_model(in.model);
      const auto sub = subtree_branch == pm::k_no_index ? pm::BranchSet{} : parse_omega("subtree:" + std::to_string(subtree_branch), tree);
      const auto scaled = pm::scale_phylogeny(tree, rho, lambda, sub);
      const auto aln = pm::simulate_alignment_streams(scaled, cfg.model, sites, in.seed, resolve_threads(in.threads));
      auto format = in.format.empty()
                        ? (cfg.model.num_states() == 4 ? pm::AlignmentFormat::fasta : pm::AlignmentFormat::tokens)
                        : pm::parse_alignment_format(in.format);
      if (in.out.empty() || in.out == "-") {
        pm::write_alignment(std::cout, aln, format);
      } else {
        pm::write_alignment_file(in.out, aln, format);
      }
    };
  });

  // simmap
  auto reps = 1000;
  auto draws_path = std::string{};
  auto* simmap = app.add_subcommand("simmap", "Monte Carlo stochastic mapping next to the exact moments");
  add_common(simmap, true);
  simmap->add_option("--omega", omega, "branch set");
  simmap->add_option("--reps", reps, "mappings per site")->check(CLI::Range(2, 100000000));
  simmap->add_option("--seed", in.seed, "random seed (site i uses substream i)");
  simmap->add_option("--draws", draws_path, "write per-replicate H values here");
  simmap->callback([&] {
    run = [&] {
      const auto tree = load_tree(in.tree);
      const auto cfg = load_model(in.model);
      const auto aln = load_alignment(in, tree, cfg.model.num_states());
      const auto set = parse_omega(omega, tree);
      const auto cache = pm::build_cache(cfg.model, tree, cfg.label);
      const auto n = aln.num_sites();
      auto mc = std::vector<std::vector<double>>(n);
      auto exact = pm::per_site_moments(tree, cache, set, aln.columns, 1);
      const auto threads = std::clamp(resolve_threads(in.threads), 1, std::max(1, n));
      auto errors = std::vector<std::exception_ptr>(n);
      auto work = [&](int w) {
        for (auto i = w; i < n; i += threads) {
          try {
            auto rng = pm::make_rng(in.seed, static_cast<std::uint64_t>(i));
            mc[i] = std::move(pm::mc_summary_draws(tree, cache, cfg.model, std::span{&set, 1}, aln.columns[i],
                                                   cfg.label, reps, rng)[0]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      };
      {
        auto pool = std::vector<std::jthread>{};
        for (auto t = 0; t < threads; ++t) {
          pool.emplace_back(work, t);
        }
      }
      for (auto i = 0; i < n; ++i) {
        if (errors[i]) {
          std::rethrow_exception(errors[i]);
        }
      }
      auto out = Output{in.out, *simmap};
      auto& o = out.stream();
      o << "site\texact_mean\texact_variance\tmc_mean\tmc_mean_se\tmc_variance\tmc_variance_se\n";
      for (auto i = 0; i < n; ++i) {
        const auto s = pm::summarize(mc[i]);
        o << i + 1 << '\t' << exact[i].mean << '\t' << exact[i].variance << '\t' << s.mean << '\t' << s.se_mean
          << '\t' << s.variance << '\t' << s.se_variance << '\n';
      }
      if (!draws_path.empty()) {
        auto d = std::ofstream{draws_path};
        if (!d) {
          throw std::runtime_error("cannot write '" + draws_path + "'");
        }
        d << "site\treplicate\th\n";
        for (auto i = 0; i < n; ++i) {
          for (auto r = 0; r < reps; ++r) {
            d << i + 1 << '\t' << r + 1 << '\t' << mc[i][r] << '\n';
          }
        }
      }
    };
  });

  // ppred
  auto posterior_path = std::string{};
  auto num_reps = 0;
  auto discrepancy = std::string{"tvar,tdisp"};
  auto dump_path = std::string{};
  auto* ppred = app.add_subcommand("ppred", "posterior predictive check for across-site rate variation");
  ppred->add_option("--alignment", in.alignment, "observed alignment")->required()->check(CLI::ExistingFile);
  ppred->add_option("--format", in.format, "fasta or phylip (default: from extension)");
  ppred->add_option("--posterior", posterior_path, "TSV: newick, 6 exchangeabilities, 4 frequencies per row")
      ->required()
      ->check(CLI::ExistingFile);
  ppred->add_option("--n", num_reps, "replicates (the first n posterior rows; default: all)");
  ppred->add_option("--seed", in.seed, "random seed (replicate i uses substream i)");
  ppred->add_option("--discrepancy", discrepancy, "tvar, tdisp or both");
  ppred->add_option("--dump", dump_path, "write per-replicate discrepancies here");
  ppred->add_option("--out,-o", in.out, "output file (default: stdout)");
  ppred->add_option("--threads", in.threads, "worker threads");
  ppred->callback([&] {
    run = [&] {
      const auto samples = pm::read_posterior_samples(posterior_path);
      const auto format = in.format.empty() ? pm::guess_alignment_format(in.alignment) : pm::parse_alignment_format(in.format);
      const auto obs = pm::read_alignment_file(in.alignment, format, 4);
      auto opts = pm::PpredOptions{};
      opts.num_replicates = num_reps > 0 ? num_reps : static_cast<int>(samples.size());
      opts.seed = in.seed;
      opts.threads = resolve_threads(in.threads);
      opts.want_t_var = opts.want_t_disp = false;
      for (const auto& d : parse_list<std::string>(discrepancy, "--discrepancy")) {
        if (d == "tvar") {
          opts.want_t_var = true;
        } else if (d == "tdisp") {
          opts.want_t_disp = true;
        } else {
          throw std::runtime_error("unknown discrepancy '" + d + "' (tvar, tdisp)");
        }
      }
      const auto report = pm::run_ppred(obs, samples, opts);
      auto out = Output{in.out, *ppred};
      auto& o = out.stream();
      o << "discrepancy\tppp\tn\n";
      if (opts.want_t_var) {
        o << "tvar\t" << report.ppp_t_var << '\t' << report.num_replicates << '\n';
      }
      if (opts.want_t_disp) {
        o << "tdisp\t" << report.ppp_t_disp << '\t' << report.num_replicates << '\n';
      }
      if (!dump_path.empty()) {
        auto d = std::ofstream{dump_path};
        if (!d) {
          throw std::runtime_error("cannot write '" + dump_path + "'");
        }
        d << std::setprecision(17) << "replicate\ttvar_obs\ttvar_rep\ttdisp_obs\ttdisp_rep\n";
        for (auto i = 0; i < report.num_replicates; ++i) {
          d << i + 1 << '\t' << report.t_var_observed[i] << '\t' << report.t_var_replicated[i] << '\t'
            << report.t_disp_observed[i] << '\t' << report.t_disp_replicated[i] << '\n';
        }
      }
    };
  });

  // sph
  auto variants = std::string{"all_modified"};
  auto mmc = 1000;
  auto rho_grid = std::string{"1"};
  auto lambda_grid = std::string{"1"};
  auto l_grid = std::string{"10"};
  auto alphas = std::string{"0.001,0.005,0.01,0.025,0.05,0.1,0.2,0.3,0.4,0.5"};
  auto pvalues_path = std::string{};
  auto sph_reps = 100;
  auto* sph = app.add_subcommand("sph", "conservation tests on an alignment, or a power simulation without one");
  add_common(sph, true);
  sph->add_option("--variant", variants,
                  "comma list of all_original, all_modified, sub_marginal_original, sub_marginal_modified, "
                  "sub_conditional_original, ratio_modified (aliases: all, sub-marginal, sub-conditional-ratio)");
  sph->add_option("--subtree-branch", subtree_branch, "branch above the tested subtree");
  sph->add_option("--mmc", mmc, "simulated columns for the conditional-variance terms")->check(CLI::Range(2, 100000000));
  sph->add_option("--seed", in.seed, "random seed");
  sph->add_option("--rho-grid", rho_grid, "power simulation: rho values");
  sph->add_option("--lambda-grid", lambda_grid, "power simulation: lambda values");
  sph->add_option("--L-grid", l_grid, "power simulation: alignment lengths");
  sph->add_option("--reps", sph_reps, "power simulation: replicates per grid point")->check(CLI::Range(1, 100000000));
  sph->add_option("--alphas", alphas, "power simulation: significance thresholds");
  sph->add_option("--pvalues", pvalues_path, "power simulation: write every p-value here");
  sph->callback([&] {
    run = [&] {
      const auto tree = load_tree(in.tree);
      const auto cfg = load_model(in.model);
      auto chosen = std::vector<pm::SphVariant>{};
      for (const auto& v : parse_list<std::string>(variants, "--variant")) {
        chosen.push_back(pm::parse_variant(v));
      }
      if (!in.alignment.empty()) {
        const auto aln = load_alignment(in, tree, cfg.model.num_states());
        auto rng = pm::make_rng(in.seed);
        const auto results = pm::test_variants(aln.columns, tree, cfg.model, chosen, {subtree_branch, mmc}, rng);
        auto out = Output{in.out, *sph};
        auto& o = out.stream();
        o << "variant\tstatistic\tp_value\trho_hat\tnull_mean\tnull_variance\tnull_variance_se\tnote\n";
        for (const auto& r : results) {
          o << pm::variant_name(r.variant) << '\t' << r.statistic << '\t' << r.p_value << '\t';
          if (r.rho_hat) {
            o << *r.rho_hat;
          } else {
            o << "NA";
          }
          o << '\t' << r.null.mean << '\t' << r.null.variance << '\t' << r.null.variance_se << '\t'
            << (r.null.approximate ? "normal-approx" : "-") << '\n';
        }
        return;
      }
      auto cfg_power = pm::PowerConfig{};
      cfg_power.sites = parse_list<int>(l_grid, "--L-grid");
      cfg_power.rhos = parse_list<double>(rho_grid, "--rho-grid");
      cfg_power.lambdas = parse_list<double>(lambda_grid, "--lambda-grid");
      cfg_power.subtree_branch = subtree_branch;
      cfg_power.variants = chosen;
      cfg_power.reps = sph_reps;
      cfg_power.m_mc = mmc;
      cfg_power.seed = in.seed;
      cfg_power.threads = resolve_threads(in.threads);
      const auto cells = pm::power_simulation(tree, cfg.model, cfg_power);
      const auto levels = parse_list<double>(alphas, "--alphas");
      auto out = Output{in.out, *sph};
      auto& o = out.stream();
      o << "L\trho\tlambda\tvariant\talpha\trejection_rate\treps\tdegenerate\n";
      for (const auto& c : cells) {
        for (auto a : levels) {
          o << c.sites << '\t' << c.rho << '\t' << c.lambda << '\t' << pm::variant_name(c.variant) << '\t' << a << '\t'
            << pm::rejection_rate(c.p_values, a) << '\t' << c.p_values.size() << '\t' << c.failures << '\n';
        }
      }
      if (!pvalues_path.empty()) {
        auto d = std::ofstream{pvalues_path};
        if (!d) {
          throw std::runtime_error("cannot write '" + pvalues_path + "'");
        }
        d << std::setprecision(17) << "L\trho\tlambda\tvariant\treplicate\tp_value\n";
        for (const auto& c : cells) {
          for (auto r = std::size_t{0}; r < c.p_values.size(); ++r) {
            d << c.sites << '\t' << c.rho << '\t' << c.lambda << '\t' << pm::variant_name(c.variant) << '\t' << r + 1
              << '\t' << c.p_values[r] << '\n';
          }
        }
      }
    };
  });

  // bench
  auto tree_sizes = std::string{"100,1000,10000"};
  auto bench_taxa = 17;
  auto bench_l = std::string{"25,50,100"};
  auto mc_reps = std::string{"100,1000"};
  auto* bench = app.add_subcommand("bench", "timing: exact moments against tree size, exact T_var against Monte Carlo");
  bench->add_option("--tree-sizes", tree_sizes, "tip counts for the scaling table");
  bench->add_option("--taxa", bench_taxa, "tips of the synthetic tree for the T_var comparison");
  bench->add_option("--L-grid", bench_l, "alignment lengths for the T_var comparison");
  bench->add_option("--mc-reps", mc_reps, "Monte Carlo mappings per site");
  bench->add_option("--seed", in.seed, "random seed");
  bench->add_option("--out,-o", in.out, "output file (default: stdout)");
  bench->callback([&] {
    run = [&] {
      const auto sizes = parse_list<int>(tree_sizes, "--tree-sizes");
      if (sizes.size() < 2) {
        throw std::runtime_error("--tree-sizes needs at least two sizes");
      }
      auto out = Output{in.out, *bench};
      auto& o = out.stream();
      const auto model = pm::build_jc69();
      const auto label = pm::SummaryLabel::all_substitutions(4);
      o << "kind\ttips\tL\tm\tseconds\tseconds_per_unit\n";
      auto rng = pm::make_rng(in.seed);
      for (auto n : sizes) {
        const auto tree = pm::random_phylogeny(n, rng, 0.05);
        const auto cache = pm::build_cache(model, tree, label);
        const auto tips = pm::simulate_alignment(tree, model, 1, rng).columns.front();
        const auto all = pm::BranchSet::all(tree.num_branches());
        const auto t = seconds([&] { (void)pm::posterior_moments(tree, cache, all, tips); });
        o << "exact_site\t" << n << "\t1\t0\t" << t << '\t' << t / n << '\n' << std::flush;
      }
      const auto tree = pm::random_phylogeny(bench_taxa, rng, 0.1);
      const auto cache = pm::build_cache(model, tree, label);
      const auto all = pm::BranchSet::all(tree.num_branches());
      for (auto L : parse_list<int>(bench_l, "--L-grid")) {
        const auto aln = pm::simulate_alignment(tree, model, L, rng);
        const auto exact = seconds([&] { (void)pm::t_var(aln.columns, tree, cache); });
        o << "exact_tvar\t" << bench_taxa << '\t' << L << "\t0\t" << exact << '\t' << exact / L << '\n' << std::flush;
        for (auto m : parse_list<int>(mc_reps, "--mc-reps")) {
          auto mc_rng = pm::make_rng(in.seed, static_cast<std::uint64_t>(m));
          const auto mc = seconds(
              [&] {
                auto total = 0.0;
                for (const auto& col : aln.columns) {
                  total += pm::mc_moments(tree, cache, model, all, col, label, m, mc_rng).variance;
                }
                (void)total;
              },
              0.0);
          o << "mc_tvar\t" << bench_taxa << '\t' << L << '\t' << m << '\t' << mc << '\t' << mc / L << '\n'
            << std::flush;
        }
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    run();
  } catch (const std::exception& e) {
    std::cerr << "phylomoments: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
