#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "giet/affine.hpp"
#include "giet/cocycle.hpp"
#include "giet/combinatorics.hpp"
#include "giet/giem.hpp"
#include "giet/io.hpp"
#include "giet/numeric.hpp"
#include "giet/rigidity.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace giet;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::size_t> depth;
  std::optional<int> precision_bits;
  std::optional<std::uint64_t> seed;
  bool linearize = false;
  std::string scalar;  // empty: chosen from the working precision
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput:
    case ErrorKind::Hypothesis:
    case ErrorKind::Connection:
      return 2;
    case ErrorKind::Precision:
      return 3;
    case ErrorKind::CombinatoricsMismatch:
      return 4;
    case ErrorKind::Numerical:
      return 1;
  }
  return 1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot read config " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << '\n';
}

json vec_json(const VecD& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

json rate_json(const RateEstimate& r) {
  return {{"rate", r.fitted_rate}, {"prefactor", r.prefactor}, {"residual_rms", r.residual},
          {"n_range", {r.n_range.first, r.n_range.second}}};
}

json fit_json(const RateFit& f) {
  if (!f.valid) return {{"valid", false}};
  return {{"valid", true},
          {"sqrt_exponential", rate_json(f.sqrt_exponential)},
          {"exponential", rate_json(f.exponential)},
          {"decaying", f.decaying}};
}

// (n, value) CSV for one decay diagnostic
void write_series(const fs::path& p, const Provenance& prov, const std::vector<std::pair<double, double>>& s) {
  CsvWriter w(p, prov, {"n", "value"});
  for (const auto& [n, v] : s) w.row({std::to_string(static_cast<long long>(n)), fixed_decimal(v)});
}

std::optional<RateFit> try_fit(const std::vector<std::pair<double, double>>& s) {
  std::vector<std::pair<double, double>> pos;
  for (const auto& p : s)
    if (p.second > 0) pos.push_back(p);
  if (pos.size() < 6 || pos.size() != s.size()) return std::nullopt;
  return rate_fit(pos);
}

template <class T>
struct Context {
  ExperimentConfig cfg;
  Options opt;
  Provenance prov;
  fs::path out;

  std::shared_ptr<const Giem<T>> map(std::size_t i) const {
    return std::make_shared<const Giem<T>>(build_giem<T>(cfg.maps.at(i).config()));
  }
  std::size_t depth(std::size_t fallback) const { return opt.depth.value_or(cfg.depth.value_or(fallback)); }
  SlopeExtractionOptions extraction() const {
    SlopeExtractionOptions e;
    e.quadrature_nodes = cfg.quadrature_nodes;
    e.nonlinearity_tolerance = cfg.tolerance("nonlinearity", e.nonlinearity_tolerance);
    e.cauchy_tolerance = cfg.tolerance("cauchy", e.cauchy_tolerance);
    return e;
  }
};

template <class T>
json run_renormalize(const Context<T>& c) {
  const std::size_t depth = c.depth(30);
  auto f = c.map(0);
  const auto states = renormalize(f, depth);
  const int d = f->d();
  std::vector<std::string> cols{"n", "eps", "winner", "loser", "|I^n|"};
  for (const char* prefix : {"q_", "lambda_", "L_"})
    for (const auto& a : f->pi.alphabet) cols.push_back(prefix + a);
  CsvWriter w(c.out / "renormalize.csv", c.prov, cols);
  for (std::size_t n = 1; n < states.size(); ++n) {
    const auto& st = states[n];
    const auto& step = st.seq.steps.back();
    std::vector<std::string> row{std::to_string(n), std::to_string(step.eps), f->pi.alphabet[step.winner],
                                 f->pi.alphabet[step.loser], to_decimal(st.interval_length)};
    for (int a = 0; a < d; ++a) row.push_back(to_decimal(st.return_times[a]));
    for (int a = 0; a < d; ++a) row.push_back(to_decimal(st.dom_len[a]));
    const auto L = mean_log_derivative(st, c.cfg.quadrature_nodes);
    for (int a = 0; a < d; ++a) row.push_back(to_decimal(L[a]));
    w.row(row);
  }
  std::string types;
  for (int e : states.back().seq.types()) types += static_cast<char>('0' + e);
  return {{"rows", w.rows()}, {"types", types}, {"tower_mass", to_decimal(states.back().tower_mass())}};
}

template <class T>
json run_affine_model(const Context<T>& c) {
  const std::size_t depth = c.depth(35);
  const std::size_t ext_depth = c.cfg.extraction_depth.value_or(std::max<std::size_t>(depth + 25, 60));
  auto f = c.map(0);
  const auto states = renormalize(f, std::max(depth, ext_depth));
  const SlopeExtraction ex = extract_slope_vector(
      std::vector<RenormState<T>>(states.begin(), states.begin() + static_cast<std::ptrdiff_t>(ext_depth + 1)),
      c.extraction());
  const ModelBuild mb = model_from_extraction(ex);
  auto fa = std::make_shared<const Giem<T>>(build_giem<T>(to_config(mb.model)));
  const auto head = std::vector<RenormState<T>>(states.begin(), states.begin() + static_cast<std::ptrdiff_t>(depth + 1));
  const DistanceSeries dist = distance_series(head, renormalize(fa, depth), 5);
  write_json(c.out / "model.json", json::parse(affine_to_json(mb.model)));
  {
    CsvWriter w(c.out / "model_trace.csv", c.prov, {"depth", "d_p_gap", "kappa_window", "residual_normalization"});
    for (const auto& r : mb.construction.trace)
      w.row({std::to_string(r.depth), fixed_decimal(r.d_p_gap), fixed_decimal(r.kappa_window),
             fixed_decimal(r.residual_normalization)});
  }
  std::vector<std::pair<double, double>> po;
  for (std::size_t n = 0; n < ex.pseudo_orbit.size(); ++n) po.emplace_back(static_cast<double>(n), ex.pseudo_orbit[n]);
  write_series(c.out / "pseudo_orbit.csv", c.prov, po);
  std::vector<std::pair<double, double>> inc;
  for (std::size_t n = 0; n < ex.increments.size(); ++n) inc.emplace_back(static_cast<double>(n + 1), ex.increments[n]);
  write_series(c.out / "omega_increments.csv", c.prov, inc);
  write_series(c.out / "model_distance.csv", c.prov, dist.series);
  std::vector<std::pair<double, double>> po_window;
  for (const auto& p : po)
    if (p.first >= 5 && p.first <= 35) po_window.push_back(p);
  const auto po_fit = try_fit(po_window);
  json j{{"model", json::parse(affine_to_json(mb.model))},
         {"omega", vec_json(ex.omega)},
         {"k_bound", ex.k_bound ? json(*ex.k_bound) : json(nullptr)},
         {"closure_depth", ex.closure_depth},
         {"mean_nonlinearity", ex.mean_nonlinearity},
         {"normalization_residual", normalization_check(ex.omega, mb.construction.zeta)},
         {"model_depth_used", mb.construction.depth_used},
         {"kappa", mb.construction.kappa},
         {"combinatorics_agree", !dist.divergence},
         {"model_distance_fit", fit_json(dist.fit)},
         {"pseudo_orbit_fit", po_fit ? fit_json(*po_fit) : json{{"valid", false}}}};
  write_json(c.out / "affine_model.json", j);
  return j;
}

template <class T>
json run_rigidity(const Context<T>& c) {
  auto f = c.map(0);
  auto g = c.cfg.maps.size() > 1 ? c.map(1) : f;
  const std::size_t depth = c.depth(25);
  const auto table = build_conjugacy(f, g, depth);
  const double psi_tol = c.cfg.tolerance("psi", 1e-8);
  const C8Estimate c8 = c8_estimate(table, c.cfg.tolerance("c8_spread", 1e-3));
  const DhReport dh = dh_check(table, c.cfg.samples, c.opt.seed.value_or(c.cfg.rng_seed), psi_tol);

  std::vector<std::pair<double, double>> spread, psi_inc, dist;
  for (std::size_t n = 0; n < c8.spread.size(); ++n) spread.emplace_back(static_cast<double>(n + 1), c8.spread[n]);
  for (std::size_t n = 0; n < dh.psi_increment_max.size(); ++n)
    psi_inc.emplace_back(static_cast<double>(n), dh.psi_increment_max[n]);
  const auto dseries = distortion_series(table.f_states);
  for (std::size_t n = 0; n < dseries.size(); ++n) dist.emplace_back(static_cast<double>(n), dseries[n]);
  write_series(c.out / "c8_spread.csv", c.prov, spread);
  write_series(c.out / "psi_increments.csv", c.prov, psi_inc);
  write_series(c.out / "distortion.csv", c.prov, dist);
  {
    CsvWriter w(c.out / "dh_samples.csv", c.prov, {"x", "fd_slope", "predicted"});
    for (std::size_t i = 0; i < dh.samples.size(); ++i)
      w.row({fixed_decimal(dh.samples[i]), fixed_decimal(dh.fd_slopes[i]), fixed_decimal(dh.predicted[i])});
  }
  std::vector<std::pair<double, double>> psi_window;
  for (const auto& p : psi_inc)
    if (p.first >= 5) psi_window.push_back(p);

  TheoremOptions to;
  to.depth = std::max<std::size_t>(depth, 35);
  to.extraction_depth = c.cfg.extraction_depth.value_or(std::max<std::size_t>(to.depth + 25, 60));
  to.extraction = c.extraction();
  const TheoremReport rep = theorem_checks<T>(f, g, to);
  write_series(c.out / "model_distance.csv", c.prov, rep.model_distance.series);
  json pair_json = nullptr;
  if (rep.pair_distance) {
    write_series(c.out / "pair_distance.csv", c.prov, rep.pair_distance->series);
    pair_json = {{"fit", fit_json(rep.pair_distance->fit)},
          {"divergence", rep.pair_distance->divergence ? json(*rep.pair_distance->divergence) : json(nullptr)}};
  }
  const auto psi_fit = try_fit(psi_window);
  json j{{"table_depth", depth},
         {"matched_points", table.deepest().size()},
         {"c8", c8.estimate.fitted_rate},
         {"c8_spread", c8.spread.back()},
         {"dh_max_relative_deviation", dh.max_relative_deviation},
         {"lipschitz_bound", dh.lipschitz},
         {"psi_increment_fit", psi_fit ? fit_json(*psi_fit) : json{{"valid", false}}},
         {"model_distance",
          {{"combinatorics_agree", rep.model_combinatorics_agree},
           {"normalization_residual", rep.normalization_residual},
           {"fit", fit_json(rep.model_distance.fit)}}},
         {"model_agreement",
          {{"slope_mismatch", rep.model_mismatch_slopes ? json(*rep.model_mismatch_slopes) : json(nullptr)},
           {"length_mismatch", rep.model_mismatch_lengths ? json(*rep.model_mismatch_lengths) : json(nullptr)}}},
         {"pair_distance", pair_json},
         {"failures", rep.failures}};
  if (c.opt.linearize) {
    const StrongModel sm = strong_model<T>(*f, to.extraction_depth, to.extraction);
    j["strong_model"] = {{"model", json::parse(affine_to_json(sm.model))},
                         {"t0", sm.t0},
                         {"target_log_break", sm.target_log_break},
                         {"model_log_break", log_break_at_zero(sm.model)}};
  }
  write_json(c.out / "rigidity.json", j);
  return j;
}

template <class T>
json run_cocycle_audit(const Context<T>& c, const json& raw) {
  CombinatoricsSequence seq;
  if (raw.contains("sequence")) {
    const CombinatorialData pi = parse_combinatorics_json(raw.dump());
    seq = parse_sequence_json(pi, raw["sequence"].dump());
  } else {
    seq = renormalize(c.map(0), c.depth(60)).back().seq;
  }
  if (seq.empty()) throw Error(ErrorKind::InvalidInput, "cocycle audit needs a nonempty sequence");
  const CombinatorialData pi0 = seq.pi_at(0);
  std::size_t checked = 0, failed = 0;
  for (const auto& p : rauzy_class(pi0))
    for (int e = 0; e < 2; ++e) {
      ++checked;
      if (!check_intertwine(rauzy_move(p, e))) ++failed;
    }
  const IntMatrix prod = cocycle_range(seq, 0, seq.size());
  {
    CsvWriter w(c.out / "cocycle_growth.csv", c.prov, {"n", "log_max_entry"});
    IntMatrix m = IntMatrix::identity(pi0.d());
    for (std::size_t n = 0; n < seq.size(); ++n) {
      m = cocycle_range(seq, 0, n + 1);
      BigInt mx = 0;
      for (int i = 0; i < m.size(); ++i)
        for (int k = 0; k < m.size(); ++k) mx = std::max(mx, BigInt(abs(m(i, k))));
      w.row({std::to_string(n + 1), fixed_decimal(log_abs(mx))});
    }
  }
  const auto kb = min_k_bound(seq, 12);
  json j{{"pi", pi0.str()},
         {"rauzy_class_size", rauzy_class(pi0).size()},
         {"intertwine_checked", checked},
         {"intertwine_failed", failed},
         {"sequence_length", seq.size()},
         {"k_bound", kb ? json(*kb) : json(nullptr)},
         {"genus_one", genus_one(pi0)},
         {"product_determinant", to_decimal(prod.determinant())},
         {"product", json::parse(matrix_to_json(prod))}};
  if (seq.size() >= 12) {
    const HyperbolicityReport h = hyperbolicity_probe(seq, 32, c.opt.seed.value_or(c.cfg.rng_seed));
    j["hyperbolicity"] = {{"mu_u", rate_json(h.mu_u)}, {"mu_s", rate_json(h.mu_s)}, {"hyperbolic", h.hyperbolic}};
  }
  const CombinatoricsSequence loop = closed_loop(seq, 0, seq.size());
  const PsiResult psi = psi_p(loop);
  const IntMatrix lp = cocycle_range(loop, 0, loop.size());
  json basis = json::array();
  bool fixed = true;
  for (const auto& v : psi.central_basis) {
    json b = json::array();
    for (const auto& x : v) b.push_back(x.str());
    basis.push_back(b);
    fixed = fixed && lp * v == v;
  }
  j["closed_loop_length"] = loop.size();
  j["central_basis"] = basis;
  j["central_fixed_exactly"] = fixed;
  write_json(c.out / "cocycle_audit.json", j);
  return j;
}

template <class T>
json dispatch(const std::string& cmd, const Options& opt, const json& raw) {
  Context<T> c;
  c.opt = opt;
  c.out = opt.out;
  fs::create_directories(c.out);
  const bool audit_sequence = cmd == "cocycle-audit" && raw.contains("sequence");
  if (!audit_sequence) c.cfg = parse_experiment_json(raw.dump());
  c.cfg.canonical = raw.dump();
  c.prov = {config_hash(c.cfg.canonical), scalar_bits<T>(), version_string()};
  if (cmd == "renormalize") return run_renormalize(c);
  if (cmd == "affine-model") return run_affine_model(c);
  if (cmd == "rigidity") return run_rigidity(c);
  return run_cocycle_audit(c, raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"giet: renormalization of generalized interval exchange maps"};
  app.require_subcommand(1);
  Options opt;
  std::size_t depth = 0;
  int bits = 0;
  std::uint64_t seed = 0;
  for (const char* name : {"renormalize", "affine-model", "rigidity", "cocycle-audit"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--depth", depth, "renormalization depth");
    sub->add_option("--precision-bits", bits, "MPFR precision in bits")->check(CLI::Range(64, 1 << 20));
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--scalar", opt.scalar, "real (MPFR) or quad (binary128); default quad up to 113 bits")->check(CLI::IsMember({"real", "quad"}));
    if (std::string(name) == "rigidity") sub->add_flag("--linearize", opt.linearize, "also build the strong model");
  }
  CLI11_PARSE(app, argc, argv);
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--depth")) opt.depth = depth;
  if (sub->count("--precision-bits")) opt.precision_bits = bits;
  if (sub->count("--seed")) opt.seed = seed;
  const std::string cmd = sub->get_name();
  try {
    json raw;
    try {
      raw = json::parse(read_file(opt.config));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidInput, std::string("malformed JSON: ") + e.what());
    }
    if (opt.precision_bits)
      set_precision_bits(*opt.precision_bits);
    else if (raw.is_object() && raw.contains("precision_bits") && raw["precision_bits"].is_number_integer())
      set_precision_bits(raw["precision_bits"].get<int>());
    const bool quad = opt.scalar.empty() ? precision_bits() <= scalar_bits<Quad>() : opt.scalar == "quad";
    const json result = quad ? dispatch<Quad>(cmd, opt, raw) : dispatch<Real>(cmd, opt, raw);
    json summary{{"command", cmd}, {"status", "ok"}, {"result", result}};
    std::cout << summary.dump() << '\n';
    return 0;
  } catch (const Error& e) {
    json err{{"command", cmd}, {"status", "error"}, {"kind", to_string(e.kind())}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    json err{{"command", cmd}, {"status", "error"}, {"kind", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return 1;
  }
}
