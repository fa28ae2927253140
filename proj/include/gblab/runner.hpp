#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gblab/bilinear.hpp"
#include "gblab/embeddings.hpp"
#include "gblab/errors.hpp"
#include "gblab/illposedness.hpp"
#include "gblab/lattice.hpp"
#include "gblab/norms.hpp"
#include "gblab/random_fields.hpp"
#include "gblab/resonance.hpp"
#include "gblab/solver.hpp"
#include "gblab/spectrum_io.hpp"
#include "gblab/stats.hpp"

namespace gblab::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "gblab 1.0.0";

enum class Exit : int { Pass = 0, Fail = 1, Usage = 2, Internal = 3 };

// ---------------------------------------------------------------------------
// Checks and staged outputs.

struct Check {
  std::string name;
  std::string anchor;    // the estimate or identity the number tests
  std::string relation;  // "<", "<=", ">=", "in", "true"
  double value = 0.0;
  double lo = 0.0, hi = 0.0;  // tolerance (hi) or band [lo, hi]
  bool oracle = false;        // failure means two independent routes disagree
  bool pass = false;
};

inline Check check_lt(std::string name, std::string anchor, double v, double tol, bool oracle = false) {
  return {std::move(name), std::move(anchor), "<", v, 0.0, tol, oracle, v < tol};
}
inline Check check_le(std::string name, std::string anchor, double v, double tol, bool oracle = false) {
  return {std::move(name), std::move(anchor), "<=", v, 0.0, tol, oracle, v <= tol};
}
inline Check check_ge(std::string name, std::string anchor, double v, double tol) {
  return {std::move(name), std::move(anchor), ">=", v, tol, 0.0, false, v >= tol};
}
inline Check check_in(std::string name, std::string anchor, double v, double lo, double hi) {
  return {std::move(name), std::move(anchor), "in", v, lo, hi, false, v >= lo && v <= hi};
}
inline Check check_true(std::string name, std::string anchor, bool ok, bool oracle = false) {
  return {std::move(name), std::move(anchor), "true", ok ? 1.0 : 0.0, 0.0, 0.0, oracle, ok};
}

inline json to_json(const Check& c) {
  json j = {{"name", c.name}, {"anchor", c.anchor}, {"relation", c.relation}, {"pass", c.pass}};
  j["value"] = std::isfinite(c.value) ? json(c.value) : json(nullptr);
  if (c.relation == "in") {
    j["tolerance"] = {c.lo, c.hi};
  } else if (c.relation == ">=") {
    j["tolerance"] = c.lo;
  } else if (c.relation != "true") {
    j["tolerance"] = c.hi;
  }
  if (c.oracle) j["oracle"] = true;
  return j;
}

inline json to_json(const std::vector<Check>& cs) {
  json a = json::array();
  for (const auto& c : cs) a.push_back(to_json(c));
  return a;
}

inline Exit exit_of(const std::vector<Check>& cs) {
  bool fail = false;
  for (const auto& c : cs) {
    if (c.pass) continue;
    if (c.oracle) return Exit::Internal;
    fail = true;
  }
  return fail ? Exit::Fail : Exit::Pass;
}

/// Files are held in memory until the run finishes, so a rejected config leaves nothing behind.
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;

  void add(const std::string& name, std::string bytes) { files.emplace_back(name, std::move(bytes)); }
  void add_json(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }
  template <class T>
  void add_spectrum(const std::string& name, const T& x) {
    std::ostringstream os(std::ios::binary);
    write_spectrum(os, x);
    add(name, os.str());
  }
  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& f : files) n.push_back(f.first);
    return n;
  }
};

struct RunResult {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  Outputs outputs;
  std::vector<Check> checks;
};

inline std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

// ---------------------------------------------------------------------------
// Configuration: JSON with documented defaults, unknown keys rejected.

inline void merge_config(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw InvalidArgument((prefix.empty() ? "config" : prefix) + ": expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw InvalidArgument(path + ": unknown field");
    json& slot = base[it.key()];
    const json& v = it.value();
    if (slot.is_object()) {
      merge_config(slot, v, path);
      continue;
    }
    const bool ok = (slot.is_number() && v.is_number()) || (slot.is_boolean() && v.is_boolean()) ||
                    (slot.is_string() && v.is_string()) || (slot.is_array() && v.is_array());
    if (!ok) throw InvalidArgument(path + ": expected " + std::string(slot.type_name()) + ", got " + v.type_name());
    slot = v;
  }
}

/// Typed lookup by dotted path; conversion failures name the field.
template <class T>
T field(const json& cfg, const std::string& path) {
  const json* j = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!j->is_object() || !j->contains(key)) throw InvalidArgument(path + ": missing field");
    j = &(*j)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return j->get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument(path + ": wrong type");
  }
}

inline double positive(const json& cfg, const std::string& path) {
  const double v = field<double>(cfg, path);
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(path + ": must be positive");
  return v;
}

inline std::vector<double> dyadic_list(double Mmax) {
  std::vector<double> out;
  for (double M = 1.0; M <= Mmax; M *= 2.0) out.push_back(M);
  return out;
}

inline json defaults_solve() {
  return {{"seed", 1},
          {"workers", 1},
          {"solver",
           {{"lambda", 2.0},
            {"s", -0.5},
            {"T", 0.5},
            {"dt", 1.0 / 256.0},
            {"K", 4.0},
            {"maxPicard", 60},
            {"contractionTol", 1e-13},
            {"dealias", 2.0},
            {"symmetric", true},
            {"linear_terms", true},
            {"quadratic_terms", true},
            {"reference_local_tol", 1e-8},
            {"reference_check", true}}},
          {"data", {{"kind", "random"}, {"amplitude", 0.05}, {"width", 1.5}, {"modes", json::array()}, {"N", 0.0}}},
          {"reference", {{"enabled", true}, {"refine", 2}, {"tolerance", 1e-6}}},
          {"dump_iterates", false}};
}

inline json defaults_counting() {
  return {{"seed", 1},
          {"workers", 1},
          {"lambdas", {1.0, 2.0, 4.0, 8.0}},
          {"M_max", 64.0},
          {"lemmas", {"RB1", "RB2"}},
          {"random_per_k", 100000},
          {"max_random_ks", 8},
          {"c_case", 64.0},
          {"median_factor", 10.0},
          {"kendall_max", 0.3},
          {"exceptional_band", {0.4, 0.6}},
          {"duality_points", 200},
          {"duality_tol", 1e-8}};
}

inline json defaults_embeddings() {
  const EmbeddingConfig c;
  return {{"seed", c.seed},     {"workers", 1},          {"s_values", c.s_values}, {"thetas", c.thetas},
          {"lambdas", c.lambdas}, {"fields", c.fields},  {"K", c.K},               {"dtau", c.dtau},
          {"bumps", c.bumps},   {"growth_tol", c.growth_tol}};
}

inline json defaults_bilinear() {
  return {{"seed", 1},
          {"workers", 1},
          {"s", -0.5},
          {"lambdas", {4.0, 16.0, 64.0}},
          {"generator", "adversarial-omega4"},
          {"dtau", 0.25},
          {"trials", 4},
          {"slope_ranges", {{"u_vbar", {0.0, 0.7}}, {"uv", {-0.2, 0.2}}, {"ubar_vbar", {-0.2, 0.2}}}}};
}

inline json defaults_l4() {
  return {{"seed", 1},   {"workers", 1}, {"lambdas", {1.0, 4.0, 16.0}}, {"fields", 100},
          {"K", 4.0},    {"dtau", 0.5},  {"bumps", 8},                  {"growth_tol", 0.10}};
}

inline json defaults_inflate() {
  return {{"seed", 1},      {"workers", 1},         {"s", -0.75},          {"delta", 4.0},
          {"lambda", 8.0},  {"t0", 1.0},            {"Nlist", json::array()}, {"count", 6},
          {"growth", 1.8},  {"variant", "torus"},   {"K", 0.0},            {"refine", kLineRefine},
          {"phase_step", 0.1}, {"maxPicard", 40},   {"tol", 1e-12}};
}

inline json defaults_norms() {
  return {{"seed", 1},
          {"workers", 1},
          {"input", ""},
          {"kind", "auto"},
          {"s", {-0.5}},
          {"b", {0.5}},
          {"dtau", 1.0},
          {"tau_center", 0.0},
          {"t_start", 0.0},
          {"dt", 1.0}};
}

inline const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> s{"counting", "embeddings", "bilinear", "l4"};
  return s;
}

/// Defaults keyed by "solve", "inflate", "norms" or "verify.<suite>".
inline json defaults_for(const std::string& command) {
  if (command == "solve") return defaults_solve();
  if (command == "inflate") return defaults_inflate();
  if (command == "norms") return defaults_norms();
  if (command == "verify.counting") return defaults_counting();
  if (command == "verify.embeddings") return defaults_embeddings();
  if (command == "verify.bilinear") return defaults_bilinear();
  if (command == "verify.l4") return defaults_l4();
  throw InvalidArgument("unknown command '" + command + "'");
}

inline json all_defaults() {
  json j;
  for (const char* c : {"solve", "inflate", "norms"}) j[c] = defaults_for(c);
  for (const auto& s : verify_suites()) j["verify"][s] = defaults_for("verify." + s);
  return j;
}

// ---------------------------------------------------------------------------
// solve

inline SolverConfig solver_config_of(const json& c) {
  SolverConfig s;
  s.lambda = field<double>(c, "solver.lambda");
  s.s = field<double>(c, "solver.s");
  s.T = field<double>(c, "solver.T");
  s.dt = field<double>(c, "solver.dt");
  s.K = field<double>(c, "solver.K");
  s.maxPicard = field<int>(c, "solver.maxPicard");
  s.contractionTol = field<double>(c, "solver.contractionTol");
  s.dealias = field<double>(c, "solver.dealias");
  s.symmetric = field<bool>(c, "solver.symmetric");
  s.linear_terms = field<bool>(c, "solver.linear_terms");
  s.quadratic_terms = field<bool>(c, "solver.quadratic_terms");
  s.reference_local_tol = field<double>(c, "solver.reference_local_tol");
  s.reference_check = field<bool>(c, "solver.reference_check");
  try {
    validate(s);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("solver: ") + e.what());
  }
  return s;
}

inline SpectralField initial_data(const json& c, const SolverConfig& s, std::uint64_t seed) {
  const auto lat = make_lattice(s.lambda, s.K);
  const auto kind = field<std::string>(c, "data.kind");
  const double amp = field<double>(c, "data.amplitude");
  if (kind == "zero") return SpectralField(lat);
  if (kind == "random") {
    Rng rng(seed);
    auto u = random_field(lat, rng, positive(c, "data.width"));
    u *= amp / h_norm(u, s.s);
    return u;
  }
  if (kind == "modes") {
    SpectralField u(lat);
    for (const auto& m : field<std::vector<std::vector<double>>>(c, "data.modes")) {
      if (m.size() != 3) throw InvalidArgument("data.modes: each entry must be [j, re, im]");
      const long j = std::lround(m[0]);
      if (!lat.contains_j(j)) throw InvalidArgument("data.modes: index " + std::to_string(j) + " outside truncation");
      u.set_j(j, u.at_j(j) + cplx{m[1], m[2]});
    }
    return u;
  }
  if (kind == "phi") {
    const double N = positive(c, "data.N");
    const auto phi = make_phi(s.lambda, N, Variant::Torus, s.K);
    return cplx{amp, 0.0} * phi;
  }
  throw InvalidArgument("data.kind: expected zero, random, modes or phi, got '" + kind + "'");
}

inline double relative_h(const SpectralField& a, const SpectralField& b, double s) {
  const double d = h_norm(a - b, s), n = h_norm(b, s);
  return n > 0.0 ? d / n : d;
}

inline RunResult run_solve(const json& cfg) {
  RunResult r;
  r.command = "solve";
  r.config = cfg;
  r.seed = field<std::uint64_t>(cfg, "seed");
  const auto sc = solver_config_of(cfg);
  const bool ref_on = field<bool>(cfg, "reference.enabled");
  const int refine = field<int>(cfg, "reference.refine");
  const double ref_tol = positive(cfg, "reference.tolerance");
  if (refine < 1) throw InvalidArgument("reference.refine: must be >= 1");
  const auto u0 = initial_data(cfg, sc, r.seed);
  r.outputs.add_spectrum("u0.bin", u0);

  json rep = {{"data_norm", h_norm(u0, sc.s)}, {"s", sc.s}};
  try {
    const auto res = picard_solve(u0, sc);
    const auto& tr = res.solution;
    rep["time_grid"] = {{"t_start", tr.t_start}, {"dt", tr.dt}, {"count", tr.count}};
    rep["iterations"] = res.report.iterations;
    rep["converged"] = res.report.converged;
    rep["differences"] = res.report.differences;
    rep["ratios"] = res.report.ratios;
    rep["residual"] = res.report.residual;
    r.outputs.add_spectrum("trajectory.bin", tr);
    if (field<bool>(cfg, "dump_iterates"))
      for (std::size_t i = 0; i < res.iterates.size(); ++i)
        r.outputs.add_spectrum("iterate" + std::to_string(i + 1) + ".bin", res.iterates[i]);
    const double last = res.report.differences.empty() ? 0.0 : res.report.differences.back();
    r.checks.push_back(check_lt("picard_contraction", "contraction of the Picard map in C_t H^s", last,
                                sc.contractionTol));
    r.checks.push_back(check_lt("fixed_point_residual", "discrete Duhamel integral equation", res.report.residual,
                                10.0 * sc.contractionTol));
    if (ref_on) {
      SolverConfig rc = sc;
      rc.dt = sc.dt / refine;
      try {
        const auto ref = reference_solve(u0, rc);
        r.outputs.add_spectrum("reference.bin", ref);
        double worst = 0.0;
        for (double t : sc.symmetric ? std::vector<double>{-sc.T, sc.T} : std::vector<double>{sc.T})
          worst = std::max(worst, relative_h(tr.slice(tr.index_of(t)), ref.slice(ref.index_of(t)), sc.s));
        rep["reference"] = {{"dt", rc.dt}, {"endpoint_relative_difference", worst}};
        r.checks.push_back(check_lt("reference_agreement", "Picard solution against the fourth-order integrator",
                                    worst, ref_tol, true));
      } catch (const StepRejected& e) {
        rep["reference"] = {{"dt", rc.dt}, {"error", e.what()}};
        r.checks.push_back(check_true("reference_step_control", "reference local error below tolerance", false));
      }
    }
  } catch (const DivergedError& e) {
    rep["error"] = e.what();
    rep["ratios"] = e.ratios();
    r.checks.push_back(check_true("picard_contraction", "contraction of the Picard map in C_t H^s", false));
  }
  rep["checks"] = to_json(r.checks);
  r.outputs.add_json("solve.json", rep);
  return r;
}

// ---------------------------------------------------------------------------
// verify counting

inline Lemma parse_lemma(const std::string& s) {
  if (s == "RB1") return Lemma::RB1;
  if (s == "RB2") return Lemma::RB2;
  throw InvalidArgument("lemmas: expected RB1 or RB2, got '" + s + "'");
}

inline RunResult run_counting(const json& cfg) {
  RunResult r;
  r.command = "verify.counting";
  r.config = cfg;
  r.seed = field<std::uint64_t>(cfg, "seed");
  const auto lambdas = field<std::vector<double>>(cfg, "lambdas");
  const auto Ms = dyadic_list(positive(cfg, "M_max"));
  const auto band = field<std::vector<double>>(cfg, "exceptional_band");
  if (lambdas.empty()) throw InvalidArgument("lambdas: must be non-empty");
  if (band.size() != 2) throw InvalidArgument("exceptional_band: expected [lo, hi]");
  std::vector<Lemma> lemmas;
  for (const auto& s : field<std::vector<std::string>>(cfg, "lemmas")) lemmas.push_back(parse_lemma(s));
  SamplerSpec sp;
  sp.random_per_k = field<std::size_t>(cfg, "random_per_k");
  sp.max_random_ks = field<std::size_t>(cfg, "max_random_ks");
  sp.seed = r.seed;
  sp.workers = field<unsigned>(cfg, "workers");
  sp.c_case = positive(cfg, "c_case");
  const double median_factor = positive(cfg, "median_factor");
  const double kendall_max = positive(cfg, "kendall_max");
  for (double l : lambdas)
    if (!(l >= 1.0)) throw InvalidArgument("lambdas: each lambda must be >= 1");

  std::vector<SweepResult> rows;
  json summary = json::object();
  for (Lemma lem : lemmas) {
    const std::string ln = lemma_name(lem);
    for (Side side : {Side::Complement, Side::Exceptional}) {
      std::vector<SweepResult> part;
      for (double lam : lambdas)
        for (double M1 : Ms)
          for (double M2 : Ms) {
            CountingCase c{lem, side, M1, M2, lam, side == Side::Complement};
            part.push_back(sup_sweep(c, sp));
          }
      std::vector<double> ratio, mm, ll;
      for (const auto& x : part) {
        ratio.push_back(x.ratio);
        mm.push_back(x.cas.M1 * x.cas.M2);
        ll.push_back(x.cas.lambda);
      }
      const double mx = *std::max_element(ratio.begin(), ratio.end());
      const double med = stats::median(ratio);
      const std::string tag = ln + "_" + side_name(side);
      json js = {{"max_ratio", mx}, {"median_ratio", med}};
      r.checks.push_back(check_le(tag + "_within_c_case", "counting sup against its bound", mx, sp.c_case));
      if (side == Side::Complement) {
        r.checks.push_back(check_lt(tag + "_max_over_median", "boundedness of the counting ratio", mx / med,
                                    median_factor));
        if (Ms.size() > 1) {
          const double t = stats::kendall_tau(mm, ratio);
          js["kendall_M1M2"] = t;
          r.checks.push_back(check_lt(tag + "_kendall_M1M2", "no growth of the counting ratio in M1 M2",
                                      std::abs(t), kendall_max));
        }
        if (lambdas.size() > 1) {
          const double t = stats::kendall_tau(ll, ratio);
          js["kendall_lambda"] = t;
          r.checks.push_back(check_lt(tag + "_kendall_lambda", "no growth of the counting ratio in lambda",
                                      std::abs(t), kendall_max));
        }
      } else {
        // sup(2 lambda) / sup(lambda), median over the M grid, for each doubling present.
        json doubling = json::array();
        double worst = 0.5;
        bool any = false;
        const std::size_t per = Ms.size() * Ms.size();
        for (std::size_t a = 0; a < lambdas.size(); ++a)
          for (std::size_t b = 0; b < lambdas.size(); ++b) {
            if (lambdas[b] != 2.0 * lambdas[a]) continue;
            std::vector<double> q;
            for (std::size_t i = 0; i < per; ++i) {
              const double lo = part[a * per + i].sup_value, hi = part[b * per + i].sup_value;
              if (lo > 0.0) q.push_back(hi / lo);
            }
            if (q.empty()) continue;
            const double m = stats::median(q);
            doubling.push_back({{"lambda", lambdas[a]}, {"median_factor", m}});
            if (!any || std::abs(m - 0.5) > std::abs(worst - 0.5)) worst = m;
            any = true;
          }
        js["lambda_doubling"] = doubling;
        if (any)
          r.checks.push_back(check_in(tag + "_lambda_doubling", "inverse-lambda factor of the exceptional bound", worst,
                                      band[0], band[1]));
      }
      summary[tag] = js;
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }

  // Duality: DRB1 against RB2 and DRB2 against RB1 at seeded random points.
  const int pts = field<int>(cfg, "duality_points");
  const double dtol = positive(cfg, "duality_tol");
  Rng rng(derive_seed(r.seed, 0xD0A1));
  std::uniform_real_distribution<double> U(-500.0, 500.0);
  double worst = 0.0;
  for (double lam : lambdas)
    for (double M1 : {Ms.front(), Ms.back()})
      for (double M2 : {Ms.front(), Ms.back()})
        for (Side side : {Side::Complement, Side::Exceptional}) {
          const bool w = side == Side::Complement;
          const CountingCase rb1{Lemma::RB1, side, M1, M2, lam, w}, rb2{Lemma::RB2, side, M1, M2, lam, w};
          const CountingCase d1{Lemma::DRB1, side, M1, M2, lam, w}, d2{Lemma::DRB2, side, M1, M2, lam, w};
          for (int i = 0; i < pts; ++i) {
            double k = std::round(U(rng) / 20.0 * lam) / lam;
            if (k == 0.0) k = -1.0 / lam;
            const double tau = U(rng);
            const double a = cell_measure(rb2, tau, k), b = cell_measure(d1, tau, k);
            const double p = cell_measure(rb1, tau, k), q = cell_measure(d2, tau, k);
            worst = std::max({worst, std::abs(a - b) / std::max(1.0, a), std::abs(p - q) / std::max(1.0, p)});
          }
        }
  summary["duality_max_relative_error"] = worst;
  r.checks.push_back(check_le("duality_identities", "dual counting forms equal their direct counterparts", worst,
                              dtol, true));

  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  r.outputs.add("counting.csv", csv.str());
  summary["checks"] = to_json(r.checks);
  r.outputs.add_json("counting.json", summary);
  return r;
}

// ---------------------------------------------------------------------------
// verify embeddings

inline RunResult run_embeddings(const json& cfg) {
  RunResult r;
  r.command = "verify.embeddings";
  r.config = cfg;
  r.seed = field<std::uint64_t>(cfg, "seed");
  EmbeddingConfig c;
  c.seed = r.seed;
  c.workers = field<unsigned>(cfg, "workers");
  c.s_values = field<std::vector<double>>(cfg, "s_values");
  c.thetas = field<std::vector<double>>(cfg, "thetas");
  c.lambdas = field<std::vector<double>>(cfg, "lambdas");
  c.fields = field<int>(cfg, "fields");
  c.K = field<double>(cfg, "K");
  c.dtau = field<double>(cfg, "dtau");
  c.bumps = field<int>(cfg, "bumps");
  c.growth_tol = field<double>(cfg, "growth_tol");
  const auto rep = embedding_suite(c);

  std::ostringstream csv;
  csv.precision(17);
  csv << "embedding,s,theta,lambda,fields,max_ratio,median_ratio\n";
  for (const auto& x : rep.cells)
    csv << embedding_name(x.embedding) << ',' << x.s << ',' << x.theta << ',' << x.lambda << ',' << x.fields << ','
        << x.max_ratio << ',' << x.median_ratio << '\n';
  r.outputs.add("embeddings.csv", csv.str());

  json st = json::array();
  for (const auto& x : rep.stability) {
    std::string tag = embedding_name(x.embedding) + "_s" + fmt(x.s);
    if (x.embedding == Embedding::XthetaYsToWs) tag += "_theta" + fmt(x.theta);
    bool finite = true;
    for (const auto& cell : rep.cells)
      if (cell.embedding == x.embedding && cell.s == x.s && cell.theta == x.theta) finite = finite && cell.finite;
    r.checks.push_back(check_true(tag + "_finite", "embedding ratio bounded on every field", finite));
    r.checks.push_back(check_lt(tag + "_growth", "lambda-independent embedding constant", x.worst_growth,
                                c.growth_tol));
    st.push_back({{"embedding", embedding_name(x.embedding)}, {"s", x.s}, {"theta", x.theta},
                  {"worst_growth_per_doubling", x.worst_growth}});
  }
  r.outputs.add_json("embeddings.json", {{"stability", st}, {"checks", to_json(r.checks)}});
  return r;
}

// ---------------------------------------------------------------------------
// verify bilinear

inline Generator parse_generator(const std::string& s) {
  for (auto g : {Generator::Random, Generator::AdversarialOmega4, Generator::PerRegion})
    if (s == generator_name(g)) return g;
  throw InvalidArgument("generator: expected random, adversarial-omega4 or per-region, got '" + s + "'");
}

inline RunResult run_bilinear(const json& cfg) {
  RunResult r;
  r.command = "verify.bilinear";
  r.config = cfg;
  r.seed = field<std::uint64_t>(cfg, "seed");
  const double s = field<double>(cfg, "s");
  const auto lambdas = field<std::vector<double>>(cfg, "lambdas");
  if (lambdas.size() < 2) throw InvalidArgument("lambdas: need at least two values for a slope");
  const auto gen = parse_generator(field<std::string>(cfg, "generator"));
  ProbeOptions opt;
  opt.seed = r.seed;
  opt.dtau = positive(cfg, "dtau");
  opt.trials = field<int>(cfg, "trials");
  const auto ranges = field<std::map<std::string, std::vector<double>>>(cfg, "slope_ranges");
  const std::vector<BilinearKind> kinds{BilinearKind::UVbar, BilinearKind::UV, BilinearKind::UbarVbar};
  for (const auto& [k, v] : ranges) {
    bool known = false;
    for (auto kind : kinds) known = known || k == kind_name(kind);
    if (!known) throw InvalidArgument("slope_ranges." + k + ": unknown kind");
    if (v.size() != 2) throw InvalidArgument("slope_ranges." + k + ": expected [lo, hi]");
  }
  if (!(s >= -0.5 && s <= -0.25)) throw InvalidArgument("s: must lie in [-1/2, -1/4]");

  std::vector<SlopeReport> reps(kinds.size());
  const unsigned workers = std::max(1u, field<unsigned>(cfg, "workers"));
  auto run = [&](unsigned w) {
    for (std::size_t i = w; i < kinds.size(); i += workers) reps[i] = slope_sweep(s, lambdas, kinds[i], gen, opt);
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "kind,generator,s,lambda,ratio\n";
  json sweeps = json::array();
  for (const auto& rep : reps) {
    for (std::size_t i = 0; i < rep.lambdas.size(); ++i)
      csv << kind_name(rep.kind) << ',' << generator_name(gen) << ',' << s << ',' << rep.lambdas[i] << ','
          << rep.ratios[i] << '\n';
    sweeps.push_back(to_json(rep));
    const auto it = ranges.find(kind_name(rep.kind));
    if (it != ranges.end())
      r.checks.push_back(check_in(std::string(kind_name(rep.kind)) + "_slope",
                                  rep.kind == BilinearKind::UVbar ? "lambda loss of the u v-bar bilinear estimate"
                                                                  : "no lambda loss for uv and ubar vbar",
                                  rep.slope, it->second[0], it->second[1]));
  }
  r.outputs.add("bilinear.csv", csv.str());
  r.outputs.add_json("bilinear.json", {{"sweeps", sweeps}, {"checks", to_json(r.checks)}});
  return r;
}

// ---------------------------------------------------------------------------
// verify l4

inline RunResult run_l4(const json& cfg) {
  RunResult r;
  r.command = "verify.l4";
  r.config = cfg;
  r.seed = field<std::uint64_t>(cfg, "seed");
  const auto lambdas = field<std::vector<double>>(cfg, "lambdas");
  const int fields = field<int>(cfg, "fields");
  const double K = positive(cfg, "K"), dtau = positive(cfg, "dtau");
  const int bumps = field<int>(cfg, "bumps");
  const double growth_tol = field<double>(cfg, "growth_tol");
  if (lambdas.empty()) throw InvalidArgument("lambdas: must be non-empty");
  if (fields < 1) throw InvalidArgument("fields: must be >= 1");
  if (bumps < 1) throw InvalidArgument("bumps: must be >= 1");
  for (double l : lambdas)
    if (!(l >= 1.0)) throw InvalidArgument("lambdas: each lambda must be >= 1");

  const std::size_t nl = lambdas.size(), nf = static_cast<std::size_t>(fields);
  std::vector<double> ratio(nl * nf);
  const unsigned workers = std::max(1u, field<unsigned>(cfg, "workers"));
  const double sigma = 8.0 * K * K;
  auto run = [&](unsigned w) {
    for (std::size_t job = w; job < ratio.size(); job += workers) {
      const std::size_t il = job / nf, f = job % nf;
      const auto model = random_smooth_model(derive_seed(r.seed, f), bumps, K, sigma);
      ratio[job] = l4_ratio(model.sample(make_lattice(lambdas[il], K), make_tau_grid(sigma, dtau)));
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "lambda,fields,max_ratio,median_ratio\n";
  json per = json::array();
  bool finite = true;
  double worst = 0.0;
  for (std::size_t il = 0; il < nl; ++il) {
    std::vector<double> q(ratio.begin() + static_cast<long>(il * nf), ratio.begin() + static_cast<long>((il + 1) * nf));
    for (double x : q) finite = finite && std::isfinite(x);
    const double mx = *std::max_element(q.begin(), q.end()), med = stats::median(q);
    csv << lambdas[il] << ',' << fields << ',' << mx << ',' << med << '\n';
    per.push_back({{"lambda", lambdas[il]}, {"max_ratio", mx}, {"median_ratio", med}});
    if (il > 0) {
      const double prev = per[il - 1]["max_ratio"].get<double>();
      const double d = std::log2(lambdas[il] / lambdas[il - 1]);
      if (d > 0.0 && prev > 0.0) worst = std::max(worst, std::pow(mx / prev, 1.0 / d) - 1.0);
    }
  }
  r.checks.push_back(check_true("l4_ratio_finite", "L4 bound by the X^{0,3/8} norm", finite));
  r.checks.push_back(check_lt("l4_max_ratio_growth", "lambda-independent L4 constant", worst, growth_tol));
  r.outputs.add("l4.csv", csv.str());
  r.outputs.add_json("l4.json", {{"per_lambda", per}, {"checks", to_json(r.checks)}});
  return r;
}

// ---------------------------------------------------------------------------
// inflate

inline InflationConfig inflation_config_of(const json& cfg) {
  InflationConfig c;
  c.s = field<double>(cfg, "s");
  c.delta = field<double>(cfg, "delta");
  c.lambda = field<double>(cfg, "lambda");
  c.t0 = field<double>(cfg, "t0");
  c.Nlist = field<std::vector<double>>(cfg, "Nlist");
  c.count = field<int>(cfg, "count");
  c.growth = field<double>(cfg, "growth");
  c.variant = parse_variant(field<std::string>(cfg, "variant"));
  c.K = field<double>(cfg, "K");
  c.refine = field<int>(cfg, "refine");
  c.phase_step = field<double>(cfg, "phase_step");
  c.maxPicard = field<int>(cfg, "maxPicard");
  c.tol = field<double>(cfg, "tol");
  c.workers = field<int>(cfg, "workers");
  validate(c);
  return c;
}

inline RunResult run_inflate(json cfg) {
  RunResult r;
  r.command = "inflate";
  r.seed = field<std::uint64_t>(cfg, "seed");
  auto c = inflation_config_of(cfg);
  if (c.Nlist.empty()) {
    c.Nlist = auto_nlist(c.lambda, c.t0, c.count, c.growth);
    cfg["Nlist"] = c.Nlist;
  }
  r.config = cfg;
  const auto rep = inflation_sweep(c);

  bool rows_ok = true;
  for (const auto& row : rep.rows) rows_ok = rows_ok && row.error.empty();
  r.checks.push_back(check_true("rows_completed", "Picard iteration converges for every N", rows_ok));
  const auto& v = rep.verdict;
  if (v.kind == "plateau") {
    r.checks.push_back(check_ge("data_norm_drop", "data norm tends to zero in H^s", v.data_drop, kDataDrop));
    r.checks.push_back(check_lt("solution_plateau", "solution norm at t0 stays bounded below", v.solution_spread,
                                kPlateauSpread));
  } else {
    r.checks.push_back(check_lt("ratio_bounded", "solution over data norm bounded at the threshold regularity",
                                v.ratio_spread, kBoundedSpread));
  }
  std::ostringstream csv, tsv;
  write_inflation_csv(rep, csv);
  write_inflation_plot(rep, tsv);
  r.outputs.add("inflation.csv", csv.str());
  r.outputs.add("inflation_plot.tsv", tsv.str());
  auto j = to_json(rep);
  j["checks"] = to_json(r.checks);
  r.outputs.add_json("inflation.json", j);
  return r;
}

// ---------------------------------------------------------------------------
// norms

inline RunResult run_norms(const json& cfg) {
  RunResult r;
  r.command = "norms";
  r.config = cfg;
  r.seed = field<std::uint64_t>(cfg, "seed");
  const auto input = field<std::string>(cfg, "input");
  if (input.empty()) throw InvalidArgument("input: a spectrum dump path is required");
  auto kind = field<std::string>(cfg, "kind");
  const auto svals = field<std::vector<double>>(cfg, "s");
  const auto bvals = field<std::vector<double>>(cfg, "b");
  if (kind != "auto" && kind != "field" && kind != "spacetime" && kind != "trajectory")
    throw InvalidArgument("kind: expected auto, field, spacetime or trajectory, got '" + kind + "'");
  const auto dump = read_spectrum_file(input);
  if (kind == "auto") kind = dump.rows == 0 ? "field" : "spacetime";

  json out = {{"input", input}, {"kind", kind}, {"lambda", dump.lambda}, {"K", dump.K},
              {"modes", dump.modes}, {"rows", dump.rows}};
  json norms = json::array();
  if (kind == "field") {
    if (dump.rows != 0) throw InvalidArgument("kind: dump holds " + std::to_string(dump.rows) + " rows, not one field");
    const auto f = field_of(dump);
    for (double s : svals) norms.push_back({{"s", s}, {"h_norm", h_norm(f, s)}});
  } else if (kind == "spacetime") {
    const auto U = spacetime_of(dump, positive(cfg, "dtau"), field<double>(cfg, "tau_center"));
    for (double s : svals) {
      json e = {{"s", s}, {"ys_norm", ys_norm(U, s)}};
      json x = json::array();
      for (double b : bvals) x.push_back({{"b", b}, {"xsb_norm", xsb_norm(U, s, b)}});
      e["xsb"] = x;
      if (s >= -0.5 && s <= -0.25) e["ws_norm"] = ws_norm(U, s);
      norms.push_back(e);
    }
  } else {
    const auto tr = trajectory_of(dump, field<double>(cfg, "t_start"), positive(cfg, "dt"));
    for (double s : svals)
      norms.push_back({{"s", s},
                       {"sup_h_norm", sup_h_norm(tr, s)},
                       {"h_norm_first", h_norm(tr.slice(0), s)},
                       {"h_norm_last", h_norm(tr.slice(tr.count - 1), s)}});
  }
  out["norms"] = norms;
  r.outputs.add_json("norms.json", out);
  return r;
}

// ---------------------------------------------------------------------------
// Dispatch, manifest and persistence.

inline RunResult run_command(const std::string& command, const json& cfg) {
  if (command == "solve") return run_solve(cfg);
  if (command == "inflate") return run_inflate(cfg);
  if (command == "norms") return run_norms(cfg);
  if (command == "verify.counting") return run_counting(cfg);
  if (command == "verify.embeddings") return run_embeddings(cfg);
  if (command == "verify.bilinear") return run_bilinear(cfg);
  if (command == "verify.l4") return run_l4(cfg);
  throw InvalidArgument("unknown command '" + command + "'");
}

inline json manifest_of(const std::string& command, const RunResult& r) {
  json checks = json::array();
  bool pass = true;
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}});
    pass = pass && c.pass;
  }
  return {{"command", command},   {"version", kVersion},   {"seed", r.seed},
          {"config", r.config},   {"outputs", r.outputs.names()}, {"checks", checks},
          {"pass", pass}};
}

inline bool is_manifest(const json& j) {
  return j.is_object() && j.contains("command") && j.contains("config") && j.contains("version");
}

/// Writes staged outputs, then manifest.json, then a wall-time log kept out of the manifest.
inline void commit(const std::filesystem::path& dir, const RunResult& r, const json& manifest, double seconds) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& bytes) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f << bytes;
  };
  for (const auto& [name, bytes] : r.outputs.files) put(name, bytes);
  put("manifest.json", manifest.dump(2) + "\n");
  std::ostringstream log;
  log << "command " << manifest["command"].get<std::string>() << "\nwall_time_seconds " << seconds << "\n";
  put("run.log", log.str());
}

struct Invocation {
  std::string command;  // "solve", "inflate", "norms", "verify.<suite>"
  std::string config_path;
  std::string out_dir = "out";
  std::string input;  // norms positional
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

/// Resolve defaults, config file (or manifest) and flag overrides into one snapshot.
inline json resolve_config(const Invocation& inv) {
  json cfg = defaults_for(inv.command);
  if (!inv.config_path.empty()) {
    std::ifstream f(inv.config_path);
    if (!f) throw InvalidArgument("--config: cannot open '" + inv.config_path + "'");
    json user;
    try {
      user = json::parse(f);
    } catch (const json::parse_error& e) {
      throw InvalidArgument("--config: parse error: " + std::string(e.what()));
    }
    if (is_manifest(user)) {
      const auto cmd = user["command"].get<std::string>();
      if (cmd != inv.command) throw InvalidArgument("--config: manifest is for '" + cmd + "', not '" + inv.command + "'");
      user = user["config"];
    }
    merge_config(cfg, user, "");
  }
  if (inv.seed) cfg["seed"] = *inv.seed;
  if (inv.workers) cfg["workers"] = *inv.workers;
  if (!inv.input.empty()) cfg["input"] = inv.input;
  if (field<int>(cfg, "workers") < 1) throw InvalidArgument("workers: must be >= 1");
  return cfg;
}

inline void print_summary(std::ostream& out, const RunResult& r, const std::filesystem::path& dir) {
  for (const auto& c : r.checks)
    out << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << c.value << " [" << c.relation << "]\n";
  out << "wrote " << r.outputs.files.size() + 2 << " files to " << dir.string() << "\n";
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Numerical laboratory for the good Boussinesq equation on rescaled tori"};
  app.require_subcommand(0, 1);
  bool print_all = false;
  app.add_flag("--print-defaults", print_all, "Print every default configuration as JSON");

  Invocation inv;
  std::string suite;
  bool print_defaults = false;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config_path, "JSON config file or a manifest.json to re-run");
    sub->add_option("--seed", seed, "Root RNG seed (overrides the config)");
    sub->add_option("--workers", workers, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", inv.out_dir, "Output directory");
    sub->add_flag("--print-defaults", print_defaults, "Print this command's default configuration");
  };
  auto* solve = app.add_subcommand("solve", "Picard solve with reference cross-check");
  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("suite", suite, "counting, embeddings, bilinear or l4")
      ->required()
      ->check(CLI::IsMember(verify_suites()));
  auto* inflate = app.add_subcommand("inflate", "Norm inflation sweep");
  auto* norms = app.add_subcommand("norms", "Norms of a binary spectrum dump");
  norms->add_option("input", inv.input, "Spectrum dump file");
  for (auto* s : {solve, verify, inflate, norms}) common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(Exit::Usage);
  }
  if (print_all) {
    out << all_defaults().dump(2) << "\n";
    return 0;
  }
  if (solve->parsed()) inv.command = "solve";
  if (verify->parsed()) inv.command = "verify." + suite;
  if (inflate->parsed()) inv.command = "inflate";
  if (norms->parsed()) inv.command = "norms";
  if (inv.command.empty()) {
    err << app.help();
    return static_cast<int>(Exit::Usage);
  }
  if (print_defaults) {
    out << defaults_for(inv.command).dump(2) << "\n";
    return 0;
  }
  auto* sub = solve->parsed() ? solve : verify->parsed() ? verify : inflate->parsed() ? inflate : norms;
  if (sub->count("--seed")) inv.seed = seed;
  if (sub->count("--workers")) inv.workers = workers;

  RunResult result;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const json cfg = resolve_config(inv);
    result = run_command(inv.command, cfg);
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << "\n";
    return static_cast<int>(Exit::Usage);
  } catch (const GridMismatch& e) {
    err << "config error: " << e.what() << "\n";
    return static_cast<int>(Exit::Usage);
  } catch (const ConsistencyError& e) {
    err << "internal inconsistency: " << e.what() << "\n";
    return static_cast<int>(Exit::Internal);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    commit(inv.out_dir, result, manifest_of(inv.command, result), seconds);
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << "\n";
    return static_cast<int>(Exit::Usage);
  }
  print_summary(out, result, inv.out_dir);
  return static_cast<int>(exit_of(result.checks));
}

}  // namespace gblab::cli
