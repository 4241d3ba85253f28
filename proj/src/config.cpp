// Copyright 2026 The mfclear Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mfclear/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mfclear/errors.hpp"

namespace mfclear {

namespace {

int line_of(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  return m.is_null() ? -1 : m.line + 1;
}

// A mapping node together with its dotted key path.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      throw ConfigError(path_, line_of(node_), "expected a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  int line() const { return line_of(node_); }

  Section sub(const std::string& k) const {
    return has(k) ? Section(node_[k], key(k)) : Section(YAML::Node(), key(k));
  }

  YAML::Node need(const std::string& k) const {
    if (!has(k)) throw ConfigError(key(k), line(), "missing required key");
    return node_[k];
  }

  template <class T>
  T get(const std::string& k, const T& fallback) const {
    return has(k) ? as<T>(node_[k], k) : fallback;
  }
  template <class T>
  T req(const std::string& k) const {
    return as<T>(need(k), k);
  }

  template <class T>
  T as(const YAML::Node& n, const std::string& k) const {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key(k), line_of(n), "value has the wrong type");
    }
  }

  MatX matrix(const std::string& k, int rows, int cols, bool required, double fill = 0.0) const {
    if (!has(k)) {
      if (required) throw ConfigError(key(k), line(), "missing required key");
      MatX m = MatX::Zero(rows, cols);
      for (int i = 0; i < std::min(rows, cols); ++i) m(i, i) = fill;
      return m;
    }
    const YAML::Node n = node_[k];
    if (n.IsScalar()) {
      const double s = as<double>(n, k);
      MatX m = MatX::Zero(rows, cols);
      for (int i = 0; i < std::min(rows, cols); ++i) m(i, i) = s;
      return m;
    }
    if (!n.IsSequence() || static_cast<int>(n.size()) != rows)
      throw ConfigError(key(k), line_of(n),
                        "expected a scalar or " + std::to_string(rows) + " rows");
    MatX m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      const YAML::Node row = n[r];
      if (cols == 1 && row.IsScalar()) {
        m(r, 0) = as<double>(row, k);
        continue;
      }
      if (!row.IsSequence() || static_cast<int>(row.size()) != cols)
        throw ConfigError(key(k), line_of(row), "expected rows of length " + std::to_string(cols));
      for (int c = 0; c < cols; ++c) m(r, c) = as<double>(row[c], k);
    }
    return m;
  }

  VecX vector(const std::string& k, int size, double fallback = 0.0) const {
    if (!has(k)) return VecX::Constant(size, fallback);
    const YAML::Node n = node_[k];
    if (n.IsScalar()) return VecX::Constant(size, as<double>(n, k));
    if (!n.IsSequence() || static_cast<int>(n.size()) != size)
      throw ConfigError(key(k), line_of(n), "expected a scalar or " + std::to_string(size) +
                                                " entries");
    VecX v(size);
    for (int i = 0; i < size; ++i) v(i) = as<double>(n[i], k);
    return v;
  }

 private:
  YAML::Node node_;
  std::string path_;
};

AffineMap affine(const Section& s, int n, int m0, int m_own) {
  AffineMap a;
  a.offset = s.vector("offset", n);
  a.on_common = s.matrix("on_common", n, m0, false);
  a.on_own = s.matrix("on_own", n, m_own, false);
  return a;
}

InfoProcess info(const Section& s) {
  InfoProcess ip;
  const int m = s.get<int>("dim", 0);
  if (m < 0) throw ConfigError(s.key("dim"), s.line(), "must be non-negative");
  ip.init = s.vector("init", m);
  ip.rate = s.matrix("rate", m, m, false);
  ip.mean = s.vector("mean", m);
  ip.vol = MatX();  // sized once the Brownian dimension is known
  return ip;
}

GaussianLaw law(const Section& s, int n) {
  GaussianLaw g;
  g.mean = s.vector("mean", n);
  g.cov = s.matrix("cov", n, n, false);
  return g;
}

template <class T>
std::vector<T> list(const Section& s, const std::string& k, std::vector<T> fallback) {
  if (!s.has(k)) return fallback;
  const YAML::Node n = s.need(k);
  if (!n.IsSequence()) throw ConfigError(s.key(k), line_of(n), "expected a list");
  std::vector<T> out;
  for (const auto& e : n) out.push_back(s.as<T>(e, k));
  return out;
}

}  // namespace

Config parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("<document>", e.mark.line + 1, e.msg);
  }
  if (!root || !root.IsMap()) throw ConfigError("<document>", -1, "expected a mapping at top level");
  const Section top(root, "");
  Config c;

  const Section mk = top.sub("market");
  if (!top.has("market")) throw ConfigError("market", -1, "missing required section");
  MarketParams& p = c.market;
  p.n = mk.req<int>("n");
  p.N1 = mk.req<int>("N1");
  p.N2 = mk.req<int>("N2");
  p.T = mk.req<double>("T");
  p.M = mk.req<int>("M");
  if (p.n <= 0) throw ConfigError(mk.key("n"), mk.line(), "must be positive");
  if (p.N1 <= 0 || p.N2 <= 0)
    throw ConfigError(mk.key("N1"), mk.line(), "populations must be positive");
  if (p.M <= 0) throw ConfigError(mk.key("M"), mk.line(), "must be positive");
  if (!(p.T > 0.0)) throw ConfigError(mk.key("T"), mk.line(), "must be positive");
  p.delta = static_cast<double>(p.N1) / p.N2;
  p.Lambda = mk.matrix("Lambda", p.n, p.n, true);
  p.b = mk.get<double>("b", 0.0);
  p.rho1 = mk.get<double>("rho1", 0.0);
  p.rho2 = mk.req<double>("rho2");
  p.d0 = mk.get<int>("d0", 1);
  p.d1 = mk.get<int>("d1", 1);
  p.d2 = mk.get<int>("d2", 1);
  if (p.d0 < 0 || p.d1 < 0 || p.d2 < 0)
    throw ConfigError(mk.key("d0"), mk.line(), "Brownian dimensions must be non-negative");

  const Section inf = top.sub("information");
  InfoSpec& is = c.costs.info;
  is.common = info(inf.sub("common"));
  is.pop1 = info(inf.sub("cooperative"));
  is.pop2 = info(inf.sub("noncooperative"));
  is.common.vol = inf.sub("common").matrix("vol", is.common.dim(), p.d0, false);
  is.pop1.vol = inf.sub("cooperative").matrix("vol", is.pop1.dim(), p.d1, false);
  is.pop2.vol = inf.sub("noncooperative").matrix("vol", is.pop2.dim(), p.d2, false);
  const int m0 = is.common.dim(), m1 = is.pop1.dim(), m2 = is.pop2.dim();

  const Section co = top.sub("cooperative");
  if (!top.has("cooperative")) throw ConfigError("cooperative", -1, "missing required section");
  Pop1Cost& c1 = c.costs.pop1;
  c1.q_x = co.matrix("q_x", p.n, p.n, true);
  c1.q_mu = co.get<double>("q_mu", 0.0);
  c1.lambda_beta = co.req<double>("lambda_beta");
  c1.lambda_phi = co.req<double>("lambda_phi");
  c1.phi_target = co.vector("phi_target", p.n);
  c1.include_trade_cost = co.get<bool>("include_trade_cost", true);
  c1.q_g = co.matrix("q_g", p.n, p.n, true);
  c1.q_g_mu = co.get<double>("q_g_mu", 0.0);
  c1.running_linear = affine(co.sub("running_linear"), p.n, m0, m1);
  c1.terminal_linear = affine(co.sub("terminal_linear"), p.n, m0, m1);
  c1.order_flow = affine(co.sub("order_flow"), p.n, m0, m1);
  c1.sigma0 = co.matrix("sigma0", p.n, p.d0, false);
  c1.sigma = co.matrix("sigma", p.n, p.d1, false);
  if (co.has("box")) {
    const Section bx = co.sub("box");
    Box b;
    b.lo = bx.vector("lo", p.n, -std::numeric_limits<double>::infinity());
    b.hi = bx.vector("hi", p.n, std::numeric_limits<double>::infinity());
    if ((b.lo.array() > b.hi.array()).any())
      throw ConfigError(bx.key("lo"), bx.line(), "lower bound exceeds upper bound");
    c1.box = b;
  }
  c.laws.xi = law(co.sub("initial"), p.n);

  const Section nc = top.sub("noncooperative");
  if (!top.has("noncooperative")) throw ConfigError("noncooperative", -1, "missing required section");
  Pop2Cost& c2 = c.costs.pop2;
  c2.c_f = nc.matrix("c_f", p.n, p.n, true);
  c2.h_f = affine(nc.sub("h_f"), p.n, m0, m2);
  c2.c_g = nc.matrix("c_g", p.n, p.n, true);
  c2.h_g = affine(nc.sub("h_g"), p.n, m0, m2);
  c2.order_flow = affine(nc.sub("order_flow"), p.n, m0, m2);
  c2.sigma0 = nc.matrix("sigma0", p.n, p.d0, false);
  c2.sigma = nc.matrix("sigma", p.n, p.d2, false);
  c.laws.eta = law(nc.sub("initial"), p.n);

  const Section sv = top.sub("solver");
  SolverConfig& s = c.solver;
  s.rho_step = sv.get("rho_step", s.rho_step);
  s.damping = sv.get("damping", s.damping);
  s.max_outer = sv.get("max_outer", s.max_outer);
  s.max_inner = sv.get("max_inner", s.max_inner);
  s.fixpoint_tol = sv.get("fixpoint_tol", s.fixpoint_tol);
  s.stage_tol = sv.get("stage_tol", s.stage_tol);
  if (sv.has("cond_exp")) s.cond_exp = parse_cond_exp(sv.req<std::string>("cond_exp"));
  s.regression_degree = sv.get("regression_degree", s.regression_degree);
  s.minimizer_tol = sv.get("minimizer_tol", s.minimizer_tol);
  s.max_halvings = sv.get("max_halvings", s.max_halvings);
  s.blowup = sv.get("blowup", s.blowup);
  s.divergence_factor = sv.get("divergence_factor", s.divergence_factor);
  s.threads = sv.get("threads", s.threads);
  s.warm_start = sv.get("warm_start", s.warm_start);
  check(s);

  const Section sm = top.sub("simulation");
  c.sim.paths = sm.get("paths", c.sim.paths);
  c.sim.seed = sm.get<uint64_t>("seed", c.sim.seed);
  c.sim.max_cells = sm.get("max_cells", c.sim.max_cells);
  if (c.sim.paths <= 0) throw ConfigError(sm.key("paths"), sm.line(), "must be positive");

  const Section mf = top.sub("meanfield");
  c.meanfield.K1 = mf.get("K1", c.meanfield.K1);
  c.meanfield.K2 = mf.get("K2", c.meanfield.K2);
  c.meanfield.path_batch = mf.get("path_batch", c.meanfield.path_batch);
  if (c.meanfield.K1 < 2 || c.meanfield.K2 < 2)
    throw ConfigError(mf.key("K1"), mf.line(), "cloud sizes must be at least 2");
  if (c.meanfield.path_batch <= 0)
    throw ConfigError(mf.key("path_batch"), mf.line(), "must be positive");

  const Section ex = top.sub("experiments");
  ExperimentConfig& e = c.experiments;
  e.perturbations = ex.get("perturbations", e.perturbations);
  e.epsilon = ex.get("epsilon", e.epsilon);
  e.perturbation_seed = ex.get<uint64_t>("perturbation_seed", e.perturbation_seed);
  e.ladder = list<int>(ex, "ladder", e.ladder);
  e.convergence_paths = ex.get("convergence_paths", e.convergence_paths);
  e.deltas = list<double>(ex, "deltas", e.deltas);
  e.sweep_N1 = ex.get("sweep_N1", e.sweep_N1);
  e.sweep_paths = ex.get("sweep_paths", e.sweep_paths);
  e.monotonicity_pairs = ex.get("monotonicity_pairs", e.monotonicity_pairs);
  e.monotonicity_N2 = ex.get("monotonicity_N2", e.monotonicity_N2);
  return c;
}

Config load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file, -1, "cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

uint64_t seed_override(uint64_t configured) {
  const char* env = std::getenv("MFCLEAR_SEED");
  if (!env || !*env) return configured;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ConfigError("MFCLEAR_SEED", -1, "not an unsigned integer");
  return v;
}

MarketParams with_populations(const MarketParams& p, int N1, int N2) {
  MarketParams q = p;
  q.N1 = N1;
  q.N2 = N2;
  q.delta = static_cast<double>(N1) / N2;
  return q;
}

}  // namespace mfclear
