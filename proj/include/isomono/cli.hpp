#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "isomono/io.hpp"
#include "isomono/isoflow.hpp"
#include "isomono/monodromy.hpp"
#include "isomono/symplectic.hpp"
#include "isomono/twist.hpp"

namespace isomono::cli {

using io::Json;

enum Exit : int { kOk = 0, kInvariant = 2, kNumeric = 3, kParse = 4 };

struct RunSpec {
  std::string command;  // flow | monodromy | hamiltonian | verify | pairing
  std::string input;
  std::string out = ".";
  double tol = 1e-10;
  std::uint64_t seed = 0;
  std::vector<std::size_t> pins;
};

namespace detail {

struct Problem {
  Json doc;
  Connection a;
  MatrixDivisor twist;
};

inline Problem load(const RunSpec& spec) {
  Problem p;
  p.doc = io::read_json_file(spec.input);
  const io::Node root(p.doc, spec.input);
  if (root.has("connection")) p.a = io::connection_from_json(root["connection"]);
  if (root.has("twist")) p.twist = io::divisor_from_json(root["twist"], p.a.n());
  for (const auto i : spec.pins)
    if (root.has("connection") && i >= p.a.poles().size())
      throw io::ParseError("--pin: pole index " + std::to_string(i) + " out of range");
  return p;
}

inline double number_or(const io::Node& n, const std::string& key, double fallback) {
  return n.has(key) ? n[key].number() : fallback;
}

struct FlowPlan {
  ModuliPath path;
  std::size_t pole = 0;
  bool moves_pole = true;
  int samples = 10;
  double max_drift = 1e-6;
};

/// "path": {"kind": "arc", "pole", "center", "sweep"} | {"kind": "line",
/// "pole", "to"} | {"kind": "irregular", "pole", "rates"}.
inline FlowPlan flow_plan(const io::Node& flow, const Connection& a) {
  FlowPlan plan;
  const io::Node path = flow["path"];
  const std::string kind = path["kind"].string();
  const long pole = path["pole"].integer();
  if (pole < 0 || static_cast<std::size_t>(pole) >= a.poles().size()) path["pole"].fail("no such pole");
  plan.pole = static_cast<std::size_t>(pole);
  const std::size_t np = a.poles().size();
  const cplx t = a.poles()[plan.pole].t;
  if (kind == "arc") {
    plan.path = ModuliPath::arc(np, plan.pole, t, path["center"].complex(), path["sweep"].number());
  } else if (kind == "line") {
    const cplx v = path["to"].complex() - t;
    plan.path = ModuliPath{[=](double) { return Direction::translation(np, plan.pole, v); }, 0.0, 1.0};
  } else if (kind == "irregular") {
    const int l = a.poles()[plan.pole].order();
    const auto rates = path["rates"].matrices(a.n());
    if (l < 2 || rates.size() != static_cast<std::size_t>(l - 1))
      path["rates"].fail("need l - 1 diagonal rate matrices at a pole of order l >= 2");
    for (const auto& r : rates)
      if (max_abs(r - Mat(r.diagonal().asDiagonal())) != 0.0) path["rates"].fail("rates must be diagonal");
    plan.path = ModuliPath::irregular(np, plan.pole, rates);
    plan.moves_pole = false;
  } else {
    path["kind"].fail("unknown path kind \"" + kind + "\"");
  }
  if (flow.has("samples")) {
    const long s = flow["samples"].integer();
    if (s < 1) flow["samples"].fail("must be positive");
    plan.samples = static_cast<int>(s);
  }
  plan.max_drift = number_or(flow, "max_drift", plan.max_drift);
  return plan;
}

inline void write_json(const std::filesystem::path& file, const Json& j) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

inline int flow_like(const RunSpec& spec, const Problem& p, bool write_csv) {
  const io::Node root(p.doc, spec.input);
  const FlowPlan plan = flow_plan(root["flow"], p.a);
  for (const auto i : spec.pins)
    if (plan.moves_pole && i == plan.pole) throw io::ParseError("--pin: the path moves pinned pole " + std::to_string(i));
  const Trajectory tr = integrate_flow(FlowState{p.a, p.twist}, plan.path, spec.tol, plan.samples);
  std::filesystem::create_directories(spec.out);
  Json report{{"command", spec.command}, {"status", to_string(tr.status)}, {"pins", spec.pins}, {"seed", spec.seed}};
  if (write_csv) {
    std::ofstream csv(std::filesystem::path(spec.out) / "trajectory.csv");
    io::write_trajectory_csv(csv, tr.samples);
  }
  if (tr.status != Trajectory::Status::Completed) {
    report["message"] = tr.message;
    write_json(std::filesystem::path(spec.out) / "drift.json", report);
    std::cerr << "flow aborted: " << tr.message << '\n';
    return kNumeric;
  }
  const DriftReport rep = verify_isomonodromy(tr.samples, spec.tol);
  report["drift"] = io::to_json(rep);
  report["max_drift"] = plan.max_drift;
  // Pass/fail on the normwise drift: with strongly expanding loop matrices the
  // plain relative drift of e.g. a determinant is dominated by rounding.
  bool ok = rep.max_scaled_drift <= plan.max_drift;
  if (!plan.moves_pole) ok = ok && rep.max_type_tracking <= 1e-8;
  report["ok"] = ok;
  write_json(std::filesystem::path(spec.out) / "drift.json", report);
  std::cout << "max normwise drift " << rep.max_scaled_drift << ", relative " << rep.max_rel_drift
            << (ok ? " (ok)\n" : " (exceeds bound)\n");
  return ok ? kOk : kInvariant;
}

inline bool regular_at_infinity(const Connection& a) {
  if (!a.tail().empty()) return false;
  Mat sum = zero_mat(a.n());
  for (const auto& p : a.all_polar()) sum += p.c.front();
  double scale = 1.0;
  for (const auto& p : a.all_polar()) scale = std::max(scale, max_abs(p.c.front()));
  return max_abs(sum) <= 1e-12 * scale;
}

inline int monodromy(const RunSpec& spec, const Problem& p) {
  const io::Node root(p.doc, spec.input);
  cplx z0 = choose_base_point(p.a);
  if (root.has("monodromy") && root["monodromy"].has("base")) z0 = root["monodromy"]["base"].complex();
  const MonodromyRep rep = monodromy_rep(p.a, z0, spec.tol);
  const io::MonodromyRecord rec = io::record(rep, finite_poles(p.a));
  std::filesystem::create_directories(spec.out);
  Json j = io::to_json(rec);
  bool ok = true;
  // Loops around every finite pole compose to the identity when infinity is
  // a regular point.
  if (regular_at_infinity(p.a)) {
    const double defect = max_abs(rep.ordered_product() - identity(p.a.n()));
    const double bound = std::max(tol::mono, 1e-14 * rep.product_sensitivity());
    j["product_defect"] = defect;
    ok = defect <= bound;
  }
  write_json(std::filesystem::path(spec.out) / "monodromy.json", j);
  return ok ? kOk : kInvariant;
}

inline int hamiltonian(const RunSpec& spec, const Problem& p) {
  const io::Node root(p.doc, spec.input);
  const std::size_t np = p.a.poles().size();
  Json mu = Json::array();
  for (std::size_t i = 0; i < np; ++i)
    mu.push_back(io::to_json(hamiltonian_mu_Q(DeformationCocycle::translation(np, i, 1.0), p.a)));
  Json out{{"mu_Q", std::move(mu)}};
  // Optional "hamiltonian": {"beta": [{"pole", "coeffs": [beta_{-1}, beta_{-2}, ...]}]}
  if (root.has("hamiltonian") && root["hamiltonian"].has("beta")) {
    const io::Node betas = root["hamiltonian"]["beta"];
    Json hb = Json::array();
    for (std::size_t k = 0; k < betas.size(); ++k) {
      const long i = betas[k]["pole"].integer();
      if (i < 0 || static_cast<std::size_t>(i) >= np) betas[k]["pole"].fail("no such pole");
      const IrregularCotangent beta{betas[k]["coeffs"].matrices(p.a.n())};
      hb.push_back({{"pole", i}, {"value", io::to_json(hamiltonian_beta_B(beta, p.a, static_cast<std::size_t>(i)))}});
    }
    out["beta_B"] = std::move(hb);
  }
  std::filesystem::create_directories(spec.out);
  write_json(std::filesystem::path(spec.out) / "hamiltonian.json", out);
  return kOk;
}

/// "pairing": {"site": twist site, "a": [w^0, w^1, ...], "b": {"kmin", "coeffs"},
/// "F": optional [w^0, ...]}. Without F, `trials` random right actions drawn
/// from the seed are checked.
inline int pairing(const RunSpec& spec, const Problem& p) {
  const io::Node root(p.doc, spec.input);
  const io::Node pr = root["pairing"];
  const Json wrapped{{"sites", Json::array({pr["site"].json()})}};
  const io::Node site_node(wrapped, pr.path() + ".site");
  const long n = pr["n"].integer();
  if (n < 1) pr["n"].fail("rank must be positive");
  const TwistSite site = io::divisor_from_json(site_node, n).sites.front();
  const Point at = Point::at(site.p);
  const MatJet a(at, 0, pr["a"].matrices(n), false, MatJet::kExact);
  const MatJet b(at, static_cast<int>(pr["b"]["kmin"].integer()), pr["b"]["coeffs"].matrices(n), true, MatJet::kExact);
  const cplx value = residue_pairing(a, b, site, Frame::U1);

  auto moved_value = [&](const MatJet& f) {
    const MatJet tf = MatJet(at, 0, site.t, false, MatJet::kExact) * f;
    TwistSite moved{site.p, {}, {}};
    for (int k = 0; k <= tf.stored_max(); ++k) moved.t.push_back(tf.coeff(k));
    return residue_pairing(a * f, inverse(f) * b * f, moved, Frame::U1);
  };
  std::vector<MatJet> actions;
  if (pr.has("F")) {
    actions.emplace_back(at, 0, pr["F"].matrices(n), false, MatJet::kExact);
  } else {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const long trials = pr.has("trials") ? pr["trials"].integer() : 10;
    for (long k = 0; k < trials; ++k) {
      std::vector<Mat> fc{2.0 * identity(n), zero_mat(n)};
      for (auto& m : fc)
        for (Eigen::Index idx = 0; idx < m.size(); ++idx) m(idx) += cplx(u(rng), u(rng)) * 0.5;
      actions.emplace_back(at, 0, fc, false, MatJet::kExact);
    }
  }
  double worst = 0.0;
  for (const auto& f : actions) worst = std::max(worst, std::abs(moved_value(f) - value));
  const bool ok = worst <= 1e-10 * std::max(1.0, std::abs(value));
  std::filesystem::create_directories(spec.out);
  write_json(std::filesystem::path(spec.out) / "pairing.json",
             {{"value", io::to_json(value)}, {"max_invariance_defect", worst}, {"trials", actions.size()},
              {"seed", spec.seed}, {"ok", ok}});
  return ok ? kOk : kInvariant;
}

}  // namespace detail

/// Dispatch one run. Diagnostics go to stderr; the return value is the exit
/// status.
inline int run(const RunSpec& spec) {
  try {
    if (!(spec.tol > 0.0)) throw io::ParseError("--tol must be positive");
    if (spec.pins.size() > 3) throw io::ParseError("--pin accepts at most three poles");
    const detail::Problem p = detail::load(spec);
    const io::Node root(p.doc, spec.input);
    if (spec.command != "pairing" && !root.has("connection")) root.fail("missing field \"connection\"");
    if (spec.command == "flow") return detail::flow_like(spec, p, true);
    if (spec.command == "verify") return detail::flow_like(spec, p, false);
    if (spec.command == "monodromy") return detail::monodromy(spec, p);
    if (spec.command == "hamiltonian") return detail::hamiltonian(spec, p);
    if (spec.command == "pairing") return detail::pairing(spec, p);
    throw io::ParseError("unknown command \"" + spec.command + "\"");
  } catch (const io::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const MalformedInput& e) {
    std::cerr << "malformed input: " << e.what() << '\n';
    return kParse;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << '\n';
    return kParse;
  } catch (const Error& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kNumeric;
  }
}

}  // namespace isomono::cli
