#pragma once

#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isomono/connection.hpp"
#include "isomono/core.hpp"
#include "isomono/isoflow.hpp"
#include "isomono/monodromy.hpp"
#include "isomono/twist.hpp"

namespace isomono::io {

using Json = nlohmann::json;

/// Input that does not match a schema. The message names the offending field
/// (or line and column for syntax errors).
struct ParseError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Parsing with field paths

/// A JSON node together with its location, for diagnostics.
class Node {
 public:
  Node(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  [[nodiscard]] const Json& json() const { return *j_; }
  [[nodiscard]] const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_ + ": " + what); }

  [[nodiscard]] bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  [[nodiscard]] Node operator[](const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    if (!j_->contains(key)) fail("missing field \"" + key + "\"");
    return {j_->at(key), path_ + "." + key};
  }

  [[nodiscard]] Node operator[](std::size_t i) const { return {j_->at(i), path_ + "[" + std::to_string(i) + "]"}; }

  [[nodiscard]] std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }

  [[nodiscard]] double number() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }

  [[nodiscard]] long integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    return j_->get<long>();
  }

  [[nodiscard]] std::string string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  [[nodiscard]] cplx complex() const {
    if (j_->is_number()) return j_->get<double>();
    if (!j_->is_array() || j_->size() != 2) fail("expected a complex number [re, im]");
    return {(*this)[0].number(), (*this)[1].number()};
  }

  /// Square or rectangular matrix as an array of rows of complex entries.
  [[nodiscard]] Mat matrix(Eigen::Index rows = -1, Eigen::Index cols = -1) const {
    const std::size_t r = size();
    if (r == 0) fail("empty matrix");
    const std::size_t c = (*this)[0].size();
    if (rows >= 0 && static_cast<Eigen::Index>(r) != rows) fail("expected " + std::to_string(rows) + " rows");
    if (cols >= 0 && static_cast<Eigen::Index>(c) != cols) fail("expected " + std::to_string(cols) + " columns");
    Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i) {
      const Node row = (*this)[i];
      if (row.size() != c) row.fail("ragged matrix row");
      for (std::size_t k = 0; k < c; ++k)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].complex();
    }
    return m;
  }

  [[nodiscard]] std::vector<Mat> matrices(Eigen::Index n) const {
    std::vector<Mat> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].matrix(n, n));
    return out;
  }

 private:
  const Json* j_;
  std::string path_;
};

/// Parse text, reporting syntax errors by line and column.
inline Json parse_text(const std::string& text, const std::string& source = "input") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error");
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Emitting

inline Json to_json(cplx z) { return Json::array({z.real(), z.imag()}); }

inline Json to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(to_json(m(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json to_json(const std::vector<Mat>& ms) {
  Json out = Json::array();
  for (const auto& m : ms) out.push_back(to_json(m));
  return out;
}

inline Json to_json(const std::vector<cplx>& zs) {
  Json out = Json::array();
  for (const auto z : zs) out.push_back(to_json(z));
  return out;
}

// ---------------------------------------------------------------------------
// Connection: {"n", "poles":[{"t", "l", "coeffs" (orders -l..-1)}], "tail",
// "extra" (same shape as poles), "base_pole": {"z", "k"}}

namespace detail {

inline Json polar_to_json(const std::vector<PolarPart>& ps) {
  Json out = Json::array();
  for (const auto& p : ps) {
    Json coeffs = Json::array();
    for (auto it = p.c.rbegin(); it != p.c.rend(); ++it) coeffs.push_back(to_json(*it));
    out.push_back({{"t", to_json(p.t)}, {"l", p.order()}, {"coeffs", std::move(coeffs)}});
  }
  return out;
}

inline std::vector<PolarPart> polar_from_json(const Node& node, Eigen::Index n) {
  std::vector<PolarPart> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const Node p = node[i];
    const long l = p["l"].integer();
    const Node coeffs = p["coeffs"];
    if (l < 1) p["l"].fail("pole order must be at least 1");
    if (coeffs.size() != static_cast<std::size_t>(l)) coeffs.fail("expected l = " + std::to_string(l) + " matrices");
    std::vector<Mat> c = coeffs.matrices(n);
    std::reverse(c.begin(), c.end());
    out.push_back({p["t"].complex(), std::move(c)});
  }
  return out;
}

}  // namespace detail

inline Json to_json(const Connection& a) {
  Json j{{"n", a.n()}, {"poles", detail::polar_to_json(a.poles())}, {"tail", to_json(a.tail())}};
  if (!a.extra().empty()) j["extra"] = detail::polar_to_json(a.extra());
  if (a.base()) j["base_pole"] = {{"z", to_json(a.base()->z)}, {"k", a.base()->k}};
  return j;
}

inline Connection connection_from_json(const Node& node) {
  const long n = node["n"].integer();
  if (n < 1) node["n"].fail("rank must be positive");
  const auto poles = detail::polar_from_json(node["poles"], n);
  std::vector<Mat> tail;
  if (node.has("tail")) tail = node["tail"].matrices(n);
  std::vector<PolarPart> extra;
  if (node.has("extra")) extra = detail::polar_from_json(node["extra"], n);
  std::optional<BasePole> base;
  if (node.has("base_pole") && !node["base_pole"].json().is_null()) {
    const Node b = node["base_pole"];
    base = BasePole{b["z"].complex(), static_cast<int>(b["k"].integer())};
  }
  try {
    return Connection(n, poles, tail, extra, base);
  } catch (const MalformedInput& e) {
    node.fail(e.what());
  } catch (const PreconditionError& e) {
    node.fail(e.what());
  }
}

// ---------------------------------------------------------------------------
// Matrix divisor: {"sites":[{"p", "T": [coefficients in w = z - p]}]} or the
// normal-form shorthand {"p", "params"}.

inline Json to_json(const MatrixDivisor& d) {
  Json sites = Json::array();
  for (const auto& s : d.sites) {
    Json site{{"p", to_json(s.p)}, {"T", to_json(s.t)}};
    if (!s.params.empty()) site["params"] = to_json(s.params);
    sites.push_back(std::move(site));
  }
  return {{"sites", std::move(sites)}};
}

inline MatrixDivisor divisor_from_json(const Node& node, Eigen::Index n) {
  MatrixDivisor d;
  const Node sites = node["sites"];
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Node s = sites[i];
    const cplx p = s["p"].complex();
    std::vector<cplx> params;
    if (s.has("params")) {
      const Node pr = s["params"];
      for (std::size_t k = 0; k < pr.size(); ++k) params.push_back(pr[k].complex());
    }
    if (s.has("T")) {
      d.sites.push_back(TwistSite{p, s["T"].matrices(n), params});
    } else {
      if (params.size() != static_cast<std::size_t>(n)) s.fail("normal form needs n parameters or an explicit \"T\"");
      d.sites.push_back(normal_form(p, params));
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Monodromy: {"base", "loops":[{"pole", "t", "radius"}], "matrices", "invariants"}

struct MonodromyRecord {
  cplx base{};
  std::vector<std::size_t> order;
  std::vector<cplx> poles;
  std::vector<double> radii;
  std::vector<Mat> matrices;
  std::vector<cplx> invariants;
};

inline MonodromyRecord record(const MonodromyRep& rep, const std::vector<cplx>& all_poles) {
  MonodromyRecord r{rep.base, rep.order, rep.poles, {}, rep.matrices, conjugacy_invariants(rep)};
  for (const auto i : rep.order) r.radii.push_back(loop_radius(all_poles, i, rep.base));
  return r;
}

inline Json to_json(const MonodromyRecord& r) {
  Json loops = Json::array();
  for (std::size_t i = 0; i < r.poles.size(); ++i)
    loops.push_back({{"pole", r.order.at(i)}, {"t", to_json(r.poles[i])}, {"radius", r.radii.at(i)}});
  return {{"base", to_json(r.base)},
          {"loops", std::move(loops)},
          {"matrices", to_json(r.matrices)},
          {"invariants", to_json(r.invariants)}};
}

inline MonodromyRecord monodromy_from_json(const Node& node) {
  MonodromyRecord r;
  r.base = node["base"].complex();
  const Node loops = node["loops"];
  for (std::size_t i = 0; i < loops.size(); ++i) {
    r.order.push_back(static_cast<std::size_t>(loops[i]["pole"].integer()));
    r.poles.push_back(loops[i]["t"].complex());
    r.radii.push_back(loops[i]["radius"].number());
  }
  const Node ms = node["matrices"];
  for (std::size_t i = 0; i < ms.size(); ++i) r.matrices.push_back(ms[i].matrix());
  const Node inv = node["invariants"];
  for (std::size_t i = 0; i < inv.size(); ++i) r.invariants.push_back(inv[i].complex());
  if (r.matrices.size() != r.poles.size()) ms.fail("one matrix per loop expected");
  return r;
}

// ---------------------------------------------------------------------------
// Drift report sidecar

inline Json to_json(const DriftReport& d) {
  Json inv = Json::array();
  for (const auto& v : d.invariants) inv.push_back(to_json(v));
  return {{"base", to_json(d.base)},
          {"order", d.order},
          {"invariants", std::move(inv)},
          {"max_abs_drift", d.max_abs_drift},
          {"max_rel_drift", d.max_rel_drift},
          {"max_scaled_drift", d.max_scaled_drift},
          {"max_formal_drift", d.max_formal_drift},
          {"max_type_tracking", d.max_type_tracking}};
}

inline DriftReport drift_from_json(const Node& node) {
  DriftReport d;
  d.base = node["base"].complex();
  const Node order = node["order"];
  for (std::size_t i = 0; i < order.size(); ++i) d.order.push_back(static_cast<std::size_t>(order[i].integer()));
  const Node inv = node["invariants"];
  for (std::size_t i = 0; i < inv.size(); ++i) {
    std::vector<cplx> row;
    for (std::size_t k = 0; k < inv[i].size(); ++k) row.push_back(inv[i][k].complex());
    d.invariants.push_back(std::move(row));
  }
  d.max_abs_drift = node["max_abs_drift"].number();
  d.max_rel_drift = node["max_rel_drift"].number();
  d.max_scaled_drift = node["max_scaled_drift"].number();
  d.max_formal_drift = node["max_formal_drift"].number();
  d.max_type_tracking = node["max_type_tracking"].number();
  return d;
}

// ---------------------------------------------------------------------------
// Trajectory CSV: s, then t_i re/im, then every coefficient entry re/im in
// pole order, order 1 first, column-major. 17 significant digits.

inline void write_trajectory_csv(std::ostream& out, const std::vector<FlowSample>& samples) {
  if (samples.empty()) return;
  const Connection& a0 = samples.front().state.a;
  const Eigen::Index n = a0.n();
  out << "s";
  for (std::size_t i = 0; i < a0.poles().size(); ++i) out << ",t" << i + 1 << "_re,t" << i + 1 << "_im";
  for (std::size_t i = 0; i < a0.poles().size(); ++i)
    for (std::size_t k = 0; k < a0.poles()[i].c.size(); ++k)
      for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r)
          for (const char* part : {"re", "im"})
            out << ",A" << i + 1 << "_" << k + 1 << "_" << r << c << "_" << part;
  out << '\n';
  const auto old = out.precision(17);
  for (const auto& smp : samples) {
    out << smp.s;
    for (const auto& p : smp.state.a.poles()) out << ',' << p.t.real() << ',' << p.t.imag();
    for (const auto& p : smp.state.a.poles())
      for (const auto& m : p.c)
        for (Eigen::Index idx = 0; idx < m.size(); ++idx) out << ',' << m(idx).real() << ',' << m(idx).imag();
    out << '\n';
  }
  out.precision(old);
}

struct CsvRow {
  double s = 0.0;
  Connection a;
};

/// Inverse of write_trajectory_csv; `shape` supplies rank, pole orders and
/// the fixed data (tail, extra poles, base pole).
inline std::vector<CsvRow> read_trajectory_csv(std::istream& in, const Connection& shape) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: missing header");
  std::vector<CsvRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError("csv:" + std::to_string(lineno) + ": bad number \"" + cell + "\"");
      }
    }
    auto poles = shape.poles();
    std::size_t at = 1;
    auto need = [&](std::size_t k) {
      if (at + k > v.size()) throw ParseError("csv:" + std::to_string(lineno) + ": too few columns");
    };
    for (auto& p : poles) {
      need(2);
      p.t = {v[at], v[at + 1]};
      at += 2;
    }
    for (auto& p : poles)
      for (auto& m : p.c)
        for (Eigen::Index idx = 0; idx < m.size(); ++idx) {
          need(2);
          m(idx) = {v[at], v[at + 1]};
          at += 2;
        }
    if (at != v.size()) throw ParseError("csv:" + std::to_string(lineno) + ": too many columns");
    rows.push_back({v.at(0), shape.with_poles(std::move(poles))});
  }
  return rows;
}

}  // namespace isomono::io
