#pragma once

// Declarative coefficient primitives: each scalar coefficient is a sum of
// const, affine and bounded-sine terms over the named argument vector
// (t, s, xi, x, y, z, zeta). The text form round-trips bit-exactly.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "util.hpp"

namespace bsvie {

struct VarLayout {
  int n = 1, m = 1, d = 1;

  int t() const { return 0; }
  int s() const { return 1; }
  int xi(int i) const { return 2 + i; }
  int x(int i) const { return 2 + n + i; }
  int y(int i) const { return 2 + 2 * n + i; }
  int z(int i, int q) const { return 2 + 2 * n + m + i * d + q; }
  int zeta(int i, int q) const { return 2 + 2 * n + m + m * d + i * d + q; }
  int size() const { return 2 + 2 * n + m + 2 * m * d; }

  std::string name(int v) const {
    auto idx = [](const char* base, int i, bool scalar) {
      return scalar ? std::string(base) : std::string(base) + std::to_string(i);
    };
    auto pair = [&](const char* base, int k) {
      const int i = k / d, q = k % d;
      if (m == 1 && d == 1) return std::string(base);
      return std::string(base) + std::to_string(i) + "_" + std::to_string(q);
    };
    if (v == 0) return "t";
    if (v == 1) return "s";
    v -= 2;
    if (v < n) return idx("xi", v, n == 1);
    v -= n;
    if (v < n) return idx("x", v, n == 1);
    v -= n;
    if (v < m) return idx("y", v, m == 1);
    v -= m;
    if (v < m * d) return pair("z", v);
    v -= m * d;
    return pair("zeta", v);
  }

  int index(const std::string& nm) const {
    for (int v = 0; v < size(); ++v)
      if (name(v) == nm) return v;
    // Accept indexed spellings in scalar layouts too.
    if (nm == "xi0" && n == 1) return xi(0);
    if (nm == "x0" && n == 1) return x(0);
    if (nm == "y0" && m == 1) return y(0);
    if (nm == "z0_0" && m == 1 && d == 1) return z(0, 0);
    if (nm == "zeta0_0" && m == 1 && d == 1) return zeta(0, 0);
    return -1;
  }
};

struct Term {
  enum class Kind { Const, Affine, Sin } kind = Kind::Const;
  double amp = 1.0;  // Sin only
  double c = 0.0;
  std::vector<std::pair<int, double>> w;

  double eval(const double* v) const {
    double a = c;
    for (const auto& [k, wk] : w) a += wk * v[k];
    switch (kind) {
      case Kind::Const: return c;
      case Kind::Affine: return a;
      case Kind::Sin: return amp * std::sin(a);
    }
    return 0.0;
  }

  // Sup of |d term / d v_k| over all arguments.
  double lipschitz(int k) const {
    if (kind == Kind::Const) return 0.0;
    double wk = 0.0;
    for (const auto& [j, x] : w)
      if (j == k) wk += x;
    return kind == Kind::Sin ? std::abs(amp * wk) : std::abs(wk);
  }

  bool operator==(const Term&) const = default;
};

struct Expr {
  std::vector<Term> terms;

  double eval(const double* v) const {
    double r = 0.0;
    for (const auto& t : terms) r += t.eval(v);
    return r;
  }

  bool uses(int k) const {
    for (const auto& t : terms)
      if (t.kind != Term::Kind::Const)
        for (const auto& [j, x] : t.w)
          if (j == k && x != 0.0) return true;
    return false;
  }

  bool operator==(const Expr&) const = default;

  static Expr constant(double c) { return Expr{{Term{Term::Kind::Const, 1.0, c, {}}}}; }
  static Expr affine(double c, std::vector<std::pair<int, double>> w) {
    return Expr{{Term{Term::Kind::Affine, 1.0, c, std::move(w)}}};
  }
  static Expr sine(double amp, double c, std::vector<std::pair<int, double>> w) {
    return Expr{{Term{Term::Kind::Sin, amp, c, std::move(w)}}};
  }
  Expr operator+(const Expr& o) const {
    Expr r = *this;
    r.terms.insert(r.terms.end(), o.terms.begin(), o.terms.end());
    return r;
  }
};

inline std::string format_expr(const Expr& e, const VarLayout& L) {
  if (e.terms.empty()) return "const(0)";
  std::string out;
  for (std::size_t i = 0; i < e.terms.size(); ++i) {
    const Term& t = e.terms[i];
    if (i) out += " + ";
    switch (t.kind) {
      case Term::Kind::Const: out += "const(" + format_double(t.c) + ")"; continue;
      case Term::Kind::Affine: out += "affine(c=" + format_double(t.c); break;
      case Term::Kind::Sin:
        out += "sin(amp=" + format_double(t.amp) + ", c=" + format_double(t.c);
        break;
    }
    for (const auto& [k, wk] : t.w) out += ", " + L.name(k) + "=" + format_double(wk);
    out += ")";
  }
  return out;
}

namespace detail {

inline std::string trim(std::string s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double parse_number(const std::string& txt, const std::string& ctx) {
  const std::string s = trim(txt);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    fail(ErrorCode::ConfigInvalid, "bad number '" + s + "' in " + ctx);
  return v;
}

}  // namespace detail

inline Expr parse_expr(const std::string& text, const VarLayout& L) {
  Expr e;
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char ch : text) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == '+' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  for (auto raw : parts) {
    const std::string p = detail::trim(raw);
    const auto lp = p.find('(');
    if (lp == std::string::npos || p.back() != ')')
      fail(ErrorCode::ConfigInvalid, "malformed term '" + p + "'");
    const std::string head = detail::trim(p.substr(0, lp));
    const std::string body = p.substr(lp + 1, p.size() - lp - 2);
    Term t;
    if (head == "const") {
      t.kind = Term::Kind::Const;
      t.c = detail::parse_number(body, p);
      e.terms.push_back(t);
      continue;
    }
    if (head == "affine")
      t.kind = Term::Kind::Affine;
    else if (head == "sin")
      t.kind = Term::Kind::Sin;
    else
      fail(ErrorCode::ConfigInvalid, "unknown primitive '" + head + "'");
    std::size_t pos = 0;
    while (pos <= body.size()) {
      std::size_t comma = body.find(',', pos);
      if (comma == std::string::npos) comma = body.size();
      const std::string kv = detail::trim(body.substr(pos, comma - pos));
      pos = comma + 1;
      if (kv.empty()) continue;
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorCode::ConfigInvalid, "expected key=value in '" + p + "'");
      const std::string key = detail::trim(kv.substr(0, eq));
      const double val = detail::parse_number(kv.substr(eq + 1), p);
      if (key == "c") {
        t.c = val;
      } else if (key == "amp" && t.kind == Term::Kind::Sin) {
        t.amp = val;
      } else {
        const int k = L.index(key);
        if (k < 0) fail(ErrorCode::ConfigInvalid, "unknown argument '" + key + "' in '" + p + "'");
        t.w.emplace_back(k, val);
      }
    }
    e.terms.push_back(t);
  }
  return e;
}

}  // namespace bsvie
