#pragma once

// Expression DAG with memoized forward derivatives of arbitrary order in the
// tangential covariables, the auxiliary covariable zeta, and the tangential
// space variables.  Every symbol in the library is a node tree over this
// engine; derivative rules are exact except at explicit finite-difference
// leaves, so high-order seminorms do not accumulate differencing noise.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "opcal/errors.hpp"
#include "opcal/fields.hpp"
#include "opcal/multiindex.hpp"

namespace opcal {

using Cplx = std::complex<double>;

struct SymbolPoint {
  Eigen::VectorXd x;   // tangential space variables, size nx
  Eigen::VectorXd xi;  // tangential covariables, size nx
  double zeta = 0.0;

  static SymbolPoint make(int nx) {
    SymbolPoint p;
    p.x = Eigen::VectorXd::Zero(nx);
    p.xi = Eigen::VectorXd::Zero(nx);
    return p;
  }

  double bracket() const { return std::sqrt(1.0 + xi.squaredNorm() + zeta * zeta); }

  std::string describe() const {
    std::ostringstream os;
    os << "x=(";
    for (int j = 0; j < x.size(); ++j) os << (j ? "," : "") << x[j];
    os << ") xi=(";
    for (int j = 0; j < xi.size(); ++j) os << (j ? "," : "") << xi[j];
    os << ") zeta=" << zeta;
    return os.str();
  }
};

namespace ad {

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct MemoKey {
  const void* node;
  std::uint64_t dkey;
  std::uint32_t tag;
  bool operator==(const MemoKey& o) const {
    return node == o.node && dkey == o.dkey && tag == o.tag;
  }
};

struct MemoKeyHash {
  std::size_t operator()(const MemoKey& k) const {
    std::uint64_t h = reinterpret_cast<std::uintptr_t>(k.node);
    h ^= k.dkey + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= (std::uint64_t{k.tag} << 32) + 0xbf58476d1ce4e5b9ull + (h << 6) + (h >> 2);
    h *= 0x94d049bb133111ebull;
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

struct FrozenEntry {
  SymbolPoint pt;
  std::uint32_t tag = 0;
  bool ready = false;
};

// One evaluation = one shared memo.  Frozen-parameter subtrees get their own
// tag so their cached values never collide with the outer point.
struct EvalShared {
  std::unordered_map<MemoKey, Cplx, MemoKeyHash> memo;
  std::unordered_map<const void*, FrozenEntry> frozen;
  std::uint32_t next_tag = 1;
};

struct EvalCtx {
  const SymbolPoint* pt;
  std::uint32_t tag;
  EvalShared* shared;
};

class Expr {
 public:
  virtual ~Expr() = default;

  Cplx d(const DKey& k, EvalCtx& c) const {
    MemoKey mk{this, k.pack(), c.tag};
    auto it = c.shared->memo.find(mk);
    if (it != c.shared->memo.end()) return it->second;
    Cplx v = derive(k, c);
    c.shared->memo.emplace(mk, v);
    return v;
  }

 protected:
  virtual Cplx derive(const DKey& k, EvalCtx& c) const = 0;
};

// ---- leaves ----------------------------------------------------------------

class ConstExpr final : public Expr {
 public:
  explicit ConstExpr(Cplx v) : v_(v) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx&) const override { return k.zero() ? v_ : Cplx(0.0); }

 private:
  Cplx v_;
};

class CoordXiExpr final : public Expr {
 public:
  explicit CoordXiExpr(int j) : j_(j) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    if (k.zero()) return Cplx(c.pt->xi[j_]);
    DKey u;
    u.xi[j_] = 1;
    return k == u ? Cplx(1.0) : Cplx(0.0);
  }

 private:
  int j_;
};

class CoordZetaExpr final : public Expr {
 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    if (k.zero()) return Cplx(c.pt->zeta);
    DKey u;
    u.zeta = 1;
    return k == u ? Cplx(1.0) : Cplx(0.0);
  }
};

class CoordXExpr final : public Expr {
 public:
  explicit CoordXExpr(int j) : j_(j) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    if (k.zero()) return Cplx(c.pt->x[j_]);
    DKey u;
    u.x[j_] = 1;
    return k == u ? Cplx(1.0) : Cplx(0.0);
  }

 private:
  int j_;
};

// Real field of the space variables only; covariable derivatives vanish
// identically, which also lets products short-circuit on them.
class FieldExpr final : public Expr {
 public:
  FieldExpr(ScalarFieldFn f, double rel_step) : f_(std::move(f)), rel_step_(rel_step) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    if (k.xi_total() > 0) return Cplx(0.0);
    std::vector<int> orders(static_cast<size_t>(c.pt->x.size()), 0);
    for (int j = 0; j < c.pt->x.size() && j < kMaxSlots; ++j) orders[static_cast<size_t>(j)] = k.x[j];
    double h = rel_step_ * c.pt->bracket();
    return Cplx(f_.d(c.pt->x, orders, h));
  }

 private:
  ScalarFieldFn f_;
  double rel_step_;
};

// Opaque symbol callback differentiated by nested central differences with
// step proportional to the covariable bracket at the evaluation point.
class UserExpr final : public Expr {
 public:
  UserExpr(std::function<Cplx(const SymbolPoint&)> f, double rel_step)
      : f_(std::move(f)), rel_step_(rel_step) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    double h = rel_step_ * c.pt->bracket();
    return fd(k, *c.pt, h);
  }

 private:
  Cplx fd(const DKey& k, const SymbolPoint& p, double h) const {
    int d = first_direction(k);
    if (d < 0) return f_(p);
    DKey k2 = key_dec(k, d);
    SymbolPoint pp = p, pm = p;
    if (d < kMaxSlots) {
      pp.xi[d] += h;
      pm.xi[d] -= h;
    } else if (d == kZetaDir) {
      pp.zeta += h;
      pm.zeta -= h;
    } else {
      pp.x[d - kMaxSlots - 1] += h;
      pm.x[d - kMaxSlots - 1] -= h;
    }
    return (fd(k2, pp, h) - fd(k2, pm, h)) / (2.0 * h);
  }

  std::function<Cplx(const SymbolPoint&)> f_;
  double rel_step_;
};

// ---- algebra ---------------------------------------------------------------

class AddExpr final : public Expr {
 public:
  explicit AddExpr(std::vector<ExprPtr> terms) : terms_(std::move(terms)) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    Cplx s = 0.0;
    for (const auto& t : terms_) s += t->d(k, c);
    return s;
  }

 private:
  std::vector<ExprPtr> terms_;
};

// Product with the Leibniz rule over sub-keys.  The left factor is always
// evaluated first and an exact zero skips the right factor entirely; cutoff
// guards rely on this ordering.
class MulExpr final : public Expr {
 public:
  MulExpr(ExprPtr a, ExprPtr b) : a_(std::move(a)), b_(std::move(b)) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    Cplx acc = 0.0;
    for_each_subkey(k, [&](const DKey& j, double coeff) {
      Cplx va = a_->d(j, c);
      if (va == Cplx(0.0)) return;
      acc += coeff * va * b_->d(key_sub(k, j), c);
    });
    return acc;
  }

 private:
  ExprPtr a_, b_;
};

class ScaleExpr final : public Expr {
 public:
  ScaleExpr(Cplx s, ExprPtr a) : s_(s), a_(std::move(a)) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override { return s_ * a_->d(k, c); }

 private:
  Cplx s_;
  ExprPtr a_;
};

// Reciprocal via the recursion d^k g = -(1/f) sum_{0<j<=k} C(k,j) d^j f d^{k-j} g.
class RecipExpr final : public Expr {
 public:
  explicit RecipExpr(ExprPtr a) : a_(std::move(a)) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    Cplx f0 = a_->d(DKey{}, c);
    if (k.zero()) return 1.0 / f0;
    Cplx acc = 0.0;
    for_each_subkey(k, [&](const DKey& j, double coeff) {
      if (j.zero()) return;
      acc += coeff * a_->d(j, c) * this->d(key_sub(k, j), c);
    });
    return -acc / f0;
  }

 private:
  ExprPtr a_;
};

// Evaluates the child at a key offset; turns "derivative of a" into a node.
class DerivShiftExpr final : public Expr {
 public:
  DerivShiftExpr(ExprPtr a, DKey off) : a_(std::move(a)), off_(off) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override { return a_->d(key_add(k, off_), c); }

 private:
  ExprPtr a_;
  DKey off_;
};

// g(inner) for a univariate family g where fam(v, n) returns the n-th
// derivative of g at v.  Chain-rule children are materialized lazily per
// direction, so repeated derivatives share structure through the memo.
class ComposeExpr final : public Expr, public std::enable_shared_from_this<ComposeExpr> {
 public:
  using Family = std::function<Cplx(Cplx, int)>;
  ComposeExpr(Family fam, ExprPtr inner, int order_offset = 0)
      : fam_(std::move(fam)), inner_(std::move(inner)), off_(order_offset) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    if (k.zero()) return fam_(inner_->d(DKey{}, c), off_);
    int d = first_direction(k);
    return child(d)->d(key_dec(k, d), c);
  }

 private:
  ExprPtr child(int d) const {
    std::lock_guard<std::mutex> lk(m_);
    if (!children_[d]) {
      auto gprime = std::make_shared<ComposeExpr>(fam_, inner_, off_ + 1);
      DKey u;
      key_set(u, d, 1);
      auto dinner = std::make_shared<DerivShiftExpr>(inner_, u);
      children_[d] = std::make_shared<MulExpr>(std::move(gprime), std::move(dinner));
    }
    return children_[d];
  }

  Family fam_;
  ExprPtr inner_;
  int off_;
  mutable std::mutex m_;
  mutable std::array<ExprPtr, kDirCount> children_{};
};

// Child evaluated with zeta pinned to a constant; zeta derivatives of the
// frozen tree vanish identically.
class FreezeZetaExpr final : public Expr {
 public:
  FreezeZetaExpr(ExprPtr a, double mu) : a_(std::move(a)), mu_(mu) {}

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    if (k.zeta > 0) return Cplx(0.0);
    FrozenEntry& e = c.shared->frozen[this];
    if (!e.ready) {
      e.pt = *c.pt;
      e.pt.zeta = mu_;
      e.tag = c.shared->next_tag++;
      e.ready = true;
    }
    EvalCtx sub{&e.pt, e.tag, c.shared};
    return a_->d(k, sub);
  }

 private:
  ExprPtr a_;
  double mu_;
};

}  // namespace ad

// ---- boundary quadratic roots ----------------------------------------------

// Numerically stable roots of c2 z^2 + c1 z + c0 (larger root from the
// quadratic formula with a sign-matched square root, smaller from Vieta).
inline std::pair<Cplx, Cplx> quadratic_roots(Cplx c2, Cplx c1, Cplx c0) {
  if (std::abs(c2) < 1e-300) throw ellipticity_error("leading boundary coefficient vanishes");
  Cplx disc = c1 * c1 - 4.0 * c2 * c0;
  Cplx sq = std::sqrt(disc);
  if (std::real(std::conj(c1) * sq) < 0.0) sq = -sq;
  Cplx q = -0.5 * (c1 + sq);
  if (std::abs(q) < 1e-300) {
    // c1 and c0 both negligible: double root at the origin.
    Cplx r = std::sqrt(-c0 / c2);
    return {r, -r};
  }
  return {q / c2, c0 / q};
}

struct KappaPair {
  Cplx kplus;   // root i*kplus lies in the upper half-plane, Re kplus > 0
  Cplx kminus;  // root -i*kminus lies in the lower half-plane, Re kminus > 0
};

// Splits the two roots by the sign of their imaginary part and converts to
// the exponential rates kplus, kminus.  A root on the real axis means the
// frozen boundary symbol is not elliptic at this point.
inline KappaPair classify_boundary_roots(Cplx z1, Cplx z2, const std::string& where = {}) {
  double scale = std::abs(z1) + std::abs(z2) + 1e-30;
  auto bad = [&](const char* what) {
    std::string msg = std::string("boundary symbol root ") + what;
    if (!where.empty()) msg += " at " + where;
    return ellipticity_error(msg);
  };
  if (std::abs(z1.imag()) <= 1e-13 * scale || std::abs(z2.imag()) <= 1e-13 * scale)
    throw bad("lies on the real axis");
  if ((z1.imag() > 0) == (z2.imag() > 0)) throw bad("pair lies in one half-plane");
  Cplx up = z1.imag() > 0 ? z1 : z2;
  Cplx dn = z1.imag() > 0 ? z2 : z1;
  return {Cplx(0, -1) * up, Cplx(0, 1) * dn};
}

namespace ad {

// Exponential rate of the chosen boundary root as a differentiable node.
// The value solves the frozen quadratic; derivatives come from implicit
// differentiation, with numerator and denominator built as child nodes that
// reference this node, so every order is exact.
class KappaExpr final : public Expr, public std::enable_shared_from_this<KappaExpr> {
 public:
  KappaExpr(ExprPtr c2, ExprPtr c1, ExprPtr c0, int sign)
      : c2_(std::move(c2)), c1_(std::move(c1)), c0_(std::move(c0)), sign_(sign) {
    if (sign != 1 && sign != -1) throw argument_error("kappa sign must be +1 or -1");
  }

 protected:
  Cplx derive(const DKey& k, EvalCtx& c) const override {
    if (k.zero()) {
      auto [z1, z2] = quadratic_roots(c2_->d(DKey{}, c), c1_->d(DKey{}, c), c0_->d(DKey{}, c));
      KappaPair kp = classify_boundary_roots(z1, z2, c.pt->describe());
      return sign_ > 0 ? kp.kplus : kp.kminus;
    }
    int d = first_direction(k);
    return child(d)->d(key_dec(k, d), c);
  }

 private:
  // kappa satisfies -c2 k^2 + s i c1 k + c0 = 0 with s = sign_, hence
  // dk = (dc2 k^2 - s i dc1 k - dc0) / (s i c1 - 2 c2 k).
  ExprPtr child(int d) const {
    std::lock_guard<std::mutex> lk(m_);
    auto self = std::const_pointer_cast<KappaExpr>(
        const_cast<KappaExpr*>(this)->shared_from_this());
    Cplx si(0.0, static_cast<double>(sign_));
    if (!den_) {
      auto ksq = std::make_shared<MulExpr>(self, self);
      ksq_ = ksq;
      std::vector<ExprPtr> den_terms;
      den_terms.push_back(std::make_shared<ScaleExpr>(si, c1_));
      den_terms.push_back(
          std::make_shared<ScaleExpr>(Cplx(-2.0), std::make_shared<MulExpr>(c2_, self)));
      den_ = std::make_shared<RecipExpr>(std::make_shared<AddExpr>(std::move(den_terms)));
    }
    if (!children_[d]) {
      DKey u;
      key_set(u, d, 1);
      std::vector<ExprPtr> num;
      num.push_back(std::make_shared<MulExpr>(std::make_shared<DerivShiftExpr>(c2_, u), ksq_));
      num.push_back(std::make_shared<ScaleExpr>(
          -si, std::make_shared<MulExpr>(std::make_shared<DerivShiftExpr>(c1_, u), self)));
      num.push_back(
          std::make_shared<ScaleExpr>(Cplx(-1.0), std::make_shared<DerivShiftExpr>(c0_, u)));
      children_[d] =
          std::make_shared<MulExpr>(std::make_shared<AddExpr>(std::move(num)), den_);
    }
    return children_[d];
  }

  ExprPtr c2_, c1_, c0_;
  int sign_;
  mutable std::mutex m_;
  mutable ExprPtr den_, ksq_;
  mutable std::array<ExprPtr, kDirCount> children_{};
};

}  // namespace ad

// ---- builders ----------------------------------------------------------------

using ad::ExprPtr;

inline ExprPtr expr_const(Cplx v) { return std::make_shared<ad::ConstExpr>(v); }
inline ExprPtr expr_xi(int j) { return std::make_shared<ad::CoordXiExpr>(j); }
inline ExprPtr expr_zeta() { return std::make_shared<ad::CoordZetaExpr>(); }
inline ExprPtr expr_x(int j) { return std::make_shared<ad::CoordXExpr>(j); }

inline ExprPtr expr_field(ScalarFieldFn f, double rel_step = 1e-4) {
  return std::make_shared<ad::FieldExpr>(std::move(f), rel_step);
}

inline ExprPtr expr_user(std::function<Cplx(const SymbolPoint&)> f, double rel_step = 1e-4) {
  return std::make_shared<ad::UserExpr>(std::move(f), rel_step);
}

inline ExprPtr expr_add(std::vector<ExprPtr> terms) {
  return std::make_shared<ad::AddExpr>(std::move(terms));
}
inline ExprPtr expr_add(ExprPtr a, ExprPtr b) {
  return expr_add(std::vector<ExprPtr>{std::move(a), std::move(b)});
}
inline ExprPtr expr_mul(ExprPtr a, ExprPtr b) {
  return std::make_shared<ad::MulExpr>(std::move(a), std::move(b));
}
inline ExprPtr expr_scale(Cplx s, ExprPtr a) {
  return std::make_shared<ad::ScaleExpr>(s, std::move(a));
}
inline ExprPtr expr_sub(ExprPtr a, ExprPtr b) {
  return expr_add(std::move(a), expr_scale(Cplx(-1.0), std::move(b)));
}
inline ExprPtr expr_recip(ExprPtr a) { return std::make_shared<ad::RecipExpr>(std::move(a)); }
inline ExprPtr expr_shift(ExprPtr a, DKey off) {
  return std::make_shared<ad::DerivShiftExpr>(std::move(a), off);
}
inline ExprPtr expr_compose(ad::ComposeExpr::Family fam, ExprPtr inner) {
  return std::make_shared<ad::ComposeExpr>(std::move(fam), std::move(inner));
}
inline ExprPtr expr_freeze_zeta(ExprPtr a, double mu) {
  return std::make_shared<ad::FreezeZetaExpr>(std::move(a), mu);
}
inline ExprPtr expr_kappa(ExprPtr c2, ExprPtr c1, ExprPtr c0, int sign) {
  return std::make_shared<ad::KappaExpr>(std::move(c2), std::move(c1), std::move(c0), sign);
}

// v^p with real exponent through the falling-factorial derivative family.
inline ExprPtr expr_pow_real(ExprPtr a, double p) {
  auto fam = [p](Cplx v, int n) {
    double coeff = 1.0;
    for (int i = 0; i < n; ++i) coeff *= (p - i);
    if (coeff == 0.0) return Cplx(0.0);
    return coeff * std::pow(v, Cplx(p - n));
  };
  return expr_compose(fam, std::move(a));
}

inline ExprPtr expr_sqrt(ExprPtr a) { return expr_pow_real(std::move(a), 0.5); }

// |(xi', zeta)|^2 and the standard bracket (1 + |.|^2)^{m/2}.
inline ExprPtr expr_radial_sq(int nx) {
  std::vector<ExprPtr> terms;
  for (int j = 0; j < nx; ++j) terms.push_back(expr_mul(expr_xi(j), expr_xi(j)));
  terms.push_back(expr_mul(expr_zeta(), expr_zeta()));
  return expr_add(std::move(terms));
}

inline ExprPtr expr_bracket_pow(int nx, double m) {
  return expr_pow_real(expr_add(expr_const(1.0), expr_radial_sq(nx)), 0.5 * m);
}

// C^2 cutoff in |(xi', zeta)|: exactly 0 for r <= R, exactly 1 for r >= 2R,
// quintic smoothstep between.  Outside the transition every derivative is an
// exact zero, which is what lets products guard singular right factors.
inline ExprPtr expr_radial_cutoff(int nx, double R) {
  if (!(R > 0)) throw argument_error("cutoff radius must be positive");
  auto fam = [R](Cplx v, int n) {
    double t = (v.real() - R) / R;
    if (t <= 0.0) return Cplx(0.0);
    if (t >= 1.0) return n == 0 ? Cplx(1.0) : Cplx(0.0);
    static const double c[6][6] = {
        {0, 0, 0, 10, -15, 6},   {0, 0, 30, -60, 30, 0}, {0, 60, -180, 120, 0, 0},
        {60, -360, 360, 0, 0, 0}, {-360, 720, 0, 0, 0, 0}, {720, 0, 0, 0, 0, 0}};
    if (n > 5) return Cplx(0.0);
    double acc = 0.0;
    double tp = 1.0;
    for (int i = 0; i < 6; ++i) {
      acc += c[n][i] * tp;
      tp *= t;
    }
    double rpow = std::pow(R, -n);
    return Cplx(acc * rpow);
  };
  ExprPtr r = expr_sqrt(expr_radial_sq(nx));
  return expr_compose(fam, std::move(r));
}

// ---- evaluator ---------------------------------------------------------------

// Binds an expression to one point and shares the derivative memo across all
// keys requested at that point.
class Evaluator {
 public:
  Evaluator(ExprPtr root, SymbolPoint pt) : root_(std::move(root)), pt_(std::move(pt)) {
    ctx_.pt = &pt_;
    ctx_.tag = 0;
    ctx_.shared = &shared_;
  }

  Cplx d(const DKey& k) { return root_->d(k, ctx_); }
  Cplx value() { return d(DKey{}); }
  const SymbolPoint& point() const { return pt_; }

 private:
  ExprPtr root_;
  SymbolPoint pt_;
  ad::EvalShared shared_;
  ad::EvalCtx ctx_;
};

}  // namespace opcal
