#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "opcal/errors.hpp"

namespace opcal {

// Hard limits of the derivative bookkeeping.  Keys are nibble-packed, so no
// single component may reach 16; four tangential slots cover every dimension
// the library supports (n <= 4, hence nx <= 3, one slot spare).
inline constexpr int kMaxSlots = 4;
inline constexpr int kMaxOrder = 15;

// Derivative key of a mixed partial: xi[j] orders in the tangential
// covariables, zeta in the auxiliary covariable, x[j] in the tangential
// space variables.
struct DKey {
  std::array<std::uint8_t, kMaxSlots> xi{};
  std::uint8_t zeta = 0;
  std::array<std::uint8_t, kMaxSlots> x{};

  bool zero() const {
    if (zeta) return false;
    for (int j = 0; j < kMaxSlots; ++j)
      if (xi[j] || x[j]) return false;
    return true;
  }

  int total() const {
    int t = zeta;
    for (int j = 0; j < kMaxSlots; ++j) t += xi[j] + x[j];
    return t;
  }

  int xi_total() const {
    int t = zeta;
    for (int j = 0; j < kMaxSlots; ++j) t += xi[j];
    return t;
  }

  int x_total() const {
    int t = 0;
    for (int j = 0; j < kMaxSlots; ++j) t += x[j];
    return t;
  }

  // 36-bit packing, unique per key.
  std::uint64_t pack() const {
    std::uint64_t v = zeta;
    for (int j = 0; j < kMaxSlots; ++j) {
      v = (v << 4) | xi[j];
      v = (v << 4) | x[j];
    }
    return v;
  }

  bool operator==(const DKey& o) const { return pack() == o.pack(); }
};

// Directions enumerate the slots a single derivative can act on:
// 0..kMaxSlots-1 are xi slots, kMaxSlots is zeta, then the x slots.
inline constexpr int kZetaDir = kMaxSlots;
inline constexpr int kDirCount = 2 * kMaxSlots + 1;

inline int key_component(const DKey& k, int dir) {
  if (dir < kMaxSlots) return k.xi[dir];
  if (dir == kZetaDir) return k.zeta;
  return k.x[dir - kMaxSlots - 1];
}

inline void key_set(DKey& k, int dir, int v) {
  if (dir < kMaxSlots)
    k.xi[dir] = static_cast<std::uint8_t>(v);
  else if (dir == kZetaDir)
    k.zeta = static_cast<std::uint8_t>(v);
  else
    k.x[dir - kMaxSlots - 1] = static_cast<std::uint8_t>(v);
}

// First slot with nonzero order, or -1 for the empty key.  Recursions that
// peel one derivative at a time use this to stay deterministic.
inline int first_direction(const DKey& k) {
  for (int d = 0; d < kDirCount; ++d)
    if (key_component(k, d) > 0) return d;
  return -1;
}

inline DKey key_dec(DKey k, int dir) {
  key_set(k, dir, key_component(k, dir) - 1);
  return k;
}

inline DKey key_inc(const DKey& k, int dir) {
  DKey r = k;
  int v = key_component(k, dir) + 1;
  if (v > kMaxOrder) throw argument_error("derivative order limit exceeded");
  key_set(r, dir, v);
  return r;
}

inline DKey key_add(const DKey& a, const DKey& b) {
  DKey r;
  for (int d = 0; d < kDirCount; ++d) {
    int v = key_component(a, d) + key_component(b, d);
    if (v > kMaxOrder) throw argument_error("derivative order limit exceeded");
    key_set(r, d, v);
  }
  return r;
}

inline DKey key_sub(const DKey& a, const DKey& b) {
  DKey r;
  for (int d = 0; d < kDirCount; ++d)
    key_set(r, d, key_component(a, d) - key_component(b, d));
  return r;
}

inline double binomial(int n, int k) {
  static const auto table = [] {
    std::array<std::array<double, kMaxOrder + 1>, kMaxOrder + 1> t{};
    for (int i = 0; i <= kMaxOrder; ++i) {
      t[i][0] = 1.0;
      for (int j = 1; j <= i; ++j)
        t[i][j] = t[i - 1][j - 1] + (j <= i - 1 ? t[i - 1][j] : 0.0);
    }
    return t;
  }();
  return table[n][k];
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Visits every sub-key j <= k componentwise together with the product of
// binomial coefficients prod_d C(k_d, j_d).  Used by the Leibniz rule.
template <class F>
void for_each_subkey(const DKey& k, F&& fn) {
  std::array<int, kDirCount> comp{};
  for (int d = 0; d < kDirCount; ++d) comp[d] = key_component(k, d);

  DKey j;
  std::array<int, kDirCount> cur{};
  double coeff = 1.0;
  // Odometer over the box [0, comp].
  for (;;) {
    fn(static_cast<const DKey&>(j), coeff);
    int d = 0;
    for (; d < kDirCount; ++d) {
      if (cur[d] < comp[d]) {
        coeff /= binomial(comp[d], cur[d]);
        ++cur[d];
        key_set(j, d, cur[d]);
        coeff *= binomial(comp[d], cur[d]);
        break;
      }
      coeff /= binomial(comp[d], cur[d]);
      cur[d] = 0;
      key_set(j, d, 0);
      coeff *= 1.0;
    }
    if (d == kDirCount) break;
  }
}

// Conversions from the user-facing vector form.  alpha lists the covariable
// orders (nx tangential entries, then zeta); beta lists the x orders.
inline DKey make_key(const std::vector<int>& alpha, const std::vector<int>& beta, int nx) {
  if (nx < 0 || nx > kMaxSlots)
    throw argument_error("tangential dimension out of range");
  if (static_cast<int>(alpha.size()) != nx + 1)
    throw argument_error("alpha must have nx+1 entries (tangential orders, then zeta)");
  if (static_cast<int>(beta.size()) != nx)
    throw argument_error("beta must have nx entries");
  DKey k;
  for (int j = 0; j < nx; ++j) {
    if (alpha[j] < 0 || alpha[j] > kMaxOrder || beta[j] < 0 || beta[j] > kMaxOrder)
      throw argument_error("derivative order out of range");
    k.xi[j] = static_cast<std::uint8_t>(alpha[j]);
    k.x[j] = static_cast<std::uint8_t>(beta[j]);
  }
  if (alpha[nx] < 0 || alpha[nx] > kMaxOrder)
    throw argument_error("zeta order out of range");
  k.zeta = static_cast<std::uint8_t>(alpha[nx]);
  return k;
}

}  // namespace opcal
