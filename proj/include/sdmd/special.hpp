#pragma once

#include "sdmd/errors.hpp"

namespace sdmd {

// Physicists' Hermite polynomial H_n via the three-term recurrence.
inline double hermite_h(int n, double x) {
  if (n < 0) throw InvalidArgument("hermite_h: negative order");
  if (n == 0) return 1.0;
  double hm = 1.0, h = 2.0 * x;
  for (int k = 1; k < n; ++k) {
    double next = 2.0 * x * h - 2.0 * k * hm;
    hm = h;
    h = next;
  }
  return h;
}

// Probabilists' Hermite polynomial He_n.
inline double hermite_he(int n, double x) {
  if (n < 0) throw InvalidArgument("hermite_he: negative order");
  if (n == 0) return 1.0;
  double hm = 1.0, h = x;
  for (int k = 1; k < n; ++k) {
    double next = x * h - k * hm;
    hm = h;
    h = next;
  }
  return h;
}

inline double factorial_d(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

}  // namespace sdmd
