#pragma once

// Brute-force transcription of the DEUS hinge losses, written independently
// of the library: explicit loops, no shared helpers.

#include <algorithm>
#include <vector>

namespace oracle {

struct Tuple {
  std::vector<double> f;  // per-turn costs, t = 1..m
  double b = 0.0;         // budget
  double c = 0.0;         // potential cost of goal'
  int status = 1;
  double v_b = -1.0;
};

inline double loss_1(const Tuple& x, bool forward) {
  double sum = 0.0;
  for (std::size_t t = 0; t < x.f.size(); ++t) sum += x.f[t];
  double inner = sum + x.b;
  if (forward) inner -= x.c;
  return std::max(0.0, -x.status * inner);
}

inline double loss_2(const Tuple& x, bool forward) {
  double sum = 0.0;
  for (std::size_t t = 0; t + 1 < x.f.size(); ++t) sum += x.f[t];
  double inner = sum + x.b;
  if (forward) inner -= x.c;
  return std::max(0.0, -inner);
}

inline double loss_3(const Tuple& x) {
  double s = 0.0;
  for (double f : x.f) s += std::max(0.0, f - x.v_b);
  return s;
}

inline double loss_full(const Tuple& x) { return loss_1(x, false) + loss_2(x, false) + loss_3(x); }
inline double loss_light(const Tuple& x) { return loss_1(x, false) + loss_3(x); }
inline double loss_full_forward(const Tuple& x) {
  return loss_1(x, true) + loss_2(x, true) + loss_3(x);
}

}  // namespace oracle
