#pragma once

// Decompressor transition table written cell by cell, kept apart from
// decompressor_step so the two can be checked against each other.

#include <string>
#include <vector>

#include "rohcrl/core.hpp"

namespace rohcrl {

struct TableCell {
  int from_first;  // first row state covered by this cell
  int from_last;   // last row state covered
  int to;          // target column; -1 means "one level down" (l+1)
  bool (*holds)(HeaderType a, bool tx_ok, bool compressible);
  const char* condition;
};

inline std::vector<TableCell> transition_table(int window) {
  const int w = window;
  return {
      {0, w - 1, 0,
       [](HeaderType a, bool t, bool s) { return t && (s || a != HeaderType::CO3); },
       "sigma_T=1 & (sigma_S=1 | alpha_C!=CO3)"},
      {0, w - 1, -1, [](HeaderType, bool t, bool s) { return s && !t; }, "sigma_S=1 & sigma_T=0"},
      {0, w - 1, w,
       [](HeaderType a, bool t, bool s) { return !s && (!t || a == HeaderType::CO3); },
       "sigma_S=0 & (sigma_T=0 | alpha_C=CO3)"},
      {w, w, 0, [](HeaderType a, bool t, bool) { return t && a != HeaderType::CO3; },
       "sigma_T=1 & alpha_C!=CO3"},
      {w, w, w, [](HeaderType a, bool t, bool) { return !t || a == HeaderType::CO3; },
       "sigma_T=0 | alpha_C=CO3"},
      {w + 1, w + 1, 0, [](HeaderType a, bool t, bool) { return t && a == HeaderType::IR; },
       "sigma_T=1 & alpha_C=IR"},
      {w + 1, w + 1, w + 1, [](HeaderType a, bool t, bool) { return !t || a != HeaderType::IR; },
       "sigma_T=0 | alpha_C!=IR"},
  };
}

/// Every target column whose cell condition holds for this input. A
/// consistent table yields exactly one.
inline std::vector<int> table_targets(int state, int window, HeaderType a, bool tx_ok,
                                      bool compressible) {
  std::vector<int> out;
  for (const TableCell& c : transition_table(window)) {
    if (state < c.from_first || state > c.from_last) continue;
    if (c.holds(a, tx_ok, compressible)) out.push_back(c.to < 0 ? state + 1 : c.to);
  }
  return out;
}

struct FsmCheckReport {
  int cases = 0;
  int mismatches = 0;
  std::vector<std::string> failures;
};

/// Exhaustive comparison of decompressor_step against the table for one W.
inline FsmCheckReport check_fsm(int window) {
  FsmCheckReport r;
  for (int s = 0; s <= window + 1; ++s)
    for (int a = 0; a < kNumHeaders; ++a)
      for (int t = 0; t < 2; ++t)
        for (int c = 0; c < 2; ++c) {
          ++r.cases;
          const HeaderType h = header_from_code(a);
          const std::vector<int> expected = table_targets(s, window, h, t == 1, c == 1);
          const int got = decompressor_step({s, window}, h, t == 1, c == 1).value();
          if (expected.size() != 1 || expected.front() != got) {
            ++r.mismatches;
            r.failures.push_back("state " + std::to_string(s) + " " + header_name(h) +
                                 " sigma_T=" + std::to_string(t) + " sigma_S=" + std::to_string(c) +
                                 ": step gives " + std::to_string(got) + ", table allows " +
                                 std::to_string(expected.size()) + " target(s)");
          }
        }
  return r;
}

}  // namespace rohcrl
