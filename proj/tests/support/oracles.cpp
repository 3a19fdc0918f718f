#include "oracles.hpp"

#include <cmath>
#include <map>

namespace oracle {

double bhattacharyya_hellinger(const std::vector<double>& p, const std::vector<double>& q) {
  long double bc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) bc += std::sqrt(static_cast<long double>(p[i]) * q[i]);
  const long double v = 1.0L - bc;
  return v <= 0 ? 0.0 : static_cast<double>(std::sqrt(v));
}

double alpha_by_pairs(const std::vector<std::vector<std::optional<double>>>& table, Delta delta) {
  const std::size_t units = table.empty() ? 0 : table[0].size();
  std::vector<std::vector<double>> pairable;
  for (std::size_t u = 0; u < units; ++u) {
    std::vector<double> vals;
    for (const auto& row : table) {
      if (row[u]) vals.push_back(*row[u]);
    }
    if (vals.size() >= 2) pairable.push_back(vals);
  }
  std::vector<double> pooled;
  for (const auto& v : pairable) pooled.insert(pooled.end(), v.begin(), v.end());
  const double n = static_cast<double>(pooled.size());

  std::map<double, double> freq;
  for (double v : pooled) freq[v] += 1;
  auto d2 = [&](double a, double b) -> double {
    if (a == b) return 0;
    if (delta == Delta::kNominal) return 1;
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    double s = 0;
    for (const auto& [v, f] : freq) {
      if (v >= lo && v <= hi) s += f;
    }
    s -= (freq[lo] + freq[hi]) / 2;
    return s * s;
  };

  double observed = 0;
  for (const auto& vals : pairable) {
    double unit = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      for (std::size_t j = 0; j < vals.size(); ++j) {
        if (i != j) unit += d2(vals[i], vals[j]);
      }
    }
    observed += unit / static_cast<double>(vals.size() - 1);
  }
  observed /= n;

  double expected = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      if (i != j) expected += d2(pooled[i], pooled[j]);
    }
  }
  expected /= n * (n - 1);
  if (expected == 0) return 1.0;
  return 1.0 - observed / expected;
}

Cell confusion_cell(bool in_gt, bool in_pd) {
  if (in_gt && in_pd) return Cell::kTp;
  if (in_gt && !in_pd) return Cell::kFn;
  if (!in_gt && in_pd) return Cell::kFp;
  return Cell::kTn;
}

std::vector<ClassCounts> confusion_counts(const std::vector<std::vector<int>>& gt,
                                          const std::vector<std::vector<int>>& pd, int n_classes,
                                          int (*class_of)(int)) {
  std::vector<ClassCounts> out(n_classes);
  auto contains = [&](const std::vector<int>& labels, int x, bool skip_negative) {
    for (int l : labels) {
      if (skip_negative && l < 0) continue;
      if ((class_of ? class_of(l) : l) == x) return true;
    }
    return false;
  };
  for (std::size_t s = 0; s < gt.size(); ++s) {
    for (int x = 0; x < n_classes; ++x) {
      const bool g = contains(gt[s], x, false);
      const bool p = contains(pd[s], x, true);
      switch (confusion_cell(g, p)) {
        case Cell::kTp: ++out[x].tp; break;
        case Cell::kFn: ++out[x].fn; break;
        case Cell::kFp: ++out[x].fp; break;
        case Cell::kTn: ++out[x].tn; break;
      }
      if (g) ++out[x].support;
    }
  }
  return out;
}

double weighted_f1(const std::vector<ClassCounts>& counts) {
  double num = 0;
  double den = 0;
  for (const auto& c : counts) {
    const double p = c.tp + c.fp == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fp);
    const double r = c.tp + c.fn == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fn);
    const double f1 = p + r == 0 ? 0.0 : 2 * p * r / (p + r);
    num += double(c.support) * f1;
    den += double(c.support);
  }
  return den == 0 ? 0.0 : num / den;
}

void enumerate_pairs(const std::vector<std::optional<std::vector<int>>>& dialogue, std::vector<Pair>& intra,
                     std::vector<Pair>& inter) {
  for (std::size_t i = 0; i < dialogue.size(); ++i) {
    if (!dialogue[i]) continue;
    const auto& e = *dialogue[i];
    for (std::size_t u = 1; u < e.size(); ++u) {
      if (e[u - 1] >= 0 && e[u] >= 0) intra.push_back({e[u - 1], e[u]});
    }
    if (i == 0 || !dialogue[i - 1]) continue;
    const auto& prev = *dialogue[i - 1];
    if (prev.empty() || e.empty()) continue;
    if (prev.back() >= 0 && e.front() >= 0) inter.push_back({prev.back(), e.front()});
  }
}

double normalized_entropy(const std::vector<int>& counts) {
  double total = 0;
  for (int c : counts) total += c;
  if (total == 0) return 0;
  double h = 0;
  for (int c : counts) {
    if (c == 0) continue;
    const double p = c / total;
    h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(counts.size()));
}

int rc_table(bool agree, bool disagree, int n_agree, int n_disagree) {
  if (!agree && !disagree) return 0;
  if (agree && !disagree) return 5;
  if (!agree && disagree) return 1;
  if (n_agree > n_disagree) return 4;
  if (n_agree == n_disagree) return 3;
  return 2;
}

}  // namespace oracle
