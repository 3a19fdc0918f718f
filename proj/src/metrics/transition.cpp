#include "rpeval/metrics/transition.hpp"

#include <numeric>

#include "rpeval/errors.hpp"
#include "rpeval/metrics/hellinger.hpp"

namespace rpeval::metrics {

TransitionMatrix::TransitionMatrix(TransitionVariant variant, std::size_t n_labels)
    : variant_(variant), n_(n_labels), counts_(n_labels * n_labels, 0) {}

void TransitionMatrix::add(EmotionId from, EmotionId to) {
  if (from < 0 || to < 0 || static_cast<std::size_t>(from) >= n_ || static_cast<std::size_t>(to) >= n_) {
    throw ContractError("TransitionMatrix::add: label out of range");
  }
  ++counts_[static_cast<std::size_t>(from) * n_ + static_cast<std::size_t>(to)];
  ++total_;
}

long TransitionMatrix::count(EmotionId from, EmotionId to) const {
  return counts_.at(static_cast<std::size_t>(from) * n_ + static_cast<std::size_t>(to));
}

std::vector<double> TransitionMatrix::row_probabilities() const {
  std::vector<double> p(n_ * n_);
  for (std::size_t r = 0; r < n_; ++r) {
    long row_total = 0;
    for (std::size_t c = 0; c < n_; ++c) row_total += counts_[r * n_ + c];
    for (std::size_t c = 0; c < n_; ++c) {
      p[r * n_ + c] = row_total == 0 ? 1.0 / static_cast<double>(n_)
                                     : static_cast<double>(counts_[r * n_ + c]) / static_cast<double>(row_total);
    }
  }
  return p;
}

std::vector<double> TransitionMatrix::flattened() const {
  if (empty()) throw ContractError("TransitionMatrix::flattened: no observed pairs");
  std::vector<double> p(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    p[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
  }
  return p;
}

TransitionMatrices build_transition_matrices(const std::vector<DialogueLabels>& dialogues, std::size_t n_labels) {
  TransitionMatrices m{TransitionMatrix(TransitionVariant::kIntra, n_labels),
                       TransitionMatrix(TransitionVariant::kInter, n_labels)};
  for (const auto& dialogue : dialogues) {
    const std::vector<EmotionId>* prev = nullptr;
    for (const auto& response : dialogue) {
      if (!response) {
        prev = nullptr;
        continue;
      }
      const auto& labels = *response;
      for (std::size_t u = 1; u < labels.size(); ++u) {
        if (labels[u - 1] != kAmbiguous && labels[u] != kAmbiguous) m.intra.add(labels[u - 1], labels[u]);
      }
      if (prev && !prev->empty() && !labels.empty() && prev->back() != kAmbiguous && labels.front() != kAmbiguous) {
        m.inter.add(prev->back(), labels.front());
      }
      prev = &labels;
    }
  }
  return m;
}

namespace {

void smooth(std::vector<double>& p, std::size_t begin, std::size_t len, double eps) {
  if (eps <= 0.0) return;
  const double norm = 1.0 + eps * static_cast<double>(len);
  for (std::size_t i = begin; i < begin + len; ++i) p[i] = (p[i] + eps) / norm;
}

}  // namespace

double matrix_distance(const TransitionMatrix& a, const TransitionMatrix& b, const DivergenceOptions& opts) {
  if (a.labels() != b.labels()) throw ContractError("matrix_distance: matrices differ in size");
  if (a.empty() || b.empty()) throw ContractError("matrix_distance: empty matrix");
  const std::size_t n = a.labels();
  if (opts.flattening == MatrixFlattening::kGlobal) {
    auto p = a.flattened();
    auto q = b.flattened();
    smooth(p, 0, p.size(), opts.smoothing);
    smooth(q, 0, q.size(), opts.smoothing);
    return hellinger(p, q);
  }
  auto p = a.row_probabilities();
  auto q = b.row_probabilities();
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    smooth(p, r * n, n, opts.smoothing);
    smooth(q, r * n, n, opts.smoothing);
    sum += hellinger(std::span<const double>(p).subspan(r * n, n), std::span<const double>(q).subspan(r * n, n));
  }
  return sum / static_cast<double>(n);
}

EddResult edd(const RoleMatrices& gt, const RoleMatrices& rpa, const DivergenceOptions& opts) {
  if (gt.size() != rpa.size()) throw ContractError("edd: role sets differ");
  EddResult r;
  double sum = 0.0;
  auto it_r = rpa.begin();
  for (auto it_g = gt.begin(); it_g != gt.end(); ++it_g, ++it_r) {
    if (it_g->first != it_r->first) throw ContractError("edd: role sets differ");
    if (it_g->second.empty() || it_r->second.empty()) {
      r.roles_excluded.push_back(it_g->first);
      continue;
    }
    sum += matrix_distance(it_g->second, it_r->second, opts);
    r.roles_used.push_back(it_g->first);
  }
  if (!r.roles_used.empty()) r.value = sum / static_cast<double>(r.roles_used.size());
  return r;
}

CdResult character_discrepancy(const RoleMatrices& roles, const DivergenceOptions& opts) {
  CdResult r;
  std::vector<const TransitionMatrix*> usable;
  for (const auto& [role, m] : roles) {
    if (!m.empty()) {
      r.roles_used.push_back(role);
      usable.push_back(&m);
    }
  }
  if (usable.size() < 2) return r;
  double sum = 0.0;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    for (std::size_t j = i + 1; j < usable.size(); ++j) {
      sum += matrix_distance(*usable[i], *usable[j], opts);
      ++r.pairs;
    }
  }
  r.value = sum / static_cast<double>(r.pairs);
  return r;
}

RcdResult rcd(const RoleMatrices& gt, const RoleMatrices& rpa, const DivergenceOptions& opts) {
  if (gt.size() < 2 || rpa.size() < 2) throw ContractError("rcd: at least two roles are required on each side");
  RcdResult r;
  r.cd_gt = character_discrepancy(gt, opts);
  r.cd_rpa = character_discrepancy(rpa, opts);
  if (r.cd_gt.value && r.cd_rpa.value) r.rcd = *r.cd_rpa.value - *r.cd_gt.value;
  return r;
}

}  // namespace rpeval::metrics
