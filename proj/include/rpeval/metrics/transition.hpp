#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rpeval/taxonomy.hpp"

namespace rpeval::metrics {

enum class TransitionVariant { kIntra, kInter };

/// Emotion-to-emotion transition counts for one role.
class TransitionMatrix {
 public:
  explicit TransitionMatrix(TransitionVariant variant = TransitionVariant::kIntra,
                            std::size_t n_labels = EmotionTaxonomy::kSize);

  TransitionVariant variant() const noexcept { return variant_; }
  std::size_t labels() const noexcept { return n_; }

  void add(EmotionId from, EmotionId to);
  long count(EmotionId from, EmotionId to) const;
  long total() const noexcept { return total_; }
  bool empty() const noexcept { return total_ == 0; }
  const std::vector<long>& counts() const noexcept { return counts_; }

  /// Row-normalized n x n probabilities, row-major. Rows without
  /// observations are uniform.
  std::vector<double> row_probabilities() const;

  /// All n*n cells divided by the total pair count. Requires !empty().
  std::vector<double> flattened() const;

  bool operator==(const TransitionMatrix&) const = default;

 private:
  TransitionVariant variant_;
  std::size_t n_;
  std::vector<long> counts_;
  long total_ = 0;
};

struct TransitionMatrices {
  TransitionMatrix intra{TransitionVariant::kIntra};
  TransitionMatrix inter{TransitionVariant::kInter};
};

/// Fusion labels of one response; std::nullopt when the response is missing
/// from the run (dropped), which also breaks the inter-turn chain.
using ResponseLabels = std::optional<std::vector<EmotionId>>;
/// One dialogue's responses for a single role, in turn order.
using DialogueLabels = std::vector<ResponseLabels>;

/// Counts intra-turn pairs (label[u-1], label[u]) inside each response and
/// inter-turn pairs (last label of the previous response, first label of the
/// current one) between consecutive responses of a dialogue. A pair with an
/// ambiguous endpoint is never counted.
TransitionMatrices build_transition_matrices(const std::vector<DialogueLabels>& dialogues,
                                             std::size_t n_labels = EmotionTaxonomy::kSize);

enum class MatrixFlattening {
  kGlobal,   ///< one n*n-cell distribution normalized by the total pair count
  kRowWise,  ///< mean of per-row distances over the row-normalized matrix
};

struct DivergenceOptions {
  MatrixFlattening flattening = MatrixFlattening::kGlobal;
  /// Added to every cell probability (then renormalized) before comparing
  /// two nonempty matrices. 0 disables smoothing.
  double smoothing = 1e-9;
};

/// Hellinger distance between two nonempty matrices. Throws ContractError
/// when either matrix is empty or their sizes differ.
double matrix_distance(const TransitionMatrix& a, const TransitionMatrix& b, const DivergenceOptions& opts = {});

using RoleMatrices = std::map<std::string, TransitionMatrix>;

struct EddResult {
  std::optional<double> value;  ///< nullopt when no role is usable
  std::vector<std::string> roles_used;
  std::vector<std::string> roles_excluded;  ///< empty matrix on either side
};

/// Mean GT-vs-agent matrix distance over roles. Both maps must name the same
/// roles (ContractError otherwise); roles with an empty matrix on either side
/// are excluded.
EddResult edd(const RoleMatrices& gt, const RoleMatrices& rpa, const DivergenceOptions& opts = {});

struct CdResult {
  std::optional<double> value;  ///< nullopt when fewer than two roles are usable
  std::vector<std::string> roles_used;
  std::size_t pairs = 0;
};

/// Mean pairwise distance over all unordered pairs of nonempty role matrices.
CdResult character_discrepancy(const RoleMatrices& roles, const DivergenceOptions& opts = {});

struct RcdResult {
  std::optional<double> rcd;
  CdResult cd_gt;
  CdResult cd_rpa;
};

/// cd_rpa - cd_gt. Throws ContractError when either side names fewer than two
/// roles.
RcdResult rcd(const RoleMatrices& gt, const RoleMatrices& rpa, const DivergenceOptions& opts = {});

}  // namespace rpeval::metrics
