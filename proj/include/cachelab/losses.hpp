#ifndef CACHELAB_LOSSES_HPP_
#define CACHELAB_LOSSES_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace cachelab {

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // w.r.t. the input vector of the loss
};

// Differentiable NDCG over eviction probabilities with (capped) reuse
// distances as relevancies. Soft rank of line w is one plus the sigmoid
// count of lines receiving more probability. Bounded in [-1, 0]; all-equal
// relevancies give loss -1 with zero gradient, degenerate IDCG gives 0.
LossResult ranking_loss(const std::vector<double>& probs,
                        const std::vector<double>& capped_distances,
                        double alpha);

// Behavior-cloning negative log-likelihood of the oracle's way.
LossResult ll_loss(const std::vector<double>& probs, uint32_t oracle_way);

// Mean squared error between predicted and actual log reuse distances.
LossResult reuse_loss(const std::vector<double>& pred_log_reuse,
                      const std::vector<double>& capped_distances);

enum class LossKind { kRankingReuse, kLl, kRankingOnly, kLlReuse };

const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

}  // namespace cachelab

#endif  // CACHELAB_LOSSES_HPP_
