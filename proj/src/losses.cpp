#include "cachelab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cachelab {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LossResult ranking_loss(const std::vector<double>& probs,
                        const std::vector<double>& capped_distances,
                        double alpha) {
  const size_t w_count = probs.size();
  if (capped_distances.size() != w_count || w_count == 0) {
    throw std::invalid_argument("ranking_loss: size mismatch");
  }
  LossResult result;
  result.grad.assign(w_count, 0.0);

  // IDCG: relevancies (d - 1) placed at hard ranks 1..W in descending
  // distance order.
  std::vector<double> sorted = capped_distances;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double idcg = 0;
  for (size_t k = 0; k < w_count; ++k) {
    idcg += (sorted[k] - 1.0) / std::log(static_cast<double>(k + 2));
  }
  if (idcg == 0) {
    // All distances equal 1: nothing to rank.
    result.loss = 0.0;
    return result;
  }

  // Soft ranks: pos_w = 1 + sum_{i != w} sigma(alpha (p_i - p_w)).
  std::vector<double> pos(w_count, 1.0);
  for (size_t w = 0; w < w_count; ++w) {
    for (size_t i = 0; i < w_count; ++i) {
      if (i != w) pos[w] += sigmoid(alpha * (probs[i] - probs[w]));
    }
  }

  double dcg = 0;
  std::vector<double> ddcg_dpos(w_count);
  for (size_t w = 0; w < w_count; ++w) {
    const double log_term = std::log(pos[w] + 1.0);
    dcg += (capped_distances[w] - 1.0) / log_term;
    ddcg_dpos[w] =
        -(capped_distances[w] - 1.0) / ((pos[w] + 1.0) * log_term * log_term);
  }
  result.loss = -dcg / idcg;

  // dL/dp_j = -(1/IDCG) sum_w dDCG/dpos_w * dpos_w/dp_j.
  for (size_t w = 0; w < w_count; ++w) {
    const double coeff = -ddcg_dpos[w] / idcg;
    for (size_t i = 0; i < w_count; ++i) {
      if (i == w) continue;
      const double s = sigmoid(alpha * (probs[i] - probs[w]));
      const double ds = alpha * s * (1.0 - s);
      result.grad[i] += coeff * ds;
      result.grad[w] -= coeff * ds;
    }
  }
  return result;
}

LossResult ll_loss(const std::vector<double>& probs, uint32_t oracle_way) {
  if (oracle_way >= probs.size()) {
    throw std::invalid_argument("ll_loss: oracle way out of range");
  }
  LossResult result;
  result.grad.assign(probs.size(), 0.0);
  const double p = std::max(probs[oracle_way], 1e-12);
  result.loss = -std::log(p);
  result.grad[oracle_way] = -1.0 / p;
  return result;
}

LossResult reuse_loss(const std::vector<double>& pred_log_reuse,
                      const std::vector<double>& capped_distances) {
  const size_t w_count = pred_log_reuse.size();
  if (capped_distances.size() != w_count || w_count == 0) {
    throw std::invalid_argument("reuse_loss: size mismatch");
  }
  LossResult result;
  result.grad.resize(w_count);
  for (size_t w = 0; w < w_count; ++w) {
    const double target = std::log(capped_distances[w]);
    const double diff = pred_log_reuse[w] - target;
    result.loss += diff * diff;
    result.grad[w] = 2.0 * diff / static_cast<double>(w_count);
  }
  result.loss /= static_cast<double>(w_count);
  return result;
}

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kRankingReuse: return "ranking+reuse";
    case LossKind::kLl: return "ll";
    case LossKind::kRankingOnly: return "ranking";
    case LossKind::kLlReuse: return "ll+reuse";
  }
  return "unknown";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "ranking+reuse") return LossKind::kRankingReuse;
  if (name == "ll") return LossKind::kLl;
  if (name == "ranking") return LossKind::kRankingOnly;
  if (name == "ll+reuse") return LossKind::kLlReuse;
  throw std::invalid_argument("unknown loss kind: " + name);
}

}  // namespace cachelab
