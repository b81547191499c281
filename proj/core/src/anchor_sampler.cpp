#include "coarse3d/anchor_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "coarse3d/rng.hpp"

namespace coarse3d {

EntropyMap shannon_entropy(const Mat& softmax_map, int h, int w) {
  if (softmax_map.rows() != static_cast<Eigen::Index>(h) * w)
    throw std::invalid_argument("shannon_entropy: shape mismatch");
  EntropyMap out{h, w, Vec::Zero(h * w)};
  for (Eigen::Index p = 0; p < softmax_map.rows(); ++p) {
    if (softmax_map.row(p).minCoeff() < 0.0)
      throw std::invalid_argument("shannon_entropy: negative probability");
    if (std::abs(softmax_map.row(p).sum() - 1.0) > 1e-5)
      throw std::invalid_argument("shannon_entropy: probabilities do not sum to 1");
    double hval = 0.0;
    for (Eigen::Index k = 0; k < softmax_map.cols(); ++k) {
      const double f = softmax_map(p, k);
      if (f > 0.0) hval -= f * std::log(f);
    }
    out.values(p) = std::max(0.0, hval);
  }
  return out;
}

SamplingTables sampling_probabilities(const EntropyMap& entropy,
                                      const std::vector<int>& pred_labels,
                                      const std::vector<std::uint8_t>& valid) {
  const std::size_t n = static_cast<std::size_t>(entropy.h) * entropy.w;
  if (pred_labels.size() != n || valid.size() != n)
    throw std::invalid_argument("sampling_probabilities: shape mismatch");
  SamplingTables tables;
  for (std::size_t p = 0; p < n; ++p) {
    if (!valid[p] || pred_labels[p] < 0) continue;
    auto& t = tables[pred_labels[p]];
    t.pixels.push_back(static_cast<int>(p));
    const double h = entropy.values(static_cast<Eigen::Index>(p));
    t.prob.push_back(std::exp(-h * h));
  }
  for (auto& [cls, t] : tables) {
    const double total = std::accumulate(t.prob.begin(), t.prob.end(), 0.0);
    for (auto& v : t.prob) v /= total;
  }
  return tables;
}

int anchor_budget(int epoch, int warmup, int total_epochs, int pseudo_count) {
  if (warmup >= total_epochs) throw std::invalid_argument("anchor_budget: warmup >= total");
  if (pseudo_count < 0) throw std::invalid_argument("anchor_budget: negative pseudo_count");
  if (epoch < warmup) return 0;
  const int target = pseudo_count / 2;
  if (target <= 1) return std::min(1, pseudo_count);
  const int span = total_epochs - 1 - warmup;
  if (span <= 0) return std::min(target, pseudo_count);
  const long t = std::min<long>(epoch - warmup, span);
  const int budget = 1 + static_cast<int>(t * (target - 1) / span);
  return std::min(budget, pseudo_count);
}

namespace {

// proportional quotas with a >= 1 floor for present classes (when feasible),
// capped at each class's pixel count; remainders and surplus by largest
// remainder
std::vector<int> allocate_quotas(const std::vector<int>& counts, int budget) {
  const int n = static_cast<int>(counts.size());
  const long total = std::accumulate(counts.begin(), counts.end(), 0L);
  std::vector<int> quota(n, 0);
  if (total == 0 || budget <= 0) return quota;
  const int capped_budget = static_cast<int>(std::min<long>(budget, total));

  std::vector<double> share(n);
  std::vector<std::pair<double, int>> remainder(n);
  int assigned = 0;
  for (int i = 0; i < n; ++i) {
    share[i] = static_cast<double>(capped_budget) * counts[i] / static_cast<double>(total);
    quota[i] = static_cast<int>(std::floor(share[i]));
    remainder[i] = {share[i] - quota[i], i};
    assigned += quota[i];
  }
  std::sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; assigned < capped_budget; r = (r + 1) % n) {
    const int i = remainder[r].second;
    if (quota[i] < counts[i]) {
      ++quota[i];
      ++assigned;
    }
  }
  // every present class gets at least one when the budget allows it
  if (capped_budget >= n) {
    for (int i = 0; i < n; ++i) {
      if (quota[i] > 0 || counts[i] == 0) continue;
      int donor = -1;
      for (const auto& [rem, j] : remainder)
        if (quota[j] > 1 && (donor == -1 || quota[j] > quota[donor])) donor = j;
      for (int j = 0; j < n && donor == -1; ++j)
        if (j != i && quota[j] > 1) donor = j;
      if (donor == -1) break;
      --quota[donor];
      ++quota[i];
    }
  }
  // cap at class capacity, surplus back to classes with room
  for (int i = 0; i < n; ++i) {
    if (quota[i] <= counts[i]) continue;
    int surplus = quota[i] - counts[i];
    quota[i] = counts[i];
    for (const auto& [rem, j] : remainder) {
      while (surplus > 0 && quota[j] < counts[j]) {
        ++quota[j];
        --surplus;
      }
    }
  }
  return quota;
}

}  // namespace

AnchorSet sample_anchors(const SamplingTables& tables, int budget, std::uint64_t seed,
                         int width) {
  if (budget < 0) throw std::invalid_argument("sample_anchors: negative budget");
  AnchorSet out;
  if (budget == 0 || tables.empty()) return out;

  std::vector<int> classes;
  std::vector<int> counts;
  for (const auto& [cls, t] : tables) {
    if (t.pixels.empty()) continue;
    classes.push_back(cls);
    counts.push_back(static_cast<int>(t.pixels.size()));
  }
  const std::vector<int> quota = allocate_quotas(counts, budget);

  Rng rng(derive_seed(seed, 0xa2c402ULL));
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    const auto& t = tables.at(classes[ci]);
    std::vector<double> weight = t.prob;
    std::vector<char> taken(weight.size(), 0);
    double mass = std::accumulate(weight.begin(), weight.end(), 0.0);
    for (int draw = 0; draw < quota[ci]; ++draw) {
      double u = rng.uniform() * mass;
      std::size_t pick = 0;
      for (std::size_t i = 0; i < weight.size(); ++i) {
        if (taken[i]) continue;
        if (u < weight[i]) {
          pick = i;
          break;
        }
        u -= weight[i];
        pick = i;  // fall through to the last free slot on rounding slack
      }
      while (taken[pick]) pick = (pick + 1) % weight.size();
      taken[pick] = 1;
      mass -= weight[pick];
      const int p = t.pixels[pick];
      out.anchors.push_back({p / width, p % width, classes[ci]});
    }
  }
  return out;
}

}  // namespace coarse3d
