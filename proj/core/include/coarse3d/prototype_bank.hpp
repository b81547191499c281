#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coarse3d/tensor.hpp"

namespace coarse3d {

struct TransportPlan {
  Mat plan;  // n_pixels x n_protos, nonnegative, total mass 1
};

// C_ij = 1 - e_i . p_j for unit-norm rows; entries in [0, 2]
Mat cost_matrix(const Mat& embeddings, const Mat& protos);

// Entropy-regularized transport toward uniform marginals (1/N_k rows,
// 1/N_p columns). Each iteration scales columns then rows, so row sums are
// exact after every iteration and column sums converge.
TransportPlan sinkhorn_assign(const Mat& cost, int iterations = 3, double epsilon = 0.05);

// Per-row prototype pick: argmax of ln(plan) + tau * gumbel_noise.
// tau = 0 disables the noise (plain argmax, ties to the smallest index).
std::vector<int> map_pixels(const TransportPlan& plan, double gumbel_tau, std::uint64_t seed);

class PrototypeBank {
 public:
  PrototypeBank(int n_classes, int n_protos, int dim, double sigma = 0.999);

  // momentum update of class k's prototypes from unit-norm embeddings and
  // their prototype assignment; first touch of a class adopts the cluster
  // means directly
  void update(int class_k, const Mat& embeddings, const std::vector<int>& assignment);

  // soft variant: cluster means weighted by the transport plan columns
  void update_soft(int class_k, const Mat& embeddings, const TransportPlan& plan);

  // seeded unit-norm random init for every class (marks all initialized)
  void random_init(std::uint64_t seed);

  bool initialized(int class_k) const { return initialized_[class_k]; }
  const Mat& prototypes(int class_k) const { return protos_[class_k]; }
  int n_classes() const { return static_cast<int>(protos_.size()); }
  int n_protos() const { return n_protos_; }
  int dim() const { return dim_; }
  double sigma() const { return sigma_; }

  void save(const std::string& path) const;
  static PrototypeBank load(const std::string& path);
  void serialize(std::ostream& out) const;
  static PrototypeBank deserialize(std::istream& in);

 private:
  int n_protos_, dim_;
  double sigma_;
  std::vector<Mat> protos_;  // per class: n_protos x dim
  std::vector<bool> initialized_;
};

}  // namespace coarse3d
