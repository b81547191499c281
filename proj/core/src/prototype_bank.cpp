#include "coarse3d/prototype_bank.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "coarse3d/rng.hpp"

namespace coarse3d {

Mat cost_matrix(const Mat& embeddings, const Mat& protos) {
  if (embeddings.cols() != protos.cols())
    throw std::invalid_argument("cost_matrix: dimension mismatch");
  auto check_norms = [](const Mat& m, const char* what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (std::abs(m.row(i).norm() - 1.0) > 1e-3)
        throw std::invalid_argument(std::string("cost_matrix: non-normalized ") + what);
    }
  };
  check_norms(embeddings, "embedding");
  check_norms(protos, "prototype");
  return (Mat::Ones(embeddings.rows(), protos.rows()) - embeddings * protos.transpose());
}

TransportPlan sinkhorn_assign(const Mat& cost, int iterations, double epsilon) {
  if (iterations < 1) throw std::invalid_argument("sinkhorn_assign: iterations must be >= 1");
  if (epsilon <= 0.0) throw std::invalid_argument("sinkhorn_assign: epsilon must be > 0");
  const auto n_k = cost.rows(), n_p = cost.cols();
  // subtract the row minimum before exponentiating; invariant under the
  // row/column rescaling but avoids underflow at small epsilon
  Mat kernel(n_k, n_p);
  for (Eigen::Index i = 0; i < n_k; ++i)
    kernel.row(i) = ((cost.row(i).array() - cost.row(i).minCoeff()) / -epsilon).exp();
  if (!(kernel.maxCoeff() > 0.0))
    throw std::runtime_error("sinkhorn_assign: kernel underflow, increase epsilon");

  const double row_mass = 1.0 / static_cast<double>(n_k);
  const double col_mass = 1.0 / static_cast<double>(n_p);
  TransportPlan t{std::move(kernel)};
  for (int it = 0; it < iterations; ++it) {
    for (Eigen::Index j = 0; j < n_p; ++j) {
      const double s = t.plan.col(j).sum();
      if (s > 0.0) t.plan.col(j) *= col_mass / s;
    }
    for (Eigen::Index i = 0; i < n_k; ++i) {
      const double s = t.plan.row(i).sum();
      if (s > 0.0) t.plan.row(i) *= row_mass / s;
    }
  }
  return t;
}

std::vector<int> map_pixels(const TransportPlan& plan, double gumbel_tau, std::uint64_t seed) {
  if (gumbel_tau < 0.0) throw std::invalid_argument("map_pixels: negative tau");
  Rng rng(derive_seed(seed, 0x9b3ULL));
  std::vector<int> out(plan.plan.rows());
  for (Eigen::Index i = 0; i < plan.plan.rows(); ++i) {
    if (plan.plan.row(i).maxCoeff() <= 0.0)
      throw std::runtime_error("map_pixels: degenerate all-zero plan row");
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < plan.plan.cols(); ++j) {
      const double noise = gumbel_tau > 0.0 ? gumbel_tau * rng.gumbel() : 0.0;
      const double p = plan.plan(i, j);
      const double score = (p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity()) +
                           noise;
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(j);
      }
    }
    out[i] = best;
  }
  return out;
}

PrototypeBank::PrototypeBank(int n_classes, int n_protos, int dim, double sigma)
    : n_protos_(n_protos), dim_(dim), sigma_(sigma) {
  if (n_classes < 1 || n_protos < 1 || dim < 1)
    throw std::invalid_argument("PrototypeBank: bad shape");
  if (sigma <= 0.0 || sigma >= 1.0) throw std::invalid_argument("PrototypeBank: bad sigma");
  protos_.assign(n_classes, Mat::Zero(n_protos, dim));
  initialized_.assign(n_classes, false);
}

void PrototypeBank::random_init(std::uint64_t seed) {
  for (std::size_t k = 0; k < protos_.size(); ++k) {
    Rng rng(derive_seed(seed, 0xba2cULL, k));
    for (int j = 0; j < n_protos_; ++j) {
      for (int d = 0; d < dim_; ++d) protos_[k](j, d) = rng.normal();
      protos_[k].row(j).normalize();
    }
    initialized_[k] = true;
  }
}

void PrototypeBank::update(int class_k, const Mat& embeddings,
                           const std::vector<int>& assignment) {
  if (class_k < 0 || class_k >= n_classes())
    throw std::invalid_argument("PrototypeBank::update: invalid class id");
  if (embeddings.rows() != static_cast<Eigen::Index>(assignment.size()))
    throw std::invalid_argument("PrototypeBank::update: assignment size mismatch");

  Mat sums = Mat::Zero(n_protos_, dim_);
  std::vector<int> counts(n_protos_, 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int j = assignment[i];
    if (j < 0 || j >= n_protos_)
      throw std::invalid_argument("PrototypeBank::update: assignment index out of range");
    sums.row(j) += embeddings.row(static_cast<Eigen::Index>(i));
    ++counts[j];
  }

  Mat& protos = protos_[class_k];
  const bool first_touch = !initialized_[class_k];
  bool any = false;
  for (int j = 0; j < n_protos_; ++j) {
    if (counts[j] == 0) continue;  // empty clusters stay bitwise unchanged
    any = true;
    const Mat mean = sums.row(j) / counts[j];
    if (first_touch)
      protos.row(j) = mean;
    else
      protos.row(j) = sigma_ * protos.row(j) + (1.0 - sigma_) * mean;
    const double n = protos.row(j).norm();
    if (n > 0.0) protos.row(j) /= n;
  }
  if (first_touch && any) {
    // untouched prototypes of a fresh class get the first seen mean so the
    // whole class is usable as keys immediately
    Mat fallback;
    for (int j = 0; j < n_protos_; ++j) {
      if (counts[j] > 0) {
        fallback = protos.row(j);
        break;
      }
    }
    for (int j = 0; j < n_protos_; ++j)
      if (counts[j] == 0) protos.row(j) = fallback;
    initialized_[class_k] = true;
  }
}

void PrototypeBank::update_soft(int class_k, const Mat& embeddings, const TransportPlan& plan) {
  if (class_k < 0 || class_k >= n_classes())
    throw std::invalid_argument("PrototypeBank::update_soft: invalid class id");
  if (plan.plan.rows() != embeddings.rows() || plan.plan.cols() != n_protos_)
    throw std::invalid_argument("PrototypeBank::update_soft: plan shape mismatch");

  Mat& protos = protos_[class_k];
  const bool first_touch = !initialized_[class_k];
  for (int j = 0; j < n_protos_; ++j) {
    const double mass = plan.plan.col(j).sum();
    if (mass <= 0.0) continue;
    const Mat mean = (plan.plan.col(j).transpose() * embeddings) / mass;
    if (first_touch)
      protos.row(j) = mean;
    else
      protos.row(j) = sigma_ * protos.row(j) + (1.0 - sigma_) * mean;
    const double n = protos.row(j).norm();
    if (n > 0.0) protos.row(j) /= n;
  }
  if (first_touch) initialized_[class_k] = true;
}

void PrototypeBank::serialize(std::ostream& out) const {
  const char magic[8] = {'C', '3', 'D', 'B', 'A', 'N', 'K', '1'};
  out.write(magic, 8);
  const std::int32_t hdr[3] = {n_classes(), n_protos_, dim_};
  out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  out.write(reinterpret_cast<const char*>(&sigma_), sizeof(sigma_));
  for (int k = 0; k < n_classes(); ++k) {
    const std::uint8_t flag = initialized_[k] ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&flag), 1);
  }
  for (int k = 0; k < n_classes(); ++k) {
    for (int j = 0; j < n_protos_; ++j) {
      for (int d = 0; d < dim_; ++d) {
        const float v = static_cast<float>(protos_[k](j, d));
        out.write(reinterpret_cast<const char*>(&v), 4);
      }
    }
  }
}

PrototypeBank PrototypeBank::deserialize(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "C3DBANK1")
    throw std::runtime_error("prototype bank: bad magic");
  std::int32_t hdr[3];
  in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  double sigma;
  in.read(reinterpret_cast<char*>(&sigma), sizeof(sigma));
  PrototypeBank bank(hdr[0], hdr[1], hdr[2], sigma);
  for (int k = 0; k < hdr[0]; ++k) {
    std::uint8_t flag;
    in.read(reinterpret_cast<char*>(&flag), 1);
    bank.initialized_[k] = flag != 0;
  }
  for (int k = 0; k < hdr[0]; ++k) {
    for (int j = 0; j < hdr[1]; ++j) {
      for (int d = 0; d < hdr[2]; ++d) {
        float v;
        in.read(reinterpret_cast<char*>(&v), 4);
        bank.protos_[k](j, d) = v;
      }
    }
  }
  if (!in) throw std::runtime_error("prototype bank: truncated payload");
  return bank;
}

void PrototypeBank::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write bank: " + path);
  serialize(out);
}

PrototypeBank PrototypeBank::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open bank: " + path);
  return deserialize(in);
}

}  // namespace coarse3d
