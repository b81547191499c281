#include "coarse3d/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace coarse3d {

Mat row_softmax(const Mat& logits) {
  Mat probs(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto shifted = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
    probs.row(i) = shifted / shifted.sum();
  }
  return probs;
}

Mat softmax_backward(const Mat& probs, const Mat& dprobs) {
  Mat dz(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double dot = probs.row(i).dot(dprobs.row(i));
    dz.row(i) = probs.row(i).cwiseProduct((dprobs.row(i).array() - dot).matrix());
  }
  return dz;
}

LossValue info_nce_pix2proto(const Mat& anchors, const std::vector<int>& anchor_classes,
                             const PrototypeBank& bank, double temperature) {
  if (anchors.rows() != static_cast<Eigen::Index>(anchor_classes.size()))
    throw std::invalid_argument("info_nce: anchor/class size mismatch");
  if (temperature <= 0.0) throw std::invalid_argument("info_nce: temperature must be > 0");
  LossValue out;
  out.grad = Mat::Zero(anchors.rows(), anchors.cols());
  if (anchors.rows() == 0) return out;  // empty anchor set contributes zero

  const int n_classes = bank.n_classes();
  for (int k : anchor_classes) {
    if (k < 0 || k >= n_classes || !bank.initialized(k))
      throw std::runtime_error("info_nce: anchor class " + std::to_string(k) +
                               " not initialized in the bank");
  }

  // all prototypes stacked once; rows [k*n_p, (k+1)*n_p) belong to class k
  const int n_p = bank.n_protos();
  Mat keys(n_classes * n_p, bank.dim());
  for (int k = 0; k < n_classes; ++k)
    keys.middleRows(k * n_p, n_p) = bank.prototypes(k);

  const Mat sims = anchors * keys.transpose() / temperature;
  const double inv_n = 1.0 / static_cast<double>(anchors.rows());
  for (Eigen::Index i = 0; i < anchors.rows(); ++i) {
    const int k = anchor_classes[i];
    const double m = sims.row(i).maxCoeff();
    const Eigen::ArrayXd e = (sims.row(i).array() - m).exp();
    const double denom = e.sum();
    const double pos = e.segment(k * n_p, n_p).sum();
    out.value += -std::log(pos / denom) * inv_n;

    // d/da = sum_j c_j * p_j / tau with c_j = softmax_all - [j positive] * softmax_pos
    Eigen::ArrayXd coeff = e / denom;
    coeff.segment(k * n_p, n_p) -= e.segment(k * n_p, n_p) / pos;
    out.grad.row(i) = inv_n / temperature * (coeff.matrix().transpose() * keys);
  }
  return out;
}

LossValue focal_loss(const Mat& logits, const std::vector<int>& labels,
                     const std::vector<double>& class_weights, double gamma) {
  if (logits.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("focal_loss: label size mismatch");
  LossValue out;
  out.grad = Mat::Zero(logits.rows(), logits.cols());
  std::size_t n_labelled = 0;
  for (int y : labels)
    if (y >= 0) ++n_labelled;
  if (n_labelled == 0) return out;

  const Mat probs = row_softmax(logits);
  const double inv_n = 1.0 / static_cast<double>(n_labelled);
  constexpr double tiny = 1e-12;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y < 0) continue;
    const double w = class_weights[static_cast<std::size_t>(y)];
    const double p = std::max(probs(i, y), tiny);
    const double one_m = 1.0 - p;
    out.value += -w * std::pow(one_m, gamma) * std::log(p) * inv_n;
    // dL/dp, then through the softmax Jacobian restricted to the y column
    double dldp = -w * std::pow(one_m, gamma) / p;
    if (gamma > 0.0) dldp += w * gamma * std::pow(one_m, gamma - 1.0) * std::log(p);
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      const double dpdz = probs(i, y) * ((k == y ? 1.0 : 0.0) - probs(i, k));
      out.grad(i, k) += dldp * dpdz * inv_n;
    }
  }
  return out;
}

LossValue lovasz_softmax(const Mat& probs, const std::vector<int>& labels) {
  if (probs.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("lovasz_softmax: label size mismatch");
  LossValue out;
  out.grad = Mat::Zero(probs.rows(), probs.cols());

  std::vector<Eigen::Index> labelled;
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    if (labels[i] >= 0) labelled.push_back(i);
  if (labelled.empty()) return out;

  std::vector<int> present;
  for (auto i : labelled)
    if (std::find(present.begin(), present.end(), labels[i]) == present.end())
      present.push_back(labels[i]);
  std::sort(present.begin(), present.end());

  const std::size_t n = labelled.size();
  std::vector<std::size_t> order(n);
  for (int k : present) {
    // margin errors: 1-f for the true class, f otherwise
    std::vector<double> err(n);
    std::vector<double> gt(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool is_k = labels[labelled[i]] == k;
      gt[i] = is_k ? 1.0 : 0.0;
      err[i] = is_k ? 1.0 - probs(labelled[i], k) : probs(labelled[i], k);
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return err[a] > err[b]; });

    // gradient of the Jaccard index along the sorted errors
    const double gts = std::accumulate(gt.begin(), gt.end(), 0.0);
    double inter = gts, uni = gts;
    double prev_jac = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = order[i];
      inter -= gt[idx];
      uni += 1.0 - gt[idx];
      const double jac = 1.0 - inter / uni;
      const double g = jac - prev_jac;
      prev_jac = jac;
      out.value += err[idx] * g / present.size();
      const double sign = gt[idx] > 0.5 ? -1.0 : 1.0;  // derr/dprob
      out.grad(labelled[idx], k) += sign * g / present.size();
    }
  }
  return out;
}

double total_loss(double foc, double lov, double nce, const LossWeights& w) {
  return w.lambda_foc * foc + w.lambda_lov * lov + w.lambda_nce * nce;
}

}  // namespace coarse3d
