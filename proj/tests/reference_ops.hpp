#pragma once

// Straight-line Eigen re-implementations of the numeric building blocks,
// used as independent oracles. No autodiff, no shared code with the library
// paths under test.

#include <Eigen/Dense>

#include <cmath>

namespace refops {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

inline MatrixXd softmax_rows(const MatrixXd& x) {
  MatrixXd y = x;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

inline MatrixXd layer_norm_rows(const MatrixXd& x, const VectorXd& gain,
                                const VectorXd& bias, double eps) {
  MatrixXd y = x;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    double mean = y.row(r).mean();
    double var = (y.row(r).array() - mean).square().mean();
    y.row(r) = (((y.row(r).array() - mean) / std::sqrt(var + eps)) *
                gain.transpose().array()) +
               bias.transpose().array();
  }
  return y;
}

inline MatrixXd mha(const MatrixXd& q, const MatrixXd& k, const MatrixXd& v,
                    const MatrixXd& wq, const MatrixXd& wk, const MatrixXd& wv,
                    const MatrixXd& wo, int heads, bool causal) {
  MatrixXd qp = q * wq, kp = k * wk, vp = v * wv;
  Eigen::Index d = q.cols(), dh = d / heads;
  MatrixXd ctx(q.rows(), d);
  for (int h = 0; h < heads; ++h) {
    MatrixXd qh = qp.middleCols(h * dh, dh);
    MatrixXd kh = kp.middleCols(h * dh, dh);
    MatrixXd vh = vp.middleCols(h * dh, dh);
    MatrixXd scores = qh * kh.transpose() / std::sqrt(double(dh));
    if (causal)
      for (Eigen::Index i = 0; i < scores.rows(); ++i)
        for (Eigen::Index j = i + 1; j < scores.cols(); ++j)
          scores(i, j) = -1e9;
    ctx.middleCols(h * dh, dh) = softmax_rows(scores) * vh;
  }
  return ctx * wo;
}

}  // namespace refops
