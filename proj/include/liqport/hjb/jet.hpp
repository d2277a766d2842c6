#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "liqport/hjb/network.hpp"

namespace liqport::hjb {

/// Which input derivatives to carry through the network. Every index used in
/// `second` must also appear in `first`.
struct JetSpec {
  std::vector<int> first;
  std::vector<std::array<int, 2>> second;

  void validate() const;
  int first_slot(int input) const;
};

struct JetOutput {
  Eigen::RowVectorXd value;
  /// Row f holds d y / d x[first[f]].
  Eigen::MatrixXd first;
  /// Row p holds d2 y / d x[i] d x[j] for (i, j) = second[p].
  Eigen::MatrixXd second;
};

/// Batched forward propagation of value, first and selected second input
/// derivatives through an Mlp, with reverse accumulation of parameter
/// gradients of any linear functional of those outputs. Jets with
/// derivative channels require an identity output layer.
class MlpJet {
 public:
  void forward(const Mlp& m, const InputScaling& sc, const StateBatch& X, const JetSpec& spec);
  const JetOutput& output() const noexcept { return out_; }

  /// Adds to `grad` the gradient of sum(dvalue .* value) + sum(dfirst .* first)
  /// + sum(dsecond .* second) with respect to the parameters of the Mlp used
  /// in the last forward call.
  void backward(const Eigen::RowVectorXd& dvalue, const Eigen::MatrixXd& dfirst, const Eigen::MatrixXd& dsecond,
                Eigen::Ref<Eigen::VectorXd> grad) const;

 private:
  const Mlp* m_ = nullptr;
  JetSpec spec_;
  InputScaling sc_;
  Eigen::Index B_ = 0;
  Eigen::MatrixXd xs_;
  Eigen::MatrixXd c_;                  // H x nf, W1 columns divided by the input scale
  Eigen::MatrixXd s1a_, s2a_, s3a_;    // tanh derivatives at layer one, H x B
  Eigen::MatrixXd h1_;                 // H x (C B), channel blocks
  Eigen::MatrixXd a2_;                 // H x (C B)
  Eigen::MatrixXd s1b_, s2b_, s3b_;    // tanh derivatives at layer two, H x B
  Eigen::MatrixXd h2_;                 // H x (C B)
  JetOutput out_;
  Eigen::MatrixXd a1_, t1_, t2_;       // forward scratch
  mutable Eigen::RowVectorXd ybar_;    // backward scratch
  mutable Eigen::MatrixXd h2bar_, a2bar_, h1bar_, a1bar_;
};

}  // namespace liqport::hjb
