#include "liqport/hjb/jet.hpp"

#include <stdexcept>

namespace liqport::hjb {

namespace {

// tanh and its first three derivatives, elementwise.
void tanh_derivatives(const Eigen::Ref<const Eigen::MatrixXd>& a, Eigen::MatrixXd& t, Eigen::MatrixXd& s1, Eigen::MatrixXd& s2,
                      Eigen::MatrixXd& s3) {
  t = a.array().tanh().matrix();
  s1 = (1.0 - t.array().square()).matrix();
  s2 = (-2.0 * t.array() * s1.array()).matrix();
  s3 = (s1.array() * (4.0 * t.array().square() - 2.0 * s1.array())).matrix();
}

}  // namespace

void JetSpec::validate() const {
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i] < 0 || first[i] >= kInputs) throw std::invalid_argument("jet direction out of range");
    for (std::size_t j = 0; j < i; ++j)
      if (first[j] == first[i]) throw std::invalid_argument("repeated jet direction");
  }
  for (const auto& p : second)
    if (first_slot(p[0]) < 0 || first_slot(p[1]) < 0)
      throw std::invalid_argument("second-derivative pair needs both first derivatives");
}

int JetSpec::first_slot(int input) const {
  for (std::size_t i = 0; i < first.size(); ++i)
    if (first[i] == input) return static_cast<int>(i);
  return -1;
}

void MlpJet::forward(const Mlp& m, const InputScaling& sc, const StateBatch& X, const JetSpec& spec) {
  spec.validate();
  if (!spec.first.empty() && m.output() != OutputActivation::identity)
    throw std::invalid_argument("derivative jets need an identity output layer");
  m_ = &m;
  spec_ = spec;
  sc_ = sc;
  const Eigen::Index H = m.hidden(), B = X.cols();
  const auto nf = static_cast<Eigen::Index>(spec.first.size());
  const auto ns = static_cast<Eigen::Index>(spec.second.size());
  const Eigen::Index C = 1 + nf + ns;
  B_ = B;

  xs_.resize(kInputs, B);
  for (int d = 0; d < kInputs; ++d) xs_.row(d) = (X.row(d).array() - sc.center[d]) / sc.scale[d];

  const auto W1 = m.W1();
  c_.resize(H, nf);
  for (Eigen::Index f = 0; f < nf; ++f) c_.col(f) = W1.col(spec.first[f]) / sc.scale[spec.first[f]];

  a1_.noalias() = W1 * xs_;
  a1_.colwise() += m.b1();
  tanh_derivatives(a1_, t1_, s1a_, s2a_, s3a_);

  h1_.resize(H, C * B);
  h1_.middleCols(0, B) = t1_;
  for (Eigen::Index f = 0; f < nf; ++f)
    h1_.middleCols((1 + f) * B, B) = (s1a_.array().colwise() * c_.col(f).array()).matrix();
  for (Eigen::Index p = 0; p < ns; ++p) {
    const Eigen::VectorXd cc = (c_.col(spec.first_slot(spec.second[p][0])).array() *
                                c_.col(spec.first_slot(spec.second[p][1])).array()).matrix();
    h1_.middleCols((1 + nf + p) * B, B) = (s2a_.array().colwise() * cc.array()).matrix();
  }

  a2_.noalias() = m.W2() * h1_;
  a2_.middleCols(0, B).colwise() += m.b2();
  tanh_derivatives(a2_.middleCols(0, B), t2_, s1b_, s2b_, s3b_);

  h2_.resize(H, C * B);
  h2_.middleCols(0, B) = t2_;
  for (Eigen::Index f = 0; f < nf; ++f)
    h2_.middleCols((1 + f) * B, B) = (s1b_.array() * a2_.middleCols((1 + f) * B, B).array()).matrix();
  for (Eigen::Index p = 0; p < ns; ++p) {
    const Eigen::Index fd = 1 + spec.first_slot(spec.second[p][0]);
    const Eigen::Index fe = 1 + spec.first_slot(spec.second[p][1]);
    h2_.middleCols((1 + nf + p) * B, B) =
        (s2b_.array() * a2_.middleCols(fd * B, B).array() * a2_.middleCols(fe * B, B).array() +
         s1b_.array() * a2_.middleCols((1 + nf + p) * B, B).array())
            .matrix();
  }

  const Eigen::RowVectorXd y = m.w3().transpose() * h2_;
  out_.value = y.segment(0, B).array() + m.b3();
  if (m.output() == OutputActivation::sigmoid) out_.value = (1.0 / (1.0 + (-out_.value.array()).exp())).matrix();
  out_.first.resize(nf, B);
  for (Eigen::Index f = 0; f < nf; ++f) out_.first.row(f) = y.segment((1 + f) * B, B);
  out_.second.resize(ns, B);
  for (Eigen::Index p = 0; p < ns; ++p) out_.second.row(p) = y.segment((1 + nf + p) * B, B);
}

void MlpJet::backward(const Eigen::RowVectorXd& dvalue, const Eigen::MatrixXd& dfirst, const Eigen::MatrixXd& dsecond,
                      Eigen::Ref<Eigen::VectorXd> grad) const {
  if (m_ == nullptr) throw std::logic_error("backward before forward");
  const Mlp& m = *m_;
  const Eigen::Index H = m.hidden(), B = B_;
  const auto nf = static_cast<Eigen::Index>(spec_.first.size());
  const auto ns = static_cast<Eigen::Index>(spec_.second.size());
  const Eigen::Index C = 1 + nf + ns;
  if (dvalue.size() != B || dfirst.rows() != nf || dsecond.rows() != ns || (nf > 0 && dfirst.cols() != B) ||
      (ns > 0 && dsecond.cols() != B))
    throw std::invalid_argument("adjoint shapes do not match the forward jet");
  if (grad.size() != static_cast<Eigen::Index>(m.size())) throw std::invalid_argument("gradient has wrong size");

  Eigen::RowVectorXd& ybar = ybar_;
  ybar.resize(C * B);
  ybar.segment(0, B) = dvalue;
  if (m.output() == OutputActivation::sigmoid)
    ybar.segment(0, B) = (dvalue.array() * out_.value.array() * (1.0 - out_.value.array())).matrix();
  for (Eigen::Index f = 0; f < nf; ++f) ybar.segment((1 + f) * B, B) = dfirst.row(f);
  for (Eigen::Index p = 0; p < ns; ++p) ybar.segment((1 + nf + p) * B, B) = dsecond.row(p);

  const auto off = [](std::size_t o) { return static_cast<Eigen::Index>(o); };
  grad.segment(off(m.o_w3()), H).noalias() += h2_ * ybar.transpose();
  grad(off(m.o_b3())) += ybar.segment(0, B).sum();

  // Layer two activation, channel by channel.
  Eigen::MatrixXd& h2bar = h2bar_;
  h2bar.noalias() = m.w3() * ybar;
  Eigen::MatrixXd& a2bar = a2bar_;
  a2bar.resize(H, C * B);
  {
    auto v0 = a2bar.middleCols(0, B).array();
    v0 = h2bar.middleCols(0, B).array() * s1b_.array();
    for (Eigen::Index f = 0; f < nf; ++f) {
      const auto af = a2_.middleCols((1 + f) * B, B).array();
      v0 += h2bar.middleCols((1 + f) * B, B).array() * s2b_.array() * af;
      a2bar.middleCols((1 + f) * B, B) = (h2bar.middleCols((1 + f) * B, B).array() * s1b_.array()).matrix();
    }
    for (Eigen::Index p = 0; p < ns; ++p) {
      const Eigen::Index fd = spec_.first_slot(spec_.second[p][0]);
      const Eigen::Index fe = spec_.first_slot(spec_.second[p][1]);
      const auto ad = a2_.middleCols((1 + fd) * B, B).array();
      const auto ae = a2_.middleCols((1 + fe) * B, B).array();
      const auto ap = a2_.middleCols((1 + nf + p) * B, B).array();
      const auto hb = h2bar.middleCols((1 + nf + p) * B, B).array();
      v0 += hb * (s3b_.array() * ad * ae + s2b_.array() * ap);
      a2bar.middleCols((1 + fd) * B, B).array() += hb * s2b_.array() * ae;
      a2bar.middleCols((1 + fe) * B, B).array() += hb * s2b_.array() * ad;
      a2bar.middleCols((1 + nf + p) * B, B) = (hb * s1b_.array()).matrix();
    }
  }

  {
    Eigen::Map<Eigen::MatrixXd> gW2(grad.data() + off(m.o_W2()), H, H);
    gW2.noalias() += a2bar * h1_.transpose();
  }
  grad.segment(off(m.o_b2()), H) += a2bar.middleCols(0, B).rowwise().sum();
  Eigen::MatrixXd& h1bar = h1bar_;
  h1bar.noalias() = m.W2().transpose() * a2bar;

  // Layer one activation; its first derivatives are the constant columns c_.
  Eigen::MatrixXd& a1bar = a1bar_;
  a1bar = (h1bar.middleCols(0, B).array() * s1a_.array()).matrix();
  Eigen::MatrixXd cbar = Eigen::MatrixXd::Zero(H, nf);
  for (Eigen::Index f = 0; f < nf; ++f) {
    const auto hb = h1bar.middleCols((1 + f) * B, B).array();
    a1bar.array() += (hb * s2a_.array()).colwise() * c_.col(f).array();
    cbar.col(f) += (hb * s1a_.array()).rowwise().sum().matrix();
  }
  for (Eigen::Index p = 0; p < ns; ++p) {
    const Eigen::Index fd = spec_.first_slot(spec_.second[p][0]);
    const Eigen::Index fe = spec_.first_slot(spec_.second[p][1]);
    const auto hb = h1bar.middleCols((1 + nf + p) * B, B).array();
    const Eigen::ArrayXd cc = c_.col(fd).array() * c_.col(fe).array();
    a1bar.array() += (hb * s3a_.array()).colwise() * cc;
    const Eigen::ArrayXd t = (hb * s2a_.array()).rowwise().sum();
    cbar.col(fd).array() += t * c_.col(fe).array();
    cbar.col(fe).array() += t * c_.col(fd).array();
  }

  Eigen::Map<Eigen::MatrixXd> gW1(grad.data(), H, kInputs);
  gW1.noalias() += a1bar * xs_.transpose();
  for (Eigen::Index f = 0; f < nf; ++f) gW1.col(spec_.first[f]) += cbar.col(f) / sc_.scale[spec_.first[f]];
  grad.segment(off(m.o_b1()), H) += a1bar.rowwise().sum();
}

}  // namespace liqport::hjb
