#pragma once

#include <cmath>

#include "voxtok/lfq.hpp"
#include "voxtok/volume.hpp"

namespace voxtok {

/// mean |x - x_hat|; gradient with respect to x_hat (sign(0) taken as 0).
template <typename Real>
double l1_loss(const BasicVolume<Real>& x, const BasicVolume<Real>& x_hat, BasicVolume<Real>* grad = nullptr) {
  if (x.shape() != x_hat.shape()) {
    throw Error(Errc::ShapeMismatch, "reconstruction " + x_hat.shape().str() + " vs input " + x.shape().str());
  }
  const double n = static_cast<double>(x.size());
  if (grad) *grad = BasicVolume<Real>(x.shape(), x.spacing(), x.domain());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x_hat.values()[i]) - static_cast<double>(x.values()[i]);
    acc += std::abs(d);
    if (grad) grad->values()[i] = static_cast<Real>((d > 0) - (d < 0)) / static_cast<Real>(n);
  }
  return acc / n;
}

/// Non-saturating generator loss mean(-log sigmoid(l)) = mean softplus(-l).
template <typename Real>
double generator_adv_loss(const Tensor4<Real>& logits, Tensor4<Real>* grad = nullptr) {
  const double n = static_cast<double>(logits.size());
  if (grad) *grad = Tensor4<Real>(logits.shape());
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double l = logits.values()[i];
    acc += detail::softplus(-l);
    if (grad) grad->values()[i] = static_cast<Real>(-nn::sigmoid(-l) / n);
  }
  return acc / n;
}

/// Patch-averaged BCE with logits: mean softplus(-D(real)) + mean softplus(D(fake)).
template <typename Real>
double discriminator_loss(const Tensor4<Real>& real_logits, const Tensor4<Real>& fake_logits,
                          Tensor4<Real>* d_real = nullptr, Tensor4<Real>* d_fake = nullptr) {
  const double nr = static_cast<double>(real_logits.size()), nf = static_cast<double>(fake_logits.size());
  if (d_real) *d_real = Tensor4<Real>(real_logits.shape());
  if (d_fake) *d_fake = Tensor4<Real>(fake_logits.shape());
  double lr = 0.0, lf = 0.0;
  for (std::size_t i = 0; i < real_logits.size(); ++i) {
    const double l = real_logits.values()[i];
    lr += detail::softplus(-l);
    if (d_real) d_real->values()[i] = static_cast<Real>(-nn::sigmoid(-l) / nr);
  }
  for (std::size_t i = 0; i < fake_logits.size(); ++i) {
    const double l = fake_logits.values()[i];
    lf += detail::softplus(l);
    if (d_fake) d_fake->values()[i] = static_cast<Real>(nn::sigmoid(l) / nf);
  }
  return lr / nr + lf / nf;
}

}  // namespace voxtok
