#pragma once

#include "cadiff/numerics/tape.hpp"

namespace cadiff {

/// Batch mean of 1/2 W2^2 between diagonal Gaussians given as [n, w] mean and
/// std rows. The second distribution is a fixed target: no gradient reaches it.
inline ad::Var half_w2_squared(ad::Var mean, ad::Var std, ad::Var target_mean, ad::Var target_std) {
  if (mean.value().shape != std.value().shape || mean.value().shape != target_mean.value().shape ||
      mean.value().shape != target_std.value().shape)
    throw Error(detail::concat("half_w2_squared: shape mismatch ", mean.value().shape_str(), ", ",
                               std.value().shape_str(), " vs ", target_mean.value().shape_str(), ", ",
                               target_std.value().shape_str()));
  using namespace ad;
  Var dm = sub(mean, detach(target_mean));
  Var ds = sub(std, detach(target_std));
  Var per_row = sum_cols(add(square(dm), square(ds)));
  return scale(ad::mean(per_row), 0.5);
}

/// Transition term: encoder-side predicted next latent vs denoised next latent.
inline ad::Var loss_bs(ad::Var mean, ad::Var std, ad::Var target_mean, ad::Var target_std) {
  return half_w2_squared(mean, std, target_mean, target_std);
}

/// Reward term: one-dimensional predicted reward vs denoised reward.
inline ad::Var loss_br(ad::Var mean, ad::Var std, ad::Var target_mean, ad::Var target_std) {
  if (mean.cols() != 1) throw Error(detail::concat("loss_br: reward distributions are 1-D, got width ", mean.cols()));
  return half_w2_squared(mean, std, target_mean, target_std);
}

}  // namespace cadiff
