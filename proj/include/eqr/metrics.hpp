#pragma once

#include <cstdint>
#include <string>

#include "eqr/sampler.hpp"
#include "eqr/tensor.hpp"

namespace eqr {

/// Peak signal-to-noise ratio over images in [0,1]; inputs are clamped to
/// [0,1] first. Identical inputs return +infinity.
double psnr(const Tensor& a, const Tensor& b);

enum class SsimWindow { kGaussian11, kMean8 };

/// Mean local SSIM over valid windows (no padding), averaged across channels.
/// Defaults to the 11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03,
/// L = 1 on clamped [0,1] inputs. Symmetric in (a, b).
double ssim(const Tensor& a, const Tensor& b, SsimWindow window = SsimWindow::kGaussian11);

/// ||A x - y||^2 in the operator's native range; zero iff exactly consistent.
double consistency(const Tensor& x, const DegradedObservation& obs);

struct MetricReport {
  double psnr = 0.0;  // +inf when identical
  double ssim = 0.0;
  double consistency = 0.0;
  double runtime_ms = 0.0;
  std::uint64_t nfe_count = 0;
  bool has_reference = false;  // psnr/ssim only fill when a ground truth exists
};

}  // namespace eqr
