// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace melvq {

/// Real-input DFT of a fixed size with its inverse. Instances own their
/// scratch buffers and are not shareable across threads; create one per
/// worker.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const noexcept { return size_; }
  std::size_t bins() const noexcept { return size_ / 2 + 1; }

  /// Unnormalized forward transform. in.size() must be <= size(); the rest
  /// is zero-padded. out receives bins() values.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);

  /// Inverse of forward, scaled by 1/size(). The imaginary parts of the DC
  /// and Nyquist bins are ignored.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Impl;
  std::size_t size_;
  std::unique_ptr<Impl> impl_;
};

/// A RealFft of the given size owned by the calling thread.
RealFft& thread_fft(std::size_t size);

}  // namespace melvq
