// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melvq/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

#include "melvq/error.hpp"

namespace melvq {
namespace {

// The FFTW planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit Impl(std::size_t n) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, spec, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real, FFTW_ESTIMATE);
  }

  ~Impl() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    fftw_free(real);
    fftw_free(spec);
  }
};

RealFft::RealFft(std::size_t size) : size_(size) {
  if (size < 2) throw Error(ErrorKind::kInvalidArgument, "FFT size < 2");
  impl_ = std::make_unique<Impl>(size);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in,
                      std::span<std::complex<double>> out) {
  if (in.size() > size_ || out.size() != bins())
    throw Error(ErrorKind::kInvalidArgument, "FFT buffer size mismatch");
  std::copy(in.begin(), in.end(), impl_->real);
  std::fill(impl_->real + in.size(), impl_->real + size_, 0.0);
  fftw_execute(impl_->fwd);
  for (std::size_t k = 0; k < bins(); ++k)
    out[k] = {impl_->spec[k][0], impl_->spec[k][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) {
  if (in.size() != bins() || out.size() != size_)
    throw Error(ErrorKind::kInvalidArgument, "FFT buffer size mismatch");
  for (std::size_t k = 0; k < bins(); ++k) {
    impl_->spec[k][0] = in[k].real();
    impl_->spec[k][1] = in[k].imag();
  }
  impl_->spec[0][1] = 0.0;
  if (size_ % 2 == 0) impl_->spec[bins() - 1][1] = 0.0;
  // c2r destroys its input; the spectrum buffer is rewritten on every call.
  fftw_execute(impl_->inv);
  const double scale = 1.0 / static_cast<double>(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = impl_->real[i] * scale;
}

RealFft& thread_fft(std::size_t size) {
  thread_local std::map<std::size_t, RealFft> cache;
  auto it = cache.find(size);
  if (it == cache.end()) it = cache.emplace(size, RealFft(size)).first;
  return it->second;
}

}  // namespace melvq
