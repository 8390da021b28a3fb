#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "fisherflow/error.hpp"

namespace fisherflow {

// The FFTW planner is not thread safe; executing distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Cached complex-to-complex FFT plans for one row-major lattice shape:
/// a full N-d transform plus one batched strided transform per axis.
/// Plans are created with FFTW_ESTIMATE so plan selection is deterministic,
/// and FFTW_UNALIGNED so they can execute on any caller buffer.
class FftPlans {
public:
  explicit FftPlans(std::vector<std::size_t> points) : n_(std::move(points)) {
    require(!n_.empty(), errc::validation, "FftPlans: empty shape");
    const std::size_t d = n_.size();
    stride_.assign(d, 1);
    total_ = 1;
    for (std::size_t a = d; a-- > 0;) {
      stride_[a] = static_cast<std::ptrdiff_t>(total_);
      total_ *= n_[a];
    }
    std::vector<std::complex<double>> scratch_in(total_), scratch_out(total_);
    auto* in = reinterpret_cast<fftw_complex*>(scratch_in.data());
    auto* out = reinterpret_cast<fftw_complex*>(scratch_out.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;

    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    std::vector<fftw_iodim64> dims(d);
    for (std::size_t a = 0; a < d; ++a)
      dims[a] = {static_cast<std::ptrdiff_t>(n_[a]), stride_[a], stride_[a]};
    nd_fwd_ = fftw_plan_guru64_dft(static_cast<int>(d), dims.data(), 0, nullptr, in, out,
                                   FFTW_FORWARD, flags);
    nd_bwd_ = fftw_plan_guru64_dft(static_cast<int>(d), dims.data(), 0, nullptr, in, out,
                                   FFTW_BACKWARD, flags);
    axis_fwd_.resize(d);
    axis_bwd_.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      fftw_iodim64 tdim = dims[a];
      std::vector<fftw_iodim64> hdims;
      for (std::size_t b = 0; b < d; ++b)
        if (b != a) hdims.push_back(dims[b]);
      axis_fwd_[a] = fftw_plan_guru64_dft(1, &tdim, static_cast<int>(hdims.size()),
                                          hdims.data(), in, out, FFTW_FORWARD, flags);
      axis_bwd_[a] = fftw_plan_guru64_dft(1, &tdim, static_cast<int>(hdims.size()),
                                          hdims.data(), in, out, FFTW_BACKWARD, flags);
    }
    require(nd_fwd_ && nd_bwd_, errc::numerical, "FftPlans: fftw planning failed");
    for (std::size_t a = 0; a < d; ++a)
      require(axis_fwd_[a] && axis_bwd_[a], errc::numerical, "FftPlans: fftw planning failed");
  }

  ~FftPlans() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(nd_fwd_);
    fftw_destroy_plan(nd_bwd_);
    for (auto p : axis_fwd_) fftw_destroy_plan(p);
    for (auto p : axis_bwd_) fftw_destroy_plan(p);
  }

  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  std::size_t total() const { return total_; }

  // Unnormalized forward transform along one axis (batched over the rest).
  void forward_axis(std::size_t axis, const std::complex<double>* in,
                    std::complex<double>* out) const {
    execute(axis_fwd_.at(axis), in, out);
  }

  // Inverse of forward_axis, normalized by 1/n_axis.
  void backward_axis(std::size_t axis, const std::complex<double>* in,
                     std::complex<double>* out) const {
    execute(axis_bwd_.at(axis), in, out);
    const double scale = 1.0 / static_cast<double>(n_[axis]);
    for (std::size_t i = 0; i < total_; ++i) out[i] *= scale;
  }

  void forward_nd(const std::complex<double>* in, std::complex<double>* out) const {
    execute(nd_fwd_, in, out);
  }

  // Inverse of forward_nd, normalized by 1/total.
  void backward_nd(const std::complex<double>* in, std::complex<double>* out) const {
    execute(nd_bwd_, in, out);
    const double scale = 1.0 / static_cast<double>(total_);
    for (std::size_t i = 0; i < total_; ++i) out[i] *= scale;
  }

private:
  static void execute(fftw_plan plan, const std::complex<double>* in,
                      std::complex<double>* out) {
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
  }

  std::vector<std::size_t> n_;
  std::vector<std::ptrdiff_t> stride_;
  std::size_t total_ = 0;
  fftw_plan nd_fwd_ = nullptr, nd_bwd_ = nullptr;
  std::vector<fftw_plan> axis_fwd_, axis_bwd_;
};

} // namespace fisherflow
