/// @file fft.hpp
/// @brief Thin wrapper over FFTW for in-place 2D complex transforms.
///
/// Both directions follow the FFTW convention (unnormalized); callers apply
/// 1/N where needed. Plans are cached per (rows, cols, direction) behind a
/// mutex; execution itself is concurrency-safe.

#pragma once

#include <complex>

namespace hydropinn {

/// In-place 2D DFT of a row-major rows x cols complex buffer.
/// inverse = false: sum with e^{-2*pi*i...}; inverse = true: e^{+2*pi*i...}.
void fft2(std::complex<double>* data, int rows, int cols, bool inverse);

}  // namespace hydropinn
