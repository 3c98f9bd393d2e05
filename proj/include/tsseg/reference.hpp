#pragma once

#include <cstddef>

#include "tsseg/matrix.hpp"

/// Serial textbook versions of the kernels. Kept for tests and benchmarks.
namespace tsseg::reference {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix banded_matmul(const Matrix& a, std::size_t half_width, const Matrix& b);

/// Direct three-tap dilated convolution, looping over frames and taps.
/// `weights` is 3F x G, tap k occupying rows [kF, (k+1)F).
Matrix dilated_conv3(const Matrix& x, const Matrix& weights, const Matrix& bias,
                     std::size_t dilation);

}  // namespace tsseg::reference
