#pragma once

// Inner-loop kernels behind the tensor ops.
//
// Every backend implements the same table. The scalar backend is the
// reference; vector backends are checked against it by the equivalence tests
// in tests/numkit/kernels_test.cpp. The active backend is picked once at
// startup from CPU features and can be pinned with TOT_SIMD=scalar|avx2|neon
// or set_backend().

#include <cstddef>
#include <optional>
#include <string_view>

namespace tot::numkit::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
  Backend backend;
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // sum_i (x_i - y_i)^2
  double (*sqdist)(const double* x, const double* y, std::size_t n);
  // All gemms accumulate into c (row-major, dense, no strides).
  // c[m x n] += a[m x k] * b[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // c[m x n] += a[m x k] * b[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // c[m x n] += a[k x m]^T * b[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
};

const KernelTable& scalar_table();
// nullptr when the backend was not compiled in for this target.
const KernelTable* avx2_table();
const KernelTable* neon_table();

bool cpu_supports(Backend b);
const KernelTable* table_for(Backend b);

const KernelTable& active();
Backend active_backend();
// Throws ConfigError when the backend is unavailable on this machine.
void set_backend(Backend b);

std::string_view name(Backend b);
std::optional<Backend> parse_backend(std::string_view text);

}  // namespace tot::numkit::kernels
