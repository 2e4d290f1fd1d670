#pragma once

#include <cstddef>
#include <string>

namespace mq::kernels {

// Data-parallel inner loops behind the tensor ops. Two implementations:
// portable scalar reference kernels and AVX2 variants. Both walk the data
// in the same order with the same mul/add pairing, so the AVX2 results are
// bit-identical to the scalar ones; the equivalence suite asserts exact
// equality. Reductions (softmax sums, layer-norm moments) stay scalar in
// the callers — their accumulation order is part of the numeric contract.
struct Ops {
  // c[m x n] = a[m x k] * b[k x n], row-major. accumulate adds into c.
  void (*matmul_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  void (*sub)(const double* x, const double* y, double* out, std::size_t n);
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  void (*scale)(const double* x, double c, double* out, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*relu)(const double* x, double* out, std::size_t n);
};

enum class Backend { kAuto, kScalar, kAvx2 };

// Active kernel table. Selected once at startup: AVX2 when the CPU has it,
// scalar otherwise; MOTIONQ_KERNELS=scalar|avx2 overrides.
const Ops& active();

// Force a backend (kAuto re-runs detection). Throws ConfigError if the
// requested backend is unavailable on this CPU. Test hook, not thread-safe
// against concurrent forwards.
void select(Backend b);

// Name of the active backend: "scalar" or "avx2".
std::string backend_name();

bool cpu_has_avx2();

const Ops& scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
#endif

}  // namespace mq::kernels
