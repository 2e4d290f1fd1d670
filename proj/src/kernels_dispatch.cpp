#include <cstdlib>
#include <string>

#include "mq/errors.hpp"
#include "mq/kernels.hpp"

namespace mq::kernels {
namespace {

const Ops* g_active = nullptr;
std::string g_name = "scalar";

void apply(Backend b) {
  switch (b) {
    case Backend::kScalar:
      g_active = &scalar_ops();
      g_name = "scalar";
      return;
    case Backend::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (cpu_has_avx2()) {
        g_active = &avx2_ops();
        g_name = "avx2";
        return;
      }
#endif
      throw ConfigError("avx2 kernels requested but this CPU does not support AVX2");
    case Backend::kAuto:
      break;
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (cpu_has_avx2()) {
    g_active = &avx2_ops();
    g_name = "avx2";
    return;
  }
#endif
  g_active = &scalar_ops();
  g_name = "scalar";
}

void init_once() {
  if (g_active) return;
  const char* env = std::getenv("MOTIONQ_KERNELS");
  if (env) {
    std::string v(env);
    if (v == "scalar") {
      apply(Backend::kScalar);
      return;
    }
    if (v == "avx2") {
      apply(Backend::kAvx2);
      return;
    }
  }
  apply(Backend::kAuto);
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

const Ops& active() {
  init_once();
  return *g_active;
}

void select(Backend b) { apply(b); }

std::string backend_name() {
  init_once();
  return g_name;
}

}  // namespace mq::kernels
