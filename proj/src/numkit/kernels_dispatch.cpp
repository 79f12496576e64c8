#include <atomic>
#include <cstdlib>
#include <string>

#include "tot/errors.hpp"
#include "tot/numkit/kernels.hpp"

namespace tot::numkit::kernels {

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
      return neon_table() != nullptr;
  }
  return false;
}

const KernelTable* table_for(Backend b) {
  if (!cpu_supports(b)) return nullptr;
  switch (b) {
    case Backend::Scalar:
      return &scalar_table();
    case Backend::Avx2:
      return avx2_table();
    case Backend::Neon:
      return neon_table();
  }
  return nullptr;
}

std::string_view name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

std::optional<Backend> parse_backend(std::string_view text) {
  if (text == "scalar") return Backend::Scalar;
  if (text == "avx2") return Backend::Avx2;
  if (text == "neon") return Backend::Neon;
  return std::nullopt;
}

namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("TOT_SIMD")) {
    if (auto b = parse_backend(env)) {
      if (const KernelTable* t = table_for(*b)) return t;
    }
    // Unknown or unsupported request: fall back to scalar rather than guess.
    return &scalar_table();
  }
  for (Backend b : {Backend::Avx2, Backend::Neon}) {
    if (const KernelTable* t = table_for(b)) return t;
  }
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{pick_default()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

Backend active_backend() { return active().backend; }

void set_backend(Backend b) {
  const KernelTable* t = table_for(b);
  if (t == nullptr) throw ConfigError("SIMD backend '" + std::string(name(b)) + "' is not available on this machine");
  slot().store(t, std::memory_order_release);
}

}  // namespace tot::numkit::kernels
