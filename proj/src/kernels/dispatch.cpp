#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"

namespace stargraph::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(STARGRAPH_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* best_available() noexcept {
  if (const KernelTable* t = table_for(Isa::Avx2)) return t;
  if (const KernelTable* t = table_for(Isa::Neon)) return t;
  return &detail::kScalarTable;
}

const KernelTable* initial_table() noexcept {
  const char* env = std::getenv("STARGRAPH_ISA");
  if (env != nullptr) {
    const std::string want(env);
    const KernelTable* pinned = nullptr;
    if (want == "scalar") pinned = &detail::kScalarTable;
    if (want == "avx2") pinned = table_for(Isa::Avx2);
    if (want == "neon") pinned = table_for(Isa::Neon);
    if (pinned != nullptr) return pinned;
  }
  return best_available();
}

std::atomic<const KernelTable*>& slot() noexcept {
  static std::atomic<const KernelTable*> current{initial_table()};
  return current;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable& scalar_table() noexcept { return detail::kScalarTable; }

const KernelTable* table_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return &detail::kScalarTable;
    case Isa::Avx2:
#if defined(STARGRAPH_HAVE_AVX2)
      if (cpu_has_avx2()) return &detail::kAvx2Table;
#endif
      return nullptr;
    case Isa::Neon:
#if defined(STARGRAPH_HAVE_NEON)
      return &detail::kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable& active() noexcept { return *slot().load(std::memory_order_acquire); }

bool select(Isa isa) noexcept {
  const KernelTable* t = table_for(isa);
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace stargraph::kernels
