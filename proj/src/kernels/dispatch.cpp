// SPDX-License-Identifier: Apache-2.0

#include <atomic>

#include "razorq/core.hpp"
#include "razorq/kernels.hpp"

namespace razorq::kernels {

namespace {

struct Table {
  Isa isa;
  std::int32_t (*dot_i8)(const std::int8_t*, const std::int8_t*, std::size_t);
  void (*quantize_codes)(const float*, std::size_t, float, int, std::int8_t*);
};

constexpr Table kScalar{Isa::kScalar, &scalar::dot_i8, &scalar::quantize_codes};
#if defined(__x86_64__) || defined(_M_X64)
constexpr Table kAvx2{Isa::kAvx2, &avx2::dot_i8, &avx2::quantize_codes};
#endif
#if defined(__aarch64__)
constexpr Table kNeon{Isa::kNeon, &neon::dot_i8, &neon::quantize_codes};
#endif

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const Table* table_for(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return &kScalar;
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::kAvx2: return &kAvx2;
#endif
#if defined(__aarch64__)
    case Isa::kNeon: return &kNeon;
#endif
    default: return nullptr;
  }
}

const Table* best_table() {
  const auto isas = available_isas();
  return table_for(isas.back());
}

std::atomic<const Table*>& active() {
  static std::atomic<const Table*> table{best_table()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon})
    if (cpu_has(isa) && table_for(isa) != nullptr) out.push_back(isa);
  return out;
}

Isa active_isa() { return active().load(std::memory_order_relaxed)->isa; }

void force_isa(Isa isa) {
  const Table* t = cpu_has(isa) ? table_for(isa) : nullptr;
  require(t != nullptr, "kernel ISA '" + std::string(isa_name(isa)) + "' is not available on this machine");
  active().store(t, std::memory_order_relaxed);
}

std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n) {
  return active().load(std::memory_order_relaxed)->dot_i8(a, b, n);
}

void quantize_codes(const float* x, std::size_t n, float scale, int limit, std::int8_t* out) {
  active().load(std::memory_order_relaxed)->quantize_codes(x, n, scale, limit, out);
}

}  // namespace razorq::kernels
