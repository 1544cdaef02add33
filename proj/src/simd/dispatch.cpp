#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "toricq/simd/kernels.hpp"

namespace toricq::simd {

namespace {

bool cpu_has_avx2() {
#if defined(TORICQ_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("TORICQ_SIMD")) {
    const std::string s(env);
    if (s == "scalar") return Backend::Scalar;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

}  // namespace

bool backend_available(Backend b) { return b == Backend::Scalar || cpu_has_avx2(); }

const KernelTable& kernels(Backend b) {
  if (b == Backend::Avx2) {
#if defined(TORICQ_WITH_AVX2)
    if (cpu_has_avx2()) return avx2_kernels();
#endif
    throw std::runtime_error("AVX2 kernels are not available on this machine");
  }
  return scalar_kernels();
}

Backend active_backend() { return current().load(); }

void set_active_backend(Backend b) {
  if (!backend_available(b)) throw std::runtime_error("requested SIMD backend is not available");
  current().store(b);
}

const KernelTable& active_kernels() { return kernels(active_backend()); }

std::string_view backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

PaddedLattice::PaddedLattice(const std::vector<std::vector<double>>& coordinates) {
  const int m = static_cast<int>(coordinates.size());
  if (m < 1 || m > kMaxDim) throw std::invalid_argument("lattice dimension must be between 1 and 3");
  const std::size_t n = coordinates[0].size();
  const std::size_t padded = (n + kLanes - 1) / kLanes * kLanes;
  view_.count = n;
  view_.padded = padded;
  view_.dim = m;
  for (int j = 0; j < m; ++j) {
    storage_[j].assign(padded, 0.0);
    std::copy(coordinates[j].begin(), coordinates[j].end(), storage_[j].begin());
    view_.coords[j] = storage_[j].data();
  }
}

PaddedLattice::PaddedLattice(const PaddedLattice& other) : view_(other.view_) {
  for (int j = 0; j < kMaxDim; ++j) storage_[j] = other.storage_[j];
  repoint();
}

PaddedLattice& PaddedLattice::operator=(const PaddedLattice& other) {
  if (this != &other) {
    view_ = other.view_;
    for (int j = 0; j < kMaxDim; ++j) storage_[j] = other.storage_[j];
    repoint();
  }
  return *this;
}

void PaddedLattice::repoint() {
  for (int j = 0; j < kMaxDim; ++j) view_.coords[j] = j < view_.dim ? storage_[j].data() : nullptr;
}

std::vector<double> PaddedLattice::pad_bias(const std::vector<double>& bias) const {
  std::vector<double> out(view_.padded, kPadBias);
  std::copy(bias.begin(), bias.end(), out.begin());
  return out;
}

}  // namespace toricq::simd
