#pragma once

// Data-parallel inner loops of the quadrature: softmax statistics over the
// lattice points of kP at one node u. A scalar reference implementation and an
// AVX2/FMA variant share one function table; the variant is chosen at runtime.

#include <cstddef>
#include <string_view>
#include <vector>

namespace toricq::simd {

inline constexpr int kMaxDim = 3;
inline constexpr std::size_t kLanes = 4;

enum class Backend { Scalar, Avx2 };

/// Lattice coordinates as structure-of-arrays, padded to a multiple of kLanes.
/// Padding entries must carry a bias of kPadBias so their weight underflows to 0.
struct LatticeView {
  std::size_t count = 0;
  std::size_t padded = 0;
  int dim = 0;
  const double* coords[kMaxDim] = {nullptr, nullptr, nullptr};
};

inline constexpr double kPadBias = -1e300;
/// Weights below exp(kCutoff) times the largest one are stored as exact zeros.
/// They are far below double precision relative to the sum and would otherwise
/// produce subnormal arithmetic in the moment and mass accumulations.
inline constexpr double kCutoff = -50.0;

/// Statistics of p_alpha(u) proportional to exp(2<alpha,u> + bias_alpha).
struct SoftmaxMoments {
  double log_sum = 0.0;  // log sum_alpha exp(2<alpha,u> + bias_alpha)
  double sum = 0.0;      // sum of the stored (max-shifted) weights
  double mean[kMaxDim] = {};
  double cov[kMaxDim][kMaxDim] = {};
};

struct KernelTable {
  /// Writes the max-shifted weights exp(l_alpha - max l) to `weights` (length padded).
  SoftmaxMoments (*softmax_moments)(const LatticeView& lattice, const double* bias, const double* u,
                                    double* weights);
  /// y += a x
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  /// sum x_i y_i
  double (*dot)(std::size_t n, const double* x, const double* y);
  /// y_i = exp(x_i)
  void (*exp_array)(std::size_t n, const double* x, double* y);
};

const KernelTable& scalar_kernels();
#if defined(TORICQ_WITH_AVX2)
const KernelTable& avx2_kernels();
#endif

bool backend_available(Backend b);
const KernelTable& kernels(Backend b);
/// Backend in use: AVX2 when the CPU supports it, unless TORICQ_SIMD=scalar.
Backend active_backend();
void set_active_backend(Backend b);
const KernelTable& active_kernels();
std::string_view backend_name(Backend b);

/// Owns padded lattice coordinates and hands out a LatticeView.
class PaddedLattice {
 public:
  PaddedLattice() = default;
  explicit PaddedLattice(const std::vector<std::vector<double>>& coordinates);
  PaddedLattice(const PaddedLattice& other);
  PaddedLattice& operator=(const PaddedLattice& other);

  [[nodiscard]] const LatticeView& view() const { return view_; }
  [[nodiscard]] std::size_t count() const { return view_.count; }
  [[nodiscard]] std::size_t padded() const { return view_.padded; }
  /// Copies `bias` (length count) into a padded buffer.
  [[nodiscard]] std::vector<double> pad_bias(const std::vector<double>& bias) const;

 private:
  void repoint();

  std::vector<double> storage_[kMaxDim];
  LatticeView view_;
};

}  // namespace toricq::simd
