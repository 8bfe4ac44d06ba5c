#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace duet::accel {

/// Piece-wise linear tangent over (-pi/2 + delta, pi/2 - delta).
///
/// The breakpoint table is what the synthesized design would hold in BRAM.
/// 4096 uniform segments keep the worst relative error at 0.13%, under the
/// advertised 0.3% bound; far fewer segments cannot, because the curvature
/// explodes near the poles (64 segments are off by over 100% there). The
/// segment count is even, so x = 0 is an exact breakpoint and tan(0) == 0.
class TangentPwl {
 public:
  static constexpr double kDelta = 0.01;
  static constexpr unsigned kSegments = 4096;

  TangentPwl() {
    double lo = domain_min(), hi = domain_max();
    knots_.reserve(kSegments + 1);
    for (unsigned i = 0; i <= kSegments; ++i)
      knots_.push_back(std::tan(lo + (hi - lo) * i / kSegments));
  }

  static double domain_min() { return -M_PI / 2 + kDelta; }
  static double domain_max() { return M_PI / 2 - kDelta; }
  static bool in_domain(double x) {
    return x >= domain_min() && x <= domain_max();
  }

  double eval(double x) const {
    double lo = domain_min(), hi = domain_max();
    double u = (x - lo) / (hi - lo) * kSegments;
    unsigned i = unsigned(u);
    if (i >= kSegments) i = kSegments - 1;
    double frac = u - i;
    return knots_[i] + (knots_[i + 1] - knots_[i]) * frac;
  }

 private:
  std::vector<double> knots_;
};

/// Out-of-domain arguments answer with a NaN carrying this payload — the
/// "error flag in the CPU-bound FIFO response".
constexpr std::uint64_t kTangentErrorBits = 0x7FF8'0000'0000'0001ull;

}  // namespace duet::accel
