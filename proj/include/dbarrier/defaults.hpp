#pragma once

#include <cstdint>

/// Every tunable default of the library and the CLI lives here.
namespace dbarrier::defaults {

// Series truncation: minimum number of sine modes.
inline constexpr int kMax = 64;
// Hard upper limit for the adaptive truncation rule.
inline constexpr int kCap = 4096;
// Gauss-Legendre nodes for re-projection and Gaussian integrals.
inline constexpr int kQuadNodes = 128;
// Relative size of the first dropped mode at which the series is cut.
inline constexpr double kTruncationTolerance = 1e-14;
// Transformed gaps shorter than this are treated as no gap at all.
inline constexpr double kMinTransformedGap = 1e-12;
// Half-width (in standard deviations) of the Gaussian kernel support.
inline constexpr double kGaussianCutoff = 9.0;

inline constexpr std::uint64_t kPaths = 200000;
inline constexpr std::uint32_t kStepsPerWindow = 2048;
inline constexpr std::uint64_t kSeed = 42;
// Monitoring resolutions combined by step-halving extrapolation in the CLI
// cross-checks (2048, 1024 and 512 steps per window).
inline constexpr int kMcLevels = 3;
// Cross-check tolerance in Monte Carlo standard errors.
inline constexpr double kZTolerance = 3.0;

// Moment recovery.
inline constexpr double kConditionLimit = 1e12;
inline constexpr double kClipTolerance = 1e-7;
inline constexpr double kInfeasibilityTolerance = 1e-6;
inline constexpr double kHankelTolerance = 1e-8;

// Relative tolerance for window adjacency / overlap tests.
inline constexpr double kTimeTolerance = 1e-12;

}  // namespace dbarrier::defaults
