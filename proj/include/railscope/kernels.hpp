#pragma once

// =============================================================================
// Data-parallel inner loops. Each kernel has a serial reference and an OpenMP
// version; both must produce bit-identical results (tests compare them and the
// benchmark target times them).
// =============================================================================

#include "railscope/dut_synth.hpp"
#include "railscope/rail_model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace railscope::kernels {

/// Fills one frame row (adc.channels codes) for time t. Unassigned channels read 0.
void sample_frame(const DutModel& model, const AdcConfig& adc, std::span<const RailConfig> rails,
                  double t, std::span<std::uint16_t> row) noexcept;

/// Frames first_frame .. first_frame + out.size()/channels - 1, row-major.
void sample_frames_serial(const DutModel& model, const AdcConfig& adc,
                          std::span<const RailConfig> rails, std::uint64_t first_frame,
                          std::span<std::uint16_t> out);
void sample_frames_parallel(const DutModel& model, const AdcConfig& adc,
                            std::span<const RailConfig> rails, std::uint64_t first_frame,
                            std::span<std::uint16_t> out);

/// Median of the `window`-wide (odd) window around each sample. Near the ends
/// the window is shifted to stay inside the series, so every output is the
/// median of exactly `window` inputs. Requires 1 <= window <= x.size().
std::vector<std::int32_t> rolling_median_serial(std::span<const std::int32_t> x, std::size_t window);
std::vector<std::int32_t> rolling_median_parallel(std::span<const std::int32_t> x, std::size_t window);

/// Σ_k (v[k]·i[k] + v[k+1]·i[k+1]) for k in [0, n-1): twice the trapezoid
/// area of the code-product series. Exact in integers.
std::uint64_t trapezoid_product_sum_serial(std::span<const std::uint16_t> v,
                                           std::span<const std::uint16_t> i);
std::uint64_t trapezoid_product_sum_parallel(std::span<const std::uint16_t> v,
                                             std::span<const std::uint16_t> i);

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int parallel_threads() noexcept;

}  // namespace railscope::kernels
