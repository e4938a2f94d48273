#pragma once

#include <cstdint>
#include <filesystem>

#include "shadow/integrators.hpp"

namespace shadow {

/**
 * Binary trajectory checkpoint.
 *
 * Layout (little-endian): magic "SHMT", u32 version, u64 n, u64 N, f64 dt,
 * f64 start_time, then (N+1)*n f64 values in time-major order.
 */
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const TrajectoryStore& trajectory);
[[nodiscard]] TrajectoryStore read_checkpoint(const std::filesystem::path& path);

}  // namespace shadow
