#include "shadow/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "shadow/errors.hpp"

namespace shadow {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'H', 'M', 'T'};

template <class T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw std::runtime_error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const TrajectoryStore& trajectory) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, trajectory.dimension());
  put<std::uint64_t>(os, trajectory.steps());
  put<double>(os, trajectory.dt);
  put<double>(os, trajectory.start_time);
  // Column-major storage already is time-major.
  const double* data = trajectory.states.data();
  const auto count = static_cast<std::size_t>(trajectory.states.size());
  for (std::size_t i = 0; i < count; ++i) put<double>(os, data[i]);
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

TrajectoryStore read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto n = get<std::uint64_t>(is);
  const auto steps = get<std::uint64_t>(is);
  TrajectoryStore store;
  store.dt = get<double>(is);
  store.start_time = get<double>(is);
  store.states.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(steps + 1));
  double* data = store.states.data();
  const auto count = static_cast<std::size_t>(store.states.size());
  for (std::size_t i = 0; i < count; ++i) data[i] = get<double>(is);
  return store;
}

}  // namespace shadow
