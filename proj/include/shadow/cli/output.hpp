#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace shadow::cli {

/// Shortest decimal string that parses back to the same double.
[[nodiscard]] std::string format_double(double value);

/// The `# key=value,...` line that opens every CSV file.
struct Provenance {
  std::uint64_t config_hash = 0;
  std::string version;
  std::string command;

  [[nodiscard]] std::string hash_hex() const;
  [[nodiscard]] std::string comment() const;
  [[nodiscard]] nlohmann::ordered_json to_json() const;
};

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const Provenance& provenance, const std::vector<std::string>& header);

  CsvWriter& cell(double value);
  CsvWriter& cell(std::size_t value);
  CsvWriter& cell(const std::string& value);
  void end_row();

 private:
  void separator();

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
  std::size_t filled_ = 0;
};

/// Writes `doc` with a trailing newline; floats use the same shortest round-trip form.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc);

}  // namespace shadow::cli
