#pragma once

// Deterministic CSV/JSON emission into one output directory.

#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace phantom::cli {

/// Formats a double with 17 significant digits ("nan", "inf" as such).
std::string format_double(double v);

class OutputSink {
 public:
  OutputSink(std::string dir, bool enabled);

  const std::string& dir() const noexcept { return dir_; }
  const std::vector<std::string>& written() const noexcept { return written_; }

  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);
  /// Rows with mixed text and numbers, already formatted.
  void write_csv_text(const std::string& name, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows);
  void write_json(const std::string& name, const nlohmann::ordered_json& j);
  /// manifest.json: command, arguments, config and its hash, versions and
  /// the files written so far.
  void write_manifest(const std::string& command, const std::vector<std::string>& args,
                      const RunConfig& cfg);

 private:
  std::string path(const std::string& name);
  std::string dir_;
  bool enabled_;
  std::vector<std::string> written_;
};

}  // namespace phantom::cli
