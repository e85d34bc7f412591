#include "output.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "phantom/error.hpp"
#include "phantom/version.hpp"

namespace phantom::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

OutputSink::OutputSink(std::string dir, bool enabled) : dir_(std::move(dir)), enabled_(enabled) {}

std::string OutputSink::path(const std::string& name) {
  std::filesystem::create_directories(dir_);
  written_.push_back(name);
  return (std::filesystem::path(dir_) / name).string();
}

void OutputSink::write_csv(const std::string& name, const std::vector<std::string>& header,
                           const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<std::string>> text;
  text.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<std::string> t;
    t.reserve(r.size());
    for (double v : r) t.push_back(format_double(v));
    text.push_back(std::move(t));
  }
  write_csv_text(name, header, text);
}

void OutputSink::write_csv_text(const std::string& name, const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
  if (!enabled_) return;
  std::ofstream out(path(name));
  if (!out) throw DomainError("cannot write " + name + " in " + dir_);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  }
}

void OutputSink::write_json(const std::string& name, const nlohmann::ordered_json& j) {
  if (!enabled_) return;
  std::ofstream out(path(name));
  if (!out) throw DomainError("cannot write " + name + " in " + dir_);
  out << j.dump(2) << '\n';
}

void OutputSink::write_manifest(const std::string& command, const std::vector<std::string>& args,
                                const RunConfig& cfg) {
  if (!enabled_) return;
  nlohmann::ordered_json m;
  m["command"] = command;
  m["arguments"] = args;
  m["config_hash"] = config_hash(cfg);
  m["config"] = cfg.to_json();
  m["versions"] = {{"phantom", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION}};
  m["outputs"] = written_;
  write_json("manifest.json", m);
}

}  // namespace phantom::cli
