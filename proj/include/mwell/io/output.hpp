#pragma once

// Output files are assembled in memory and written only after the command has
// finished, so a failing run leaves nothing behind.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mwell/errors.hpp"
#include "mwell/io/ini.hpp"
#include "mwell/model.hpp"
#include "mwell/observables.hpp"

namespace mwell::io {

using Json = nlohmann::ordered_json;

/// %.17g: enough digits to round-trip any double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json complex_json(cplx z) { return Json::array({z.real(), z.imag()}); }

/// Rows of (t, x, value, light_cone_tag). The tag is "inside" once the
/// light-cone time (L0 - x) / c has been reached; points at x >= L0 are
/// always inside.
class CsvSeries {
 public:
  explicit CsvSeries(const WellModel& model) : L0_(model.L0()), c_(model.light_speed()) {
    text_ = "# units: au\nt,x,value,light_cone_tag\n";
  }

  void add(double t, double x, std::optional<double> value) {
    text_ += format_double(t);
    text_ += ',';
    text_ += format_double(x);
    text_ += ',';
    if (value) text_ += format_double(*value);
    text_ += ',';
    text_ += (x >= L0_ || t >= (L0_ - x) / c_) ? "inside" : "outside";
    text_ += '\n';
  }

  const std::string& text() const noexcept { return text_; }

 private:
  double L0_;
  double c_;
  std::string text_;
};

/// Named output files in write order.
class OutputBundle {
 public:
  void add(const std::string& name, std::string content) {
    for (const auto& f : files_) {
      if (f.first == name) throw PreconditionError("output bundle: duplicate file " + name);
    }
    files_.emplace_back(name, std::move(content));
  }
  void add_json(const std::string& name, const Json& j) { add(name, j.dump(2) + "\n"); }

  const std::vector<std::pair<std::string, std::string>>& files() const noexcept { return files_; }

  /// Writes each file through a temporary name; on any failure the files
  /// already written are removed again.
  void write(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::vector<fs::path> done;
    try {
      for (const auto& [name, content] : files_) {
        const fs::path target = dir / name;
        const fs::path tmp = dir / (name + ".partial");
        {
          std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
          out << content;
          out.flush();
          if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        }
        fs::rename(tmp, target);
        done.push_back(target);
      }
    } catch (...) {
      for (const auto& p : done) fs::remove(p, ec);
      for (const auto& [name, content] : files_) fs::remove(dir / (name + ".partial"), ec);
      throw;
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace mwell::io
