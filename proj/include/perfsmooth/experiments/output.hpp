#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace perfsmooth::experiments {

inline constexpr int kSchemaVersion = 1;

/// FNV-1a over the compact dump of `j` (keys are sorted by nlohmann::json).
std::string config_hash(const nlohmann::json& j);

/// CSV file whose first line is `# perfsmooth/<table> schema=v<N> config_hash=<hex>`
/// followed by a column header row.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::string& table,
              const std::string& hash, const std::vector<std::string>& columns);

    template <typename... Ts>
    void row(const Ts&... values) {
        bool first = true;
        ((out_ << (first ? "" : ",") << format(values), first = false), ...);
        out_ << '\n';
    }

  private:
    static std::string format(double v);
    static std::string format(const std::string& v) { return v; }
    static std::string format(const char* v) { return v; }
    template <typename T>
    static std::string format(const T& v) {
        return std::to_string(v);
    }

    std::ofstream out_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace perfsmooth::experiments
