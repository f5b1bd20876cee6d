#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "omf/fbm.hpp"
#include "omf/grid.hpp"
#include "omf/montecarlo.hpp"
#include "omf/omfunctional.hpp"

namespace omf {

/// Shortest round-trip text for a double (17 significant digits).
std::string format_double(double v);

/// t,<column> rows.
void write_gridfn_csv(const std::filesystem::path& file, const GridFn& f, const std::string& column = "value");

/// t,W,BH rows preceded by '#' metadata lines (H, seed, stream, method).
void write_fbm_csv(const std::filesystem::path& file, const FbmPath& path);

/// t,psi,phi rows.
void write_path_csv(const std::filesystem::path& file, const PathPair& path);
PathPair read_path_csv(const std::filesystem::path& file);

/// t,mean_x,mean_y rows.
void write_mean_csv(const std::filesystem::path& file, const EnsembleResult& result);

/// Ordered flat key-value record written as a single JSON object.
class FlatRecord {
 public:
  using Value = std::variant<double, std::int64_t, std::uint64_t, bool, std::string>;

  template <class T>
  FlatRecord& set(const std::string& key, const T& value) {
    if constexpr (std::is_same_v<T, bool>) {
      return put(key, value);
    } else if constexpr (std::is_floating_point_v<T>) {
      return put(key, static_cast<double>(value));
    } else if constexpr (std::is_integral_v<T> && std::is_signed_v<T>) {
      return put(key, static_cast<std::int64_t>(value));
    } else if constexpr (std::is_integral_v<T>) {
      return put(key, static_cast<std::uint64_t>(value));
    } else {
      return put(key, std::string(value));
    }
  }
  FlatRecord& set_om(const std::string& prefix, const OMValue& J);

  const std::vector<std::pair<std::string, Value>>& entries() const noexcept { return entries_; }
  std::string to_json() const;
  void write(const std::filesystem::path& file) const;

 private:
  FlatRecord& put(const std::string& key, Value value);

  std::vector<std::pair<std::string, Value>> entries_;
};

}  // namespace omf
