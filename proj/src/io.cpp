#include "omf/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace omf {

namespace {

std::ofstream open_out(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_gridfn_csv(const std::filesystem::path& file, const GridFn& f, const std::string& column) {
  auto out = open_out(file);
  out << "t," << column << '\n';
  for (std::size_t i = 0; i < f.size(); ++i) out << format_double(f.grid().node(i)) << ',' << format_double(f[i]) << '\n';
}

void write_fbm_csv(const std::filesystem::path& file, const FbmPath& path) {
  auto out = open_out(file);
  out << "# H=" << format_double(path.hurst.H()) << '\n'
      << "# seed=" << path.seed << '\n'
      << "# stream=" << path.stream << '\n'
      << "# method=" << to_string(path.method) << '\n'
      << "t,W,BH\n";
  for (std::size_t i = 0; i < path.grid.size(); ++i) {
    out << format_double(path.grid.node(i)) << ',' << format_double(path.wiener[i]) << ','
        << format_double(path.fbm[i]) << '\n';
  }
}

void write_path_csv(const std::filesystem::path& file, const PathPair& path) {
  auto out = open_out(file);
  out << "t,psi,phi\n";
  for (std::size_t i = 0; i < path.grid().size(); ++i) {
    out << format_double(path.grid().node(i)) << ',' << format_double(path.psi()[i]) << ','
        << format_double(path.phi()[i]) << '\n';
  }
}

PathPair read_path_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,psi,phi", 0) != 0) throw std::runtime_error(file.string() + ": expected header t,psi,phi");
  std::vector<double> psi, phi;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string t, x, y;
    if (!std::getline(row, t, ',') || !std::getline(row, x, ',') || !std::getline(row, y, ',')) {
      throw std::runtime_error(file.string() + ": malformed row");
    }
    psi.push_back(std::stod(x));
    phi.push_back(std::stod(y));
  }
  if (psi.size() < 2) throw std::runtime_error(file.string() + ": too few rows");
  const TimeGrid grid(psi.size());
  const BoundaryData b{psi.front(), phi.front(), psi.back(), phi.back()};
  return PathPair(GridFn(grid, std::move(psi)), GridFn(grid, std::move(phi)), b);
}

void write_mean_csv(const std::filesystem::path& file, const EnsembleResult& result) {
  auto out = open_out(file);
  out << "t,mean_x,mean_y\n";
  const TimeGrid& grid = result.mean_x.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << format_double(grid.node(i)) << ',' << format_double(result.mean_x[i]) << ','
        << format_double(result.mean_y[i]) << '\n';
  }
}

FlatRecord& FlatRecord::put(const std::string& key, Value value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return *this;
    }
  }
  entries_.emplace_back(key, std::move(value));
  return *this;
}

FlatRecord& FlatRecord::set_om(const std::string& prefix, const OMValue& J) {
  set(prefix + "J", J.J);
  set(prefix + "mismatch_term", J.mismatch_term);
  set(prefix + "divergence_term", J.divergence_term);
  set(prefix + "regime", to_string(J.regime));
  set(prefix + "H", J.H);
  set(prefix + "n", J.n);
  return set(prefix + "form", J.form == OMForm::unified ? "unified" : "regime_specific");
}

std::string FlatRecord::to_json() const {
  std::string s = "{\n";
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto& [key, value] = entries_[k];
    s += "  " + nlohmann::json(key).dump() + ": ";
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) {
            s += std::isfinite(v) ? format_double(v) : "null";
          } else if constexpr (std::is_same_v<T, bool>) {
            s += v ? "true" : "false";
          } else if constexpr (std::is_same_v<T, std::string>) {
            s += nlohmann::json(v).dump();
          } else {
            s += std::to_string(v);
          }
        },
        value);
    s += k + 1 < entries_.size() ? ",\n" : "\n";
  }
  return s + "}\n";
}

void FlatRecord::write(const std::filesystem::path& file) const {
  auto out = open_out(file);
  out << to_json();
}

}  // namespace omf
