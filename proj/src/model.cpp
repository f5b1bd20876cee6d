#include "omf/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace omf {

Potential Potential::polynomial(std::vector<double> coeffs) {
  auto eval = [](const std::vector<double>& c, double x) {
    double r = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) r = r * x + c[k];
    return r;
  };
  auto diff = [](const std::vector<double>& c) {
    std::vector<double> d;
    for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
    return d;
  };
  const auto c1 = diff(coeffs);
  const auto c2 = diff(c1);
  const auto c3 = diff(c2);
  Potential p;
  p.V = [eval, coeffs](double x) { return eval(coeffs, x); };
  p.dV = [eval, c1](double x) { return eval(c1, x); };
  p.d2V = [eval, c2](double x) { return eval(c2, x); };
  p.d3V = [eval, c3](double x) { return eval(c3, x); };
  return p;
}

Potential Potential::double_well() { return polynomial({0.0, 0.0, -0.5, 0.0, 0.25}); }

Force Force::zero() {
  Force F;
  F.name = "zero";
  F.f = F.fx = F.fy = F.fxy = F.fyy = [](double, double, double) { return 0.0; };
  F.lipschitz = 0.0;
  F.bound = 0.0;
  F.potential = Potential::polynomial({0.0});
  F.fy_constant = true;
  return F;
}

Force Force::pendulum(double k, double gamma) {
  Force F;
  F.name = "pendulum";
  F.f = [k, gamma](double, double x, double y) { return -gamma * y - k * std::sin(x); };
  F.fx = [k](double, double x, double) { return -k * std::cos(x); };
  F.fy = [gamma](double, double, double) { return -gamma; };
  F.fxy = F.fyy = [](double, double, double) { return 0.0; };
  F.lipschitz = std::max(std::abs(k), std::abs(gamma));
  F.bound = gamma == 0.0 ? std::abs(k) : std::numeric_limits<double>::infinity();
  Potential V;
  V.V = [k](double x) { return -k * std::cos(x); };
  V.dV = [k](double x) { return k * std::sin(x); };
  V.d2V = [k](double x) { return k * std::cos(x); };
  V.d3V = [k](double x) { return -k * std::sin(x); };
  F.potential = V;
  F.damping = gamma;
  F.fy_constant = true;
  return F;
}

Force Force::potential_force(const std::string& name, Potential V, double gamma, double amplitude, double omega) {
  Force F;
  F.name = name;
  auto dV = V.dV;
  auto d2V = V.d2V;
  F.f = [dV, gamma, amplitude, omega](double t, double x, double y) {
    return -gamma * y - dV(x) + amplitude * std::cos(omega * t);
  };
  F.fx = [d2V](double, double x, double) { return -d2V(x); };
  F.fy = [gamma](double, double, double) { return -gamma; };
  F.fxy = F.fyy = [](double, double, double) { return 0.0; };
  if (amplitude == 0.0) F.potential = std::move(V);
  F.damping = gamma;
  F.fy_constant = true;
  return F;
}

Force Force::harmonic(double omega2) {
  Force F = potential_force("harmonic", Potential::polynomial({0.0, 0.0, 0.5 * omega2}), 0.0);
  F.lipschitz = std::abs(omega2);
  return F;
}

Force Force::time_only(std::function<double(double)> g) {
  Force F;
  F.name = "time_only";
  F.f = [g](double t, double, double) { return g(t); };
  F.fx = F.fy = F.fxy = F.fyy = [](double, double, double) { return 0.0; };
  F.fy_constant = true;
  return F;
}

Sigma Sigma::constant(double c) {
  return Sigma{"constant", [c](double) { return c; }, std::abs(c), std::abs(c), 1.0};
}

Sigma Sigma::cosine(double sigma0, double amplitude, double omega) {
  const double a = std::abs(amplitude);
  return Sigma{"cos", [=](double t) { return sigma0 + amplitude * std::cos(omega * t); },
               std::max(0.0, sigma0 - a), sigma0 + a, 1.0};
}

Sigma Sigma::sine(double sigma0, double amplitude, double omega) {
  const double a = std::abs(amplitude);
  return Sigma{"sin", [=](double t) { return sigma0 + amplitude * std::sin(omega * t); },
               std::max(0.0, sigma0 - a), sigma0 + a, 1.0};
}

double pendulum_k() {
  const double r = std::sqrt(std::numbers::pi) * std::tgamma(0.25) / std::tgamma(0.75);
  return 0.5 * r * r;
}

}  // namespace omf
