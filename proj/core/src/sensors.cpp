#include "edgeiq/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace edgeiq {

namespace {

void require(bool ok, const char* what, long long value) {
  if (!ok) {
    throw std::out_of_range(std::string(what) + ": " + std::to_string(value));
  }
}

constexpr double kTwo16 = 65536.0;

}  // namespace

double convert_temperature(std::uint32_t s_t) {
  require(s_t < 65536, "raw temperature word out of 16-bit range", s_t);
  return -45.7 + 175.7 * static_cast<double>(s_t) / kTwo16;
}

double convert_rh(std::uint32_t s_t, std::uint32_t s_rh) {
  require(s_t < 65536, "raw temperature word out of 16-bit range", s_t);
  require(s_rh < 65536, "raw humidity word out of 16-bit range", s_rh);
  return (103.7 - 3.2 * static_cast<double>(s_t) / kTwo16) *
         static_cast<double>(s_rh) / kTwo16;
}

double adc_to_voltage(std::uint32_t x) {
  require(x < 1024, "ADC word out of 10-bit range", x);
  return 1.6e-3 * static_cast<double>(x) + 0.4;
}

double voltage_to_current(double v_an, const CurrentSenseConfig& cfg) {
  if (!(v_an >= 0.0)) {
    throw std::out_of_range("analog voltage must be non-negative");
  }
  if (!(cfg.r1 > 0.0) || !(cfg.r_load > 0.0) || !(cfg.r_shunt > 0.0)) {
    throw std::out_of_range("current-sense resistors must be positive");
  }
  return v_an * cfg.r1 / (cfg.r_shunt * cfg.r_load);
}

int illuminance_scale(std::uint32_t d) {
  require(d < 1024, "illuminance word out of 10-bit range", d);
  if (d <= 203) return 1;
  if (d <= 408) return 2;
  if (d <= 613) return 3;
  if (d <= 818) return 4;
  return 5;
}

std::uint32_t invert_temperature(double celsius) {
  const double raw = (celsius + 45.7) / 175.7 * kTwo16;
  const double clamped = std::clamp(raw, 0.0, 65535.0);
  return static_cast<std::uint32_t>(std::lround(clamped));
}

std::uint32_t invert_current(double amperes, const CurrentSenseConfig& cfg) {
  const double v = amperes * cfg.r_shunt * cfg.r_load / cfg.r1;
  const double x = (v - 0.4) / 1.6e-3;
  const double clamped = std::clamp(x, 0.0, 1023.0);
  return static_cast<std::uint32_t>(std::lround(clamped));
}

}  // namespace edgeiq
