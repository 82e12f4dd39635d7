#pragma once

#include <cstdint>
#include <stdexcept>

namespace edgeiq {

/// Resistor network of the current-sense front end. Defaults match the
/// INA196 configuration: 5 kΩ internal, 100 kΩ load, 0.05 Ω shunt.
struct CurrentSenseConfig {
  double r1 = 5000.0;
  double r_load = 100000.0;
  double r_shunt = 0.05;
};

struct RawAirSample {
  std::uint16_t s_t = 0;
  std::uint16_t s_rh = 0;
};

/// Temp = -45.7 + 175.7 * s_t / 2^16, in degrees Celsius.
double convert_temperature(std::uint32_t s_t);

/// RH = (103.7 - 3.2 * s_t / 2^16) * s_rh / 2^16, in percent.
double convert_rh(std::uint32_t s_t, std::uint32_t s_rh);

/// V = 1.6e-3 * x + 0.4 for a 10-bit ADC word, in volts.
double adc_to_voltage(std::uint32_t x);

/// I = v * r1 / (r_shunt * r_load), in amperes.
double voltage_to_current(double v_an, const CurrentSenseConfig& cfg = {});

/// Maps a 10-bit illuminance word onto the five daylight scales:
/// 1 very dark (night), 2 dark (sunrise), 3 normal (morning),
/// 4 high (afternoon), 5 very high (midday).
int illuminance_scale(std::uint32_t d);

/// Raw 16-bit word whose conversion is nearest to the given temperature.
/// Clamped to the representable range.
std::uint32_t invert_temperature(double celsius);

/// 10-bit ADC word whose Eq.3/Eq.4 chain is nearest to the given current.
std::uint32_t invert_current(double amperes, const CurrentSenseConfig& cfg = {});

}  // namespace edgeiq
