#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace edgeiq {

enum class SegmentShape {
  hold,         // constant level for the whole window
  spike_train,  // repeated triangular pulses, one per period
  square,       // 50% duty cycle, high during the first half period
  sawtooth,     // linear rise over one period, instant fall
  step,         // constant level shift (alias of hold, kept for readability)
};

SegmentShape segment_shape_from_name(const std::string& name);
std::string segment_shape_name(SegmentShape shape);

/// One stimulus window. The waveform rides on baseline + offset; amplitude
/// is the excursion from there (signed). For spike trains the pulse occupies
/// the first quarter of each period.
struct ProfileSegment {
  double start = 0.0;   // seconds from run start
  double end = 0.0;     // exclusive
  SegmentShape shape = SegmentShape::hold;
  double amplitude = 0.0;  // degrees Celsius
  double period = 0.0;     // seconds; unused for hold/step
  double offset = 0.0;     // extra level shift inside the window
};

/// Constant illuminance level over a window, in raw 10-bit ADC counts.
struct LightSegment {
  double start = 0.0;
  double end = 0.0;
  double level = 0.0;      // target digital level 0..1023
  double ripple = 0.0;     // peak excursion; >0 makes a spike train
  double period = 0.0;     // spike period when ripple > 0
};

struct ProfileSpec {
  std::uint32_t node_id = 0;
  double baseline_c = 27.5;
  std::vector<ProfileSegment> segments;
  double noise_std_c = 0.05;

  // Ancillary channels; these do not feed the temperature experiments.
  double light_baseline = 700.0;
  std::vector<LightSegment> light_segments;
  double current_baseline_a = 0.6;
};

/// One acquisition instant from one node, all channels.
struct SensorReading {
  std::uint32_t node_id = 0;
  double t = 0.0;  // seconds since run start
  double temperature_c = 0.0;
  double rh_percent = 0.0;
  double co2_ppm = 0.0;
  double voc_ppb = 0.0;
  std::uint16_t illuminance_digital = 0;
  std::uint16_t current_digital = 0;
};

/// Throws std::invalid_argument when segments overlap, run backwards or
/// carry non-finite amplitudes.
void validate_profile(const ProfileSpec& spec);

/// Noise-free temperature of the spec at time t.
double profile_temperature_at(const ProfileSpec& spec, double t);

/// Noise-free illuminance level of the spec at time t, clamped to 0..1023.
double profile_light_at(const ProfileSpec& spec, double t);

/// Samples the spec every t_ac seconds, floor(duration/t_ac) readings
/// starting at t = 0. Deterministic for a fixed (spec, t_ac, duration, seed).
std::vector<SensorReading> generate_profile(const ProfileSpec& spec,
                                            double t_ac, double duration,
                                            std::uint64_t seed);

/// The three node profiles (X1, X2, X3) of experiment 1 or 2.
std::array<ProfileSpec, 3> builtin_experiment(int exp_id);

/// Loads profiles from a key-value config file with one [node N] section per
/// node. See docs/wire_format.md for the format.
std::vector<ProfileSpec> load_profiles(std::istream& in);
std::vector<ProfileSpec> load_profiles_file(const std::filesystem::path& path);

/// Writes readings as "t,node,channel,value" records.
void write_series_csv(std::ostream& out,
                      const std::vector<SensorReading>& readings);

}  // namespace edgeiq
