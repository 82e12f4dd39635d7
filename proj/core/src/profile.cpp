#include "edgeiq/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "edgeiq/rng.hpp"
#include "edgeiq/sensors.hpp"

namespace edgeiq {

namespace {

double shape_value(const ProfileSegment& seg, double baseline, double t) {
  const double level = baseline + seg.offset;
  const double u = t - seg.start;
  switch (seg.shape) {
    case SegmentShape::hold:
    case SegmentShape::step:
      return level + seg.amplitude;
    case SegmentShape::spike_train: {
      // One triangular pulse per period, occupying the first quarter.
      const double phase = std::fmod(u, seg.period);
      const double width = seg.period / 4.0;
      if (phase >= width) return level;
      const double half = width / 2.0;
      const double frac = phase < half ? phase / half : 2.0 - phase / half;
      return level + seg.amplitude * frac;
    }
    case SegmentShape::square: {
      const double phase = std::fmod(u, seg.period);
      return phase < seg.period / 2.0 ? level + seg.amplitude : level;
    }
    case SegmentShape::sawtooth: {
      const double phase = std::fmod(u, seg.period);
      return level + seg.amplitude * (phase / seg.period);
    }
  }
  return level;
}

/// Bounded random walk used for the channels the experiments do not probe.
class BoundedWalk {
 public:
  BoundedWalk(double start, double lo, double hi, double step,
              std::uint64_t seed)
      : value_(start), lo_(lo), hi_(hi), rng_(seed), step_(-step, step) {}

  double next() {
    value_ = std::clamp(value_ + step_(rng_), lo_, hi_);
    return value_;
  }

 private:
  double value_;
  double lo_, hi_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> step_;
};

}  // namespace

SegmentShape segment_shape_from_name(const std::string& name) {
  if (name == "hold") return SegmentShape::hold;
  if (name == "spike-train") return SegmentShape::spike_train;
  if (name == "square") return SegmentShape::square;
  if (name == "sawtooth") return SegmentShape::sawtooth;
  if (name == "step") return SegmentShape::step;
  throw std::invalid_argument("unknown segment shape: " + name);
}

std::string segment_shape_name(SegmentShape shape) {
  switch (shape) {
    case SegmentShape::hold: return "hold";
    case SegmentShape::spike_train: return "spike-train";
    case SegmentShape::square: return "square";
    case SegmentShape::sawtooth: return "sawtooth";
    case SegmentShape::step: return "step";
  }
  return "?";
}

void validate_profile(const ProfileSpec& spec) {
  double previous_end = 0.0;
  bool first = true;
  for (const auto& seg : spec.segments) {
    if (seg.start < 0.0 || seg.end <= seg.start) {
      throw std::invalid_argument("segment window must satisfy 0 <= start < end");
    }
    if (!first && seg.start < previous_end) {
      throw std::invalid_argument("segments must be non-overlapping and increasing");
    }
    if (!std::isfinite(seg.amplitude) || !std::isfinite(seg.offset)) {
      throw std::invalid_argument("segment amplitude must be finite");
    }
    const bool periodic = seg.shape == SegmentShape::spike_train ||
                          seg.shape == SegmentShape::square ||
                          seg.shape == SegmentShape::sawtooth;
    if (periodic && !(seg.period > 0.0)) {
      throw std::invalid_argument("periodic segment needs a positive period");
    }
    previous_end = seg.end;
    first = false;
  }
  if (!(spec.noise_std_c >= 0.0) || !std::isfinite(spec.noise_std_c)) {
    throw std::invalid_argument("noise_std must be finite and non-negative");
  }
}

double profile_temperature_at(const ProfileSpec& spec, double t) {
  for (const auto& seg : spec.segments) {
    if (t >= seg.start && t < seg.end) {
      return shape_value(seg, spec.baseline_c, t);
    }
  }
  return spec.baseline_c;
}

double profile_light_at(const ProfileSpec& spec, double t) {
  double level = spec.light_baseline;
  for (const auto& seg : spec.light_segments) {
    if (t >= seg.start && t < seg.end) {
      level = seg.level;
      if (seg.ripple != 0.0 && seg.period > 0.0) {
        const double phase = std::fmod(t - seg.start, seg.period);
        const double width = seg.period / 4.0;
        if (phase < width) {
          const double half = width / 2.0;
          const double frac = phase < half ? phase / half : 2.0 - phase / half;
          level += seg.ripple * frac;
        }
      }
      break;
    }
  }
  return std::clamp(level, 0.0, 1023.0);
}

std::vector<SensorReading> generate_profile(const ProfileSpec& spec,
                                            double t_ac, double duration,
                                            std::uint64_t seed) {
  if (!(t_ac > 0.0)) throw std::invalid_argument("t_ac must be positive");
  if (duration < t_ac) {
    throw std::invalid_argument("duration must cover at least one period");
  }
  validate_profile(spec);

  const auto count =
      static_cast<std::size_t>(std::floor(duration / t_ac + 1e-9));

  const std::uint64_t node_mix = mix_seed(seed, spec.node_id);
  std::mt19937_64 temp_rng(mix_seed(node_mix, 0));
  std::normal_distribution<double> temp_noise(0.0, 1.0);
  std::mt19937_64 light_rng(mix_seed(node_mix, 1));
  std::normal_distribution<double> light_noise(0.0, 2.0);
  BoundedWalk rh_walk(45.0, 30.0, 60.0, 0.25, mix_seed(node_mix, 2));
  BoundedWalk co2_walk(520.0, 400.0, 1500.0, 4.0, mix_seed(node_mix, 3));
  BoundedWalk voc_walk(120.0, 0.0, 800.0, 3.0, mix_seed(node_mix, 4));
  BoundedWalk current_walk(spec.current_baseline_a, 0.4, 2.048, 0.004,
                           mix_seed(node_mix, 5));

  std::vector<SensorReading> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) * t_ac;
    SensorReading r;
    r.node_id = spec.node_id;
    r.t = t;
    r.temperature_c = profile_temperature_at(spec, t) +
                      spec.noise_std_c * temp_noise(temp_rng);
    r.rh_percent = rh_walk.next();
    r.co2_ppm = co2_walk.next();
    r.voc_ppb = voc_walk.next();
    const double light = std::clamp(
        profile_light_at(spec, t) + light_noise(light_rng), 0.0, 1023.0);
    r.illuminance_digital = static_cast<std::uint16_t>(std::lround(light));
    r.current_digital =
        static_cast<std::uint16_t>(invert_current(current_walk.next()));
    out.push_back(r);
  }
  return out;
}

std::array<ProfileSpec, 3> builtin_experiment(int exp_id) {
  if (exp_id != 1 && exp_id != 2) {
    throw std::invalid_argument("experiment id must be 1 or 2, got " +
                                std::to_string(exp_id));
  }

  std::array<ProfileSpec, 3> specs;
  if (exp_id == 1) {
    // X1: quiet baseline, hot spike trains at 780-1200 s and 2100-2800 s,
    // an ice-cube dip at 1900-2100 s, quiet tail.
    ProfileSpec& x1 = specs[0];
    x1.node_id = 0;
    x1.baseline_c = 27.5;
    x1.segments = {
        {780.0, 1200.0, SegmentShape::spike_train, 27.0, 220.0, 0.0},
        {1900.0, 2100.0, SegmentShape::spike_train, -9.5, 800.0, 0.0},
        {2100.0, 2800.0, SegmentShape::spike_train, 27.0, 220.0, 0.0},
    };
    x1.light_baseline = 720.0;
    x1.light_segments = {
        {0.0, 50.0, 80.0, 0.0, 0.0},
        {50.0, 60.0, 1023.0, 0.0, 0.0},   // outlier spike to very high
        {60.0, 120.0, 80.0, 0.0, 0.0},
        {120.0, 130.0, 5.0, 0.0, 0.0},    // outlier dip to very dark
        {130.0, 150.0, 80.0, 0.0, 0.0},
        {150.0, 300.0, 330.0, 0.0, 0.0},
        {300.0, 1400.0, 480.0, 0.0, 0.0},
        {1600.0, 1800.0, 720.0, -220.0, 50.0},  // passing clouds
    };

    // X2: HVAC cold drops from the same baseline, toggling every 120 s at
    // the end of the run.
    ProfileSpec& x2 = specs[1];
    x2.node_id = 1;
    x2.baseline_c = 27.5;
    x2.segments = {
        {0.0, 600.0, SegmentShape::step, -6.5, 0.0, 0.0},
        {780.0, 1200.0, SegmentShape::step, -6.5, 0.0, 0.0},
        {1900.0, 3000.0, SegmentShape::step, -6.5, 0.0, 0.0},
        {3000.0, 3400.0, SegmentShape::square, -6.5, 240.0, 0.0},
    };
    x2.light_baseline = 680.0;
    x2.light_segments = {
        {0.0, 150.0, 60.0, 0.0, 0.0},
        {150.0, 300.0, 310.0, 0.0, 0.0},
        {300.0, 1400.0, 460.0, 0.0, 0.0},
    };

    // X3: stable outdoor summer temperature, single hold segment.
    ProfileSpec& x3 = specs[2];
    x3.node_id = 2;
    x3.baseline_c = 31.0;
    x3.segments = {
        {0.0, 3400.0, SegmentShape::hold, 0.0, 0.0, 0.0},
    };
    x3.light_baseline = 750.0;
    x3.light_segments = {
        {0.0, 150.0, 900.0, 0.0, 0.0},  // very high to high step at start
    };
  } else {
    // X1: stable start, sustained heat with a ~5 degree ripple, then
    // extreme hot and cold spike trains.
    ProfileSpec& x1 = specs[0];
    x1.node_id = 0;
    x1.baseline_c = 28.0;
    x1.segments = {
        {840.0, 1040.0, SegmentShape::sawtooth, 5.0, 100.0, 24.0},
        {2400.0, 2900.0, SegmentShape::spike_train, 28.5, 250.0, 0.0},
        {2900.0, 3400.0, SegmentShape::spike_train, -10.0, 250.0, 0.0},
    };
    x1.light_baseline = 700.0;
    x1.light_segments = {
        {0.0, 200.0, 90.0, 0.0, 0.0},
        {200.0, 500.0, 480.0, 0.0, 0.0},
    };

    // X2: hot square waveforms from a cold baseline, ~500 s steps.
    ProfileSpec& x2 = specs[1];
    x2.node_id = 1;
    x2.baseline_c = 21.0;
    x2.segments = {
        {0.0, 3000.0, SegmentShape::square, 11.0, 1000.0, 0.0},
    };
    x2.light_baseline = 660.0;
    x2.light_segments = {
        {0.0, 200.0, 70.0, 0.0, 0.0},
        {200.0, 500.0, 450.0, 0.0, 0.0},
    };

    // X3: stable outdoor temperature with two moderate sawtooth bursts.
    ProfileSpec& x3 = specs[2];
    x3.node_id = 2;
    x3.baseline_c = 31.5;
    x3.segments = {
        {500.0, 1000.0, SegmentShape::sawtooth, 7.0, 250.0, -2.0},
        {2500.0, 3000.0, SegmentShape::sawtooth, 7.0, 250.0, -2.0},
    };
    x3.light_baseline = 740.0;
    x3.light_segments = {
        {0.0, 200.0, 880.0, 0.0, 0.0},
    };
  }

  for (auto& spec : specs) validate_profile(spec);
  return specs;
}

std::vector<ProfileSpec> load_profiles(std::istream& in) {
  std::vector<ProfileSpec> specs;
  ProfileSpec* current = nullptr;
  std::string line;
  int line_no = 0;

  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("profile config line " +
                                std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;

    if (token.front() == '[') {
      std::string rest;
      std::getline(ls, rest);
      std::string section = token + rest;
      unsigned node = 0;
      if (std::sscanf(section.c_str(), "[node %u]", &node) != 1) {
        fail("expected a [node N] section header, got " + section);
      }
      specs.emplace_back();
      current = &specs.back();
      current->node_id = node;
      continue;
    }

    if (current == nullptr) fail("key before any [node N] section");

    std::string eq;
    ls >> eq;
    if (eq != "=") fail("expected 'key = value...'");

    if (token == "baseline") {
      if (!(ls >> current->baseline_c)) fail("baseline needs a number");
    } else if (token == "noise_std") {
      if (!(ls >> current->noise_std_c)) fail("noise_std needs a number");
    } else if (token == "light_baseline") {
      if (!(ls >> current->light_baseline)) fail("light_baseline needs a number");
    } else if (token == "current_baseline") {
      if (!(ls >> current->current_baseline_a)) {
        fail("current_baseline needs a number");
      }
    } else if (token == "segment") {
      ProfileSegment seg;
      std::string shape;
      if (!(ls >> seg.start >> seg.end >> shape >> seg.amplitude)) {
        fail("segment needs: start end shape amplitude [period] [offset]");
      }
      seg.shape = segment_shape_from_name(shape);
      ls >> seg.period;
      ls >> seg.offset;
      current->segments.push_back(seg);
    } else if (token == "light_segment") {
      LightSegment seg;
      if (!(ls >> seg.start >> seg.end >> seg.level)) {
        fail("light_segment needs: start end level [ripple period]");
      }
      ls >> seg.ripple >> seg.period;
      current->light_segments.push_back(seg);
    } else {
      fail("unknown key: " + token);
    }
  }

  for (const auto& spec : specs) validate_profile(spec);
  return specs;
}

std::vector<ProfileSpec> load_profiles_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open profile config: " + path.string());
  }
  return load_profiles(in);
}

void write_series_csv(std::ostream& out,
                      const std::vector<SensorReading>& readings) {
  char buf[64];
  for (const auto& r : readings) {
    auto row = [&](const char* channel, double value) {
      std::snprintf(buf, sizeof(buf), "%.6f,%u,%s,%.17g\n", r.t, r.node_id,
                    channel, value);
      out << buf;
    };
    row("temperature", r.temperature_c);
    row("rh", r.rh_percent);
    row("co2", r.co2_ppm);
    row("voc", r.voc_ppb);
    row("illuminance", static_cast<double>(r.illuminance_digital));
    row("current", static_cast<double>(r.current_digital));
  }
}

}  // namespace edgeiq
