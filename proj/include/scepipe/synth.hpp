#pragma once

#include <cstdint>
#include <string>

#include "scepipe/telemetry.hpp"

namespace scepipe {

/// Ground-truth profile for a synthetic clip. Collision injects a
/// half-cosine spike on a_x; NearCollision a sub-threshold spike plus a yaw
/// pulse on w_z; Normal is noise only. event_time_s snaps to the 100 Hz
/// sample grid so the injected peak sits exactly on a sample.
struct SynthProfile {
    SceClass kind = SceClass::Normal;
    double event_time_s = 5.2;
    double spike_amplitude_mps2 = -11.3;
    double spike_width_ms = 120.0;
    double base_speed_mps = 13.0;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;
};

struct SynthGroundTruth {
    SceClass kind = SceClass::Normal;
    double event_time_s = 0.0; // snapped
    double spike_amplitude_mps2 = 0.0;
    double spike_width_ms = 0.0;
    double base_speed_mps = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    double duration_s = 0.0;
};

struct SynthResult {
    ImuTrace imu;
    GpsTrace gps;
    SynthGroundTruth truth;
};

/// Deterministic per (profile, seed): the generator carries its own
/// splitmix64 + Box-Muller stream, so traces are bit-identical across
/// platforms. Throws Errc::InvalidProfile.
SynthResult synthTrace(const SynthProfile& profile, double duration_s = 16.0);

/// Analytic area of the injected half-cosine lobe: |A| * 2w / pi.
double spikeAnalyticArea(double amplitude_mps2, double width_ms);

/// Portable gaussian stream for test fixtures.
class DeterministicRng {
  public:
    explicit DeterministicRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t nextU64();
    double nextUnit();     // [0, 1)
    double nextGaussian(); // standard normal, Box-Muller

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace scepipe
