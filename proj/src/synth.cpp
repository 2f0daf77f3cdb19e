#include "scepipe/synth.hpp"

#include "scepipe/error.hpp"
#include "scepipe/hash.hpp"

#include <cmath>
#include <numbers>

namespace scepipe {

std::uint64_t DeterministicRng::nextU64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
}

double DeterministicRng::nextUnit() {
    return static_cast<double>(nextU64() >> 11) * 0x1.0p-53;
}

double DeterministicRng::nextGaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 shifted away from 0 so log stays finite.
    const double u1 = nextUnit();
    const double u2 = nextUnit();
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

double spikeAnalyticArea(double amplitude_mps2, double width_ms) {
    return std::abs(amplitude_mps2) * 2.0 * (width_ms / 1000.0) / std::numbers::pi;
}

SynthResult synthTrace(const SynthProfile& profile, double duration_s) {
    if (!(duration_s > 0.0))
        throw Error(Errc::InvalidProfile, "duration must be positive");
    if (!(profile.event_time_s >= 0.0 && profile.event_time_s <= duration_s))
        throw Error(Errc::InvalidProfile, "event_time_s outside the clip");
    if (!(profile.spike_width_ms > 0.0))
        throw Error(Errc::InvalidProfile, "spike_width_ms must be positive");
    if (profile.noise_sigma < 0.0)
        throw Error(Errc::InvalidProfile, "noise_sigma must be non-negative");
    if (profile.base_speed_mps < 0.0)
        throw Error(Errc::InvalidProfile, "base_speed_mps must be non-negative");
    if (profile.kind == SceClass::Unknown)
        throw Error(Errc::InvalidProfile, "unknown is not a generatable kind");

    const Eigen::Index n = static_cast<Eigen::Index>(std::llround(duration_s * kImuRateHz));
    if (n < 1) throw Error(Errc::InvalidProfile, "clip too short for one sample");

    SynthResult result;
    result.imu.accel.resize(n, 3);
    result.imu.gyro.resize(n, 3);
    result.imu.start_time_s = 0.0;

    DeterministicRng rng(profile.seed);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) result.imu.accel(i, c) = profile.noise_sigma * rng.nextGaussian();
    for (Eigen::Index i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) result.imu.gyro(i, c) = profile.noise_sigma * rng.nextGaussian();

    const Eigen::Index event_index =
        std::min<Eigen::Index>(n - 1, std::llround(profile.event_time_s * kImuRateHz));
    const double t_event = static_cast<double>(event_index) / kImuRateHz;
    const double width_s = profile.spike_width_ms / 1000.0;

    auto addHalfCosine = [n](Eigen::Ref<SeriesX3> channels, int column, double center_s,
                             double width, double amplitude) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double offset = static_cast<double>(i) / kImuRateHz - center_s;
            if (std::abs(offset) > width / 2.0) continue;
            channels(i, column) += amplitude * std::cos(std::numbers::pi * offset / width);
        }
    };

    if (profile.kind == SceClass::Collision) {
        addHalfCosine(result.imu.accel, 0, t_event, width_s, profile.spike_amplitude_mps2);
    } else if (profile.kind == SceClass::NearCollision) {
        addHalfCosine(result.imu.accel, 0, t_event, width_s, profile.spike_amplitude_mps2);
        // Evasive swerve: yaw-rate pulse spanning four spike widths.
        addHalfCosine(result.imu.gyro, 2, t_event, 4.0 * width_s, 30.0);
    }

    const Eigen::Index n_gps = std::max<Eigen::Index>(2, static_cast<Eigen::Index>(duration_s));
    result.gps.speed.resize(n_gps);
    result.gps.start_time_s = 0.0;
    const bool has_event = profile.kind != SceClass::Normal;
    const double floor_factor = profile.kind == SceClass::Collision ? 0.3 : 0.7;
    for (Eigen::Index i = 0; i < n_gps; ++i) {
        const double t = static_cast<double>(i);
        double speed = profile.base_speed_mps;
        if (has_event) {
            if (t >= t_event + 1.0) {
                speed = profile.base_speed_mps * floor_factor;
            } else if (t > t_event - 1.0) {
                const double frac = (t - (t_event - 1.0)) / 2.0;
                speed = profile.base_speed_mps * (1.0 - frac * (1.0 - floor_factor));
            }
        }
        result.gps.speed(i) = speed;
    }

    result.truth.kind = profile.kind;
    result.truth.event_time_s = t_event;
    result.truth.spike_amplitude_mps2 = has_event ? profile.spike_amplitude_mps2 : 0.0;
    result.truth.spike_width_ms = profile.spike_width_ms;
    result.truth.base_speed_mps = profile.base_speed_mps;
    result.truth.noise_sigma = profile.noise_sigma;
    result.truth.seed = profile.seed;
    result.truth.duration_s = duration_s;
    return result;
}

} // namespace scepipe
