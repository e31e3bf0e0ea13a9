#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdms/errors.hpp"

namespace fdms {

// ============================================================================
// Enumerations
// ============================================================================

// Fault taxonomy. Integer codes are a stable on-disk/API contract: they are
// serialized into model files and manifests, so the order must never change.
enum class FaultClass : int {
    Normal = 0,
    MaterialRunout = 1,
    NozzleClog = 2,
    OverExtrusion = 3,
    BedAdhesionFailure = 4,
    LayerShift = 5,
    BeltSlip = 6,
    HotEndTempDrift = 7,
    ExtruderGearSlip = 8,
};
inline constexpr int kNumFaultClasses = 9;

enum class Modality : int {
    Acoustic = 0,
    Vibration = 1,
    Thermal = 2,
};
inline constexpr int kNumModalities = 3;

// Snake_case names used in manifests, CLI arguments and monitor events.
const std::string& fault_name(FaultClass f);
std::optional<FaultClass> fault_from_name(const std::string& name);
const std::string& modality_name(Modality m);
std::optional<Modality> modality_from_name(const std::string& name);

// All nine fault classes in code order.
std::span<const FaultClass> all_fault_classes();

// ============================================================================
// Raw sensor windows
// ============================================================================

// Stereo audio slice. Samples are normalized amplitudes in [-1, 1]
// (16-bit PCM maps by /32768 at ingestion).
struct AudioWindow {
    std::vector<double> left;
    std::vector<double> right;
    int sample_rate_hz = 16000;
    int64_t start_ts_ms = 0;
};

// Triaxial accelerometer slice, acceleration in g units.
struct VibrationWindow {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> z;
    int sample_rate_hz = 200;
    int64_t start_ts_ms = 0;
};

// Normalized grayscale thermal image, row-major, values in [0, 1].
struct ThermalFrame {
    std::vector<double> pixels;
    int width = 160;
    int height = 120;
    int64_t ts_ms = 0;
};

// Invariant checks used at ingestion boundaries. Throw ValidationError with
// the offending field named.
void validate(const AudioWindow& w);
void validate(const VibrationWindow& w);
void validate(const ThermalFrame& f);

// ============================================================================
// Windowing and statistics
// ============================================================================

// Slices `stream` into fixed-length windows. Window i is the half-open range
// [i*hop, i*hop + window_len); yields floor((len - window_len)/hop) + 1
// windows when len >= window_len, else none. The spans alias `stream`.
std::vector<std::span<const double>> make_windows(std::span<const double> stream,
                                                  size_t window_len, size_t hop);

// Root mean square. Throws ValidationError on empty input.
double rms(std::span<const double> signal);

} // namespace fdms
