#include "fdms/signal_core.hpp"

#include <array>
#include <cmath>

namespace fdms {

namespace {

const std::array<std::string, kNumFaultClasses> kFaultNames = {
    "normal",
    "material_runout",
    "nozzle_clog",
    "over_extrusion",
    "bed_adhesion_failure",
    "layer_shift",
    "belt_slip",
    "hot_end_temp_drift",
    "extruder_gear_slip",
};

const std::array<std::string, kNumModalities> kModalityNames = {
    "acoustic",
    "vibration",
    "thermal",
};

const std::array<FaultClass, kNumFaultClasses> kAllFaults = {
    FaultClass::Normal,          FaultClass::MaterialRunout,
    FaultClass::NozzleClog,      FaultClass::OverExtrusion,
    FaultClass::BedAdhesionFailure, FaultClass::LayerShift,
    FaultClass::BeltSlip,        FaultClass::HotEndTempDrift,
    FaultClass::ExtruderGearSlip,
};

bool all_finite(const std::vector<double>& v) {
    for (double s : v) {
        if (!std::isfinite(s)) return false;
    }
    return true;
}

} // namespace

const std::string& fault_name(FaultClass f) {
    return kFaultNames.at(static_cast<size_t>(f));
}

std::optional<FaultClass> fault_from_name(const std::string& name) {
    for (size_t i = 0; i < kFaultNames.size(); ++i) {
        if (kFaultNames[i] == name) return static_cast<FaultClass>(i);
    }
    return std::nullopt;
}

const std::string& modality_name(Modality m) {
    return kModalityNames.at(static_cast<size_t>(m));
}

std::optional<Modality> modality_from_name(const std::string& name) {
    for (size_t i = 0; i < kModalityNames.size(); ++i) {
        if (kModalityNames[i] == name) return static_cast<Modality>(i);
    }
    return std::nullopt;
}

std::span<const FaultClass> all_fault_classes() {
    return kAllFaults;
}

void validate(const AudioWindow& w) {
    if (w.left.empty()) throw ValidationError("AudioWindow: empty channels");
    if (w.left.size() != w.right.size()) {
        throw ValidationError("AudioWindow: channel length mismatch (left " +
                              std::to_string(w.left.size()) + ", right " +
                              std::to_string(w.right.size()) + ")");
    }
    if (w.sample_rate_hz < 2000) {
        throw ValidationError("AudioWindow: sample_rate_hz must be >= 2000, got " +
                              std::to_string(w.sample_rate_hz));
    }
    if (w.start_ts_ms < 0) throw ValidationError("AudioWindow: negative start_ts_ms");
    if (!all_finite(w.left) || !all_finite(w.right)) {
        throw ValidationError("AudioWindow: non-finite sample");
    }
}

void validate(const VibrationWindow& w) {
    if (w.x.empty()) throw ValidationError("VibrationWindow: empty axes");
    if (w.x.size() != w.y.size() || w.x.size() != w.z.size()) {
        throw ValidationError("VibrationWindow: axis length mismatch");
    }
    if (w.sample_rate_hz <= 0) {
        throw ValidationError("VibrationWindow: sample_rate_hz must be positive");
    }
    if (!all_finite(w.x) || !all_finite(w.y) || !all_finite(w.z)) {
        throw ValidationError("VibrationWindow: non-finite sample");
    }
}

void validate(const ThermalFrame& f) {
    if (f.width <= 0 || f.height <= 0) {
        throw ValidationError("ThermalFrame: non-positive dimensions");
    }
    if (f.pixels.size() != static_cast<size_t>(f.width) * static_cast<size_t>(f.height)) {
        throw ValidationError("ThermalFrame: pixel count " + std::to_string(f.pixels.size()) +
                              " != width*height " + std::to_string(f.width * f.height));
    }
    for (double p : f.pixels) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError("ThermalFrame: pixel outside [0,1]");
        }
    }
}

std::vector<std::span<const double>> make_windows(std::span<const double> stream,
                                                  size_t window_len, size_t hop) {
    if (window_len == 0) throw ValidationError("make_windows: window_len must be > 0");
    if (hop == 0) throw ValidationError("make_windows: hop must be > 0");
    if (hop > window_len) {
        throw ValidationError("make_windows: hop " + std::to_string(hop) +
                              " exceeds window_len " + std::to_string(window_len));
    }
    std::vector<std::span<const double>> out;
    if (stream.size() < window_len) return out;
    const size_t count = (stream.size() - window_len) / hop + 1;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        out.push_back(stream.subspan(i * hop, window_len));
    }
    return out;
}

double rms(std::span<const double> signal) {
    if (signal.empty()) throw ValidationError("rms: empty signal");
    double acc = 0.0;
    for (double s : signal) acc += s * s;
    return std::sqrt(acc / static_cast<double>(signal.size()));
}

} // namespace fdms
