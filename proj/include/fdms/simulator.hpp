#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdms/datasets.hpp"
#include "fdms/signal_core.hpp"

namespace fdms {

// Synthetic print-scene generator. Each fault class gets a distinct physical
// signature spread across the three modalities so that no single sensor can
// separate every class on its own.

struct SimConfig {
    uint64_t seed = 0;
    FaultClass fault = FaultClass::Normal;
    double duration_s = 3.0;
    int audio_rate_hz = 16000;
    int vib_rate_hz = 200;
    int thermal_fps = 8;
    // When set, pink ambient noise is mixed into the audio at this SNR (dB,
    // measured against the clean mono signal). Unset means noise-free audio.
    std::optional<double> ambient_noise_snr_db;
    // Gain applied to the left channel only, in dB. Positive values make the
    // left microphone hotter, as if the fault source sat on that side.
    double stereo_bias_db = 0.0;
};

struct SimScene {
    AudioWindow audio;
    VibrationWindow vibration;
    std::vector<ThermalFrame> thermal;
    FaultClass label = FaultClass::Normal;
};

// Synthesizes one scene. Deterministic in config.seed; sub-streams per
// modality keep each sensor's content independent of the others' draw counts.
SimScene synth_scene(const SimConfig& config);

// Synthesizes per_class_count scenes for every class (in the given order),
// writes them as scene_NNNN/{audio.wav, vibration.csv, thermal/} under
// out_dir together with manifest.json, and returns the manifest. Scene seeds
// are derived from master_seed by global scene index.
Manifest generate_corpus(const std::vector<FaultClass>& classes, int per_class_count,
                         uint64_t master_seed, const std::string& out_dir,
                         const SimConfig& base_config);

} // namespace fdms
