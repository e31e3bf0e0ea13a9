#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fdms/cnn.hpp"
#include "fdms/datasets.hpp"
#include "fdms/dsp.hpp"
#include "fdms/fusion.hpp"
#include "fdms/signal_core.hpp"

namespace fdms {

// Glue between raw sensor data and the classifier: per-modality feature
// extraction, the shared windowing protocol, dataset assembly from scene
// manifests, and fused scoring across several trained models.

// Audio is bandpassed to the printer-mechanics band before the spectrogram.
inline constexpr double kAudioBandLowHz = 100.0;
inline constexpr double kAudioBandHighHz = 1000.0;

// Decision cadence: 2 s analysis windows advancing by 1 s.
inline constexpr double kWindowLenS = 2.0;
inline constexpr double kWindowHopS = 1.0;

// Stereo window -> bandpass each channel -> mono mean -> peak normalize ->
// mel spectrogram image (1 x 64 x 64).
InputTensor audio_to_tensor(const AudioWindow& window);

// Three-axis window -> per-axis FFT magnitude image (3 x 64 x 64).
InputTensor vibration_to_input(const VibrationWindow& window);

// Single frame -> resized intensity image (1 x 64 x 64).
InputTensor thermal_to_input(const ThermalFrame& frame);

// Input geometry the classifier expects for a modality.
ModelSpec modality_model_spec(Modality modality, int n_classes);

// Start times of every full analysis window that fits in duration_s.
std::vector<double> window_start_times(double duration_s);

// Extracts the [t0, t0 + 2 s) slice of a recording. Throws ValidationError
// if the slice is not fully covered.
AudioWindow slice_audio(const AudioWindow& full, double t0_s);
VibrationWindow slice_vibration(const VibrationWindow& full, double t0_s);

// Frame whose timestamp is closest to t_s. Throws ValidationError when empty.
const ThermalFrame& nearest_thermal(const std::vector<ThermalFrame>& frames, double t_s);

struct SceneData {
    AudioWindow audio;
    VibrationWindow vibration;
    std::vector<ThermalFrame> thermal;
    FaultClass label = FaultClass::Normal;
    double duration_s = 0.0;
};

// Loads one manifest entry's files. Paths resolve relative to root.
SceneData load_scene(const ManifestEntry& entry, const std::filesystem::path& root);

struct LabeledDataset {
    Dataset data;                     // one sample per analysis window
    std::vector<FaultClass> classes;  // label index -> fault code, ascending
    std::vector<size_t> scene_of;     // sample index -> manifest entry index
};

LabeledDataset build_dataset(const Manifest& manifest, const std::filesystem::path& root,
                             Modality modality);

struct TrainSplit {
    Dataset train;
    Dataset val;
};

// Stratified scene-level split: every class keeps at least one scene on each
// side, and no scene contributes samples to both sides. Throws
// ValidationError when a class has fewer than two scenes with samples.
TrainSplit split_scenes(const LabeledDataset& dataset, double train_fraction, uint64_t seed);

struct PipelineTrainResult {
    Model model;
    std::vector<EpochStats> history;
    size_t best_epoch = 0;
};

PipelineTrainResult train_modality(const Manifest& manifest, const std::filesystem::path& root,
                                   Modality modality, const TrainConfig& config,
                                   double train_fraction);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

// Per-window fused scoring across several modality models. All models must
// share one class set (ValidationError otherwise); per-window probabilities
// are fused with fresh timestamps and scored against the scene label.
struct FusedEval {
    EvalReport fused;
    std::vector<std::pair<Modality, EvalReport>> per_modality;
};

FusedEval evaluate_fused(const Manifest& manifest, const std::filesystem::path& root,
                         const std::vector<std::pair<Modality, const Model*>>& models,
                         const SensitivityMatrix& matrix, const FusionConfig& config);

} // namespace fdms
