#include "fdms/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fdms/errors.hpp"
#include "fdms/rng.hpp"

namespace fs = std::filesystem;

namespace fdms {

// ============================================================================
// Per-modality feature extraction
// ============================================================================

InputTensor audio_to_tensor(const AudioWindow& window) {
    validate(window);
    const FilterCoeffs bp =
        design_bandpass(kAudioBandLowHz, kAudioBandHighHz, window.sample_rate_hz);
    const std::vector<double> left = filter_apply(bp, window.left);
    const std::vector<double> right = filter_apply(bp, window.right);
    std::vector<double> mono(left.size());
    for (size_t i = 0; i < mono.size(); ++i) mono[i] = 0.5 * (left[i] + right[i]);
    const std::vector<double> norm = normalize_peak(mono);
    const Spectrogram spec = stft(norm, window.sample_rate_hz);
    const Spectrogram mel = mel_project(spec);
    return spectrogram_to_tensor(mel);
}

InputTensor vibration_to_input(const VibrationWindow& window) {
    return vibration_to_tensor(window);
}

InputTensor thermal_to_input(const ThermalFrame& frame) {
    return thermal_to_tensor(frame);
}

ModelSpec modality_model_spec(Modality modality, int n_classes) {
    ModelSpec spec;
    spec.in_channels = modality == Modality::Vibration ? 3 : 1;
    spec.in_height = kTensorEdge;
    spec.in_width = kTensorEdge;
    spec.n_classes = n_classes;
    spec.validate_or_throw();
    return spec;
}

// ============================================================================
// Windowing protocol
// ============================================================================

std::vector<double> window_start_times(double duration_s) {
    std::vector<double> starts;
    for (double t0 = 0.0; t0 + kWindowLenS <= duration_s + 1e-9; t0 += kWindowHopS) {
        starts.push_back(t0);
    }
    return starts;
}

namespace {

size_t slice_range(size_t total, int rate, double t0_s, const char* what, size_t& count_out) {
    const auto start = static_cast<long long>(std::llround(t0_s * rate));
    const auto count = static_cast<long long>(std::llround(kWindowLenS * rate));
    if (start < 0 || start + count > static_cast<long long>(total)) {
        throw ValidationError(std::string(what) + " slice at " + std::to_string(t0_s) +
                              " s runs past the recording end");
    }
    count_out = static_cast<size_t>(count);
    return static_cast<size_t>(start);
}

} // namespace

AudioWindow slice_audio(const AudioWindow& full, double t0_s) {
    size_t count = 0;
    const size_t start = slice_range(full.left.size(), full.sample_rate_hz, t0_s, "audio", count);
    AudioWindow w;
    w.sample_rate_hz = full.sample_rate_hz;
    w.start_ts_ms = full.start_ts_ms + std::llround(1000.0 * t0_s);
    w.left.assign(full.left.begin() + start, full.left.begin() + start + count);
    w.right.assign(full.right.begin() + start, full.right.begin() + start + count);
    return w;
}

VibrationWindow slice_vibration(const VibrationWindow& full, double t0_s) {
    size_t count = 0;
    const size_t start =
        slice_range(full.x.size(), full.sample_rate_hz, t0_s, "vibration", count);
    VibrationWindow w;
    w.sample_rate_hz = full.sample_rate_hz;
    w.start_ts_ms = full.start_ts_ms + std::llround(1000.0 * t0_s);
    w.x.assign(full.x.begin() + start, full.x.begin() + start + count);
    w.y.assign(full.y.begin() + start, full.y.begin() + start + count);
    w.z.assign(full.z.begin() + start, full.z.begin() + start + count);
    return w;
}

const ThermalFrame& nearest_thermal(const std::vector<ThermalFrame>& frames, double t_s) {
    if (frames.empty()) throw ValidationError("nearest_thermal: no frames");
    const auto target = std::llround(1000.0 * t_s);
    size_t best = 0;
    int64_t best_d = std::numeric_limits<int64_t>::max();
    for (size_t i = 0; i < frames.size(); ++i) {
        const int64_t d = std::llabs(frames[i].ts_ms - target);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return frames[best];
}

// ============================================================================
// Scene and dataset assembly
// ============================================================================

SceneData load_scene(const ManifestEntry& entry, const fs::path& root) {
    SceneData scene;
    scene.label = entry.label;
    scene.duration_s = entry.duration_s;

    const WavData wav = read_wav((root / entry.audio_path).string());
    if (wav.channels.size() == 1) {
        scene.audio.left = wav.channels[0];
        scene.audio.right = wav.channels[0];
    } else if (wav.channels.size() == 2) {
        scene.audio.left = wav.channels[0];
        scene.audio.right = wav.channels[1];
    } else {
        throw ValidationError(entry.scene_id + ": expected 1 or 2 audio channels, got " +
                              std::to_string(wav.channels.size()));
    }
    scene.audio.sample_rate_hz = wav.sample_rate_hz;
    scene.audio.start_ts_ms = 0;

    const AccelSeries series = read_accel_csv((root / entry.vibration_path).string());
    scene.vibration = accel_to_window(series, entry.vib_rate_hz);

    ThermalSequence seq = read_thermal_sequence((root / entry.thermal_dir).string(),
                                                static_cast<double>(entry.thermal_fps));
    scene.thermal = std::move(seq.frames);
    return scene;
}

namespace {

std::vector<FaultClass> distinct_labels(const Manifest& manifest) {
    std::vector<FaultClass> classes;
    for (const ManifestEntry& e : manifest.entries) {
        if (std::find(classes.begin(), classes.end(), e.label) == classes.end()) {
            classes.push_back(e.label);
        }
    }
    std::sort(classes.begin(), classes.end(),
              [](FaultClass a, FaultClass b) { return static_cast<int>(a) < static_cast<int>(b); });
    return classes;
}

int label_index(const std::vector<FaultClass>& classes, FaultClass label, const char* context) {
    const auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) {
        throw ValidationError(std::string(context) + ": label " + fault_name(label) +
                              " not in class set");
    }
    return static_cast<int>(it - classes.begin());
}

} // namespace

LabeledDataset build_dataset(const Manifest& manifest, const fs::path& root, Modality modality) {
    if (manifest.entries.empty()) throw ValidationError("build_dataset: empty manifest");
    LabeledDataset out;
    out.classes = distinct_labels(manifest);

    for (size_t si = 0; si < manifest.entries.size(); ++si) {
        const ManifestEntry& entry = manifest.entries[si];
        const int label = label_index(out.classes, entry.label, "build_dataset");

        // Only the requested modality's files are read.
        AudioWindow audio;
        VibrationWindow vibration;
        std::vector<ThermalFrame> thermal;
        if (modality == Modality::Acoustic) {
            const WavData wav = read_wav((root / entry.audio_path).string());
            if (wav.channels.size() == 1) {
                audio.left = wav.channels[0];
                audio.right = wav.channels[0];
            } else if (wav.channels.size() == 2) {
                audio.left = wav.channels[0];
                audio.right = wav.channels[1];
            } else {
                throw ValidationError(entry.scene_id + ": expected 1 or 2 audio channels, got " +
                                      std::to_string(wav.channels.size()));
            }
            audio.sample_rate_hz = wav.sample_rate_hz;
        } else if (modality == Modality::Vibration) {
            const AccelSeries series = read_accel_csv((root / entry.vibration_path).string());
            vibration = accel_to_window(series, entry.vib_rate_hz);
        } else {
            ThermalSequence seq = read_thermal_sequence((root / entry.thermal_dir).string(),
                                                        static_cast<double>(entry.thermal_fps));
            thermal = std::move(seq.frames);
        }

        for (double t0 : window_start_times(entry.duration_s)) {
            InputTensor tensor;
            switch (modality) {
                case Modality::Acoustic:
                    tensor = audio_to_tensor(slice_audio(audio, t0));
                    break;
                case Modality::Vibration:
                    tensor = vibration_to_input(slice_vibration(vibration, t0));
                    break;
                case Modality::Thermal:
                    tensor = thermal_to_input(nearest_thermal(thermal, t0 + kWindowLenS / 2.0));
                    break;
            }
            out.data.inputs.push_back(std::move(tensor.values));
            out.data.labels.push_back(label);
            out.scene_of.push_back(si);
        }
    }
    return out;
}

TrainSplit split_scenes(const LabeledDataset& dataset, double train_fraction, uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("split_scenes: train fraction must be in (0, 1)");
    }
    if (dataset.data.size() == 0) throw ValidationError("split_scenes: empty dataset");

    // Scene ordinal -> label index (every sample of a scene shares one label).
    std::vector<size_t> scene_ids;
    std::vector<int> scene_label;
    for (size_t i = 0; i < dataset.scene_of.size(); ++i) {
        const size_t s = dataset.scene_of[i];
        if (std::find(scene_ids.begin(), scene_ids.end(), s) == scene_ids.end()) {
            scene_ids.push_back(s);
            scene_label.push_back(dataset.data.labels[i]);
        }
    }

    const int n_classes = static_cast<int>(dataset.classes.size());
    std::vector<std::vector<size_t>> by_class(static_cast<size_t>(n_classes));
    for (size_t k = 0; k < scene_ids.size(); ++k) {
        by_class[static_cast<size_t>(scene_label[k])].push_back(scene_ids[k]);
    }

    Rng rng(seed);
    std::vector<size_t> train_scenes;
    std::vector<size_t> val_scenes;
    for (int c = 0; c < n_classes; ++c) {
        auto& group = by_class[static_cast<size_t>(c)];
        if (group.size() < 2) {
            throw ValidationError("split_scenes: class " + fault_name(dataset.classes[c]) +
                                  " has " + std::to_string(group.size()) +
                                  " scene(s) with samples; need at least 2");
        }
        for (size_t i = group.size() - 1; i > 0; --i) {
            std::swap(group[i], group[rng.below(i + 1)]);
        }
        const auto n_train = std::clamp<size_t>(
            static_cast<size_t>(std::floor(train_fraction * static_cast<double>(group.size()))),
            1, group.size() - 1);
        train_scenes.insert(train_scenes.end(), group.begin(), group.begin() + n_train);
        val_scenes.insert(val_scenes.end(), group.begin() + n_train, group.end());
    }

    TrainSplit split;
    for (size_t i = 0; i < dataset.data.size(); ++i) {
        const size_t s = dataset.scene_of[i];
        const bool in_train =
            std::find(train_scenes.begin(), train_scenes.end(), s) != train_scenes.end();
        Dataset& dst = in_train ? split.train : split.val;
        dst.inputs.push_back(dataset.data.inputs[i]);
        dst.labels.push_back(dataset.data.labels[i]);
    }
    return split;
}

// ============================================================================
// Training
// ============================================================================

PipelineTrainResult train_modality(const Manifest& manifest, const fs::path& root,
                                   Modality modality, const TrainConfig& config,
                                   double train_fraction) {
    const LabeledDataset ds = build_dataset(manifest, root, modality);
    const TrainSplit split = split_scenes(ds, train_fraction, config.seed);

    const ModelSpec spec = modality_model_spec(modality, static_cast<int>(ds.classes.size()));
    Model model = init_model<float>(spec, config.seed);
    model.class_codes = ds.classes;

    TrainResult result = train(model, split.train, split.val, config);
    PipelineTrainResult out;
    out.model = std::move(result.model);
    out.history = std::move(result.history);
    out.best_epoch = static_cast<size_t>(result.best_epoch);
    return out;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path + " for writing");
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char buf[160];
    for (size_t i = 0; i < history.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f\n", i + 1,
                      history[i].train_loss, history[i].train_acc, history[i].val_loss,
                      history[i].val_acc);
        out << buf;
    }
    if (!out) throw std::runtime_error("write_history_csv: write failed for " + path);
}

// ============================================================================
// Fused evaluation
// ============================================================================

FusedEval evaluate_fused(const Manifest& manifest, const fs::path& root,
                         const std::vector<std::pair<Modality, const Model*>>& models,
                         const SensitivityMatrix& matrix, const FusionConfig& config) {
    if (models.empty()) throw ValidationError("evaluate_fused: no models");
    if (manifest.entries.empty()) throw ValidationError("evaluate_fused: empty manifest");
    const std::vector<FaultClass>& classes = models.front().second->class_codes;
    for (const auto& [modality, model] : models) {
        if (model->class_codes != classes) {
            std::string a, b;
            for (FaultClass c : classes) a += (a.empty() ? "" : ",") + fault_name(c);
            for (FaultClass c : model->class_codes) b += (b.empty() ? "" : ",") + fault_name(c);
            throw ValidationError("evaluate_fused: class set mismatch between models: {" + a +
                                  "} vs {" + b + "}");
        }
    }

    std::vector<int> truth;
    std::vector<int> fused_pred;
    std::vector<std::vector<int>> modality_pred(models.size());

    const auto argmax = [](const std::vector<double>& v) {
        return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
    };

    bool need_audio = false, need_vib = false, need_thermal = false;
    for (const auto& [modality, model] : models) {
        need_audio |= modality == Modality::Acoustic;
        need_vib |= modality == Modality::Vibration;
        need_thermal |= modality == Modality::Thermal;
    }

    for (const ManifestEntry& entry : manifest.entries) {
        const int label = label_index(classes, entry.label, "evaluate_fused");
        SceneData scene;
        scene.duration_s = entry.duration_s;
        if (need_audio || need_vib || need_thermal) scene = load_scene(entry, root);

        for (double t0 : window_start_times(entry.duration_s)) {
            std::vector<ModalityScores> window_scores;
            for (size_t mi = 0; mi < models.size(); ++mi) {
                const auto& [modality, model] = models[mi];
                InputTensor tensor;
                switch (modality) {
                    case Modality::Acoustic:
                        tensor = audio_to_tensor(slice_audio(scene.audio, t0));
                        break;
                    case Modality::Vibration:
                        tensor = vibration_to_input(slice_vibration(scene.vibration, t0));
                        break;
                    case Modality::Thermal:
                        tensor = thermal_to_input(
                            nearest_thermal(scene.thermal, t0 + kWindowLenS / 2.0));
                        break;
                }
                const ClassScores scores = forward<float>(*model, tensor.values);
                modality_pred[mi].push_back(argmax(scores.probs));
                window_scores.push_back({modality, 0, scores.probs});
            }
            const std::vector<double> fused = fuse(classes, window_scores, matrix, config, 0);
            fused_pred.push_back(argmax(fused));
            truth.push_back(label);
        }
    }

    FusedEval out;
    out.fused = evaluate_predictions(fused_pred, truth, static_cast<int>(classes.size()));
    for (size_t mi = 0; mi < models.size(); ++mi) {
        out.per_modality.emplace_back(
            models[mi].first,
            evaluate_predictions(modality_pred[mi], truth, static_cast<int>(classes.size())));
    }
    return out;
}

} // namespace fdms
