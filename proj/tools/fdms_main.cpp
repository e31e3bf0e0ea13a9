#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdms/cnn.hpp"
#include "fdms/datasets.hpp"
#include "fdms/dsp.hpp"
#include "fdms/errors.hpp"
#include "fdms/fusion.hpp"
#include "fdms/monitor.hpp"
#include "fdms/pipeline.hpp"
#include "fdms/signal_core.hpp"
#include "fdms/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit convention: 0 ok, 1 I/O or malformed data, 2 usage or configuration,
// 3 data shortfall (too little data to do the job).
constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

std::optional<uint64_t> env_seed() {
    const char* env = std::getenv("FDMS_SEED");
    if (!env || !*env) return std::nullopt;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') return std::nullopt;
    return static_cast<uint64_t>(v);
}

std::string valid_class_names() {
    std::string names;
    for (fdms::FaultClass c : fdms::all_fault_classes()) {
        if (!names.empty()) names += ", ";
        names += fdms::fault_name(c);
    }
    return names;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    size_t start = 0;
    for (;;) {
        const size_t comma = text.find(',', start);
        out.push_back(text.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

json report_to_json(const fdms::EvalReport& report, const std::vector<fdms::FaultClass>& classes) {
    json j;
    json names = json::array();
    for (fdms::FaultClass c : classes) names.push_back(fdms::fault_name(c));
    j["classes"] = std::move(names);
    j["total"] = report.total;
    j["accuracy"] = report.accuracy;
    j["macro_f1"] = report.macro_f1;
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["f1"] = report.f1;
    json confusion = json::array();
    for (int t = 0; t < report.n_classes; ++t) {
        json row = json::array();
        for (int p = 0; p < report.n_classes; ++p) row.push_back(report.confusion_at(t, p));
        confusion.push_back(std::move(row));
    }
    j["confusion"] = std::move(confusion);
    return j;
}

// Parses repeatable "modality=path" model arguments.
int parse_model_args(const std::vector<std::string>& args,
                     std::vector<std::pair<fdms::Modality, std::string>>& out) {
    for (const std::string& arg : args) {
        const size_t eq = arg.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: --model expects modality=path, got \"" << arg << "\"\n";
            return kExitUsage;
        }
        const auto modality = fdms::modality_from_name(arg.substr(0, eq));
        if (!modality) {
            std::cerr << "error: unknown modality \"" << arg.substr(0, eq)
                      << "\" (valid: acoustic, vibration, thermal)\n";
            return kExitUsage;
        }
        out.emplace_back(*modality, arg.substr(eq + 1));
    }
    return kExitOk;
}

int load_fusion_or_default(const std::string& config_path, fdms::FusionSettings& settings) {
    if (config_path.empty()) return kExitOk;
    try {
        settings = fdms::load_fusion_settings(config_path);
    } catch (const fdms::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

// ============================================================================
// simulate
// ============================================================================

struct SimulateArgs {
    std::string classes = "normal";
    int count = 1;
    uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir;
    double duration_s = 3.0;
    int audio_rate_hz = 16000;
    int vib_rate_hz = 200;
    int thermal_fps = 8;
    double ambient_snr_db = 0.0;
    bool ambient_given = false;
    double stereo_bias_db = 0.0;
};

int cmd_simulate(const SimulateArgs& args) {
    std::vector<fdms::FaultClass> classes;
    for (const std::string& name : split_csv(args.classes)) {
        const auto c = fdms::fault_from_name(name);
        if (!c) {
            std::cerr << "error: unknown class \"" << name << "\" (valid: " << valid_class_names()
                      << ")\n";
            return kExitUsage;
        }
        classes.push_back(*c);
    }
    fdms::SimConfig base;
    base.duration_s = args.duration_s;
    base.audio_rate_hz = args.audio_rate_hz;
    base.vib_rate_hz = args.vib_rate_hz;
    base.thermal_fps = args.thermal_fps;
    if (args.ambient_given) base.ambient_noise_snr_db = args.ambient_snr_db;
    base.stereo_bias_db = args.stereo_bias_db;

    const uint64_t seed = args.seed_given ? args.seed : env_seed().value_or(args.seed);
    try {
        const fdms::Manifest manifest =
            fdms::generate_corpus(classes, args.count, seed, args.out_dir, base);
        std::cout << "wrote " << manifest.entries.size() << " scenes (" << classes.size()
                  << " classes x " << args.count << ") to " << args.out_dir << "\n";
    } catch (const fdms::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

// ============================================================================
// train
// ============================================================================

struct TrainArgs {
    std::string manifest_path;
    std::string modality = "acoustic";
    std::string model_out;
    std::string history_out;
    int epochs = 30;
    uint64_t seed = 0;
    bool seed_given = false;
    double split = 0.8;
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 16;
};

int cmd_train(const TrainArgs& args) {
    const auto modality = fdms::modality_from_name(args.modality);
    if (!modality) {
        std::cerr << "error: unknown modality \"" << args.modality
                  << "\" (valid: acoustic, vibration, thermal)\n";
        return kExitUsage;
    }

    fdms::Manifest manifest;
    fdms::LabeledDataset dataset;
    try {
        manifest = fdms::read_manifest(args.manifest_path);
        dataset =
            fdms::build_dataset(manifest, fdms::manifest_root(args.manifest_path), *modality);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }

    std::vector<size_t> per_class(dataset.classes.size(), 0);
    for (int label : dataset.data.labels) ++per_class[static_cast<size_t>(label)];
    for (size_t c = 0; c < per_class.size(); ++c) {
        if (per_class[c] < 2) {
            std::cerr << "error: class " << fdms::fault_name(dataset.classes[c]) << " has "
                      << per_class[c] << " sample(s); need at least 2\n";
            return kExitData;
        }
    }

    fdms::TrainConfig cfg;
    cfg.learning_rate = args.learning_rate;
    cfg.momentum = args.momentum;
    cfg.batch_size = args.batch_size;
    cfg.epochs = args.epochs;
    cfg.seed = args.seed_given ? args.seed : env_seed().value_or(args.seed);
    try {
        cfg.validate_or_throw();
    } catch (const fdms::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    fdms::TrainSplit split;
    try {
        split = fdms::split_scenes(dataset, args.split, cfg.seed);
    } catch (const fdms::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }

    try {
        const fdms::ModelSpec spec =
            fdms::modality_model_spec(*modality, static_cast<int>(dataset.classes.size()));
        fdms::Model model = fdms::init_model<float>(spec, cfg.seed);
        model.class_codes = dataset.classes;
        const fdms::TrainResult result = fdms::train(model, split.train, split.val, cfg);

        fdms::save_model(result.model, args.model_out);
        const std::string history_path =
            args.history_out.empty() ? args.model_out + ".history.csv" : args.history_out;
        fdms::write_history_csv(history_path, result.history);

        std::printf("trained %s model on %zu train / %zu validation samples\n",
                    fdms::modality_name(*modality).c_str(), split.train.size(),
                    split.val.size());
        std::printf("best epoch %d: validation accuracy %.4f\n", result.best_epoch + 1,
                    result.history[static_cast<size_t>(result.best_epoch)].val_acc);
        std::printf("final validation accuracy %.4f\n", result.history.back().val_acc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

// ============================================================================
// evaluate
// ============================================================================

struct EvaluateArgs {
    std::string manifest_path;
    std::vector<std::string> model_args;
    std::string config_path;
};

int cmd_evaluate(const EvaluateArgs& args) {
    std::vector<std::pair<fdms::Modality, std::string>> model_paths;
    if (const int rc = parse_model_args(args.model_args, model_paths); rc != kExitOk) return rc;
    if (model_paths.empty()) {
        std::cerr << "error: at least one --model modality=path is required\n";
        return kExitUsage;
    }

    fdms::FusionSettings settings;
    settings.matrix = fdms::default_sensitivity();
    if (const int rc = load_fusion_or_default(args.config_path, settings); rc != kExitOk) {
        return rc;
    }

    fdms::Manifest manifest;
    try {
        manifest = fdms::read_manifest(args.manifest_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    if (manifest.entries.empty()) {
        std::cerr << "error: manifest has no entries\n";
        return kExitUsage;
    }

    std::vector<std::pair<fdms::Modality, fdms::Model>> models;
    try {
        for (const auto& [modality, path] : model_paths) {
            models.emplace_back(modality, fdms::load_model(path));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }

    // The model class set must match the labels present in the manifest.
    std::vector<fdms::FaultClass> manifest_classes;
    for (const fdms::ManifestEntry& e : manifest.entries) {
        if (std::find(manifest_classes.begin(), manifest_classes.end(), e.label) ==
            manifest_classes.end()) {
            manifest_classes.push_back(e.label);
        }
    }
    std::sort(manifest_classes.begin(), manifest_classes.end());
    for (const auto& [modality, model] : models) {
        std::vector<fdms::FaultClass> model_classes = model.class_codes;
        std::sort(model_classes.begin(), model_classes.end());
        if (model_classes != manifest_classes) {
            std::string a, b;
            for (fdms::FaultClass c : model_classes) a += (a.empty() ? "" : ",") + fault_name(c);
            for (fdms::FaultClass c : manifest_classes) {
                b += (b.empty() ? "" : ",") + fault_name(c);
            }
            std::cerr << "error: class-set mismatch: model {" << a << "} vs manifest {" << b
                      << "}\n";
            return kExitUsage;
        }
    }

    try {
        const fs::path root = fdms::manifest_root(args.manifest_path);
        if (models.size() == 1) {
            const auto& [modality, model] = models.front();
            const fdms::LabeledDataset ds = fdms::build_dataset(manifest, root, modality);
            const fdms::EvalReport report = fdms::evaluate(model, ds.data);
            std::cout << report_to_json(report, model.class_codes).dump(2) << "\n";
        } else {
            std::vector<std::pair<fdms::Modality, const fdms::Model*>> refs;
            for (const auto& [modality, model] : models) refs.emplace_back(modality, &model);
            const fdms::FusedEval eval =
                fdms::evaluate_fused(manifest, root, refs, settings.matrix, settings.config);
            json j;
            j["fused"] = report_to_json(eval.fused, models.front().second.class_codes);
            json per = json::object();
            for (const auto& [modality, report] : eval.per_modality) {
                per[fdms::modality_name(modality)] =
                    report_to_json(report, models.front().second.class_codes);
            }
            j["per_modality"] = std::move(per);
            std::cout << j.dump(2) << "\n";
        }
    } catch (const fdms::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

// ============================================================================
// monitor
// ============================================================================

struct MonitorArgs {
    std::string scene_dir;
    std::string audio_path;
    std::string vibration_path;
    std::string thermal_path;
    std::string preset = "hybrid";
    std::vector<std::string> model_args;
    std::string config_path;
    std::string out_path;
    int vib_rate_hz = 200;
    int thermal_fps = 8;
};

int cmd_monitor(const MonitorArgs& args) {
    const bool baseline = args.preset == "baseline";
    if (!baseline && args.preset != "hybrid") {
        std::cerr << "error: unknown preset \"" << args.preset << "\" (valid: baseline, hybrid)\n";
        return kExitUsage;
    }

    fdms::MonitorInputs inputs;
    if (!args.scene_dir.empty()) {
        const fs::path dir(args.scene_dir);
        if (!fs::is_directory(dir)) {
            std::cerr << "error: scene directory not found: " << args.scene_dir << "\n";
            return kExitIo;
        }
        if (fs::is_regular_file(dir / "audio.wav")) {
            inputs.audio_path = (dir / "audio.wav").string();
        }
        if (!baseline) {
            if (fs::is_regular_file(dir / "vibration.csv")) {
                inputs.vibration_path = (dir / "vibration.csv").string();
            }
            if (fs::is_directory(dir / "thermal")) {
                inputs.thermal_path = (dir / "thermal").string();
            }
        }
    } else {
        if (!args.audio_path.empty()) inputs.audio_path = args.audio_path;
        if (!baseline) {
            if (!args.vibration_path.empty()) inputs.vibration_path = args.vibration_path;
            if (!args.thermal_path.empty()) inputs.thermal_path = args.thermal_path;
        }
    }
    if (!inputs.audio_path && !inputs.vibration_path && !inputs.thermal_path) {
        std::cerr << "error: no inputs (give --scene or at least one of --audio, --vibration, "
                     "--thermal)\n";
        return kExitUsage;
    }

    std::vector<std::pair<fdms::Modality, std::string>> model_paths;
    if (const int rc = parse_model_args(args.model_args, model_paths); rc != kExitOk) return rc;

    std::map<fdms::Modality, fdms::Model> loaded;
    try {
        for (const auto& [modality, path] : model_paths) {
            loaded.emplace(modality, fdms::load_model(path));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }

    std::map<fdms::Modality, const fdms::Model*> models;
    const auto require_model = [&](fdms::Modality m,
                                   const std::optional<std::string>& path) -> bool {
        if (!path) return true;
        const auto it = loaded.find(m);
        if (it == loaded.end()) {
            std::cerr << "error: missing model for enabled modality " << fdms::modality_name(m)
                      << "\n";
            return false;
        }
        models[m] = &it->second;
        return true;
    };
    if (!require_model(fdms::Modality::Acoustic, inputs.audio_path) ||
        !require_model(fdms::Modality::Vibration, inputs.vibration_path) ||
        !require_model(fdms::Modality::Thermal, inputs.thermal_path)) {
        return kExitUsage;
    }

    fdms::MonitorOptions options;
    options.matrix = fdms::default_sensitivity();
    fdms::FusionSettings settings;
    settings.matrix = options.matrix;
    if (const int rc = load_fusion_or_default(args.config_path, settings); rc != kExitOk) {
        return rc;
    }
    options.config = settings.config;
    options.matrix = settings.matrix;
    options.vib_rate_hz = args.vib_rate_hz;
    options.thermal_fps = args.thermal_fps;

    try {
        std::ofstream file_out;
        std::ostream* out = &std::cout;
        if (!args.out_path.empty()) {
            file_out.open(args.out_path, std::ios::binary | std::ios::trunc);
            if (!file_out) {
                std::cerr << "error: cannot open " << args.out_path << " for writing\n";
                return kExitIo;
            }
            out = &file_out;
        }
        const fdms::MonitorSummary summary = fdms::run_monitor(inputs, models, options, *out);
        std::cerr << "monitor: " << summary.events << " events, " << summary.raised
                  << " raised, " << summary.cleared << " cleared, " << summary.stream_errors
                  << " stream errors\n";
    } catch (const fdms::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

// ============================================================================
// inspect
// ============================================================================

struct InspectArgs {
    std::string input_path;
    std::string out_dir;
};

void write_spectrogram_outputs(const fdms::Spectrogram& spec, const fs::path& pgm_path,
                               const fs::path& csv_path) {
    // PGM: rows are time frames, columns are frequency bins, dB-mapped.
    fdms::ThermalFrame image;
    image.width = static_cast<int>(spec.n_bins);
    image.height = static_cast<int>(spec.n_frames);
    image.pixels.resize(spec.mags.size());
    for (size_t i = 0; i < spec.mags.size(); ++i) {
        const double db = 20.0 * std::log10(spec.mags[i] + fdms::kDbEps);
        image.pixels[i] = std::clamp((db - fdms::kDbFloor) / -fdms::kDbFloor, 0.0, 1.0);
    }
    fdms::write_pgm(pgm_path.string(), image);

    std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
    char buf[32];
    for (size_t t = 0; t < spec.n_frames; ++t) {
        for (size_t k = 0; k < spec.n_bins; ++k) {
            std::snprintf(buf, sizeof(buf), "%.6g", spec.at(t, k));
            csv << (k ? "," : "") << buf;
        }
        csv << "\n";
    }
}

int cmd_inspect(const InspectArgs& args) {
    const fs::path input(args.input_path);
    if (!fs::is_regular_file(input)) {
        std::cerr << "error: input not found: " << args.input_path << "\n";
        return kExitIo;
    }
    const std::string ext = input.extension().string();
    try {
        fs::create_directories(args.out_dir);
        const fs::path out_dir(args.out_dir);
        if (ext == ".wav") {
            const fdms::WavData wav = fdms::read_wav(args.input_path);
            std::vector<double> mono(wav.channels[0].size(), 0.0);
            for (const auto& ch : wav.channels) {
                for (size_t i = 0; i < mono.size(); ++i) mono[i] += ch[i];
            }
            for (double& s : mono) s /= static_cast<double>(wav.channels.size());

            const fdms::Spectrogram pre = fdms::stft(mono, wav.sample_rate_hz);
            const fdms::FilterCoeffs bp = fdms::design_bandpass(
                fdms::kAudioBandLowHz, fdms::kAudioBandHighHz, wav.sample_rate_hz);
            const std::vector<double> filtered = fdms::filter_apply(bp, mono);
            const fdms::Spectrogram post = fdms::stft(filtered, wav.sample_rate_hz);

            write_spectrogram_outputs(pre, out_dir / "spectrogram_pre.pgm",
                                      out_dir / "spectrogram_pre.csv");
            write_spectrogram_outputs(post, out_dir / "spectrogram_post.pgm",
                                      out_dir / "spectrogram_post.csv");
            std::cout << "wrote spectrogram_pre/post .pgm and .csv to " << args.out_dir << "\n";
        } else if (ext == ".csv") {
            const fdms::AccelSeries series = fdms::read_accel_csv(args.input_path);
            fdms::VibrationWindow window = fdms::accel_to_window(series, 200);
            const auto spectra = fdms::vibration_fft(window);
            // Bin spacing comes from the series timestamps when available.
            double rate_hz = 200.0;
            if (series.size() >= 2 && series.t_ms.back() > series.t_ms.front()) {
                rate_hz = 1000.0 * static_cast<double>(series.size() - 1) /
                          static_cast<double>(series.t_ms.back() - series.t_ms.front());
            }
            const double bin_hz = rate_hz / static_cast<double>(fdms::kVibrationFftSize);
            std::ofstream csv(out_dir / "vibration_fft.csv", std::ios::binary | std::ios::trunc);
            if (!csv) throw std::runtime_error("cannot open output CSV for writing");
            csv << "bin_hz,x,y,z\n";
            char buf[160];
            for (size_t k = 0; k < spectra[0].size(); ++k) {
                std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6g\n",
                              bin_hz * static_cast<double>(k), spectra[0][k], spectra[1][k],
                              spectra[2][k]);
                csv << buf;
            }
            std::cout << "wrote vibration_fft.csv to " << args.out_dir << "\n";
        } else {
            std::cerr << "error: unsupported input type \"" << ext
                      << "\" (expected .wav or .csv)\n";
            return kExitUsage;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

} // namespace

// ============================================================================
// main
// ============================================================================

int main(int argc, char** argv) {
    CLI::App app{"fdms: multimodal fault monitor for FDM 3D printers"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Generate synthetic print scenes");
    simulate->add_option("--classes", sim.classes, "Comma-separated fault class names");
    simulate->add_option("--count", sim.count, "Scenes per class")->required();
    CLI::Option* sim_seed = simulate->add_option("--seed", sim.seed, "Master seed (FDMS_SEED env overrides the default)");
    simulate->add_option("--out", sim.out_dir, "Output corpus directory")->required();
    simulate->add_option("--duration", sim.duration_s, "Scene duration in seconds");
    simulate->add_option("--audio-rate", sim.audio_rate_hz, "Audio sample rate in Hz");
    simulate->add_option("--vib-rate", sim.vib_rate_hz, "Vibration sample rate in Hz");
    simulate->add_option("--thermal-fps", sim.thermal_fps, "Thermal frame rate");
    CLI::Option* sim_snr = simulate->add_option("--ambient-snr-db", sim.ambient_snr_db,
                                                "Mix pink ambient noise at this SNR (dB)");
    simulate->add_option("--stereo-bias-db", sim.stereo_bias_db,
                         "Left-channel gain in dB (fault localization)");

    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a single-modality classifier");
    train_cmd->add_option("--manifest", tr.manifest_path, "Corpus manifest JSON")->required();
    train_cmd->add_option("--modality", tr.modality, "acoustic | vibration | thermal");
    train_cmd->add_option("--model-out", tr.model_out, "Output model file")->required();
    train_cmd->add_option("--history", tr.history_out,
                          "Training history CSV (default: <model-out>.history.csv)");
    train_cmd->add_option("--epochs", tr.epochs, "Training epochs");
    CLI::Option* tr_seed = train_cmd->add_option("--seed", tr.seed, "Training seed (FDMS_SEED env overrides the default)");
    train_cmd->add_option("--split", tr.split, "Train fraction of scenes (rest validate)");
    train_cmd->add_option("--lr", tr.learning_rate, "Learning rate");
    train_cmd->add_option("--momentum", tr.momentum, "Momentum coefficient");
    train_cmd->add_option("--batch", tr.batch_size, "Mini-batch size");

    EvaluateArgs ev;
    CLI::App* evaluate_cmd =
        app.add_subcommand("evaluate", "Score trained models against a labeled corpus");
    evaluate_cmd->add_option("--manifest", ev.manifest_path, "Corpus manifest JSON")->required();
    evaluate_cmd->add_option("--model", ev.model_args, "modality=path (repeatable)");
    evaluate_cmd->add_option("--config", ev.config_path, "Fusion settings JSON");

    MonitorArgs mon;
    CLI::App* monitor_cmd =
        app.add_subcommand("monitor", "Stream fused fault decisions over recorded inputs");
    monitor_cmd->add_option("--scene", mon.scene_dir,
                            "Scene directory (audio.wav, vibration.csv, thermal/)");
    monitor_cmd->add_option("--audio", mon.audio_path, "WAV input path");
    monitor_cmd->add_option("--vibration", mon.vibration_path, "Accelerometer CSV input path");
    monitor_cmd->add_option("--thermal", mon.thermal_path,
                            "Thermal frames directory or concatenated P5 stream");
    monitor_cmd->add_option("--preset", mon.preset, "baseline (acoustic only) | hybrid");
    monitor_cmd->add_option("--model", mon.model_args, "modality=path (repeatable)");
    monitor_cmd->add_option("--config", mon.config_path, "Fusion settings JSON");
    monitor_cmd->add_option("--out", mon.out_path, "Event JSONL output (default stdout)");
    monitor_cmd->add_option("--vib-rate", mon.vib_rate_hz, "Vibration sample rate in Hz");
    monitor_cmd->add_option("--thermal-fps", mon.thermal_fps, "Thermal frame rate");

    InspectArgs ins;
    CLI::App* inspect_cmd =
        app.add_subcommand("inspect", "Dump filter/spectrogram views of a recording");
    inspect_cmd->add_option("--input", ins.input_path, "WAV or accelerometer CSV")->required();
    inspect_cmd->add_option("--out", ins.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    sim.seed_given = sim_seed->count() > 0;
    sim.ambient_given = sim_snr->count() > 0;
    tr.seed_given = tr_seed->count() > 0;

    if (simulate->parsed()) return cmd_simulate(sim);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (evaluate_cmd->parsed()) return cmd_evaluate(ev);
    if (monitor_cmd->parsed()) return cmd_monitor(mon);
    if (inspect_cmd->parsed()) return cmd_inspect(ins);
    return kExitUsage;
}
