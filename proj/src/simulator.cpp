#include "fdms/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fdms/dsp.hpp"
#include "fdms/errors.hpp"
#include "fdms/rng.hpp"

namespace fs = std::filesystem;

namespace fdms {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// ============================================================================
// Recipe constants
// ============================================================================

// Stepper drive tone and harmonics, present in every scene.
constexpr double kStepperHz = 220.0;
constexpr double kStepperAmps[4] = {0.08, 0.04, 0.028, 0.02};

// Steady extrusion hiss: bandlimited noise at a fixed RMS. Material runout
// removes it; a clog chokes it; over-extrusion doubles it. The RMS keeps the
// hiss at least 3x the stepper-harmonic energy inside its own band, so a
// silenced hiss drops the band energy below a quarter of the healthy level.
constexpr double kHissLowHz = 300.0;
constexpr double kHissHighHz = 900.0;
constexpr double kHissRms = 0.08;
constexpr double kClogHissGain = 0.31622776601683794;  // -10 dB
constexpr double kOverHissGain = 2.0;

// Clog clicks: sputtering bursts as filament intermittently jams.
constexpr double kClickRateHz = 2.0;
constexpr double kClickAmp = 0.3;
constexpr double kClickToneHz = 600.0;
constexpr double kClickTau = 0.01;
constexpr double kClickDur = 0.05;

// Bed adhesion scrape bursts (broadband) and belt slap transients.
constexpr double kScrapeRateHz = 1.3;
constexpr double kScrapeAmp = 0.15;
constexpr double kScrapeDur = 0.08;
constexpr double kSlapRateHz = 1.0;
constexpr double kSlapAmp = 0.12;
constexpr double kSlapToneHz = 300.0;
constexpr double kSlapTau = 0.02;

// Gear-slip triple clicks: three short ticks per slip event.
constexpr double kGearSlipPeriodS = 0.7;
constexpr double kGearClickAmp = 0.25;
constexpr double kGearClickToneHz = 500.0;
constexpr double kGearClickTau = 0.008;
constexpr double kGearClickSpacingS = 0.03;

// Layer-shift audio thud. Deliberately weak: the shift is primarily a
// vibration event and should stay near the acoustic noise floor.
constexpr double kShiftThudAmp = 0.05;
constexpr double kShiftThudHz = 150.0;
constexpr double kShiftThudTau = 0.05;

// Vibration baseline: gantry sway plus sensor noise.
constexpr double kVibBaseHz = 20.0;
constexpr double kVibAmpX = 0.02;
constexpr double kVibAmpY = 0.015;
constexpr double kVibAmpZ = 0.01;
constexpr double kVibNoise = 0.005;

// Layer shift: one large damped transient mid-scene.
constexpr double kShiftVibAmp = 0.8;
constexpr double kShiftVibHz = 30.0;
constexpr double kShiftVibTau = 0.1;

// Belt slip: repeated moderate transients.
constexpr double kSlipVibAmp = 0.10;
constexpr double kSlipVibHz = 25.0;
constexpr double kSlipVibTau = 0.06;

// Gear slip: small spikes synchronized with its audio clicks.
constexpr double kGearVibAmp = 0.06;

// Thermal scene: warm nozzle blob over a cool bed with a fresh-extrusion
// trail below the nozzle.
constexpr double kThermalBg = 0.2;
constexpr int kNozzleX = 80;
constexpr int kNozzleY = 40;
constexpr double kNozzleSigma = 5.0;
constexpr double kNozzlePeak = 0.9;
constexpr double kClogNozzlePeak = 1.0;
constexpr double kDriftSwing = 0.2;
constexpr double kTrailValue = 0.6;
constexpr int kTrailX0 = 72, kTrailX1 = 88;
constexpr int kTrailY0 = 52, kTrailY1 = 96;
constexpr int kWideTrailX0 = 64, kWideTrailX1 = 96;
constexpr int kTrailJitterPx = 6;
constexpr double kThermalNoise = 0.01;

// ============================================================================
// Audio synthesis
// ============================================================================

void add_damped_tone(std::vector<double>& buf, int rate, double t0, double tone_hz, double amp,
                     double tau, double dur) {
    const auto start = static_cast<long>(std::ceil(t0 * rate));
    const auto stop = static_cast<long>(std::floor((t0 + dur) * rate));
    for (long i = std::max(start, 0L); i <= stop && i < static_cast<long>(buf.size()); ++i) {
        const double dt = static_cast<double>(i) / rate - t0;
        buf[static_cast<size_t>(i)] +=
            amp * std::sin(kTwoPi * tone_hz * dt) * std::exp(-dt / tau);
    }
}

void add_noise_burst(std::vector<double>& buf, Rng& rng, int rate, double t0, double amp,
                     double dur) {
    const auto start = static_cast<long>(std::ceil(t0 * rate));
    const auto stop = static_cast<long>(std::floor((t0 + dur) * rate));
    for (long i = std::max(start, 0L); i <= stop && i < static_cast<long>(buf.size()); ++i) {
        const double dt = static_cast<double>(i) / rate - t0;
        const double env = 1.0 - dt / dur;
        buf[static_cast<size_t>(i)] += amp * env * rng.gaussian();
    }
}

// Event start times with +/-10% period jitter, deterministic in rng order.
std::vector<double> event_times(Rng& rng, double duration_s, double rate_hz) {
    std::vector<double> times;
    const double period = 1.0 / rate_hz;
    for (double t = 0.3 * period; t < duration_s; t += period) {
        times.push_back(t + rng.uniform(-0.1 * period, 0.1 * period));
    }
    return times;
}

double rms_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double s : v) acc += s * s;
    return v.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(v.size()));
}

std::vector<double> make_hiss(Rng& rng, size_t n, int rate, double target_rms) {
    std::vector<double> white(n);
    for (double& s : white) s = rng.gaussian();
    const FilterCoeffs bp = design_bandpass(kHissLowHz, kHissHighHz, rate);
    std::vector<double> shaped = filter_apply(bp, white);
    const double r = rms_of(shaped);
    if (r > 0.0) {
        const double g = target_rms / r;
        for (double& s : shaped) s *= g;
    }
    return shaped;
}

// Paul Kellet's pink noise filter over white gaussian input.
std::vector<double> make_pink(Rng& rng, size_t n) {
    std::vector<double> pink(n);
    double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
    for (size_t i = 0; i < n; ++i) {
        const double w = rng.gaussian();
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        pink[i] = (b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362) * 0.11;
        b6 = w * 0.115926;
    }
    return pink;
}

std::vector<double> synth_mono_audio(const SimConfig& cfg, Rng& rng, double shift_time_s) {
    const auto n = static_cast<size_t>(std::llround(cfg.duration_s * cfg.audio_rate_hz));
    const int rate = cfg.audio_rate_hz;
    std::vector<double> mono(n, 0.0);

    // Stepper harmonics with per-scene phases. Phases are drawn first so the
    // harmonic content never depends on which fault branch runs.
    double phases[4];
    for (double& p : phases) p = rng.uniform(0.0, kTwoPi);
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        double s = 0.0;
        for (int k = 0; k < 4; ++k) {
            s += kStepperAmps[k] * std::sin(kTwoPi * kStepperHz * (k + 1) * t + phases[k]);
        }
        mono[i] = s;
    }

    const std::vector<double> hiss = make_hiss(rng, n, rate, kHissRms);
    double hiss_gain = 1.0;
    switch (cfg.fault) {
        case FaultClass::MaterialRunout: hiss_gain = 0.0; break;
        case FaultClass::NozzleClog: hiss_gain = kClogHissGain; break;
        case FaultClass::OverExtrusion: hiss_gain = kOverHissGain; break;
        default: break;
    }
    if (hiss_gain != 0.0) {
        for (size_t i = 0; i < n; ++i) mono[i] += hiss_gain * hiss[i];
    }

    switch (cfg.fault) {
        case FaultClass::NozzleClog:
            for (double t0 : event_times(rng, cfg.duration_s, kClickRateHz)) {
                add_damped_tone(mono, rate, t0, kClickToneHz, kClickAmp, kClickTau, kClickDur);
            }
            break;
        case FaultClass::BedAdhesionFailure:
            for (double t0 : event_times(rng, cfg.duration_s, kScrapeRateHz)) {
                add_noise_burst(mono, rng, rate, t0, kScrapeAmp, kScrapeDur);
            }
            break;
        case FaultClass::BeltSlip:
            for (double t0 : event_times(rng, cfg.duration_s, kSlapRateHz)) {
                add_damped_tone(mono, rate, t0, kSlapToneHz, kSlapAmp, kSlapTau, 5.0 * kSlapTau);
            }
            break;
        case FaultClass::ExtruderGearSlip:
            for (double t0 : event_times(rng, cfg.duration_s, 1.0 / kGearSlipPeriodS)) {
                for (int k = 0; k < 3; ++k) {
                    add_damped_tone(mono, rate, t0 + k * kGearClickSpacingS, kGearClickToneHz,
                                    kGearClickAmp, kGearClickTau, 5.0 * kGearClickTau);
                }
            }
            break;
        case FaultClass::LayerShift:
            add_damped_tone(mono, rate, shift_time_s, kShiftThudHz, kShiftThudAmp, kShiftThudTau,
                            5.0 * kShiftThudTau);
            break;
        default: break;
    }
    return mono;
}

// ============================================================================
// Vibration synthesis
// ============================================================================

void add_vib_transient(std::vector<double>& axis, int rate, double t0, double amp, double tone_hz,
                       double tau) {
    const auto start = static_cast<long>(std::ceil(t0 * rate));
    const auto stop = static_cast<long>(std::floor((t0 + 6.0 * tau) * rate));
    for (long i = std::max(start, 0L); i <= stop && i < static_cast<long>(axis.size()); ++i) {
        const double dt = static_cast<double>(i) / rate - t0;
        axis[static_cast<size_t>(i)] +=
            amp * std::sin(kTwoPi * tone_hz * dt) * std::exp(-dt / tau);
    }
}

VibrationWindow synth_vibration(const SimConfig& cfg, Rng& rng, double shift_time_s) {
    const auto n = static_cast<size_t>(std::llround(cfg.duration_s * cfg.vib_rate_hz));
    const int rate = cfg.vib_rate_hz;
    VibrationWindow w;
    w.sample_rate_hz = rate;
    w.start_ts_ms = 0;
    w.x.resize(n);
    w.y.resize(n);
    w.z.resize(n);
    const double px = rng.uniform(0.0, kTwoPi);
    const double py = rng.uniform(0.0, kTwoPi);
    const double pz = rng.uniform(0.0, kTwoPi);
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        w.x[i] = kVibAmpX * std::sin(kTwoPi * kVibBaseHz * t + px) + kVibNoise * rng.gaussian();
        w.y[i] = kVibAmpY * std::sin(kTwoPi * kVibBaseHz * t + py) + kVibNoise * rng.gaussian();
        w.z[i] = kVibAmpZ * std::sin(kTwoPi * kVibBaseHz * t + pz) + kVibNoise * rng.gaussian();
    }

    switch (cfg.fault) {
        case FaultClass::LayerShift:
            add_vib_transient(w.x, rate, shift_time_s, kShiftVibAmp, kShiftVibHz, kShiftVibTau);
            add_vib_transient(w.y, rate, shift_time_s, 0.5 * kShiftVibAmp, kShiftVibHz,
                              kShiftVibTau);
            break;
        case FaultClass::BeltSlip:
            for (double t0 : event_times(rng, cfg.duration_s, kSlapRateHz)) {
                add_vib_transient(w.x, rate, t0, kSlipVibAmp, kSlipVibHz, kSlipVibTau);
                add_vib_transient(w.y, rate, t0, 0.6 * kSlipVibAmp, kSlipVibHz, kSlipVibTau);
            }
            break;
        case FaultClass::ExtruderGearSlip:
            for (double t0 : event_times(rng, cfg.duration_s, 1.0 / kGearSlipPeriodS)) {
                add_vib_transient(w.x, rate, t0, kGearVibAmp, kSlipVibHz, 0.03);
            }
            break;
        default: break;
    }
    return w;
}

// ============================================================================
// Thermal synthesis
// ============================================================================

std::vector<ThermalFrame> synth_thermal(const SimConfig& cfg, Rng& rng) {
    const auto n_frames = static_cast<size_t>(std::llround(cfg.duration_s * cfg.thermal_fps));
    const int drift_sign = rng.uniform() < 0.5 ? -1 : 1;
    std::vector<ThermalFrame> frames;
    frames.reserve(n_frames);
    for (size_t fi = 0; fi < n_frames; ++fi) {
        const double t = static_cast<double>(fi) / cfg.thermal_fps;
        const double progress = cfg.duration_s > 0.0 ? t / cfg.duration_s : 0.0;
        ThermalFrame f;
        f.width = 160;
        f.height = 120;
        f.ts_ms = std::llround(1000.0 * static_cast<double>(fi) / cfg.thermal_fps);
        f.pixels.assign(static_cast<size_t>(f.width) * f.height, kThermalBg);

        double peak = kNozzlePeak;
        if (cfg.fault == FaultClass::NozzleClog) peak = kClogNozzlePeak;
        if (cfg.fault == FaultClass::HotEndTempDrift) {
            peak = kNozzlePeak + drift_sign * kDriftSwing * progress;
        }
        peak = std::clamp(peak, 0.0, 1.0);

        double trail = kTrailValue;
        if (cfg.fault == FaultClass::MaterialRunout) {
            // Extrusion stops: the fresh-plastic trail cools to background by
            // mid-scene.
            trail = kThermalBg + (kTrailValue - kThermalBg) * std::max(0.0, 1.0 - 2.0 * progress);
        }
        int x0 = kTrailX0, x1 = kTrailX1;
        if (cfg.fault == FaultClass::OverExtrusion) {
            x0 = kWideTrailX0;
            x1 = kWideTrailX1;
        }
        if (cfg.fault == FaultClass::BedAdhesionFailure) {
            const int jit =
                static_cast<int>(std::lround(rng.uniform(-1.0, 1.0) * kTrailJitterPx));
            x0 = std::clamp(x0 + jit, 0, f.width - 1);
            x1 = std::clamp(x1 + jit, 0, f.width - 1);
        }

        for (int y = kTrailY0; y <= kTrailY1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                auto& px = f.pixels[static_cast<size_t>(y) * f.width + x];
                px = std::max(px, trail);
            }
        }
        const int ry = 3 * static_cast<int>(std::ceil(kNozzleSigma));
        for (int y = std::max(0, kNozzleY - ry); y <= std::min(f.height - 1, kNozzleY + ry); ++y) {
            for (int x = std::max(0, kNozzleX - ry); x <= std::min(f.width - 1, kNozzleX + ry);
                 ++x) {
                const double dx = x - kNozzleX;
                const double dy = y - kNozzleY;
                const double g = kThermalBg + (peak - kThermalBg) *
                                                  std::exp(-(dx * dx + dy * dy) /
                                                           (2.0 * kNozzleSigma * kNozzleSigma));
                auto& px = f.pixels[static_cast<size_t>(y) * f.width + x];
                px = std::max(px, g);
            }
        }
        for (double& px : f.pixels) {
            px = std::clamp(px + rng.uniform(-kThermalNoise, kThermalNoise), 0.0, 1.0);
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

} // namespace

// ============================================================================
// Scene assembly
// ============================================================================

SimScene synth_scene(const SimConfig& config) {
    if (!(config.duration_s > 0.0)) throw ValidationError("synth_scene: duration must be positive");
    if (config.audio_rate_hz < 2000) {
        throw ValidationError("synth_scene: audio rate must be at least 2000 Hz");
    }
    if (config.vib_rate_hz <= 0 || config.thermal_fps <= 0) {
        throw ValidationError("synth_scene: vibration rate and thermal fps must be positive");
    }

    Rng audio_rng(derive_stream_seed(config.seed, 1));
    Rng vib_rng(derive_stream_seed(config.seed, 2));
    Rng thermal_rng(derive_stream_seed(config.seed, 3));
    Rng ambient_rng(derive_stream_seed(config.seed, 4));

    // The layer-shift instant is shared between audio and vibration, drawn
    // from its own stream so both modalities agree without coupling their
    // generators.
    Rng event_rng(derive_stream_seed(config.seed, 5));
    const double shift_time_s =
        config.duration_s * (0.5 + 0.05 * event_rng.uniform(-1.0, 1.0));

    SimScene scene;
    scene.label = config.fault;

    std::vector<double> mono = synth_mono_audio(config, audio_rng, shift_time_s);
    if (config.ambient_noise_snr_db.has_value()) {
        const double clean_rms = rms_of(mono);
        std::vector<double> pink = make_pink(ambient_rng, mono.size());
        const double pink_rms = rms_of(pink);
        if (clean_rms > 0.0 && pink_rms > 0.0) {
            const double target = clean_rms / std::pow(10.0, *config.ambient_noise_snr_db / 20.0);
            const double g = target / pink_rms;
            for (size_t i = 0; i < mono.size(); ++i) mono[i] += g * pink[i];
        }
    }
    const double left_gain = std::pow(10.0, config.stereo_bias_db / 20.0);
    scene.audio.sample_rate_hz = config.audio_rate_hz;
    scene.audio.start_ts_ms = 0;
    scene.audio.left.resize(mono.size());
    scene.audio.right.resize(mono.size());
    for (size_t i = 0; i < mono.size(); ++i) {
        scene.audio.left[i] = std::clamp(mono[i] * left_gain, -1.0, 1.0);
        scene.audio.right[i] = std::clamp(mono[i], -1.0, 1.0);
    }

    scene.vibration = synth_vibration(config, vib_rng, shift_time_s);
    scene.thermal = synth_thermal(config, thermal_rng);
    return scene;
}

Manifest generate_corpus(const std::vector<FaultClass>& classes, int per_class_count,
                         uint64_t master_seed, const std::string& out_dir,
                         const SimConfig& base_config) {
    if (classes.empty()) throw ValidationError("generate_corpus: class list is empty");
    if (per_class_count < 1) {
        throw ValidationError("generate_corpus: per-class count must be at least 1");
    }
    fs::create_directories(out_dir);

    Manifest manifest;
    uint64_t global_index = 0;
    char name[32];
    for (FaultClass cls : classes) {
        for (int j = 0; j < per_class_count; ++j) {
            SimConfig cfg = base_config;
            cfg.fault = cls;
            cfg.seed = derive_stream_seed(master_seed, global_index);
            const SimScene scene = synth_scene(cfg);

            std::snprintf(name, sizeof(name), "scene_%04llu",
                          static_cast<unsigned long long>(global_index));
            const fs::path scene_dir = fs::path(out_dir) / name;
            fs::create_directories(scene_dir);

            write_wav((scene_dir / "audio.wav").string(), {scene.audio.left, scene.audio.right},
                      scene.audio.sample_rate_hz);

            AccelSeries series;
            series.t_ms.resize(scene.vibration.x.size());
            for (size_t i = 0; i < series.t_ms.size(); ++i) {
                series.t_ms[i] =
                    std::llround(1000.0 * static_cast<double>(i) / cfg.vib_rate_hz);
            }
            series.x = scene.vibration.x;
            series.y = scene.vibration.y;
            series.z = scene.vibration.z;
            write_accel_csv((scene_dir / "vibration.csv").string(), series);

            write_thermal_sequence((scene_dir / "thermal").string(), scene.thermal);

            ManifestEntry entry;
            entry.scene_id = name;
            entry.label = cls;
            entry.audio_path = std::string(name) + "/audio.wav";
            entry.vibration_path = std::string(name) + "/vibration.csv";
            entry.thermal_dir = std::string(name) + "/thermal";
            entry.duration_s = cfg.duration_s;
            entry.audio_rate_hz = cfg.audio_rate_hz;
            entry.vib_rate_hz = cfg.vib_rate_hz;
            entry.thermal_fps = cfg.thermal_fps;
            manifest.entries.push_back(std::move(entry));
            ++global_index;
        }
    }
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    return manifest;
}

} // namespace fdms
