#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fdms/signal_core.hpp"

namespace fdms {

// ============================================================================
// WAV (RIFF PCM16)
// ============================================================================

struct WavData {
    std::vector<std::vector<double>> channels;  // equal lengths, values in [-1, 1]
    int sample_rate_hz = 0;
};

// PCM16 little-endian. Samples must lie in [-1, 1]; quantization error on
// round-trip is at most 1/32768 per sample.
void write_wav(const std::string& path, const std::vector<std::vector<double>>& channels,
               int sample_rate_hz);
WavData read_wav(const std::string& path);
WavData read_wav_stream(std::istream& in, const std::string& name);

// ============================================================================
// Accelerometer CSV ("t_ms,x,y,z")
// ============================================================================

struct AccelSeries {
    std::vector<int64_t> t_ms;  // non-decreasing
    std::vector<double> x, y, z;
    size_t size() const { return t_ms.size(); }
};

// Values are written with 6 significant digits. Reading validates the header,
// numeric cells, finiteness and time monotonicity; errors cite line numbers
// (line 1 is the header). A header-only file reads as an empty series.
void write_accel_csv(const std::string& path, const AccelSeries& series);
AccelSeries read_accel_csv(const std::string& path);

// Converts a series to a VibrationWindow at a declared sample rate.
VibrationWindow accel_to_window(const AccelSeries& series, int sample_rate_hz);

// ============================================================================
// Thermal frames (binary PGM, P5)
// ============================================================================

// 8-bit binary PGM; intensities scaled to 0..255 with round-half-up.
void write_pgm(const std::string& path, const ThermalFrame& frame);
ThermalFrame read_pgm(const std::string& path);
// Reads one P5 frame from a stream (for concatenated-frame pipes). Returns
// nullopt at a clean end of stream.
std::optional<ThermalFrame> read_pgm_stream(std::istream& in, const std::string& name);

// Frames are stored as frame_NNNNNN.pgm. ts_ms is assigned from the file
// number at the given frame rate.
struct ThermalSequence {
    std::vector<ThermalFrame> frames;
    std::vector<std::string> warnings;  // numbering gaps, non-frame files
};
void write_thermal_sequence(const std::string& dir, const std::vector<ThermalFrame>& frames);
ThermalSequence read_thermal_sequence(const std::string& dir, double fps = 8.0);

// ============================================================================
// Corpus manifest (JSON)
// ============================================================================

struct ManifestEntry {
    std::string scene_id;
    FaultClass label = FaultClass::Normal;
    std::string audio_path;      // relative to the manifest directory
    std::string vibration_path;  // relative to the manifest directory
    std::string thermal_dir;     // relative to the manifest directory
    double duration_s = 0.0;
    int audio_rate_hz = 16000;
    int vib_rate_hz = 200;
    int thermal_fps = 8;
};

struct Manifest {
    int format_version = 1;
    std::vector<ManifestEntry> entries;
};

// Serialization is byte-deterministic (sorted keys, fixed layout).
void write_manifest(const std::string& path, const Manifest& manifest);

// Validation collects every problem (unknown labels, duplicate scene ids,
// missing referenced files) and reports them all in one ValidationError.
Manifest read_manifest(const std::string& path);

// Directory the manifest's relative paths resolve against.
std::filesystem::path manifest_root(const std::string& manifest_path);

} // namespace fdms
