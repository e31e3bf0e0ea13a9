#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "fdms/signal_core.hpp"

namespace fdms {

// ============================================================================
// Types
// ============================================================================

// Cascade of biquad sections (a0 normalized to 1). Stable by construction;
// design parameters kept for introspection.
struct FilterCoeffs {
    struct Biquad {
        double b0, b1, b2;
        double a1, a2;
    };
    std::vector<Biquad> sections;
    double low_hz = 0.0;
    double high_hz = 0.0;
    double sample_rate_hz = 0.0;
};

// Time-frequency magnitude grid, row-major [n_frames x n_bins].
// bin_hz is meaningful for Linear scale only (0 for Mel).
struct Spectrogram {
    enum class Scale { Linear, Mel };

    std::vector<double> mags;
    size_t n_frames = 0;
    size_t n_bins = 0;
    double bin_hz = 0.0;
    double hop_s = 0.0;
    Scale scale = Scale::Linear;

    double& at(size_t frame, size_t bin) { return mags[frame * n_bins + bin]; }
    double at(size_t frame, size_t bin) const { return mags[frame * n_bins + bin]; }
};

// Fixed-size normalized network input, row-major [channels x height x width],
// values in [0, 1]. Acoustic and thermal use 1 channel, vibration 3.
struct InputTensor {
    std::vector<float> values;
    int channels = 0;
    int height = 0;
    int width = 0;

    size_t size() const {
        return static_cast<size_t>(channels) * height * width;
    }
    float& at(int c, int y, int x) {
        return values[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return values[(static_cast<size_t>(c) * height + y) * width + x];
    }
};

inline constexpr int kTensorEdge = 64;

// Default STFT parameters: 512-point FFT, 256 hop, Hann window.
inline constexpr size_t kStftSize = 512;
inline constexpr size_t kStftHop = 256;

// Default mel filterbank: 64 bands over 50..2000 Hz.
inline constexpr size_t kMelBands = 64;
inline constexpr double kMelFminHz = 50.0;
inline constexpr double kMelFmaxHz = 2000.0;

// dB mapping for tensors: clip to [-80, 0] dB then map affinely to [0, 1].
inline constexpr double kDbFloor = -80.0;
inline constexpr double kDbEps = 1e-10;

inline constexpr size_t kVibrationFftSize = 256;

// ============================================================================
// Operations
// ============================================================================

// 4th-order Butterworth bandpass as two cascaded biquads (bilinear transform,
// edges prewarped so the -3 dB points land exactly on low_hz / high_hz).
// Requires 0 < low_hz < high_hz < sample_rate_hz/2.
FilterCoeffs design_bandpass(double low_hz, double high_hz, double sample_rate_hz);

// Causal direct-form-II-transposed cascade, zero initial state per call.
std::vector<double> filter_apply(const FilterCoeffs& coeffs,
                                 std::span<const double> signal);

// Scales so the peak absolute value is 1. All-zero input passes through.
std::vector<double> normalize_peak(std::span<const double> signal);

// In-place radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& data);

// Magnitude STFT with a periodic Hann window. Requires signal.len >= fft_size.
Spectrogram stft(std::span<const double> signal, double sample_rate_hz,
                 size_t fft_size = kStftSize, size_t hop = kStftHop);

// Triangular mel filterbank matrix, row-major [n_mels x n_bins].
// Mel scale m = 2595*log10(1 + f/700). A row that would quantize to nothing
// gets weight 1 at the bin nearest its center frequency, so rows never vanish.
std::vector<double> mel_filterbank(size_t n_mels, size_t n_bins, double bin_hz,
                                   double fmin_hz, double fmax_hz);

// Applies the filterbank per frame. Requires Linear input and
// fmin < fmax <= Nyquist.
Spectrogram mel_project(const Spectrogram& spec, size_t n_mels = kMelBands,
                        double fmin_hz = kMelFminHz, double fmax_hz = kMelFmaxHz);

// 20*log10(mag + 1e-10) clipped to [-80, 0] dB, mapped to [0, 1], bilinearly
// resized to 1x64x64 (rows = frames, cols = bins).
InputTensor spectrogram_to_tensor(const Spectrogram& spec);

// Per-axis magnitude spectrum: center-cropped to fft_size samples (symmetric
// context, so a mid-window transient stays visible), mean removed, Hann
// windowed; bins 0..fft_size/2. Requires each axis length >= fft_size.
std::array<std::vector<double>, 3> vibration_fft(const VibrationWindow& win,
                                                 size_t fft_size = kVibrationFftSize);

// vibration_fft spectra pushed through the same dB/resize path as audio,
// one channel per axis: 3x64x64.
InputTensor vibration_to_tensor(const VibrationWindow& win,
                                size_t fft_size = kVibrationFftSize);

// Bilinear resize to 1x64x64; thermal pixels are already in [0, 1].
InputTensor thermal_to_tensor(const ThermalFrame& frame);

// 20*log10(rms(left)/rms(right)); positive means louder on the left.
// Returns 0 when either channel is silent (rms <= 1e-6).
double channel_balance_db(const AudioWindow& win);

} // namespace fdms
