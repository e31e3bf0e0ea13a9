#include "fdms/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fdms {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Periodic Hann window value for index n of an N-point window.
double hann(size_t n, size_t N) {
    return 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(n) / static_cast<double>(N)));
}

// Maps a magnitude to the [0,1] tensor scale: dB relative to unit magnitude,
// clipped to [-80, 0], then affine.
double mag_to_unit(double mag) {
    double db = 20.0 * std::log10(mag + kDbEps);
    db = std::clamp(db, kDbFloor, 0.0);
    return (db - kDbFloor) / -kDbFloor;
}

// Bilinear resize of a row-major [src_h x src_w] grid to [dst_h x dst_w],
// half-pixel coordinate convention, edges clamped.
std::vector<double> bilinear_resize(const std::vector<double>& src, int src_h, int src_w,
                                    int dst_h, int dst_w) {
    std::vector<double> dst(static_cast<size_t>(dst_h) * dst_w);
    for (int i = 0; i < dst_h; ++i) {
        double sy = (i + 0.5) * static_cast<double>(src_h) / dst_h - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(src_h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, src_h - 1);
        const double fy = sy - y0;
        for (int j = 0; j < dst_w; ++j) {
            double sx = (j + 0.5) * static_cast<double>(src_w) / dst_w - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(src_w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, src_w - 1);
            const double fx = sx - x0;
            const double top = (1.0 - fx) * src[static_cast<size_t>(y0) * src_w + x0] +
                               fx * src[static_cast<size_t>(y0) * src_w + x1];
            const double bot = (1.0 - fx) * src[static_cast<size_t>(y1) * src_w + x0] +
                               fx * src[static_cast<size_t>(y1) * src_w + x1];
            dst[static_cast<size_t>(i) * dst_w + j] = (1.0 - fy) * top + fy * bot;
        }
    }
    return dst;
}

double mel_of_hz(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double hz_of_mel(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

} // namespace

// ============================================================================
// Filter design and application
// ============================================================================

FilterCoeffs design_bandpass(double low_hz, double high_hz, double sample_rate_hz) {
    if (!(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < sample_rate_hz / 2.0)) {
        throw ValidationError("design_bandpass: need 0 < low < high < rate/2, got low=" +
                              std::to_string(low_hz) + " high=" + std::to_string(high_hz) +
                              " rate=" + std::to_string(sample_rate_hz));
    }

    // Prewarped edge frequencies for the bilinear transform z = (1+s)/(1-s):
    // analog Omega = tan(pi * f / fs), so the -3 dB points land exactly on
    // low_hz and high_hz after mapping back.
    const double wl = std::tan(kPi * low_hz / sample_rate_hz);
    const double wh = std::tan(kPi * high_hz / sample_rate_hz);
    const double w0sq = wl * wh;
    const double bw = wh - wl;

    // Order-2 Butterworth prototype poles (upper half plane member; the
    // conjugates pair up below).
    const std::complex<double> proto = std::polar(1.0, 3.0 * kPi / 4.0);

    // Lowpass-to-bandpass: each prototype pole p yields the roots of
    // s^2 - (p*bw)*s + w0^2 = 0. With the conjugate prototype pole this
    // produces two conjugate pairs, one biquad each.
    const std::complex<double> pb = proto * bw;
    const std::complex<double> disc = std::sqrt(pb * pb - 4.0 * w0sq);
    const std::array<std::complex<double>, 2> analog_poles = {(pb + disc) / 2.0,
                                                              (pb - disc) / 2.0};

    // Digital center frequency, for per-section gain normalization.
    const double w0d = 2.0 * std::atan(std::sqrt(w0sq));
    const std::complex<double> z0 = std::polar(1.0, w0d);
    const std::complex<double> z0m1 = 1.0 / z0;
    const std::complex<double> z0m2 = z0m1 * z0m1;

    FilterCoeffs out;
    out.low_hz = low_hz;
    out.high_hz = high_hz;
    out.sample_rate_hz = sample_rate_hz;
    for (const auto& sp : analog_poles) {
        const std::complex<double> zp = (1.0 + sp) / (1.0 - sp);
        if (std::abs(zp) >= 1.0) {
            throw ValidationError("design_bandpass: unstable pole, |z| = " +
                                  std::to_string(std::abs(zp)));
        }
        FilterCoeffs::Biquad bi;
        bi.a1 = -2.0 * zp.real();
        bi.a2 = std::norm(zp);
        // The bandpass zeros sit at z = +1 and z = -1: numerator g*(1 - z^-2),
        // with g chosen so this section has unit gain at the center frequency.
        const std::complex<double> num = 1.0 - z0m2;
        const std::complex<double> den = 1.0 + bi.a1 * z0m1 + bi.a2 * z0m2;
        const double g = std::abs(den) / std::abs(num);
        bi.b0 = g;
        bi.b1 = 0.0;
        bi.b2 = -g;
        out.sections.push_back(bi);
    }
    return out;
}

std::vector<double> filter_apply(const FilterCoeffs& coeffs, std::span<const double> signal) {
    for (size_t i = 0; i < signal.size(); ++i) {
        if (!std::isfinite(signal[i])) {
            throw ValidationError("filter_apply: non-finite sample at index " +
                                  std::to_string(i));
        }
    }
    std::vector<double> y(signal.begin(), signal.end());
    for (const auto& s : coeffs.sections) {
        double s1 = 0.0, s2 = 0.0;
        for (double& v : y) {
            const double x = v;
            const double o = s.b0 * x + s1;
            s1 = s.b1 * x - s.a1 * o + s2;
            s2 = s.b2 * x - s.a2 * o;
            v = o;
        }
    }
    return y;
}

std::vector<double> normalize_peak(std::span<const double> signal) {
    if (signal.empty()) throw ValidationError("normalize_peak: empty signal");
    double peak = 0.0;
    for (double s : signal) peak = std::max(peak, std::abs(s));
    std::vector<double> out(signal.begin(), signal.end());
    if (peak == 0.0) return out;
    for (double& s : out) s /= peak;
    return out;
}

// ============================================================================
// FFT and spectrograms
// ============================================================================

void fft_radix2(std::vector<std::complex<double>>& data) {
    const size_t n = data.size();
    if (!is_pow2(n)) throw ValidationError("fft_radix2: size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const std::complex<double> wlen = std::polar(1.0, -2.0 * kPi / static_cast<double>(len));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w{1.0, 0.0};
            for (size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = data[i + j];
                const std::complex<double> v = data[i + j + len / 2] * w;
                data[i + j] = u + v;
                data[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

Spectrogram stft(std::span<const double> signal, double sample_rate_hz,
                 size_t fft_size, size_t hop) {
    if (!is_pow2(fft_size)) throw ValidationError("stft: fft_size must be a power of two");
    if (hop == 0) throw ValidationError("stft: hop must be > 0");
    if (signal.size() < fft_size) {
        throw ValidationError("stft: signal length " + std::to_string(signal.size()) +
                              " shorter than fft_size " + std::to_string(fft_size));
    }
    const size_t n_frames = (signal.size() - fft_size) / hop + 1;
    const size_t n_bins = fft_size / 2 + 1;

    std::vector<double> window(fft_size);
    for (size_t i = 0; i < fft_size; ++i) window[i] = hann(i, fft_size);

    Spectrogram spec;
    spec.n_frames = n_frames;
    spec.n_bins = n_bins;
    spec.bin_hz = sample_rate_hz / static_cast<double>(fft_size);
    spec.hop_s = static_cast<double>(hop) / sample_rate_hz;
    spec.scale = Spectrogram::Scale::Linear;
    spec.mags.resize(n_frames * n_bins);

    std::vector<std::complex<double>> buf(fft_size);
    for (size_t t = 0; t < n_frames; ++t) {
        const double* frame = signal.data() + t * hop;
        for (size_t i = 0; i < fft_size; ++i) buf[i] = {frame[i] * window[i], 0.0};
        fft_radix2(buf);
        for (size_t k = 0; k < n_bins; ++k) spec.at(t, k) = std::abs(buf[k]);
    }
    return spec;
}

std::vector<double> mel_filterbank(size_t n_mels, size_t n_bins, double bin_hz,
                                   double fmin_hz, double fmax_hz) {
    if (n_mels == 0 || n_bins == 0) throw ValidationError("mel_filterbank: empty dimensions");
    if (!(fmin_hz >= 0.0) || !(fmax_hz > fmin_hz)) {
        throw ValidationError("mel_filterbank: need 0 <= fmin < fmax, got fmin=" +
                              std::to_string(fmin_hz) + " fmax=" + std::to_string(fmax_hz));
    }
    const double mel_lo = mel_of_hz(fmin_hz);
    const double mel_hi = mel_of_hz(fmax_hz);
    std::vector<double> edges(n_mels + 2);
    for (size_t i = 0; i < edges.size(); ++i) {
        const double m = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1);
        edges[i] = hz_of_mel(m);
    }

    std::vector<double> fb(n_mels * n_bins, 0.0);
    for (size_t r = 0; r < n_mels; ++r) {
        const double lo = edges[r], mid = edges[r + 1], hi = edges[r + 2];
        double row_sum = 0.0;
        for (size_t k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            double w = 0.0;
            if (f > lo && f < hi) {
                w = (f <= mid) ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            }
            fb[r * n_bins + k] = w;
            row_sum += w;
        }
        if (row_sum == 0.0) {
            // Narrow triangle fell between bins: anchor it at the nearest bin
            // so every band contributes.
            const auto k = static_cast<size_t>(std::clamp(
                std::llround(mid / bin_hz), 0LL, static_cast<long long>(n_bins - 1)));
            fb[r * n_bins + k] = 1.0;
        }
    }
    return fb;
}

Spectrogram mel_project(const Spectrogram& spec, size_t n_mels, double fmin_hz,
                        double fmax_hz) {
    if (spec.scale != Spectrogram::Scale::Linear) {
        throw ValidationError("mel_project: input must be Linear scale");
    }
    if (!(fmax_hz > fmin_hz)) {
        throw ValidationError("mel_project: fmax must exceed fmin");
    }
    const double nyquist = spec.bin_hz * static_cast<double>(spec.n_bins - 1);
    if (fmax_hz > nyquist + 1e-9) {
        throw ValidationError("mel_project: fmax " + std::to_string(fmax_hz) +
                              " exceeds Nyquist " + std::to_string(nyquist));
    }
    const std::vector<double> fb =
        mel_filterbank(n_mels, spec.n_bins, spec.bin_hz, fmin_hz, fmax_hz);

    Spectrogram out;
    out.n_frames = spec.n_frames;
    out.n_bins = n_mels;
    out.bin_hz = 0.0;
    out.hop_s = spec.hop_s;
    out.scale = Spectrogram::Scale::Mel;
    out.mags.resize(out.n_frames * n_mels, 0.0);
    for (size_t t = 0; t < spec.n_frames; ++t) {
        for (size_t r = 0; r < n_mels; ++r) {
            double acc = 0.0;
            for (size_t k = 0; k < spec.n_bins; ++k) {
                acc += fb[r * spec.n_bins + k] * spec.at(t, k);
            }
            out.at(t, r) = acc;
        }
    }
    return out;
}

InputTensor spectrogram_to_tensor(const Spectrogram& spec) {
    if (spec.n_frames == 0 || spec.n_bins == 0) {
        throw ValidationError("spectrogram_to_tensor: empty spectrogram");
    }
    std::vector<double> unit(spec.mags.size());
    for (size_t i = 0; i < spec.mags.size(); ++i) unit[i] = mag_to_unit(spec.mags[i]);
    const std::vector<double> resized =
        bilinear_resize(unit, static_cast<int>(spec.n_frames), static_cast<int>(spec.n_bins),
                        kTensorEdge, kTensorEdge);
    InputTensor t;
    t.channels = 1;
    t.height = kTensorEdge;
    t.width = kTensorEdge;
    t.values.assign(resized.begin(), resized.end());
    return t;
}

std::array<std::vector<double>, 3> vibration_fft(const VibrationWindow& win, size_t fft_size) {
    if (!is_pow2(fft_size)) throw ValidationError("vibration_fft: fft_size must be a power of two");
    if (win.x.size() < fft_size) {
        throw ValidationError("vibration_fft: window length " + std::to_string(win.x.size()) +
                              " shorter than fft_size " + std::to_string(fft_size));
    }
    validate(win);
    const std::array<const std::vector<double>*, 3> axes = {&win.x, &win.y, &win.z};
    std::array<std::vector<double>, 3> out;
    std::vector<std::complex<double>> buf(fft_size);
    // Center the crop: transients near the middle of the analysis window must
    // not fall outside the transform when the window is longer than fft_size.
    const size_t start = (win.x.size() - fft_size) / 2;
    for (size_t a = 0; a < 3; ++a) {
        const std::vector<double>& axis = *axes[a];
        double mean = 0.0;
        for (size_t i = 0; i < fft_size; ++i) mean += axis[start + i];
        mean /= static_cast<double>(fft_size);
        for (size_t i = 0; i < fft_size; ++i) {
            buf[i] = {(axis[start + i] - mean) * hann(i, fft_size), 0.0};
        }
        fft_radix2(buf);
        out[a].resize(fft_size / 2 + 1);
        for (size_t k = 0; k <= fft_size / 2; ++k) out[a][k] = std::abs(buf[k]);
    }
    return out;
}

InputTensor vibration_to_tensor(const VibrationWindow& win, size_t fft_size) {
    const auto spectra = vibration_fft(win, fft_size);
    InputTensor t;
    t.channels = 3;
    t.height = kTensorEdge;
    t.width = kTensorEdge;
    t.values.resize(t.size());
    for (int c = 0; c < 3; ++c) {
        const auto& sp = spectra[static_cast<size_t>(c)];
        std::vector<double> unit(sp.size());
        for (size_t k = 0; k < sp.size(); ++k) unit[k] = mag_to_unit(sp[k]);
        const std::vector<double> resized =
            bilinear_resize(unit, 1, static_cast<int>(sp.size()), kTensorEdge, kTensorEdge);
        for (int y = 0; y < kTensorEdge; ++y) {
            for (int x = 0; x < kTensorEdge; ++x) {
                t.at(c, y, x) = static_cast<float>(resized[static_cast<size_t>(y) * kTensorEdge + x]);
            }
        }
    }
    return t;
}

InputTensor thermal_to_tensor(const ThermalFrame& frame) {
    validate(frame);
    const std::vector<double> resized =
        bilinear_resize(frame.pixels, frame.height, frame.width, kTensorEdge, kTensorEdge);
    InputTensor t;
    t.channels = 1;
    t.height = kTensorEdge;
    t.width = kTensorEdge;
    t.values.assign(resized.begin(), resized.end());
    return t;
}

double channel_balance_db(const AudioWindow& win) {
    validate(win);
    const double l = rms(win.left);
    const double r = rms(win.right);
    if (l <= 1e-6 || r <= 1e-6) return 0.0;
    return 20.0 * std::log10(l / r);
}

} // namespace fdms
