#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "fdms/dsp.hpp"
#include "fdms/errors.hpp"
#include "fdms/rng.hpp"
#include "fdms/signal_core.hpp"

using namespace fdms;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Frequency response of the cascade evaluated directly on the unit circle.
double cascade_gain(const FilterCoeffs& coeffs, double freq_hz) {
    const double w = 2.0 * kPi * freq_hz / coeffs.sample_rate_hz;
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h(1.0, 0.0);
    for (const auto& s : coeffs.sections) {
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    }
    return std::abs(h);
}

double passband_peak_gain(const FilterCoeffs& coeffs) {
    double peak = 0.0;
    for (double f = coeffs.low_hz; f <= coeffs.high_hz; f += 1.0) {
        peak = std::max(peak, cascade_gain(coeffs, f));
    }
    return peak;
}

std::vector<double> sine(double freq_hz, double rate_hz, size_t n, double amp = 1.0,
                         double phase = 0.0) {
    std::vector<double> s(n);
    for (size_t i = 0; i < n; ++i) {
        s[i] = amp * std::sin(2.0 * kPi * freq_hz * static_cast<double>(i) / rate_hz + phase);
    }
    return s;
}

double rms_of(std::span<const double> v) {
    double acc = 0.0;
    for (double s : v) acc += s * s;
    return std::sqrt(acc / static_cast<double>(v.size()));
}

} // namespace

// ============================================================================
// Bandpass design
// ============================================================================

TEST_CASE("bandpass edges sit at -3 dB (within 1 dB) of the passband peak") {
    const FilterCoeffs bp = design_bandpass(100.0, 1000.0, 16000.0);
    REQUIRE(bp.sections.size() == 2);
    const double peak = passband_peak_gain(bp);
    REQUIRE(peak > 0.0);
    const double lo_db = 20.0 * std::log10(cascade_gain(bp, 100.0) / peak);
    const double hi_db = 20.0 * std::log10(cascade_gain(bp, 1000.0) / peak);
    CHECK(std::abs(lo_db + 3.0) <= 1.0);
    CHECK(std::abs(hi_db + 3.0) <= 1.0);
}

TEST_CASE("bandpass mid-band gain is flat within 1 dB of peak") {
    const FilterCoeffs bp = design_bandpass(100.0, 1000.0, 16000.0);
    const double peak = passband_peak_gain(bp);
    const double mid_db = 20.0 * std::log10(cascade_gain(bp, 300.0) / peak);
    CHECK(std::abs(mid_db) <= 1.0);
}

TEST_CASE("bandpass stopband attenuation from an 8192-sample impulse response") {
    const FilterCoeffs bp = design_bandpass(100.0, 1000.0, 16000.0);
    std::vector<double> impulse(8192, 0.0);
    impulse[0] = 1.0;
    const std::vector<double> h = filter_apply(bp, impulse);

    std::vector<std::complex<double>> spectrum(h.begin(), h.end());
    fft_radix2(spectrum);
    const double bin_hz = 16000.0 / 8192.0;
    const auto gain_at = [&](double freq_hz) {
        return std::abs(spectrum[static_cast<size_t>(std::llround(freq_hz / bin_hz))]);
    };
    double peak = 0.0;
    for (size_t k = 0; k < spectrum.size() / 2; ++k) peak = std::max(peak, std::abs(spectrum[k]));

    CHECK(20.0 * std::log10(gain_at(25.0) / peak) <= -20.0);
    CHECK(20.0 * std::log10(gain_at(4000.0) / peak) <= -20.0);
}

TEST_CASE("bandpass rejects invalid bands") {
    CHECK_THROWS_AS(design_bandpass(1000.0, 100.0, 16000.0), ValidationError);
    CHECK_THROWS_AS(design_bandpass(0.0, 1000.0, 16000.0), ValidationError);
    CHECK_THROWS_AS(design_bandpass(100.0, 8000.0, 16000.0), ValidationError);
    CHECK_THROWS_AS(design_bandpass(100.0, 100.0, 16000.0), ValidationError);
}

TEST_CASE("every designed biquad is stable over a grid of 100 designs") {
    Rng rng(2024);
    int designs = 0;
    while (designs < 100) {
        const double rate = 4000.0 + rng.uniform(0.0, 44100.0);
        const double lo = rng.uniform(1.0, rate / 2.0 - 2.0);
        const double hi = rng.uniform(lo + 1.0, rate / 2.0 - 1.0);
        if (!(lo > 0.0 && lo < hi && hi < rate / 2.0)) continue;
        const FilterCoeffs bp = design_bandpass(lo, hi, rate);
        for (const auto& s : bp.sections) {
            // Pole magnitudes from z^2 + a1 z + a2 = 0.
            const std::complex<double> disc =
                std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
            const std::complex<double> p0 = (-s.a1 + disc) / 2.0;
            const std::complex<double> p1 = (-s.a1 - disc) / 2.0;
            CHECK(std::abs(p0) < 1.0);
            CHECK(std::abs(p1) < 1.0);
        }
        ++designs;
    }
}

// ============================================================================
// filter_apply
// ============================================================================

TEST_CASE("filtering zeros yields zeros and preserves length") {
    const FilterCoeffs bp = design_bandpass(100.0, 1000.0, 16000.0);
    const std::vector<double> zeros(1024, 0.0);
    const std::vector<double> out = filter_apply(bp, zeros);
    REQUIRE(out.size() == zeros.size());
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("filter_apply is linear in amplitude") {
    const FilterCoeffs bp = design_bandpass(100.0, 1000.0, 16000.0);
    Rng rng(3);
    std::vector<double> s(2048);
    for (double& v : s) v = rng.uniform(-1.0, 1.0);
    const std::vector<double> base = filter_apply(bp, s);
    const double a = 3.25;
    std::vector<double> scaled(s.size());
    for (size_t i = 0; i < s.size(); ++i) scaled[i] = a * s[i];
    const std::vector<double> out = filter_apply(bp, scaled);
    for (size_t i = 0; i < out.size(); ++i) {
        CHECK(std::abs(out[i] - a * base[i]) <= 1e-9);
    }
}

TEST_CASE("filter_apply is time-invariant: delayed input gives delayed output") {
    const FilterCoeffs bp = design_bandpass(100.0, 1000.0, 16000.0);
    Rng rng(4);
    std::vector<double> s(512);
    for (double& v : s) v = rng.uniform(-1.0, 1.0);
    const std::vector<double> y = filter_apply(bp, s);

    const size_t d = 37;
    std::vector<double> delayed(d, 0.0);
    delayed.insert(delayed.end(), s.begin(), s.end());
    const std::vector<double> yd = filter_apply(bp, delayed);
    for (size_t i = 0; i < d; ++i) CHECK(yd[i] == 0.0);
    for (size_t i = 0; i < y.size(); ++i) CHECK(yd[i + d] == y[i]);
}

TEST_CASE("in-band tone passes, out-of-band tone is crushed") {
    const FilterCoeffs bp = design_bandpass(100.0, 1000.0, 16000.0);
    const size_t n = 16000;

    const std::vector<double> in_band = sine(440.0, 16000.0, n);
    const std::vector<double> out_in = filter_apply(bp, in_band);
    const double in_rms = rms_of(std::span(in_band).subspan(n / 2));
    const double out_rms = rms_of(std::span(out_in).subspan(n / 2));
    CHECK(std::abs(20.0 * std::log10(out_rms / in_rms)) <= 1.5);

    const std::vector<double> low_tone = sine(20.0, 16000.0, n);
    const std::vector<double> out_low = filter_apply(bp, low_tone);
    const double low_rms = rms_of(std::span(out_low).subspan(n / 2));
    CHECK(20.0 * std::log10(low_rms / (1.0 / std::sqrt(2.0))) <= -20.0);
}

TEST_CASE("filter_apply rejects non-finite samples with the index named") {
    const FilterCoeffs bp = design_bandpass(100.0, 1000.0, 16000.0);
    std::vector<double> s(64, 0.25);
    s[17] = std::nan("");
    try {
        filter_apply(bp, s);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("17") != std::string::npos);
    }
}

// ============================================================================
// normalize_peak
// ============================================================================

TEST_CASE("normalize_peak fixed and degenerate cases") {
    const std::vector<double> out = normalize_peak(std::vector<double>{0.2, -0.4});
    REQUIRE(out.size() == 2);
    CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(-1.0).epsilon(1e-12));

    const std::vector<double> zeros = normalize_peak(std::vector<double>(16, 0.0));
    for (double v : zeros) CHECK(v == 0.0);

    CHECK_THROWS_AS(normalize_peak(std::span<const double>{}), ValidationError);
}

TEST_CASE("normalize_peak always lands the peak on 1") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s(100);
        for (double& v : s) v = rng.uniform(-0.3, 0.3);
        s[rng.below(s.size())] = rng.uniform() < 0.5 ? -0.9 : 0.9;
        const std::vector<double> out = normalize_peak(s);
        double peak = 0.0;
        for (double v : out) peak = std::max(peak, std::abs(v));
        CHECK(std::abs(peak - 1.0) <= 1e-12);
    }
}

// ============================================================================
// STFT
// ============================================================================

TEST_CASE("stft geometry and zero input") {
    const std::vector<double> zeros(4096, 0.0);
    const Spectrogram spec = stft(zeros, 16000.0);
    CHECK(spec.n_bins == 257);
    CHECK(spec.n_frames == (4096 - 512) / 256 + 1);
    CHECK(spec.bin_hz == doctest::Approx(16000.0 / 512.0).epsilon(1e-12));
    CHECK(spec.hop_s == doctest::Approx(256.0 / 16000.0).epsilon(1e-12));
    CHECK(spec.scale == Spectrogram::Scale::Linear);
    for (double v : spec.mags) CHECK(v == 0.0);

    CHECK_THROWS_AS(stft(std::vector<double>(511, 0.0), 16000.0), ValidationError);
}

TEST_CASE("440 Hz tone peaks in bin 14 in every frame") {
    const std::vector<double> tone = sine(440.0, 16000.0, 16000);
    const Spectrogram spec = stft(tone, 16000.0);
    for (size_t t = 0; t < spec.n_frames; ++t) {
        size_t best = 0;
        for (size_t k = 1; k < spec.n_bins; ++k) {
            if (spec.at(t, k) > spec.at(t, best)) best = k;
        }
        CHECK(best == 14);
    }
}

TEST_CASE("stft magnitude argmax is invariant to tone phase") {
    for (double phase : {0.0, 0.7, 1.9, 3.1, 4.4}) {
        const std::vector<double> tone = sine(440.0, 16000.0, 4096, 1.0, phase);
        const Spectrogram spec = stft(tone, 16000.0);
        for (size_t t = 0; t < spec.n_frames; ++t) {
            size_t best = 0;
            for (size_t k = 1; k < spec.n_bins; ++k) {
                if (spec.at(t, k) > spec.at(t, best)) best = k;
            }
            CHECK(best == 14);
        }
    }
}

TEST_CASE("per-frame spectral energy matches the windowed time-domain energy") {
    Rng rng(31);
    std::vector<double> s(2048);
    for (double& v : s) v = rng.uniform(-1.0, 1.0);
    const Spectrogram spec = stft(s, 16000.0);

    // Periodic Hann, same definition as the transform.
    std::vector<double> hann(512);
    for (size_t n = 0; n < 512; ++n) {
        hann[n] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(n) / 512.0));
    }
    for (size_t t = 0; t < spec.n_frames; ++t) {
        double freq_energy = 0.0;
        for (size_t k = 0; k < spec.n_bins; ++k) {
            const double w = (k == 0 || k == 256) ? 1.0 : 2.0;
            freq_energy += w * spec.at(t, k) * spec.at(t, k);
        }
        double time_energy = 0.0;
        for (size_t n = 0; n < 512; ++n) {
            const double wx = hann[n] * s[t * 256 + n];
            time_energy += wx * wx;
        }
        CHECK(std::abs(freq_energy - 512.0 * time_energy) <=
              1e-6 * std::max(1.0, 512.0 * time_energy));
    }
}

// ============================================================================
// Mel projection
// ============================================================================

TEST_CASE("mel filterbank rows are non-empty with non-decreasing peak bins") {
    const double bin_hz = 16000.0 / 512.0;
    const std::vector<double> fb = mel_filterbank(kMelBands, 257, bin_hz, 50.0, 2000.0);
    REQUIRE(fb.size() == kMelBands * 257);
    size_t prev_peak = 0;
    for (size_t m = 0; m < kMelBands; ++m) {
        double row_sum = 0.0;
        size_t peak = 0;
        double peak_v = -1.0;
        for (size_t k = 0; k < 257; ++k) {
            const double v = fb[m * 257 + k];
            CHECK(v >= 0.0);
            row_sum += v;
            if (v > peak_v) {
                peak_v = v;
                peak = k;
            }
        }
        CHECK(row_sum > 0.0);
        if (m > 0) CHECK(peak >= prev_peak);
        prev_peak = peak;
    }
}

TEST_CASE("mel_project equals the explicit matrix product") {
    Rng rng(8);
    Spectrogram spec;
    spec.n_frames = 7;
    spec.n_bins = 257;
    spec.bin_hz = 16000.0 / 512.0;
    spec.hop_s = 256.0 / 16000.0;
    spec.scale = Spectrogram::Scale::Linear;
    spec.mags.resize(spec.n_frames * spec.n_bins);
    for (double& v : spec.mags) v = rng.uniform(0.0, 2.0);

    const Spectrogram mel = mel_project(spec);
    REQUIRE(mel.n_bins == kMelBands);
    REQUIRE(mel.n_frames == spec.n_frames);
    CHECK(mel.scale == Spectrogram::Scale::Mel);

    const std::vector<double> fb = mel_filterbank(kMelBands, 257, spec.bin_hz, 50.0, 2000.0);
    for (size_t t = 0; t < spec.n_frames; ++t) {
        for (size_t m = 0; m < kMelBands; ++m) {
            double acc = 0.0;
            for (size_t k = 0; k < 257; ++k) acc += fb[m * 257 + k] * spec.at(t, k);
            CHECK(std::abs(mel.at(t, m) - acc) <= 1e-9 * std::max(1.0, acc));
        }
    }
}

TEST_CASE("mel of zeros is zero; constant frame scales row sums") {
    Spectrogram spec;
    spec.n_frames = 3;
    spec.n_bins = 257;
    spec.bin_hz = 16000.0 / 512.0;
    spec.scale = Spectrogram::Scale::Linear;
    spec.mags.assign(spec.n_frames * spec.n_bins, 0.0);
    const Spectrogram zero_mel = mel_project(spec);
    for (double v : zero_mel.mags) CHECK(v == 0.0);

    const double c = 0.75;
    for (double& v : spec.mags) v = c;
    const Spectrogram mel = mel_project(spec);
    const std::vector<double> fb = mel_filterbank(kMelBands, 257, spec.bin_hz, 50.0, 2000.0);
    for (size_t m = 0; m < kMelBands; ++m) {
        double row_sum = 0.0;
        for (size_t k = 0; k < 257; ++k) row_sum += fb[m * 257 + k];
        CHECK(std::abs(mel.at(0, m) - c * row_sum) <= 1e-9 * std::max(1.0, c * row_sum));
    }
}

TEST_CASE("mel_project rejects bad inputs") {
    Spectrogram spec;
    spec.n_frames = 1;
    spec.n_bins = 257;
    spec.bin_hz = 16000.0 / 512.0;
    spec.scale = Spectrogram::Scale::Linear;
    spec.mags.assign(257, 1.0);
    CHECK_THROWS_AS(mel_project(spec, 64, 2000.0, 50.0), ValidationError);
    CHECK_THROWS_AS(mel_project(spec, 64, 50.0, 9000.0), ValidationError);

    Spectrogram already = mel_project(spec);
    CHECK_THROWS_AS(mel_project(already), ValidationError);
}

// ============================================================================
// Tensor mapping
// ============================================================================

TEST_CASE("spectrogram_to_tensor endpoint mappings and shape") {
    Spectrogram spec;
    spec.n_frames = 20;
    spec.n_bins = 257;
    spec.bin_hz = 16000.0 / 512.0;
    spec.scale = Spectrogram::Scale::Linear;

    spec.mags.assign(spec.n_frames * spec.n_bins, 0.0);
    const InputTensor zero_t = spectrogram_to_tensor(spec);
    CHECK(zero_t.channels == 1);
    CHECK(zero_t.height == 64);
    CHECK(zero_t.width == 64);
    for (float v : zero_t.values) CHECK(v == 0.0f);

    spec.mags.assign(spec.n_frames * spec.n_bins, 1.0);
    const InputTensor one_t = spectrogram_to_tensor(spec);
    for (float v : one_t.values) CHECK(v == doctest::Approx(1.0f).epsilon(1e-6));

    spec.n_frames = 3;
    spec.mags.assign(spec.n_frames * spec.n_bins, 0.5);
    const InputTensor small = spectrogram_to_tensor(spec);
    CHECK(small.values.size() == 64 * 64);
}

TEST_CASE("spectrogram_to_tensor is monotone in magnitudes") {
    Rng rng(12);
    Spectrogram a;
    a.n_frames = 9;
    a.n_bins = 33;
    a.bin_hz = 1.0;
    a.scale = Spectrogram::Scale::Mel;
    a.mags.resize(a.n_frames * a.n_bins);
    for (double& v : a.mags) v = rng.uniform(0.0, 1.0);
    Spectrogram b = a;
    for (double& v : b.mags) v += rng.uniform(0.0, 0.5);

    const InputTensor ta = spectrogram_to_tensor(a);
    const InputTensor tb = spectrogram_to_tensor(b);
    for (size_t i = 0; i < ta.values.size(); ++i) {
        CHECK(tb.values[i] >= ta.values[i] - 1e-7f);
    }
}

// ============================================================================
// Vibration FFT
// ============================================================================

namespace {

VibrationWindow vib_window(const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<double>& z) {
    VibrationWindow w;
    w.x = x;
    w.y = y;
    w.z = z;
    w.sample_rate_hz = 200;
    return w;
}

} // namespace

TEST_CASE("vibration_fft removes DC and finds tones at the right bin") {
    const std::vector<double> dc(400, 0.7);
    const std::vector<double> zeros(400, 0.0);
    std::vector<double> tone(400);
    for (size_t i = 0; i < tone.size(); ++i) {
        tone[i] = 0.5 * std::sin(2.0 * kPi * 20.0 * static_cast<double>(i) / 200.0);
    }

    const auto spectra = vibration_fft(vib_window(tone, dc, zeros));
    REQUIRE(spectra[0].size() == 129);

    size_t best = 0;
    for (size_t k = 1; k < spectra[0].size(); ++k) {
        if (spectra[0][k] > spectra[0][best]) best = k;
    }
    CHECK(best == 26);  // 20 * 256 / 200 = 25.6 rounds into bin 26 via the Hann lobe
    for (double v : spectra[1]) CHECK(v <= 1e-9);
    for (double v : spectra[2]) CHECK(v == 0.0);
}

TEST_CASE("vibration tensor shape, zero case, and short-window error") {
    const std::vector<double> zeros(400, 0.0);
    const InputTensor t = vibration_to_tensor(vib_window(zeros, zeros, zeros));
    CHECK(t.channels == 3);
    CHECK(t.height == 64);
    CHECK(t.width == 64);
    for (float v : t.values) CHECK(v == 0.0f);

    const std::vector<double> tiny(100, 0.0);
    CHECK_THROWS_AS(vibration_fft(vib_window(tiny, tiny, tiny)), ValidationError);
}

// ============================================================================
// Thermal tensor
// ============================================================================

TEST_CASE("thermal tensor preserves uniform values and shape") {
    ThermalFrame f;
    f.width = 160;
    f.height = 120;
    f.pixels.assign(160 * 120, 0.5);
    const InputTensor t = thermal_to_tensor(f);
    CHECK(t.channels == 1);
    CHECK(t.height == 64);
    CHECK(t.width == 64);
    for (float v : t.values) CHECK(v == doctest::Approx(0.5f).epsilon(1e-6));
}

TEST_CASE("thermal hot spot lands within one pixel of the scaled location") {
    ThermalFrame f;
    f.width = 160;
    f.height = 120;
    f.pixels.assign(160 * 120, 0.1);
    const int sx = 80, sy = 40;
    // A small plateau so bilinear smoothing cannot shift the peak.
    for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
            f.pixels[static_cast<size_t>(sy + dy) * 160 + (sx + dx)] = 1.0;
        }
    }
    const InputTensor t = thermal_to_tensor(f);
    size_t best = 0;
    for (size_t i = 1; i < t.values.size(); ++i) {
        if (t.values[i] > t.values[best]) best = i;
    }
    const int by = static_cast<int>(best) / 64;
    const int bx = static_cast<int>(best) % 64;
    const int ex = static_cast<int>(std::lround((sx + 0.5) * 64.0 / 160.0 - 0.5));
    const int ey = static_cast<int>(std::lround((sy + 0.5) * 64.0 / 120.0 - 0.5));
    CHECK(std::abs(bx - ex) <= 1);
    CHECK(std::abs(by - ey) <= 1);
}

// ============================================================================
// Channel balance
// ============================================================================

TEST_CASE("channel balance measures the stereo level ratio") {
    AudioWindow w;
    w.left = sine(440.0, 16000.0, 1600, 0.4);
    w.right = w.left;
    CHECK(channel_balance_db(w) == 0.0);

    for (double& v : w.left) v *= 2.0;
    CHECK(std::abs(channel_balance_db(w) - 6.02) <= 0.01);

    AudioWindow silent;
    silent.left.assign(1600, 0.0);
    silent.right.assign(1600, 0.0);
    CHECK(channel_balance_db(silent) == 0.0);
}
