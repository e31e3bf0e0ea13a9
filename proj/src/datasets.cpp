#include "fdms/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fdms/errors.hpp"

namespace fs = std::filesystem;

namespace fdms {

namespace {

void write_u16(std::ostream& out, uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
    out.write(b, 2);
}

void write_u32(std::ostream& out, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

bool read_exact(std::istream& in, char* dst, size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    return static_cast<size_t>(in.gcount()) == n;
}

uint32_t load_u32(const char* b) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

uint16_t load_u16(const char* b) {
    return static_cast<uint16_t>(static_cast<unsigned char>(b[0]) |
                                 (static_cast<unsigned char>(b[1]) << 8));
}

} // namespace

// ============================================================================
// WAV
// ============================================================================

void write_wav(const std::string& path, const std::vector<std::vector<double>>& channels,
               int sample_rate_hz) {
    if (channels.empty()) throw ValidationError("write_wav: no channels");
    if (sample_rate_hz <= 0) throw ValidationError("write_wav: sample rate must be positive");
    const size_t n = channels[0].size();
    for (size_t c = 0; c < channels.size(); ++c) {
        if (channels[c].size() != n) throw ValidationError("write_wav: channel length mismatch");
        for (double s : channels[c]) {
            if (!std::isfinite(s) || std::abs(s) > 1.0 + 1e-9) {
                throw ValidationError("write_wav: sample outside [-1, 1] in channel " +
                                      std::to_string(c));
            }
        }
    }

    const uint32_t block_align = static_cast<uint32_t>(channels.size()) * 2;
    const uint32_t data_size = static_cast<uint32_t>(n * block_align);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_wav: cannot open " + path + " for writing");
    out.write("RIFF", 4);
    write_u32(out, 36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);  // PCM
    write_u16(out, static_cast<uint16_t>(channels.size()));
    write_u32(out, static_cast<uint32_t>(sample_rate_hz));
    write_u32(out, static_cast<uint32_t>(sample_rate_hz) * block_align);
    write_u16(out, static_cast<uint16_t>(block_align));
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_size);
    for (size_t i = 0; i < n; ++i) {
        for (const auto& ch : channels) {
            const long q =
                std::clamp(std::lround(ch[i] * 32768.0), -32768L, 32767L);
            write_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
        }
    }
    if (!out) throw std::runtime_error("write_wav: write failed for " + path);
}

namespace {

// Incremental RIFF walker; usable on non-seekable streams.
struct WavHeader {
    int channels = 0;
    int sample_rate_hz = 0;
    uint32_t data_size = 0;  // bytes of PCM payload following
};

WavHeader parse_wav_header(std::istream& in, const std::string& name) {
    char hdr[12];
    if (!read_exact(in, hdr, 12)) throw FormatError(name + ": truncated RIFF header");
    if (std::memcmp(hdr, "RIFF", 4) != 0) throw FormatError(name + ": missing RIFF chunk");
    if (std::memcmp(hdr + 8, "WAVE", 4) != 0) throw FormatError(name + ": missing WAVE tag");

    WavHeader out;
    bool have_fmt = false;
    for (;;) {
        char chunk[8];
        if (!read_exact(in, chunk, 8)) {
            throw FormatError(name + ": missing data chunk (unexpected end of file)");
        }
        const uint32_t size = load_u32(chunk + 4);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16) throw FormatError(name + ": fmt chunk too small");
            std::vector<char> fmt(size);
            if (!read_exact(in, fmt.data(), size)) {
                throw FormatError(name + ": truncated fmt chunk");
            }
            const uint16_t tag = load_u16(fmt.data());
            const uint16_t channels = load_u16(fmt.data() + 2);
            const uint32_t rate = load_u32(fmt.data() + 4);
            const uint16_t bits = load_u16(fmt.data() + 14);
            if (tag != 1 || bits != 16) {
                throw FormatError(name + ": unsupported encoding in fmt chunk (format tag " +
                                  std::to_string(tag) + ", " + std::to_string(bits) +
                                  "-bit); expected 16-bit PCM");
            }
            if (channels == 0) throw FormatError(name + ": fmt chunk declares zero channels");
            if (rate == 0) throw FormatError(name + ": fmt chunk declares zero sample rate");
            out.channels = channels;
            out.sample_rate_hz = static_cast<int>(rate);
            have_fmt = true;
            if (size % 2 == 1) in.ignore(1);
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (!have_fmt) throw FormatError(name + ": data chunk before fmt chunk");
            if (size % (static_cast<uint32_t>(out.channels) * 2) != 0) {
                throw FormatError(name + ": data chunk size " + std::to_string(size) +
                                  " is not a whole number of frames");
            }
            out.data_size = size;
            return out;
        } else {
            // Unknown chunk: skip payload (word aligned). ignore() works on pipes.
            in.ignore(static_cast<std::streamsize>(size) + (size % 2 == 1 ? 1 : 0));
            if (!in) throw FormatError(name + ": truncated chunk");
        }
    }
}

} // namespace

WavData read_wav_stream(std::istream& in, const std::string& name) {
    const WavHeader hdr = parse_wav_header(in, name);
    const size_t frames = hdr.data_size / (static_cast<size_t>(hdr.channels) * 2);
    WavData out;
    out.sample_rate_hz = hdr.sample_rate_hz;
    out.channels.assign(static_cast<size_t>(hdr.channels), {});
    for (auto& ch : out.channels) ch.reserve(frames);

    std::vector<char> buf(hdr.data_size);
    if (!read_exact(in, buf.data(), buf.size())) {
        throw FormatError(name + ": truncated data chunk");
    }
    const char* p = buf.data();
    for (size_t i = 0; i < frames; ++i) {
        for (int c = 0; c < hdr.channels; ++c) {
            const auto q = static_cast<int16_t>(load_u16(p));
            p += 2;
            out.channels[static_cast<size_t>(c)].push_back(static_cast<double>(q) / 32768.0);
        }
    }
    return out;
}

WavData read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_wav: cannot open " + path);
    return read_wav_stream(in, path);
}

// ============================================================================
// Accelerometer CSV
// ============================================================================

void write_accel_csv(const std::string& path, const AccelSeries& series) {
    if (series.x.size() != series.size() || series.y.size() != series.size() ||
        series.z.size() != series.size()) {
        throw ValidationError("write_accel_csv: column length mismatch");
    }
    for (size_t i = 0; i < series.size(); ++i) {
        if (i > 0 && series.t_ms[i] < series.t_ms[i - 1]) {
            throw ValidationError("write_accel_csv: t_ms not monotone at row " +
                                  std::to_string(i));
        }
        if (!std::isfinite(series.x[i]) || !std::isfinite(series.y[i]) ||
            !std::isfinite(series.z[i])) {
            throw ValidationError("write_accel_csv: non-finite value at row " + std::to_string(i));
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_accel_csv: cannot open " + path + " for writing");
    out << "t_ms,x,y,z\n";
    char buf[128];
    for (size_t i = 0; i < series.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%lld,%.6g,%.6g,%.6g\n",
                      static_cast<long long>(series.t_ms[i]), series.x[i], series.y[i],
                      series.z[i]);
        out << buf;
    }
    if (!out) throw std::runtime_error("write_accel_csv: write failed for " + path);
}

namespace {

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

double parse_double_cell(const std::string& cell, const char* column, size_t line_no,
                         const std::string& name) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw FormatError(name + ": line " + std::to_string(line_no) + ": non-numeric value \"" +
                          cell + "\" in column " + column);
    }
    if (!std::isfinite(v)) {
        throw FormatError(name + ": line " + std::to_string(line_no) +
                          ": non-finite value in column " + column);
    }
    return v;
}

} // namespace

AccelSeries read_accel_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_accel_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError(path + ": line 1: missing header (expected t_ms,x,y,z)");
    }
    if (strip_cr(line) != "t_ms,x,y,z") {
        throw FormatError(path + ": line 1: expected header t_ms,x,y,z, got \"" + strip_cr(line) +
                          "\"");
    }

    AccelSeries out;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) {
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw FormatError(path + ": line " + std::to_string(line_no) + ": empty line");
        }
        std::vector<std::string> cells;
        size_t start = 0;
        for (;;) {
            const size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != 4) {
            throw FormatError(path + ": line " + std::to_string(line_no) + ": expected 4 columns, got " +
                              std::to_string(cells.size()));
        }
        const char* tbegin = cells[0].c_str();
        char* tend = nullptr;
        const long long t = std::strtoll(tbegin, &tend, 10);
        if (tend == tbegin || *tend != '\0') {
            throw FormatError(path + ": line " + std::to_string(line_no) +
                              ": non-numeric value \"" + cells[0] + "\" in column t_ms");
        }
        if (!out.t_ms.empty() && t < out.t_ms.back()) {
            throw FormatError(path + ": line " + std::to_string(line_no) +
                              ": non-monotone t_ms (" + std::to_string(t) + " after " +
                              std::to_string(out.t_ms.back()) + ")");
        }
        out.t_ms.push_back(t);
        out.x.push_back(parse_double_cell(cells[1], "x", line_no, path));
        out.y.push_back(parse_double_cell(cells[2], "y", line_no, path));
        out.z.push_back(parse_double_cell(cells[3], "z", line_no, path));
    }
    return out;
}

VibrationWindow accel_to_window(const AccelSeries& series, int sample_rate_hz) {
    VibrationWindow w;
    w.x = series.x;
    w.y = series.y;
    w.z = series.z;
    w.sample_rate_hz = sample_rate_hz;
    w.start_ts_ms = series.t_ms.empty() ? 0 : series.t_ms.front();
    return w;
}

// ============================================================================
// PGM
// ============================================================================

void write_pgm(const std::string& path, const ThermalFrame& frame) {
    validate(frame);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path + " for writing");
    out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
    std::vector<char> bytes(frame.pixels.size());
    for (size_t i = 0; i < frame.pixels.size(); ++i) {
        bytes[i] = static_cast<char>(
            static_cast<unsigned char>(std::floor(frame.pixels[i] * 255.0 + 0.5)));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace {

// Reads the next PGM header integer, skipping whitespace and '#' comments.
int read_pgm_int(std::istream& in, const std::string& name, const char* what) {
    for (;;) {
        const int c = in.peek();
        if (c == std::char_traits<char>::eof()) {
            throw FormatError(name + ": truncated header (while reading " + what + ")");
        }
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    bool any = false;
    for (;;) {
        const int c = in.peek();
        if (c == std::char_traits<char>::eof() || !std::isdigit(c)) break;
        value = value * 10 + (c - '0');
        any = true;
        in.get();
        if (value > (1 << 20)) {
            throw FormatError(name + ": implausibly large " + std::string(what));
        }
    }
    if (!any) throw FormatError(name + ": expected integer for " + what);
    return value;
}

ThermalFrame read_pgm_from(std::istream& in, const std::string& name) {
    char magic[2];
    if (!read_exact(in, magic, 2)) throw FormatError(name + ": truncated magic");
    if (magic[0] != 'P' || magic[1] != '5') {
        throw FormatError(name + ": expected P5 magic, got \"" + std::string(magic, 2) + "\"");
    }
    const int width = read_pgm_int(in, name, "width");
    const int height = read_pgm_int(in, name, "height");
    const int maxval = read_pgm_int(in, name, "maxval");
    if (width < 1 || height < 1) throw FormatError(name + ": non-positive dimensions");
    if (static_cast<long long>(width) * height > (1LL << 26)) {
        throw FormatError(name + ": image too large");
    }
    if (maxval != 255) {
        throw FormatError(name + ": unsupported maxval " + std::to_string(maxval) +
                          " (expected 255)");
    }
    const int sep = in.get();
    if (sep == std::char_traits<char>::eof() || !std::isspace(sep)) {
        throw FormatError(name + ": missing whitespace after maxval");
    }
    std::vector<char> bytes(static_cast<size_t>(width) * height);
    if (!read_exact(in, bytes.data(), bytes.size())) {
        throw FormatError(name + ": truncated pixel data (expected " +
                          std::to_string(bytes.size()) + " bytes)");
    }
    ThermalFrame f;
    f.width = width;
    f.height = height;
    f.pixels.resize(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) {
        f.pixels[i] = static_cast<double>(static_cast<unsigned char>(bytes[i])) / 255.0;
    }
    return f;
}

} // namespace

ThermalFrame read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    return read_pgm_from(in, path);
}

std::optional<ThermalFrame> read_pgm_stream(std::istream& in, const std::string& name) {
    if (in.peek() == std::char_traits<char>::eof()) return std::nullopt;
    return read_pgm_from(in, name);
}

void write_thermal_sequence(const std::string& dir, const std::vector<ThermalFrame>& frames) {
    fs::create_directories(dir);
    char name[32];
    for (size_t i = 0; i < frames.size(); ++i) {
        std::snprintf(name, sizeof(name), "frame_%06zu.pgm", i);
        write_pgm((fs::path(dir) / name).string(), frames[i]);
    }
}

ThermalSequence read_thermal_sequence(const std::string& dir, double fps) {
    if (!fs::is_directory(dir)) {
        throw std::runtime_error("read_thermal_sequence: not a directory: " + dir);
    }
    if (!(fps > 0.0)) throw ValidationError("read_thermal_sequence: fps must be positive");

    std::vector<std::pair<long long, fs::path>> numbered;
    ThermalSequence out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string fname = entry.path().filename().string();
        if (fname.rfind("frame_", 0) == 0 && fname.size() > 10 &&
            fname.substr(fname.size() - 4) == ".pgm") {
            const std::string digits = fname.substr(6, fname.size() - 10);
            if (!digits.empty() &&
                std::all_of(digits.begin(), digits.end(),
                            [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
                numbered.emplace_back(std::stoll(digits), entry.path());
                continue;
            }
        }
        out.warnings.push_back("ignored non-frame file: " + fname);
    }
    std::sort(numbered.begin(), numbered.end());
    for (size_t i = 0; i < numbered.size(); ++i) {
        if (i > 0 && numbered[i].first == numbered[i - 1].first) {
            throw FormatError("read_thermal_sequence: duplicate frame number " +
                              std::to_string(numbered[i].first) + " in " + dir);
        }
        if (i > 0 && numbered[i].first != numbered[i - 1].first + 1) {
            out.warnings.push_back("gap in frame numbering between " +
                                   std::to_string(numbered[i - 1].first) + " and " +
                                   std::to_string(numbered[i].first));
        }
    }
    if (!numbered.empty() && numbered.front().first != 0) {
        out.warnings.push_back("first frame number is " + std::to_string(numbered.front().first));
    }
    for (const auto& [num, path] : numbered) {
        ThermalFrame f = read_pgm(path.string());
        f.ts_ms = std::llround(1000.0 * static_cast<double>(num) / fps);
        out.frames.push_back(std::move(f));
    }
    return out;
}

// ============================================================================
// Manifest
// ============================================================================

namespace {

using nlohmann::json;

} // namespace

void write_manifest(const std::string& path, const Manifest& manifest) {
    json root;
    root["format_version"] = manifest.format_version;
    json entries = json::array();
    for (const ManifestEntry& e : manifest.entries) {
        json obj;
        obj["scene_id"] = e.scene_id;
        obj["label"] = fault_name(e.label);
        obj["audio_path"] = e.audio_path;
        obj["vibration_path"] = e.vibration_path;
        obj["thermal_dir"] = e.thermal_dir;
        obj["duration_s"] = e.duration_s;
        obj["audio_rate_hz"] = e.audio_rate_hz;
        obj["vib_rate_hz"] = e.vib_rate_hz;
        obj["thermal_fps"] = e.thermal_fps;
        entries.push_back(std::move(obj));
    }
    root["entries"] = std::move(entries);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + path + " for writing");
    out << root.dump(2) << "\n";
    if (!out) throw std::runtime_error("write_manifest: write failed for " + path);
}

std::filesystem::path manifest_root(const std::string& manifest_path) {
    return fs::absolute(fs::path(manifest_path)).parent_path();
}

Manifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("manifest " + path + ": invalid JSON: " + e.what());
    }

    std::vector<std::string> errors;
    Manifest out;
    if (!root.is_object()) {
        throw FormatError("manifest " + path + ": top level must be an object");
    }
    for (const auto& [key, value] : root.items()) {
        if (key != "format_version" && key != "entries") {
            errors.push_back("unknown top-level key \"" + key + "\"");
        }
    }
    if (!root.contains("format_version") || !root["format_version"].is_number_integer()) {
        errors.push_back("missing or non-integer format_version");
    } else if (root["format_version"].get<int>() != 1) {
        errors.push_back("unsupported format_version " +
                         std::to_string(root["format_version"].get<int>()));
    }
    if (!root.contains("entries") || !root["entries"].is_array()) {
        errors.push_back("missing or non-array entries");
        throw ValidationError("manifest " + path + ": " + errors.front());
    }

    const fs::path base = manifest_root(path);
    std::vector<std::string> seen_ids;
    size_t idx = 0;
    for (const json& obj : root["entries"]) {
        const std::string where = "entry " + std::to_string(idx);
        ++idx;
        if (!obj.is_object()) {
            errors.push_back(where + ": not an object");
            continue;
        }
        static const char* kKeys[] = {"scene_id",      "label",         "audio_path",
                                      "vibration_path", "thermal_dir",   "duration_s",
                                      "audio_rate_hz",  "vib_rate_hz",   "thermal_fps"};
        for (const auto& [key, value] : obj.items()) {
            if (std::none_of(std::begin(kKeys), std::end(kKeys),
                             [&key](const char* k) { return key == k; })) {
                errors.push_back(where + ": unknown key \"" + key + "\"");
            }
        }
        ManifestEntry e;
        bool usable = true;
        const auto str_field = [&](const char* key, std::string& dst) {
            if (!obj.contains(key) || !obj[key].is_string()) {
                errors.push_back(where + ": missing or non-string " + key);
                usable = false;
            } else {
                dst = obj[key].get<std::string>();
            }
        };
        std::string label_str;
        str_field("scene_id", e.scene_id);
        str_field("label", label_str);
        str_field("audio_path", e.audio_path);
        str_field("vibration_path", e.vibration_path);
        str_field("thermal_dir", e.thermal_dir);
        if (!obj.contains("duration_s") || !obj["duration_s"].is_number()) {
            errors.push_back(where + ": missing or non-numeric duration_s");
            usable = false;
        } else {
            e.duration_s = obj["duration_s"].get<double>();
            if (!(e.duration_s > 0.0)) {
                errors.push_back(where + ": duration_s must be positive");
                usable = false;
            }
        }
        const auto rate_field = [&](const char* key, int& dst) {
            if (!obj.contains(key) || !obj[key].is_number_integer()) {
                errors.push_back(where + ": missing or non-integer " + key);
                usable = false;
            } else {
                dst = obj[key].get<int>();
                if (dst <= 0) {
                    errors.push_back(where + ": " + key + " must be positive");
                    usable = false;
                }
            }
        };
        rate_field("audio_rate_hz", e.audio_rate_hz);
        rate_field("vib_rate_hz", e.vib_rate_hz);
        rate_field("thermal_fps", e.thermal_fps);
        const bool fields_ok = usable;

        if (usable) {
            const auto label = fault_from_name(label_str);
            if (!label) {
                errors.push_back(where + " (" + e.scene_id + "): unknown fault class \"" +
                                 label_str + "\"");
                usable = false;
            } else {
                e.label = *label;
            }
        }
        if (usable) {
            if (std::find(seen_ids.begin(), seen_ids.end(), e.scene_id) != seen_ids.end()) {
                errors.push_back("duplicate scene_id \"" + e.scene_id + "\"");
                usable = false;
            } else {
                seen_ids.push_back(e.scene_id);
            }
        }
        // File checks only need the path fields, so run them even for entries
        // rejected later (duplicate ids); every problem gets reported at once.
        if (fields_ok) {
            if (!fs::is_regular_file(base / e.audio_path)) {
                errors.push_back(e.scene_id + ": missing audio file " + e.audio_path);
            }
            if (!fs::is_regular_file(base / e.vibration_path)) {
                errors.push_back(e.scene_id + ": missing vibration file " + e.vibration_path);
            }
            if (!fs::is_directory(base / e.thermal_dir)) {
                errors.push_back(e.scene_id + ": missing thermal directory " + e.thermal_dir);
            }
        }
        if (usable) out.entries.push_back(std::move(e));
    }

    if (!errors.empty()) {
        std::string msg = "manifest " + path + ": " + std::to_string(errors.size()) + " problem(s): ";
        for (size_t i = 0; i < errors.size(); ++i) {
            if (i) msg += "; ";
            msg += errors[i];
        }
        throw ValidationError(msg);
    }
    return out;
}

} // namespace fdms
