#include "fdms/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "fdms/datasets.hpp"
#include "fdms/dsp.hpp"
#include "fdms/errors.hpp"
#include "fdms/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fdms {

// ============================================================================
// Bounded queue
// ============================================================================

void BoundedItemQueue::push(MonitorItem item) {
    std::unique_lock<std::mutex> lock(mu_);
    not_full_.wait(lock, [this] { return items_.size() < capacity_ || closed_; });
    if (closed_) return;  // late push after close: drop, stream is ending anyway
    items_.push_back(std::move(item));
    not_empty_.notify_all();
}

void BoundedItemQueue::close() {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
}

PopStatus BoundedItemQueue::pop_leq(int64_t tick_ms, MonitorItem& out) {
    std::unique_lock<std::mutex> lock(mu_);
    not_empty_.wait(lock, [this] { return !items_.empty() || closed_; });
    if (items_.empty()) return PopStatus::Finished;
    if (items_.front().ts_ms > tick_ms) return PopStatus::Pending;
    out = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_all();
    return PopStatus::Item;
}

// ============================================================================
// Ingestion workers
// ============================================================================

namespace {

void push_error(BoundedItemQueue& q, int64_t ts_ms, const std::string& message) {
    MonitorItem item;
    item.ts_ms = ts_ms;
    item.error = message;
    q.push(std::move(item));
}

// Scores every full 2 s window of the recording. Windows are stamped with
// their end time, matching the dataset windowing protocol.
void audio_worker(const std::string& path, const Model& model, BoundedItemQueue& q) {
    try {
        const WavData wav = read_wav(path);
        AudioWindow full;
        if (wav.channels.size() == 1) {
            full.left = wav.channels[0];
            full.right = wav.channels[0];
        } else if (wav.channels.size() == 2) {
            full.left = wav.channels[0];
            full.right = wav.channels[1];
        } else {
            throw FormatError(path + ": expected 1 or 2 channels, got " +
                              std::to_string(wav.channels.size()));
        }
        full.sample_rate_hz = wav.sample_rate_hz;
        full.start_ts_ms = 0;
        const double duration_s =
            static_cast<double>(full.left.size()) / full.sample_rate_hz;
        for (double t0 : window_start_times(duration_s)) {
            const AudioWindow w = slice_audio(full, t0);
            const InputTensor tensor = audio_to_tensor(w);
            const ClassScores scores = forward<float>(model, tensor.values);
            MonitorItem item;
            item.ts_ms = std::llround(1000.0 * (t0 + kWindowLenS));
            item.probs = scores.probs;
            item.balance_db = channel_balance_db(w);
            item.has_balance = true;
            q.push(std::move(item));
        }
    } catch (const std::exception& e) {
        push_error(q, 0, std::string("audio: ") + e.what());
    }
    q.close();
}

void vibration_worker(const std::string& path, const Model& model, int rate_hz,
                      BoundedItemQueue& q) {
    try {
        const AccelSeries series = read_accel_csv(path);
        VibrationWindow full = accel_to_window(series, rate_hz);
        full.start_ts_ms = 0;
        const double duration_s = static_cast<double>(full.x.size()) / rate_hz;
        for (double t0 : window_start_times(duration_s)) {
            const VibrationWindow w = slice_vibration(full, t0);
            const InputTensor tensor = vibration_to_input(w);
            const ClassScores scores = forward<float>(model, tensor.values);
            MonitorItem item;
            item.ts_ms = std::llround(1000.0 * (t0 + kWindowLenS));
            item.probs = scores.probs;
            q.push(std::move(item));
        }
    } catch (const std::exception& e) {
        push_error(q, 0, std::string("vibration: ") + e.what());
    }
    q.close();
}

// Classifies every frame. A directory input tolerates individually corrupt
// frames; a concatenated stream stops at the first malformed image.
void thermal_worker(const std::string& path, const Model& model, int fps,
                    BoundedItemQueue& q) {
    try {
        if (fs::is_directory(path)) {
            std::vector<std::pair<long long, fs::path>> numbered;
            for (const auto& entry : fs::directory_iterator(path)) {
                const std::string fname = entry.path().filename().string();
                if (fname.rfind("frame_", 0) == 0 && fname.size() > 10 &&
                    fname.substr(fname.size() - 4) == ".pgm") {
                    const std::string digits = fname.substr(6, fname.size() - 10);
                    if (!digits.empty() &&
                        std::all_of(digits.begin(), digits.end(), [](char c) {
                            return std::isdigit(static_cast<unsigned char>(c));
                        })) {
                        numbered.emplace_back(std::stoll(digits), entry.path());
                    }
                }
            }
            std::sort(numbered.begin(), numbered.end());
            for (const auto& [num, frame_path] : numbered) {
                const int64_t ts = std::llround(1000.0 * static_cast<double>(num) / fps);
                try {
                    ThermalFrame f = read_pgm(frame_path.string());
                    f.ts_ms = ts;
                    const InputTensor tensor = thermal_to_input(f);
                    const ClassScores scores = forward<float>(model, tensor.values);
                    MonitorItem item;
                    item.ts_ms = ts;
                    item.probs = scores.probs;
                    q.push(std::move(item));
                } catch (const std::exception& e) {
                    push_error(q, ts, std::string("thermal: ") + e.what());
                }
            }
        } else {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open " + path);
            long long index = 0;
            for (;;) {
                std::optional<ThermalFrame> f = read_pgm_stream(in, path);
                if (!f.has_value()) break;
                f->ts_ms = std::llround(1000.0 * static_cast<double>(index) / fps);
                ++index;
                const InputTensor tensor = thermal_to_input(*f);
                const ClassScores scores = forward<float>(model, tensor.values);
                MonitorItem item;
                item.ts_ms = f->ts_ms;
                item.probs = scores.probs;
                q.push(std::move(item));
            }
        }
    } catch (const std::exception& e) {
        push_error(q, 0, std::string("thermal: ") + e.what());
    }
    q.close();
}

struct Source {
    Modality modality = Modality::Acoustic;
    BoundedItemQueue queue;
    bool finished = false;
    bool any_data = false;
    std::optional<MonitorItem> latest;
};

const char* alarm_name(AlarmEvent e) {
    switch (e) {
        case AlarmEvent::Raised: return "raised";
        case AlarmEvent::Cleared: return "cleared";
        default: return "none";
    }
}

} // namespace

// ============================================================================
// Fusion consumer
// ============================================================================

MonitorSummary run_monitor(const MonitorInputs& inputs,
                           const std::map<Modality, const Model*>& models,
                           const MonitorOptions& options, std::ostream& out) {
    options.config.validate_or_throw();
    options.matrix.validate_or_throw();

    std::vector<std::pair<Modality, std::string>> enabled;
    if (inputs.audio_path) enabled.emplace_back(Modality::Acoustic, *inputs.audio_path);
    if (inputs.vibration_path) enabled.emplace_back(Modality::Vibration, *inputs.vibration_path);
    if (inputs.thermal_path) enabled.emplace_back(Modality::Thermal, *inputs.thermal_path);
    if (enabled.empty()) throw ValidationError("run_monitor: no inputs");

    const Model* first_model = nullptr;
    for (const auto& [modality, path] : enabled) {
        const auto it = models.find(modality);
        if (it == models.end() || it->second == nullptr) {
            throw ValidationError("run_monitor: missing model for " + modality_name(modality));
        }
        if (!first_model) first_model = it->second;
        if (it->second->class_codes != first_model->class_codes) {
            throw ValidationError("run_monitor: models disagree on the class set");
        }
    }
    const std::vector<FaultClass> classes = first_model->class_codes;
    json class_names = json::array();
    for (FaultClass c : classes) class_names.push_back(fault_name(c));

    std::deque<Source> sources;
    std::vector<std::thread> workers;
    for (const auto& [modality, path] : enabled) {
        sources.emplace_back();
        Source& src = sources.back();
        src.modality = modality;
        const Model* model = models.at(modality);
        switch (modality) {
            case Modality::Acoustic:
                workers.emplace_back(audio_worker, path, std::cref(*model), std::ref(src.queue));
                break;
            case Modality::Vibration:
                workers.emplace_back(vibration_worker, path, std::cref(*model),
                                     options.vib_rate_hz, std::ref(src.queue));
                break;
            case Modality::Thermal:
                workers.emplace_back(thermal_worker, path, std::cref(*model),
                                     options.thermal_fps, std::ref(src.queue));
                break;
        }
    }

    MonitorSummary summary;
    DebounceState debounce;
    int64_t max_ts = 0;
    int64_t window_id = 0;

    for (int64_t tick = kTickMs;; tick += kTickMs) {
        std::vector<std::string> errors;
        for (Source& src : sources) {
            while (!src.finished) {
                MonitorItem item;
                const PopStatus status = src.queue.pop_leq(tick, item);
                if (status == PopStatus::Finished) {
                    src.finished = true;
                    break;
                }
                if (status == PopStatus::Pending) break;
                max_ts = std::max(max_ts, item.ts_ms);
                if (!item.error.empty()) {
                    errors.push_back(item.error);
                    ++summary.stream_errors;
                    continue;
                }
                src.any_data = true;
                if (!src.latest || item.ts_ms >= src.latest->ts_ms) src.latest = std::move(item);
            }
        }

        std::vector<ModalityScores> usable;
        std::optional<double> balance;
        bool any_data = false;
        json stale_flags = json::object();
        for (const Source& src : sources) {
            if (!src.any_data) continue;
            any_data = true;
            const bool stale = tick - src.latest->ts_ms > options.config.staleness_ms;
            stale_flags[modality_name(src.modality)] = stale;
            if (stale) continue;
            if (src.latest->probs.size() != classes.size()) {
                throw ValidationError("run_monitor: model output size mismatch");
            }
            usable.push_back({src.modality, src.latest->ts_ms, src.latest->probs});
            if (src.latest->has_balance) balance = src.latest->balance_db;
        }

        if (!usable.empty()) {
            const std::vector<double> fused =
                fuse(classes, usable, options.matrix, options.config, tick);
            const std::optional<FaultClass> flagged = flag(classes, fused, options.config);
            const AlarmEvent alarm = debounce_step(debounce, flagged, options.config);
            if (alarm == AlarmEvent::Raised) ++summary.raised;
            if (alarm == AlarmEvent::Cleared) ++summary.cleared;
            const Localization loc =
                balance.has_value() ? localize(*balance) : Localization::Unknown;

            json e;
            e["ts_ms"] = tick;
            e["window_id"] = window_id++;
            e["alarm"] = alarm_name(alarm);
            e["classes"] = class_names;
            json score_obj = json::object();
            json used = json::array();
            for (const ModalityScores& s : usable) {
                score_obj[modality_name(s.modality)] = s.probs;
                used.push_back(modality_name(s.modality));
            }
            e["scores"] = std::move(score_obj);
            e["fused"] = fused;
            e["flagged"] = flagged.has_value() ? json(fault_name(*flagged)) : json(nullptr);
            e["localization"] = localization_name(loc);
            e["modalities_used"] = std::move(used);
            e["stale"] = std::move(stale_flags);
            if (!errors.empty()) e["errors"] = errors;
            out << e.dump() << '\n';
            out.flush();
            ++summary.events;
        } else if (any_data || !errors.empty()) {
            json e;
            e["ts_ms"] = tick;
            e["window_id"] = window_id++;
            e["alarm"] = alarm_name(AlarmEvent::None);
            if (any_data) e["stale"] = std::move(stale_flags);
            if (!errors.empty()) e["errors"] = errors;
            out << e.dump() << '\n';
            out.flush();
            ++summary.events;
        }

        bool all_finished = true;
        for (const Source& src : sources) all_finished &= src.finished;
        if (all_finished && tick >= max_ts) break;
    }

    for (std::thread& t : workers) t.join();
    return summary;
}

} // namespace fdms
