#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fdms/cnn.hpp"
#include "fdms/fusion.hpp"
#include "fdms/signal_core.hpp"

namespace fdms {

// Live monitoring loop: one ingestion worker thread per enabled modality
// scores analysis windows as data arrives and hands them to a single fusion
// consumer through a bounded queue. The consumer advances a virtual clock in
// 1 s ticks and aligns modalities by timestamp, so the emitted event stream
// is independent of thread scheduling.

inline constexpr int64_t kTickMs = 1000;

// Scored analysis window (or stream error) flowing from an ingestion worker
// to the fusion consumer.
struct MonitorItem {
    int64_t ts_ms = 0;               // window end timestamp
    std::vector<double> probs;       // empty for error items
    double balance_db = 0.0;         // acoustic windows only
    bool has_balance = false;
    std::string error;               // non-empty: malformed chunk message
};

enum class PopStatus : int {
    Item = 0,      // an item with ts_ms <= the tick was surrendered
    Pending = 1,   // the next item is beyond the tick; try again next tick
    Finished = 2,  // stream closed and fully drained
};

// Fixed-capacity FIFO: producers block when full (backpressure, nothing is
// dropped). pop_leq only surrenders an item once no earlier-stamped item can
// still arrive: the head is beyond the tick, or the stream closed.
class BoundedItemQueue {
public:
    explicit BoundedItemQueue(size_t capacity = 4) : capacity_(capacity) {}

    void push(MonitorItem item);
    void close();
    PopStatus pop_leq(int64_t tick_ms, MonitorItem& out);

private:
    const size_t capacity_;
    std::mutex mu_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<MonitorItem> items_;
    bool closed_ = false;
};

struct MonitorInputs {
    // WAV recording (stereo or mono).
    std::optional<std::string> audio_path;
    // Accelerometer CSV.
    std::optional<std::string> vibration_path;
    // Directory of numbered frames, or a file of concatenated P5 images.
    std::optional<std::string> thermal_path;
};

struct MonitorOptions {
    FusionConfig config;
    SensitivityMatrix matrix = default_sensitivity();
    int vib_rate_hz = 200;  // CSV carries timestamps but not a rate
    int thermal_fps = 8;    // frame timestamps for numbered/streamed frames
};

struct MonitorSummary {
    size_t events = 0;
    size_t raised = 0;
    size_t cleared = 0;
    size_t stream_errors = 0;
};

// Runs the monitor over the provided inputs. Every input path must have a
// model for its modality; all models must share one class set. Emits one
// JSON object per line on `out` (line-buffered, never split mid-object) and
// returns counts. Blocks until every input is exhausted.
MonitorSummary run_monitor(const MonitorInputs& inputs,
                           const std::map<Modality, const Model*>& models,
                           const MonitorOptions& options, std::ostream& out);

} // namespace fdms
