#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdms/signal_core.hpp"

namespace fdms {

// ============================================================================
// Sensitivity weighting
// ============================================================================

enum class Sensitivity : int { High = 0, Partial = 1, Low = 2 };

// Per (fault, modality) qualitative sensitivity with the numeric weight
// mapping applied at fusion time. Weights must stay strictly positive.
struct SensitivityMatrix {
    // Value-initialized to all-High (uniform weights); default_sensitivity()
    // builds the standard per-fault table.
    Sensitivity level[kNumFaultClasses][kNumModalities] = {};
    double weight_high = 1.0;
    double weight_partial = 0.5;
    double weight_low = 0.1;

    Sensitivity at(FaultClass f, Modality m) const {
        return level[static_cast<int>(f)][static_cast<int>(m)];
    }
    void set(FaultClass f, Modality m, Sensitivity s) {
        level[static_cast<int>(f)][static_cast<int>(m)] = s;
    }
    double weight(FaultClass f, Modality m) const {
        switch (at(f, m)) {
            case Sensitivity::High: return weight_high;
            case Sensitivity::Partial: return weight_partial;
            default: return weight_low;
        }
    }
    void validate_or_throw() const;
};

// Default table: acoustic covers extrusion-path faults, vibration covers
// motion-system faults, thermal covers heat-signature faults.
SensitivityMatrix default_sensitivity();

struct FusionConfig {
    double threshold = 0.8;
    int debounce_k = 3;
    int64_t staleness_ms = 2000;
    void validate_or_throw() const;
};

// ============================================================================
// Fusion, flagging, debounce, localization
// ============================================================================

// One modality's class probabilities stamped with the window timestamp used
// for staleness checks. probs aligns with the shared class list.
struct ModalityScores {
    Modality modality = Modality::Acoustic;
    int64_t ts_ms = 0;
    std::vector<double> probs;
};

// Sensitivity-weighted average over present, non-stale modalities:
// fused[f] = sum_m w(f,m) p_m[f] / sum_m w(f,m). Throws ValidationError when
// no modality is usable.
std::vector<double> fuse(const std::vector<FaultClass>& classes,
                         const std::vector<ModalityScores>& scores,
                         const SensitivityMatrix& matrix, const FusionConfig& config,
                         int64_t now_ms);

// Highest-probability non-Normal class if it reaches the threshold; ties
// break toward the lowest class code.
std::optional<FaultClass> flag(const std::vector<FaultClass>& classes,
                               const std::vector<double>& fused, const FusionConfig& config);

enum class AlarmEvent : int { None = 0, Raised = 1, Cleared = 2 };

// Raised fires exactly when a fault's consecutive-flag run length reaches
// debounce_k; the alarm clears after debounce_k consecutive windows whose
// flag is absent or names a different fault.
struct DebounceState {
    std::optional<FaultClass> current_fault;
    int run_length = 0;
    bool alarm_active = false;
    std::optional<FaultClass> alarm_fault;
    int miss_count = 0;
};

AlarmEvent debounce_step(DebounceState& state, std::optional<FaultClass> flag_result,
                         const FusionConfig& config);

enum class Localization : int { Left = 0, Right = 1, Center = 2, Unknown = 3 };

const std::string& localization_name(Localization l);

// Left above +3 dB, Right below -3 dB, Center inside the dead zone
// (boundaries inclusive).
Localization localize(double balance_db);

struct FusionDecision {
    std::vector<FaultClass> classes;
    std::vector<double> fused;
    std::optional<FaultClass> flagged;
    std::vector<Modality> modalities_used;
    Localization localization = Localization::Unknown;
};

// ============================================================================
// Config file loading
// ============================================================================

// JSON schema (all keys optional, defaults fill the rest):
// {
//   "threshold": 0.8, "debounce_k": 3, "staleness_ms": 2000,
//   "weights": {"high": 1.0, "partial": 0.5, "low": 0.1},
//   "sensitivity": {"<fault>": {"<modality>": "high"|"partial"|"low", ...}, ...}
// }
// Unknown keys anywhere are rejected with ConfigError.
struct FusionSettings {
    FusionConfig config;
    SensitivityMatrix matrix;
};

FusionSettings parse_fusion_settings(const std::string& json_text);
FusionSettings load_fusion_settings(const std::string& path);

} // namespace fdms
