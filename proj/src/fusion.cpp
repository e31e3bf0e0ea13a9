#include "fdms/fusion.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fdms/errors.hpp"

namespace fdms {

void SensitivityMatrix::validate_or_throw() const {
    if (!(weight_high > 0.0) || !(weight_partial > 0.0) || !(weight_low > 0.0)) {
        throw ValidationError("SensitivityMatrix: weights must be strictly positive");
    }
}

void FusionConfig::validate_or_throw() const {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ValidationError("FusionConfig: threshold must be in (0, 1)");
    }
    if (debounce_k < 1) throw ValidationError("FusionConfig: debounce_k must be >= 1");
    if (staleness_ms <= 0) throw ValidationError("FusionConfig: staleness_ms must be > 0");
}

SensitivityMatrix default_sensitivity() {
    SensitivityMatrix m;
    const auto set_all = [&m](FaultClass f, Sensitivity a, Sensitivity v, Sensitivity t) {
        m.set(f, Modality::Acoustic, a);
        m.set(f, Modality::Vibration, v);
        m.set(f, Modality::Thermal, t);
    };
    using S = Sensitivity;
    set_all(FaultClass::Normal, S::Partial, S::Partial, S::Partial);
    set_all(FaultClass::MaterialRunout, S::High, S::Low, S::High);
    set_all(FaultClass::NozzleClog, S::High, S::Low, S::High);
    set_all(FaultClass::OverExtrusion, S::High, S::Low, S::Partial);
    set_all(FaultClass::BedAdhesionFailure, S::Partial, S::Partial, S::Low);
    set_all(FaultClass::LayerShift, S::Low, S::High, S::Low);
    set_all(FaultClass::BeltSlip, S::Low, S::High, S::Low);
    set_all(FaultClass::HotEndTempDrift, S::Low, S::Low, S::High);
    set_all(FaultClass::ExtruderGearSlip, S::High, S::Partial, S::Low);
    return m;
}

std::vector<double> fuse(const std::vector<FaultClass>& classes,
                         const std::vector<ModalityScores>& scores,
                         const SensitivityMatrix& matrix, const FusionConfig& config,
                         int64_t now_ms) {
    config.validate_or_throw();
    matrix.validate_or_throw();
    if (classes.empty()) throw ValidationError("fuse: empty class list");

    std::vector<const ModalityScores*> usable;
    for (const ModalityScores& s : scores) {
        if (s.probs.size() != classes.size()) {
            throw ValidationError("fuse: " + modality_name(s.modality) + " probs size " +
                                  std::to_string(s.probs.size()) + " does not match class count " +
                                  std::to_string(classes.size()));
        }
        if (now_ms - s.ts_ms <= config.staleness_ms) usable.push_back(&s);
    }
    if (usable.empty()) {
        throw ValidationError("fuse: no non-stale modality data at t=" + std::to_string(now_ms));
    }

    std::vector<double> fused(classes.size(), 0.0);
    for (size_t i = 0; i < classes.size(); ++i) {
        double num = 0.0, den = 0.0;
        for (const ModalityScores* s : usable) {
            const double w = matrix.weight(classes[i], s->modality);
            num += w * s->probs[i];
            den += w;
        }
        fused[i] = num / den;
    }
    return fused;
}

std::optional<FaultClass> flag(const std::vector<FaultClass>& classes,
                               const std::vector<double>& fused, const FusionConfig& config) {
    if (fused.size() != classes.size()) {
        throw ValidationError("flag: fused size does not match class count");
    }
    std::optional<size_t> best;
    for (size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] == FaultClass::Normal) continue;
        if (!best || fused[i] > fused[*best] ||
            (fused[i] == fused[*best] && classes[i] < classes[*best])) {
            best = i;
        }
    }
    if (best && fused[*best] >= config.threshold) return classes[*best];
    return std::nullopt;
}

AlarmEvent debounce_step(DebounceState& state, std::optional<FaultClass> flag_result,
                         const FusionConfig& config) {
    config.validate_or_throw();
    if (flag_result.has_value()) {
        if (state.current_fault == flag_result) {
            ++state.run_length;
        } else {
            state.current_fault = flag_result;
            state.run_length = 1;
        }
    } else {
        state.current_fault.reset();
        state.run_length = 0;
    }

    if (flag_result.has_value() && state.run_length == config.debounce_k) {
        state.alarm_active = true;
        state.alarm_fault = flag_result;
        state.miss_count = 0;
        return AlarmEvent::Raised;
    }

    if (state.alarm_active) {
        if (flag_result == state.alarm_fault) {
            state.miss_count = 0;
        } else {
            ++state.miss_count;
            if (state.miss_count >= config.debounce_k) {
                state.alarm_active = false;
                state.alarm_fault.reset();
                state.miss_count = 0;
                return AlarmEvent::Cleared;
            }
        }
    }
    return AlarmEvent::None;
}

const std::string& localization_name(Localization l) {
    static const std::array<std::string, 4> names = {"left", "right", "center", "unknown"};
    return names.at(static_cast<size_t>(l));
}

Localization localize(double balance_db) {
    if (balance_db > 3.0) return Localization::Left;
    if (balance_db < -3.0) return Localization::Right;
    return Localization::Center;
}

// ============================================================================
// Config file loading
// ============================================================================

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError("fusion config: unknown key \"" + key + "\" in " + where);
    }
}

double require_number(const json& v, const std::string& what) {
    if (!v.is_number()) throw ConfigError("fusion config: " + what + " must be a number");
    return v.get<double>();
}

Sensitivity parse_level(const json& v, const std::string& what) {
    if (!v.is_string()) throw ConfigError("fusion config: " + what + " must be a string");
    const std::string s = v.get<std::string>();
    if (s == "high") return Sensitivity::High;
    if (s == "partial") return Sensitivity::Partial;
    if (s == "low") return Sensitivity::Low;
    throw ConfigError("fusion config: " + what + " must be one of high/partial/low, got \"" + s +
                      "\"");
}

} // namespace

FusionSettings parse_fusion_settings(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("fusion config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("fusion config: top level must be an object");

    FusionSettings out;
    out.matrix = default_sensitivity();

    reject_unknown_keys(root, {"threshold", "debounce_k", "staleness_ms", "weights", "sensitivity"},
                        "top level");
    if (root.contains("threshold")) {
        out.config.threshold = require_number(root["threshold"], "threshold");
    }
    if (root.contains("debounce_k")) {
        if (!root["debounce_k"].is_number_integer()) {
            throw ConfigError("fusion config: debounce_k must be an integer");
        }
        out.config.debounce_k = root["debounce_k"].get<int>();
    }
    if (root.contains("staleness_ms")) {
        if (!root["staleness_ms"].is_number_integer()) {
            throw ConfigError("fusion config: staleness_ms must be an integer");
        }
        out.config.staleness_ms = root["staleness_ms"].get<int64_t>();
    }
    if (root.contains("weights")) {
        const json& w = root["weights"];
        if (!w.is_object()) throw ConfigError("fusion config: weights must be an object");
        reject_unknown_keys(w, {"high", "partial", "low"}, "weights");
        if (w.contains("high")) out.matrix.weight_high = require_number(w["high"], "weights.high");
        if (w.contains("partial")) {
            out.matrix.weight_partial = require_number(w["partial"], "weights.partial");
        }
        if (w.contains("low")) out.matrix.weight_low = require_number(w["low"], "weights.low");
    }
    if (root.contains("sensitivity")) {
        const json& sens = root["sensitivity"];
        if (!sens.is_object()) throw ConfigError("fusion config: sensitivity must be an object");
        for (const auto& [fault_key, levels] : sens.items()) {
            const auto fault = fault_from_name(fault_key);
            if (!fault) {
                throw ConfigError("fusion config: unknown fault class \"" + fault_key +
                                  "\" in sensitivity");
            }
            if (!levels.is_object()) {
                throw ConfigError("fusion config: sensitivity." + fault_key +
                                  " must be an object");
            }
            reject_unknown_keys(levels, {"acoustic", "vibration", "thermal"},
                                "sensitivity." + fault_key);
            for (const auto& [mod_key, level] : levels.items()) {
                const auto mod = modality_from_name(mod_key);
                out.matrix.set(*fault, *mod,
                               parse_level(level, "sensitivity." + fault_key + "." + mod_key));
            }
        }
    }

    try {
        out.config.validate_or_throw();
        out.matrix.validate_or_throw();
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("fusion config: ") + e.what());
    }
    return out;
}

FusionSettings load_fusion_settings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("fusion config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_fusion_settings(buf.str());
}

} // namespace fdms
