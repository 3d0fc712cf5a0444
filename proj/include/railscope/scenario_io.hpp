#pragma once

// Scenario documents (JSON). Schema: docs/scenario_schema.md.

#include "railscope/capture_engine.hpp"
#include "railscope/dut_synth.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace railscope {

struct ScenarioDocument {
    Scenario scenario;
    CaptureSettings capture;

    bool operator==(const ScenarioDocument&) const = default;
};

/// Throws DataError with the offending key on schema violations; the parsed
/// scenario is validated before returning.
ScenarioDocument parse_scenario(std::string_view json_text);
std::string serialize_scenario(const ScenarioDocument& doc);

ScenarioDocument load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const ScenarioDocument& doc);

/// Camera streaming 1000 ingress frames (1518 B, 1 kHz) into PHY2 while the
/// PL is busy; the PS raises the trigger after the last frame and takes over
/// the processing. 2 s long, all nine default rails.
ScenarioDocument visual_servoing_preset();

}  // namespace railscope
