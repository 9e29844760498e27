#pragma once
// Plain-text `key = value` run configuration. Every key is range-checked
// as it is read; unknown keys are rejected.
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "imb/simulator.hpp"

namespace imb {

struct RunConfig {
  CampaignConfig campaign;
  std::filesystem::path demand_csv;  // empty: synthetic fleet
  std::filesystem::path holidays;
};

// Applies one assignment. `where` prefixes error messages.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value, const std::string& where);

// Lines are `key = value`; blank lines and `#` comments are skipped.
void apply_config_text(RunConfig& config, std::string_view text, const std::string& source);
RunConfig load_run_config(const std::filesystem::path& path);

// `key=value` as given to --set.
void apply_override(RunConfig& config, std::string_view assignment);

// Every recognized key, in documentation order.
std::vector<std::string> config_keys();

// Renders the configuration back to text that apply_config_text accepts.
std::string render_config(const RunConfig& config);

}  // namespace imb
