#pragma once
#include <json.hpp>

#include "hdyn/system.hpp"

namespace hdyn {

// JSON <-> SystemConfig with a versioned schema. Parsing is strict: unknown
// keys anywhere in the document raise ConfigError, so typos fail loudly
// instead of silently falling back to defaults.
nlohmann::json config_to_json(const SystemConfig& cfg);
SystemConfig config_from_json(const nlohmann::json& j);

// Shared helper for strict parsing of other JSON documents.
void reject_unknown_keys(const nlohmann::json& obj,
                         std::initializer_list<const char*> allowed,
                         const std::string& context);

}  // namespace hdyn
