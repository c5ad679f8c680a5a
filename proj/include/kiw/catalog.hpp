/// @file catalog.hpp
/// @brief Library of analytic test fields addressed by name, plus a JSON field-spec parser.
#pragma once

#include "kiw/fields.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace kiw {

/// Look up a catalog entry and build it for dimension n.
/// Throws ConfigError for an unknown name, wrong parameter count, or unsupported dimension.
FieldJet catalog_field(const std::string& name, const std::vector<double>& params, int n);

/// Names of every catalog entry, in manifest order.
std::vector<std::string> catalog_names();

/// Machine-readable description of all entries (name, kind, dimensions, parameters, periodicity).
nlohmann::json catalog_manifest();

/// Build a field from a JSON spec. Accepted shapes:
///   {"name": <catalog name>, "params": [...]}
///   {"vector": [<scalar spec>, ...]}
///   {"form": k, "components": [<scalar spec>, ...]}
///   {"zero": "scalar" | "vector" | k}
///   {"modulate": [amplitude, omega], "field": <spec>}
/// `where` names the config key for error messages.
FieldJet field_from_json(const nlohmann::json& spec, int n, const std::string& where);

}  // namespace kiw
