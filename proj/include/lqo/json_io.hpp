#pragma once

/// JSON conversions for plan and query values. Kept out of plan.hpp so that
/// numeric translation units do not pay for the json header.

#include <json.hpp>

#include "lqo/catalog.hpp"
#include "lqo/plan.hpp"

namespace lqo {

/// Schema: {"query": <id>, "roots": [<node>...]} where a node is either
/// {"join": "merge|hash|loop", "l": <node>, "r": <node>} or
/// {"scan": "table|index|unspec", "rel": <relation id>}.
nlohmann::json plan_to_json(const PlanForest& plan);
PlanForest plan_from_json(const nlohmann::json& j);

nlohmann::json query_to_json(const Query& q);
Query query_from_json(const nlohmann::json& j);

nlohmann::json catalog_config_to_json(const CatalogConfig& cfg);
CatalogConfig catalog_config_from_json(const nlohmann::json& j);

}  // namespace lqo
