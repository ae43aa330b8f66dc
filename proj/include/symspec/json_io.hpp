#pragma once

#include <json.hpp>

#include "symspec/inspect.hpp"

namespace symspec {

using Json = nlohmann::ordered_json;

/// {"tag", "algorithm", "transformation", "payload"} with 0-based indices.
/// Payloads: a PruneSet is an index array; a RowPatterns table is an array of
/// arrays; a BlockSet is {"blocks": [[start, width], ...], "rowPatterns": ...}.
Json to_json(const InspectionSet& set);
InspectionSet inspection_set_from_json(const Json& j);

Json to_json(const EliminationTree& t);

}  // namespace symspec
