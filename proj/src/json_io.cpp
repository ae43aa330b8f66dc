#include "symspec/json_io.hpp"

namespace symspec {

namespace {

template <class E>
E parse_enum(const Json& j, std::initializer_list<E> values) {
    const auto name = j.get<std::string>();
    for (const E v : values) {
        if (name == to_string(v)) return v;
    }
    throw ArgumentError("unknown enum value '" + name + "'");
}

Json rows_json(const std::vector<std::vector<index_t>>& rows) {
    Json out = Json::array();
    for (const auto& r : rows) out.push_back(r);
    return out;
}

}  // namespace

Json to_json(const InspectionSet& set) {
    Json j;
    j["tag"] = to_string(set.tag);
    j["algorithm"] = to_string(set.algorithm);
    j["transformation"] = to_string(set.transformation);
    switch (set.tag) {
        case SetTag::PruneSet: j["payload"] = set.prune_set().order; break;
        case SetTag::RowPatterns: j["payload"] = rows_json(set.row_patterns().rows); break;
        case SetTag::BlockSet: {
            const auto& bs = set.block_set();
            Json blocks = Json::array();
            for (const auto& b : bs.blocks) blocks.push_back({b.start, b.width});
            Json payload;
            payload["blocks"] = std::move(blocks);
            payload["rowPatterns"] = bs.row_patterns ? rows_json(*bs.row_patterns) : Json(nullptr);
            j["payload"] = std::move(payload);
            break;
        }
    }
    return j;
}

InspectionSet inspection_set_from_json(const Json& j) {
    InspectionSet s;
    s.tag = parse_enum(j.at("tag"), {SetTag::PruneSet, SetTag::BlockSet, SetTag::RowPatterns});
    s.algorithm = parse_enum(j.at("algorithm"), {Algorithm::TriangularSolve, Algorithm::Cholesky});
    s.transformation = parse_enum(j.at("transformation"), {Transformation::VIPrune, Transformation::VSBlock});
    const auto& p = j.at("payload");
    switch (s.tag) {
        case SetTag::PruneSet: s.payload = ReachSet{p.get<std::vector<index_t>>()}; break;
        case SetTag::RowPatterns: s.payload = RowPatternTable{p.get<std::vector<std::vector<index_t>>>()}; break;
        case SetTag::BlockSet: {
            BlockSet bs;
            for (const auto& b : p.at("blocks")) bs.blocks.push_back(Block{b.at(0).get<index_t>(), b.at(1).get<index_t>()});
            if (!p.at("rowPatterns").is_null()) bs.row_patterns = p.at("rowPatterns").get<std::vector<std::vector<index_t>>>();
            s.payload = std::move(bs);
            break;
        }
    }
    return s;
}

Json to_json(const EliminationTree& t) {
    Json out = Json::array();
    for (const index_t p : t.parent) out.push_back(p == kNone ? Json(nullptr) : Json(p));
    return out;
}

}  // namespace symspec
