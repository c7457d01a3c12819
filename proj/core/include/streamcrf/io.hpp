#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamcrf/marginals.hpp"
#include "streamcrf/potentials.hpp"
#include "streamcrf/reference.hpp"

// File formats. Parameters are one JSON document
//   {"C": .., "K": .., "transition": [[..]], "duration_bias": [[..]],
//    "pi_start": [..]?, "pi_end": [..]?}
// Emissions are CSV rows b,t,c0..c{C-1} or JSON: a (B, T, C) nested array or
// {"scores": (B, T, C), "lengths": [..]}. Every CSV starts with kCsvHeader.

namespace streamcrf {

inline constexpr std::string_view kCsvHeader = "# streamcrf-csv v1";

SemiCrfParams params_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const SemiCrfParams& params);
SemiCrfParams load_params(const std::filesystem::path& path);

EmissionBatch read_emissions_csv(std::istream& in);
EmissionBatch emissions_from_json(const nlohmann::json& j);
nlohmann::json emissions_to_json(const EmissionBatch& emissions);
void write_emissions_csv(std::ostream& out, const EmissionBatch& emissions);
/// Chooses the format by extension: .json is JSON, anything else CSV.
EmissionBatch load_emissions(const std::filesystem::path& path);

/// Rows b,start,duration,label.
void write_segmentations_csv(std::ostream& out, const std::vector<Segmentation>& segs);
std::vector<Segmentation> read_segmentations_csv(std::istream& in);
nlohmann::json segmentation_to_json(const Segmentation& seg);
nlohmann::json decoded_to_json(const std::vector<Decoded>& decoded);

/// Rows b,t,boundary,p0..p{C-1} for valid positions.
void write_marginals_csv(std::ostream& out, const MarginalSet& m);
nlohmann::json marginals_to_json(const MarginalSet& m);

}  // namespace streamcrf
