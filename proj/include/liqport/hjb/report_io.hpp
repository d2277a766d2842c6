#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "liqport/hjb/policy_iteration.hpp"

namespace liqport::hjb {

/// Layer shapes plus flat parameter arrays.
nlohmann::json to_json(const Mlp& m);
Mlp mlp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NetworkParams& n);
NetworkParams networks_from_json(const nlohmann::json& j);

nlohmann::json to_json(const IterationRecord& r);

/// Networks, per-iteration records and outcome flags.
nlohmann::json to_json(const SolveReport& r);
SolveReport report_from_json(const nlohmann::json& j);

void save_report(const SolveReport& r, const std::filesystem::path& file);
SolveReport load_report(const std::filesystem::path& file);

/// One row per iteration.
void write_iterations_csv(const SolveReport& r, std::ostream& out);

enum class SliceAxis { wealth, time };

/// Value and allocation along W (time fixed) or along t (wealth fixed), the
/// other coordinates taken from `base`. Columns: the axis variable, value,
/// omega.
void write_slice_csv(const NetworkParams& n, const State& base, SliceAxis axis, const std::vector<double>& grid,
                     std::ostream& out);

}  // namespace liqport::hjb
