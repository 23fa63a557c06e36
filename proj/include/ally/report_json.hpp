#pragma once

#include <json.hpp>

#include "ally/duality.hpp"
#include "ally/generate.hpp"
#include "ally/harness.hpp"
#include "ally/pdcl.hpp"

namespace ally {

// Non-finite doubles serialize as null.
nlohmann::json to_json(const TrainReport& report);
nlohmann::json to_json(const DualityReport& report);
nlohmann::json to_json(const CellRecord& cell);
nlohmann::json to_json(const AscentTrajectory& trajectory, bool include_points = false);

/// Inverse of to_json(TrainReport); nulls read back as NaN.
TrainReport train_report_from_json(const nlohmann::json& j);

/// meta.json contents of an experiment.
nlohmann::json experiment_meta(const ExperimentResult& result, const ExperimentConfig& config);

}  // namespace ally
