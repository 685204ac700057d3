#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "flowlab/field.hpp"
#include "flowlab/gmm.hpp"
#include "flowlab/net.hpp"

namespace flowlab {

/// GaussianMixture <-> JSON: {"dim": d, "components": [{"weight": w,
/// "mean": [..], "cov": [d*d row-major]}]}. Doubles are emitted in shortest
/// round-trip form, so save/load is lossless at full precision.
nlohmann::json gmm_to_json(const GaussianMixture& gmm);
GaussianMixture gmm_from_json(const nlohmann::json& value);

/// VelocityNet <-> JSON checkpoint with a shape manifest
/// ({"format_version", "dim", "num_conditions", "hidden", "layers": [{"rows",
/// "cols", "weight", "bias"}]}). Loading validates every declared shape
/// before accepting the weights.
nlohmann::json checkpoint_to_json(const VelocityNet& net);
VelocityNet checkpoint_from_json(const nlohmann::json& value);

void save_checkpoint(const VelocityNet& net, const std::filesystem::path& path);
VelocityNet load_checkpoint(const std::filesystem::path& path);

/// ConditionedModel <-> JSON. Analytic models embed their mixtures; learned
/// models embed the checkpoint plus the per-condition one-hot indices.
nlohmann::json model_to_json(const ConditionedModel& model);
ConditionedModel model_from_json(const nlohmann::json& value);

/// Parse a JSON document, turning parse errors into config_error with the
/// offending path/position in the message.
nlohmann::json parse_json_file(const std::filesystem::path& path);

} // namespace flowlab
