#include "flowlab/serialize.hpp"

#include <fstream>

#include "flowlab/errors.hpp"

namespace flowlab {

namespace {

constexpr int kCheckpointFormatVersion = 1;

const nlohmann::json& require_field(const nlohmann::json& object, const char* name,
                                    const std::string& where) {
    if (!object.is_object())
        throw config_error(where + ": expected an object with a '" + name +
                           "' field");
    const auto it = object.find(name);
    if (it == object.end())
        throw config_error(where + ": missing required field '" + name + "'");
    return *it;
}

} // namespace

nlohmann::json gmm_to_json(const GaussianMixture& gmm) {
    nlohmann::json components = nlohmann::json::array();
    for (const auto& comp : gmm.components()) {
        nlohmann::json mean = nlohmann::json::array();
        for (int i = 0; i < comp.mean.size(); ++i) mean.push_back(comp.mean(i));
        nlohmann::json cov = nlohmann::json::array();
        for (int r = 0; r < comp.covariance.rows(); ++r)
            for (int c = 0; c < comp.covariance.cols(); ++c)
                cov.push_back(comp.covariance(r, c));
        components.push_back({{"weight", comp.weight},
                              {"mean", std::move(mean)},
                              {"cov", std::move(cov)}});
    }
    return {{"dim", gmm.dim()}, {"components", std::move(components)}};
}

GaussianMixture gmm_from_json(const nlohmann::json& value) {
    const std::string where = "mixture";
    const int dim = require_field(value, "dim", where).get<int>();
    const auto& comps = require_field(value, "components", where);
    if (!comps.is_array() || comps.empty())
        throw config_error(where + ": 'components' must be a nonempty array");

    std::vector<GaussianComponent> components;
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const std::string comp_where = where + ".components[" + std::to_string(k) + "]";
        const auto& entry = comps[k];
        GaussianComponent comp;
        comp.weight = require_field(entry, "weight", comp_where).get<double>();

        const auto& mean = require_field(entry, "mean", comp_where);
        if (!mean.is_array() || static_cast<int>(mean.size()) != dim)
            throw config_error(comp_where + ": 'mean' must have " +
                               std::to_string(dim) + " entries");
        comp.mean.resize(dim);
        for (int i = 0; i < dim; ++i) comp.mean(i) = mean[static_cast<std::size_t>(i)].get<double>();

        const auto& cov = require_field(entry, "cov", comp_where);
        if (!cov.is_array() || static_cast<int>(cov.size()) != dim * dim)
            throw config_error(comp_where + ": 'cov' must have " +
                               std::to_string(dim * dim) + " row-major entries");
        comp.covariance.resize(dim, dim);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                comp.covariance(r, c) =
                    cov[static_cast<std::size_t>(r * dim + c)].get<double>();
        components.push_back(std::move(comp));
    }
    try {
        return GaussianMixture(std::move(components));
    } catch (const std::invalid_argument& err) {
        throw config_error(where + ": " + err.what());
    }
}

nlohmann::json checkpoint_to_json(const VelocityNet& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : net.layers()) {
        nlohmann::json weight = nlohmann::json::array();
        for (int r = 0; r < layer.weight.rows(); ++r)
            for (int c = 0; c < layer.weight.cols(); ++c)
                weight.push_back(layer.weight(r, c));
        nlohmann::json bias = nlohmann::json::array();
        for (int r = 0; r < layer.bias.size(); ++r) bias.push_back(layer.bias(r));
        layers.push_back({{"rows", layer.weight.rows()},
                          {"cols", layer.weight.cols()},
                          {"weight", std::move(weight)},
                          {"bias", std::move(bias)}});
    }
    return {{"format_version", kCheckpointFormatVersion},
            {"dim", net.dim()},
            {"num_conditions", net.num_conditions()},
            {"hidden", net.hidden()},
            {"layers", std::move(layers)}};
}

VelocityNet checkpoint_from_json(const nlohmann::json& value) {
    const std::string where = "checkpoint";
    const int version = require_field(value, "format_version", where).get<int>();
    if (version != kCheckpointFormatVersion)
        throw config_error(where + ": format_version " + std::to_string(version) +
                           " is not supported (expected " +
                           std::to_string(kCheckpointFormatVersion) + ")");
    const int dim = require_field(value, "dim", where).get<int>();
    const int num_conditions =
        require_field(value, "num_conditions", where).get<int>();
    const auto hidden =
        require_field(value, "hidden", where).get<std::vector<int>>();

    VelocityNet net(dim, num_conditions, hidden);
    const auto& layers = require_field(value, "layers", where);
    if (!layers.is_array() || layers.size() != net.layers().size())
        throw config_error(where + ": expected " +
                           std::to_string(net.layers().size()) + " layers, got " +
                           std::to_string(layers.size()));
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const std::string layer_where = where + ".layers[" + std::to_string(l) + "]";
        const auto& entry = layers[l];
        auto& layer = net.layers()[l];
        const auto rows = require_field(entry, "rows", layer_where).get<Eigen::Index>();
        const auto cols = require_field(entry, "cols", layer_where).get<Eigen::Index>();
        if (rows != layer.weight.rows() || cols != layer.weight.cols())
            throw config_error(layer_where + ": shape manifest says " +
                               std::to_string(rows) + "x" + std::to_string(cols) +
                               ", architecture needs " +
                               std::to_string(layer.weight.rows()) + "x" +
                               std::to_string(layer.weight.cols()));
        const auto& weight = require_field(entry, "weight", layer_where);
        const auto& bias = require_field(entry, "bias", layer_where);
        if (!weight.is_array() ||
            static_cast<Eigen::Index>(weight.size()) != rows * cols)
            throw config_error(layer_where + ": 'weight' must have " +
                               std::to_string(rows * cols) + " entries");
        if (!bias.is_array() || static_cast<Eigen::Index>(bias.size()) != rows)
            throw config_error(layer_where + ": 'bias' must have " +
                               std::to_string(rows) + " entries");
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                layer.weight(r, c) =
                    weight[static_cast<std::size_t>(r * cols + c)].get<double>();
        for (Eigen::Index r = 0; r < rows; ++r)
            layer.bias(r) = bias[static_cast<std::size_t>(r)].get<double>();
    }
    return net;
}

void save_checkpoint(const VelocityNet& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    out << checkpoint_to_json(net).dump(2) << '\n';
}

VelocityNet load_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_json(parse_json_file(path));
}

nlohmann::json model_to_json(const ConditionedModel& model) {
    nlohmann::json conditions = nlohmann::json::array();
    if (model.kind() == backend_kind::analytic) {
        for (const auto& label : model.conditions())
            conditions.push_back(
                {{"label", label}, {"mixture", gmm_to_json(model.mixture(label))}});
        return {{"kind", "analytic"}, {"dim", model.dim()},
                {"conditions", std::move(conditions)}};
    }
    for (const auto& label : model.conditions())
        conditions.push_back({{"label", label}, {"index", model.condition_slot(label)}});
    return {{"kind", "learned"},
            {"dim", model.dim()},
            {"checkpoint", checkpoint_to_json(model.net())},
            {"conditions", std::move(conditions)}};
}

ConditionedModel model_from_json(const nlohmann::json& value) {
    const std::string where = "model";
    const std::string kind = require_field(value, "kind", where).get<std::string>();
    const int dim = require_field(value, "dim", where).get<int>();
    const auto& conditions = require_field(value, "conditions", where);
    if (!conditions.is_array() || conditions.empty())
        throw config_error(where + ": 'conditions' must be a nonempty array");

    if (kind == "analytic") {
        ConditionedModel model = ConditionedModel::analytic(dim);
        for (std::size_t i = 0; i < conditions.size(); ++i) {
            const std::string cond_where =
                where + ".conditions[" + std::to_string(i) + "]";
            const auto& entry = conditions[i];
            model.add_condition(
                require_field(entry, "label", cond_where).get<std::string>(),
                gmm_from_json(require_field(entry, "mixture", cond_where)));
        }
        return model;
    }
    if (kind == "learned") {
        auto net = std::make_shared<const VelocityNet>(
            checkpoint_from_json(require_field(value, "checkpoint", where)));
        if (net->dim() != dim)
            throw config_error(where + ": checkpoint dimension " +
                               std::to_string(net->dim()) +
                               " disagrees with model dimension " +
                               std::to_string(dim));
        ConditionedModel model = ConditionedModel::learned(std::move(net));
        for (std::size_t i = 0; i < conditions.size(); ++i) {
            const std::string cond_where =
                where + ".conditions[" + std::to_string(i) + "]";
            const auto& entry = conditions[i];
            model.add_condition(
                require_field(entry, "label", cond_where).get<std::string>(),
                require_field(entry, "index", cond_where).get<int>());
        }
        return model;
    }
    throw config_error(where + ": unknown kind '" + kind +
                       "' (expected 'analytic' or 'learned')");
}

nlohmann::json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw config_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
        throw config_error(path.string() + ": " + err.what());
    }
}

} // namespace flowlab
