#include "chatty/checkpoint.hpp"

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chatty/errors.hpp"

namespace chatty {

namespace {

constexpr int kFormatVersion = 1;

using nlohmann::json;

// Names matching the parameters() traversal order, for readable files and
// shape diagnostics.
std::vector<std::string> parameter_names(const ModelSpec& spec) {
    std::vector<std::string> names;
    auto affine = [&names](const std::string& stem) {
        names.push_back(stem + ".w");
        names.push_back(stem + ".b");
    };
    for (std::size_t i = 0; i < spec.g_widths.size(); ++i) {
        affine("g" + std::to_string(i));
    }
    affine("c");
    affine("t1");
    if (spec.dual_transport) affine("t2");
    for (std::size_t i = 0; i < spec.d_widths.size() + 1; ++i) {
        affine("d" + std::to_string(i));
    }
    return names;
}

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void matrix_from_json(const json& rows, Mat& out, const std::string& name) {
    if (!rows.is_array() || static_cast<Index>(rows.size()) != out.rows()) {
        throw StateError("checkpoint: parameter " + name + " has wrong row count");
    }
    for (Index i = 0; i < out.rows(); ++i) {
        const json& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != out.cols()) {
            throw StateError("checkpoint: parameter " + name + " has wrong column count at row " +
                             std::to_string(i));
        }
        for (Index j = 0; j < out.cols(); ++j) {
            out(i, j) = row[static_cast<std::size_t>(j)].get<Real>();
        }
    }
}

}  // namespace

void save_checkpoint(const ChattyModel& model, const std::string& path) {
    const ModelSpec& spec = model.spec;
    json j;
    j["format_version"] = kFormatVersion;
    j["spec"] = {
        {"input_dim", spec.input_dim},
        {"g_widths", spec.g_widths},
        {"num_classes", spec.num_classes},
        {"d_widths", spec.d_widths},
        {"lambda", spec.lambda},
        {"dual_transport", spec.dual_transport},
        {"disc_on_logits", spec.disc_on_logits},
    };
    const std::vector<std::string> names = parameter_names(spec);
    const std::vector<const Mat*> params = model.parameters();
    json entries = json::array();
    for (std::size_t i = 0; i < params.size(); ++i) {
        entries.push_back({{"name", names[i]}, {"data", matrix_to_json(*params[i])}});
    }
    j["params"] = std::move(entries);

    std::ofstream out(path);
    if (!out) {
        throw ParamError("checkpoint: cannot write " + path);
    }
    out << j.dump(1) << '\n';
}

ChattyModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParamError("checkpoint: cannot read " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParamError("checkpoint: " + path + " is not valid JSON: " + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != kFormatVersion) {
        throw StateError("checkpoint: unsupported format version in " + path);
    }

    const json& s = j.at("spec");
    ModelSpec spec;
    spec.input_dim = s.at("input_dim").get<Index>();
    spec.g_widths = s.at("g_widths").get<std::vector<Index>>();
    spec.num_classes = s.at("num_classes").get<Index>();
    spec.d_widths = s.at("d_widths").get<std::vector<Index>>();
    spec.lambda = s.at("lambda").get<Real>();
    spec.dual_transport = s.at("dual_transport").get<bool>();
    spec.disc_on_logits = s.at("disc_on_logits").get<bool>();

    ChattyModel model = init_model(spec, 0);
    const std::vector<std::string> names = parameter_names(spec);
    std::vector<Mat*> params = model.parameters();
    const json& entries = j.at("params");
    if (!entries.is_array() || entries.size() != params.size()) {
        throw StateError("checkpoint: expected " + std::to_string(params.size()) +
                         " parameters, file has " + std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const json& entry = entries[i];
        if (entry.at("name").get<std::string>() != names[i]) {
            throw StateError("checkpoint: parameter " + std::to_string(i) + " is named " +
                             entry.at("name").get<std::string>() + ", expected " + names[i]);
        }
        matrix_from_json(entry.at("data"), *params[i], names[i]);
    }
    return model;
}

}  // namespace chatty
