#include "signflow/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "signflow/error.hpp"

namespace signflow {

using nlohmann::json;

namespace {

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape()}, {"data", t.to_vector()}};
}

Tensor tensor_from_json(const json& j) {
    Shape shape = j.at("shape").get<Shape>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    return Tensor(std::move(shape), std::move(data));
}

}  // namespace

void save_checkpoint(const std::string& path, const Generator& model,
                     const TrainerSnapshot* snapshot) {
    json params = json::object();
    for (const std::string& name : model.params().names()) {
        params[name] = tensor_to_json(model.params().values(name));
    }
    json j{{"format", kCheckpointFormat},
           {"config", json::parse(model.config().to_json())},
           {"params", std::move(params)}};
    if (snapshot) {
        j["iteration"] = snapshot->iteration;
        json momentum = json::object();
        for (const auto& [name, v] : snapshot->momentum) momentum[name] = tensor_to_json(v);
        j["momentum"] = std::move(momentum);
        j["ema"] = json{{"means", snapshot->ema.means},
                        {"initialized", snapshot->ema.initialized},
                        {"rho", snapshot->ema.rho},
                        {"eps", snapshot->ema.eps}};
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << j.dump() << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    if (!j.contains("format") || j["format"] != kCheckpointFormat) {
        throw DataError("checkpoint " + path + " has unknown format tag");
    }

    LoadedCheckpoint out;
    out.model = std::make_unique<Generator>(ModelConfig::from_json(j.at("config").dump()));

    const json& params = j.at("params");
    for (const std::string& name : out.model->params().names()) {
        if (!params.contains(name)) {
            throw DataError("checkpoint " + path + " is missing parameter '" + name + "'");
        }
        out.model->params().set_values(name, tensor_from_json(params.at(name)));
    }
    if (params.size() != out.model->params().names().size()) {
        throw DataError("checkpoint " + path + " carries parameters the config does not declare");
    }

    if (j.contains("momentum")) {
        out.has_snapshot = true;
        out.snapshot.iteration = j.value("iteration", std::int64_t{0});
        for (auto it = j["momentum"].begin(); it != j["momentum"].end(); ++it) {
            out.snapshot.momentum.emplace(it.key(), tensor_from_json(it.value()));
        }
        if (j.contains("ema")) {
            const json& e = j["ema"];
            auto means = e.at("means").get<std::vector<double>>();
            for (std::size_t i = 0; i < 3 && i < means.size(); ++i) out.snapshot.ema.means[i] = means[i];
            out.snapshot.ema.initialized = e.value("initialized", false);
            out.snapshot.ema.rho = e.value("rho", 0.99);
            out.snapshot.ema.eps = e.value("eps", 1e-8);
        }
    }
    return out;
}

}  // namespace signflow
