// Checkpoint files: a single self-describing JSON document carrying the
// model mode, every layer shape, the flattened parameter arrays (row-major)
// and the seed lineage. Doubles are serialized with shortest round-trip
// formatting, so save/load reproduces every parameter bit for bit.

#pragma once

#include "qtl/hybrid.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qtl::hybrid {

namespace detail {

inline nlohmann::json dense_to_json(const classical::DenseLayer& layer) {
    return {{"rows", layer.weights.rows},
            {"cols", layer.weights.cols},
            {"weights", layer.weights.data},
            {"bias", layer.bias},
            {"frozen", layer.frozen}};
}

inline classical::DenseLayer dense_from_json(const nlohmann::json& j) {
    classical::DenseLayer layer;
    layer.weights = Matrix(j.at("rows").get<int>(), j.at("cols").get<int>());
    layer.weights.data = j.at("weights").get<std::vector<double>>();
    layer.bias = j.at("bias").get<std::vector<double>>();
    layer.frozen = j.at("frozen").get<bool>();
    if (layer.weights.data.size() !=
        static_cast<std::size_t>(layer.weights.rows) * layer.weights.cols)
        throw std::runtime_error("checkpoint: weight array does not match its shape");
    if (layer.bias.size() != static_cast<std::size_t>(layer.weights.rows))
        throw std::runtime_error("checkpoint: bias array does not match its shape");
    return layer;
}

} // namespace detail

inline std::string checkpoint_to_json(const HybridModel& model) {
    model.validate();
    nlohmann::json doc;
    doc["format"] = "qtl-checkpoint";
    doc["version"] = 1;
    doc["mode"] = mode_name(model.mode);
    doc["encoding"] = {{"n_features", model.encoding_spec.n_features},
                       {"angle_scale", model.encoding_spec.angle_scale}};

    nlohmann::json layers;
    layers["extractor.input"] = detail::dense_to_json(model.extractor.input);
    for (std::size_t b = 0; b < model.extractor.blocks.size(); ++b) {
        const std::string prefix = "extractor.block" + std::to_string(b);
        layers[prefix + ".first"] = detail::dense_to_json(model.extractor.blocks[b].first);
        layers[prefix + ".second"] = detail::dense_to_json(model.extractor.blocks[b].second);
    }
    layers["extractor.output"] = detail::dense_to_json(model.extractor.output);
    layers["reducer"] = detail::dense_to_json(model.reducer);
    if (!is_quantum(model.mode)) layers["substitute"] = detail::dense_to_json(model.substitute);
    layers["classifier"] = detail::dense_to_json(model.classifier);
    doc["layers"] = std::move(layers);
    doc["n_residual_blocks"] = model.extractor.blocks.size();

    if (is_quantum(model.mode)) {
        doc["circuit"] = {{"n_qubits", model.circuit.n_qubits},
                          {"n_layers", model.circuit.n_layers},
                          {"topology", vqc::topology_name(model.circuit.topology)},
                          {"angles", model.circuit.angles}};
    }
    if (model.fixed_mix)
        doc["fixed_mix"] = {{"dim", model.fixed_mix->rows}, {"data", model.fixed_mix->data}};

    nlohmann::json lineage = nlohmann::json::array();
    for (const SeedRecord& record : model.seed_lineage)
        lineage.push_back({{"stage", record.stage}, {"seed", record.seed}});
    doc["seed_lineage"] = std::move(lineage);

    return doc.dump(2) + "\n";
}

inline HybridModel checkpoint_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "qtl-checkpoint")
            throw std::runtime_error("checkpoint: unrecognized format field");

        HybridModel model;
        model.mode = mode_from_name(doc.at("mode").get<std::string>());
        model.encoding_spec.n_features = doc.at("encoding").at("n_features").get<int>();
        model.encoding_spec.angle_scale = doc.at("encoding").at("angle_scale").get<double>();

        const nlohmann::json& layers = doc.at("layers");
        model.extractor.input = detail::dense_from_json(layers.at("extractor.input"));
        const int n_blocks = doc.at("n_residual_blocks").get<int>();
        for (int b = 0; b < n_blocks; ++b) {
            const std::string prefix = "extractor.block" + std::to_string(b);
            classical::ResidualBlock block;
            block.first = detail::dense_from_json(layers.at(prefix + ".first"));
            block.second = detail::dense_from_json(layers.at(prefix + ".second"));
            model.extractor.blocks.push_back(std::move(block));
        }
        model.extractor.output = detail::dense_from_json(layers.at("extractor.output"));
        model.reducer = detail::dense_from_json(layers.at("reducer"));
        if (!is_quantum(model.mode))
            model.substitute = detail::dense_from_json(layers.at("substitute"));
        model.classifier = detail::dense_from_json(layers.at("classifier"));

        if (is_quantum(model.mode)) {
            const nlohmann::json& c = doc.at("circuit");
            model.circuit.n_qubits = c.at("n_qubits").get<int>();
            model.circuit.n_layers = c.at("n_layers").get<int>();
            model.circuit.topology = vqc::topology_from_name(c.at("topology").get<std::string>());
            model.circuit.angles = c.at("angles").get<std::vector<double>>();
            model.circuit.validate();
        }
        if (doc.contains("fixed_mix")) {
            const int dim = doc.at("fixed_mix").at("dim").get<int>();
            Matrix m(dim, dim);
            m.data = doc.at("fixed_mix").at("data").get<std::vector<double>>();
            if (m.data.size() != static_cast<std::size_t>(dim) * dim)
                throw std::runtime_error("checkpoint: fixed_mix data does not match its shape");
            model.fixed_mix = std::move(m);
        }
        for (const nlohmann::json& record : doc.at("seed_lineage"))
            model.seed_lineage.push_back({record.at("stage").get<std::string>(),
                                          record.at("seed").get<std::uint64_t>()});

        model.validate();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: malformed document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("checkpoint: malformed document: ") + e.what());
    }
}

inline void save_checkpoint(const HybridModel& model, const std::string& path) {
    data::write_file_atomic(path, checkpoint_to_json(model));
}

inline HybridModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return checkpoint_from_json(buffer.str());
}

} // namespace qtl::hybrid
