#include "havok_mpc/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "havok_mpc/errors.hpp"

namespace havok {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

json matrix_to_json(const Matrix& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index c = 0; c < m.cols(); ++c) data.push_back(m(i, c));
    }
    j["data"] = std::move(data);
    return j;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
        throw DataError("model file: malformed matrix '" + what + "'");
    }
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
        throw DataError("model file: matrix '" + what + "' has inconsistent dimensions");
    }
    Matrix m(rows, cols);
    std::size_t idx = 0;
    for (Index i = 0; i < rows; ++i) {
        for (Index c = 0; c < cols; ++c) m(i, c) = data[idx++];
    }
    return m;
}

json vector_to_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const json& j) {
    const auto data = j.get<std::vector<double>>();
    Vector v(static_cast<Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) v(static_cast<Index>(i)) = data[i];
    return v;
}

json embedding_to_json(const DelayEmbedding& emb) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["depth"] = emb.config.depth;
    j["include_inputs"] = emb.config.include_inputs;
    j["rank"] = emb.rank;
    j["n_outputs"] = emb.n_outputs;
    j["n_inputs"] = emb.n_inputs;
    j["U"] = matrix_to_json(emb.U);
    j["S"] = vector_to_json(emb.S);
    j["full_singular_values"] = vector_to_json(emb.full_singular_values);
    j["layout"] = "outputs y_{k-m+1}..y_k oldest first, channel-major per sample; "
                  "then inputs u_{k-m+1}..u_{k-1} when include_inputs";
    return j;
}

DelayEmbedding embedding_from_json(const json& j) {
    if (j.value("schema_version", -1) != kSchemaVersion) {
        throw DataError("embedding file: unsupported schema_version");
    }
    DelayEmbedding emb;
    emb.config.depth = j.at("depth").get<int>();
    emb.config.include_inputs = j.at("include_inputs").get<bool>();
    emb.rank = j.at("rank").get<int>();
    emb.n_outputs = j.at("n_outputs").get<int>();
    emb.n_inputs = j.at("n_inputs").get<int>();
    emb.U = matrix_from_json(j.at("U"), "U");
    emb.S = vector_from_json(j.at("S"));
    emb.full_singular_values = vector_from_json(j.at("full_singular_values"));
    if (emb.U.rows() != emb.delay_dim() || emb.U.cols() != emb.rank) {
        throw DataError("embedding file: basis dimensions do not match the layout");
    }
    return emb;
}

json norm_to_json(const NormalizationSpec& spec) {
    json j;
    j["method"] = norm_method_name(spec.method);
    j["input_offset"] = vector_to_json(spec.input_offset);
    j["input_scale"] = vector_to_json(spec.input_scale);
    j["output_offset"] = vector_to_json(spec.output_offset);
    j["output_scale"] = vector_to_json(spec.output_scale);
    return j;
}

NormalizationSpec norm_from_json(const json& j) {
    NormalizationSpec spec;
    spec.method = parse_norm_method(j.at("method").get<std::string>());
    spec.input_offset = vector_from_json(j.at("input_offset"));
    spec.input_scale = vector_from_json(j.at("input_scale"));
    spec.output_offset = vector_from_json(j.at("output_offset"));
    spec.output_scale = vector_from_json(j.at("output_scale"));
    return spec;
}

json read_json_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw DataError("cannot open '" + path + "'");
    json j;
    try {
        file >> j;
    } catch (const json::exception& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot write '" + path + "'");
    file << j.dump(2) << '\n';
}

}  // namespace

void save_embedding(const DelayEmbedding& emb, const std::string& path) {
    write_json_file(embedding_to_json(emb), path);
}

DelayEmbedding load_embedding(const std::string& path) {
    return embedding_from_json(read_json_file(path));
}

void save_model(const HavokModel& model, const std::string& path) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["sample_period"] = model.sample_period;
    j["A"] = matrix_to_json(model.A);
    j["B"] = matrix_to_json(model.B);
    j["C"] = matrix_to_json(model.C);
    j["embedding"] = embedding_to_json(model.embedding);
    j["normalization"] = norm_to_json(model.norm);
    write_json_file(j, path);
}

HavokModel load_model(const std::string& path) {
    const json j = read_json_file(path);
    if (j.value("schema_version", -1) != kSchemaVersion) {
        throw DataError("'" + path + "': unsupported schema_version");
    }
    HavokModel model;
    try {
        model.sample_period = j.at("sample_period").get<double>();
        model.A = matrix_from_json(j.at("A"), "A");
        model.B = matrix_from_json(j.at("B"), "B");
        model.C = matrix_from_json(j.at("C"), "C");
        model.embedding = embedding_from_json(j.at("embedding"));
        model.norm = norm_from_json(j.at("normalization"));
    } catch (const json::exception& e) {
        throw DataError("'" + path + "': " + e.what());
    }
    if (model.A.rows() != model.A.cols() || model.A.rows() != model.embedding.rank ||
        model.B.rows() != model.A.rows() || model.C.cols() != model.A.rows()) {
        throw DataError("'" + path + "': model matrices are inconsistent");
    }
    if (!model.A.allFinite() || !model.B.allFinite() || !model.C.allFinite()) {
        throw DataError("'" + path + "': model matrices contain non-finite values");
    }
    return model;
}

}  // namespace havok
