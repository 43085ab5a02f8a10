#pragma once

#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "claimeval/corpus.hpp"
#include "claimeval/error.hpp"
#include "claimeval/scorer.hpp"
#include "claimeval/text.hpp"

namespace claimeval {

inline constexpr const char *kModelFormat = "claimeval-scorer";
inline constexpr int kModelVersion = 1;

// A trained aspect model as stored on disk.
struct ModelArtifact {
    ScorerConfig config;
    std::string vocab_digest;
    std::string aspect;
    ScorerParams<double> params;
};

inline nlohmann::ordered_json model_to_json(const ModelArtifact &m) {
    nlohmann::ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["aspect"] = m.aspect;
    j["vocab_digest"] = m.vocab_digest;
    nlohmann::json cfg = m.config;
    j["config"] = cfg;
    auto tensors = nlohmann::ordered_json::array();
    m.params.for_each([&](const std::string &name, const Matrix<double> &t, bool) {
        nlohmann::ordered_json e;
        e["name"] = name;
        e["shape"] = {t.rows(), t.cols()};
        e["data"] = std::vector<double>(t.flat().begin(), t.flat().end());
        tensors.push_back(std::move(e));
    });
    j["tensors"] = std::move(tensors);
    return j;
}

/// Rebuilds a model; `expected_vocab_digest` must match the stored digest.
inline ModelArtifact model_from_json(const nlohmann::json &j, const std::string &expected_vocab_digest) {
    if (j.value("format", "") != kModelFormat)
        throw DataError("not a scorer model file");
    if (j.value("version", 0) != kModelVersion)
        throw DataError("unsupported model file version");
    ModelArtifact m;
    m.vocab_digest = j.at("vocab_digest").get<std::string>();
    if (m.vocab_digest != expected_vocab_digest)
        throw DataError("model was trained with a different vocabulary (digest " + m.vocab_digest +
                        ", expected " + expected_vocab_digest + ")");
    m.aspect = j.value("aspect", "");
    m.config = j.at("config").get<ScorerConfig>();
    m.config.validate();
    m.params = zero_params<double>(m.config);

    std::map<std::string, const nlohmann::json *> by_name;
    for (const auto &e : j.at("tensors"))
        by_name[e.at("name").get<std::string>()] = &e;
    m.params.for_each([&](const std::string &name, Matrix<double> &t, bool) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw DataError("model file lacks tensor " + name);
        const auto &e = *it->second;
        const auto shape = e.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
            throw DataError("tensor " + name + " has the wrong shape");
        const auto &data = e.at("data");
        if (data.size() != t.size())
            throw DataError("tensor " + name + " has the wrong element count");
        auto flat = t.flat();
        for (std::size_t i = 0; i < flat.size(); ++i)
            flat[i] = data[i].get<double>();
    });
    if (!all_finite(m.params))
        throw DataError("model file contains non-finite parameters");
    return m;
}

inline void write_text_file(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path);
    out << content;
    if (!out)
        throw IoError("error writing " + path);
}

inline void save_model(const std::string &path, const ModelArtifact &m) {
    write_text_file(path, model_to_json(m).dump() + "\n");
}

inline ModelArtifact load_model(const std::string &path, const Vocab &vocab) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error &e) {
        throw DataError(path + ": " + e.what());
    }
    return model_from_json(j, vocab.digest());
}

inline void save_vocab(const std::string &path, const Vocab &vocab) {
    write_text_file(path, vocab.to_json().dump() + "\n");
}

inline Vocab load_vocab(const std::string &path) {
    try {
        return Vocab::from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception &e) {
        throw DataError(path + ": " + e.what());
    }
}

} // namespace claimeval
