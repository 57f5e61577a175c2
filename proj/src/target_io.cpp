#include "lcgibbs/target_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace lcgibbs {

namespace {

using nlohmann::json;

VectorXd read_vector(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) throw ConfigError(std::string("target: missing array '") + key + "'");
    const auto& a = j.at(key);
    VectorXd v(static_cast<Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) throw ConfigError(std::string("target: non-numeric entry in '") + key + "'");
        v[static_cast<Index>(i)] = a[i].get<double>();
    }
    return v;
}

MatrixXd read_matrix(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array() || j.at(key).empty())
        throw ConfigError(std::string("target: missing matrix '") + key + "'");
    const auto& rows = j.at(key);
    const std::size_t nc = rows[0].is_array() ? rows[0].size() : 0;
    MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(nc));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].is_array() || rows[r].size() != nc)
            throw ConfigError(std::string("target: ragged matrix '") + key + "'");
        for (std::size_t c = 0; c < nc; ++c) {
            if (!rows[r][c].is_number()) throw ConfigError(std::string("target: non-numeric entry in '") + key + "'");
            M(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c].get<double>();
        }
    }
    return M;
}

double read_number(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) throw ConfigError(std::string("target: missing number '") + key + "'");
    return j.at(key).get<double>();
}

}  // namespace

Target parse_target(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("target: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
        throw ConfigError("target: missing string field 'type'");
    const std::string type = j.at("type").get<std::string>();

    if (type == "gaussian") {
        VectorXd mean = read_vector(j, "mean");
        MatrixXd Q = read_matrix(j, "precision");
        if (Q.rows() != mean.size() || Q.cols() != mean.size())
            throw DimensionError("target: precision and mean dimensions disagree");
        BlockStructure blocks = BlockStructure::unit(mean.size());
        if (j.contains("blocks")) {
            if (!j.at("blocks").is_array()) throw ConfigError("target: 'blocks' must be an array");
            std::vector<Index> dims;
            for (const auto& b : j.at("blocks")) {
                if (!b.is_number_integer()) throw ConfigError("target: block sizes must be integers");
                dims.push_back(b.get<Index>());
            }
            blocks = BlockStructure(dims);
            if (blocks.dim() != mean.size()) throw DimensionError("target: block sizes do not sum to the dimension");
        }
        return GaussianTarget<double>(mean, Q, blocks);
    }
    if (type == "logistic") {
        const MatrixXd A = read_matrix(j, "A");
        const double s = read_number(j, "prior_scale");
        const double l1 = j.contains("l1") ? read_number(j, "l1") : 0.0;
        CompositeTarget t = make_logistic_target(A, s, l1);
        if (j.contains("lambda_star")) {
            t.lambda_star = read_number(j, "lambda_star");
            t.validate();
        }
        return t;
    }
    if (type == "logcosh") {
        if (!j.contains("dim") || !j.at("dim").is_number_integer()) throw ConfigError("target: logcosh needs integer 'dim'");
        const Index d = j.at("dim").get<Index>();
        if (d != 1 && d != 2) throw ConfigError("target: logcosh dim must be 1 or 2");
        return make_logcosh_target(d);
    }
    throw ConfigError("target: unknown type '" + type + "'");
}

Target load_target(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read target file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_target(ss.str());
}

Index target_dim(const Target& t) {
    return std::visit([](const auto& v) { return v.dim(); }, t);
}

const BlockStructure& target_blocks(const Target& t) {
    return std::visit([](const auto& v) -> const BlockStructure& {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, CompositeTarget>) return v.blocks;
        else return v.blocks();
    }, t);
}

ConditionNumbers<double> target_condition_numbers(const Target& t) {
    if (const auto* g = std::get_if<GaussianTarget<double>>(&t)) return condition_numbers(*g);
    return std::get<CompositeTarget>(t).condition_numbers();
}

}  // namespace lcgibbs
