#include "advdo/predictors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace advdo::predictors {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "advdo-model/1";

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

const json& field(const json& j, const std::string& key, const std::string& at) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(at + "/" + key + ": missing field");
  return j.at(key);
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& at) {
  if (!j.is_array() || j.empty()) throw ParseError(at + ": expected a non-empty array of rows");
  const auto rows = j.size(), cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ParseError(at + "/" + std::to_string(r) + ": ragged row");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        throw ParseError(at + "/" + std::to_string(r) + "/" + std::to_string(c) + ": expected a number");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from(const json& j, const std::string& at) {
  if (!j.is_array()) throw ParseError(at + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(at + "/" + std::to_string(i) + ": expected a number");
    v[i] = j[i].get<double>();
  }
  return v;
}

int int_field(const json& j, const std::string& key) {
  const auto& v = field(j, key, "");
  if (!v.is_number_integer()) throw ParseError("/" + key + ": expected an integer");
  return v.get<int>();
}

}  // namespace

std::string save_model(const PredictionModel& model) {
  json j;
  j["format"] = kFormat;
  j["kind"] = model.name();
  if (const auto* m = dynamic_cast<const SocialMlp*>(&model)) {
    j["history"] = m->history();
    j["horizon"] = m->horizon();
    j["modes"] = m->modes();
    j["seed"] = m->seed();
    const auto& w = m->weights();
    j["weights"] = {{"W1", matrix_json(w.W1)}, {"b1", vector_json(w.b1)},
                    {"W2", matrix_json(w.W2)}, {"b2", vector_json(w.b2)},
                    {"W3", matrix_json(w.W3)}, {"b3", vector_json(w.b3)}};
  } else if (!dynamic_cast<const ConstantVelocity*>(&model) &&
             !dynamic_cast<const KinematicExtrapolation*>(&model)) {
    throw InvalidInput("save_model: only built-in surrogates can be serialized");
  }
  return j.dump();
}

ModelPtr load_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  const auto& fmt = field(j, "format", "");
  if (!fmt.is_string() || fmt.get<std::string>() != kFormat)
    throw ParseError("/format: expected \"" + std::string(kFormat) + "\"");
  const auto& kind_j = field(j, "kind", "");
  if (!kind_j.is_string()) throw ParseError("/kind: expected a string");
  SurrogateKind kind;
  try {
    kind = surrogate_kind_from_string(kind_j.get<std::string>());
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("/kind: ") + e.what());
  }
  if (kind != SurrogateKind::SocialMlp) return make_surrogate(kind);

  const auto& w = field(j, "weights", "");
  SocialMlp::Weights weights{matrix_from(field(w, "W1", "/weights"), "/weights/W1"),
                             matrix_from(field(w, "W2", "/weights"), "/weights/W2"),
                             matrix_from(field(w, "W3", "/weights"), "/weights/W3"),
                             vector_from(field(w, "b1", "/weights"), "/weights/b1"),
                             vector_from(field(w, "b2", "/weights"), "/weights/b2"),
                             vector_from(field(w, "b3", "/weights"), "/weights/b3")};
  const auto& seed = field(j, "seed", "");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw ParseError("/seed: expected an integer");
  try {
    return std::make_shared<SocialMlp>(int_field(j, "history"), int_field(j, "horizon"),
                                       int_field(j, "modes"), std::move(weights),
                                       seed.get<std::uint64_t>());
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("/weights: ") + e.what());
  }
}

ModelPtr load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

void save_model_file(const PredictionModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write model file " + path);
  out << save_model(model) << "\n";
}

}  // namespace advdo::predictors
