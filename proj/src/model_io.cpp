#include "mtsvm/model_io.hpp"

#include <fstream>
#include <vector>

#include "json.hpp"

namespace mtsvm {

namespace {

using nlohmann::json;

json exponent_to_json(Exponent e) {
  if (e.is_inf()) return json("inf");
  return json(e.value());
}

Exponent exponent_from_json(const json& j, const char* what) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return Exponent::infinity();
    throw ParseError(std::string(what) + ": expected a number or \"inf\"");
  }
  if (!j.is_number()) {
    throw ParseError(std::string(what) + ": expected a number or \"inf\"");
  }
  return Exponent(j.get<double>());
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + ": expected array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) {
    if (!x.is_number()) {
      throw ParseError(std::string(what) + ": expected numeric entries");
    }
    v[i++] = x.get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + ": expected array");
  const auto nrows = static_cast<Eigen::Index>(j.size());
  Eigen::Index ncols = -1;
  Eigen::MatrixXd m;
  Eigen::Index i = 0;
  for (const auto& row : j) {
    if (!row.is_array()) {
      throw ParseError(std::string(what) + ": expected row arrays");
    }
    if (ncols < 0) {
      ncols = static_cast<Eigen::Index>(row.size());
      m.resize(nrows, ncols);
    } else if (static_cast<Eigen::Index>(row.size()) != ncols) {
      throw ParseError(std::string(what) + ": ragged rows");
    }
    Eigen::Index c = 0;
    for (const auto& x : row) {
      if (!x.is_number()) {
        throw ParseError(std::string(what) + ": expected numeric entries");
      }
      m(i, c++) = x.get<double>();
    }
    ++i;
  }
  if (ncols < 0) m.resize(0, 0);
  return m;
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(std::string("model file: missing key '") + key + "'");
  }
  return *it;
}

}  // namespace

void save_model(const MtlModel& model, const std::string& path) {
  json j;
  j["schema_version"] = 1;
  j["model_type"] = model.r.has_value() ? "mkl" : "mtl";
  j["s"] = exponent_to_json(model.s);
  if (model.r.has_value()) j["r"] = exponent_to_json(*model.r);
  j["C"] = model.C;
  json ks = json::array();
  for (const auto& k : model.kernels) ks.push_back(kernel_spec_to_json(k));
  j["kernels"] = std::move(ks);
  j["task_weights"] = vector_to_json(model.task_weights);
  j["kernel_weights"] = vector_to_json(model.kernel_weights);
  json tasks = json::array();
  for (const auto& tm : model.tasks) {
    json t;
    t["name"] = tm.name;
    t["alpha"] = vector_to_json(tm.alpha);
    t["b"] = tm.b;
    t["scale"] = tm.scale;
    t["degenerate"] = tm.degenerate;
    t["labels"] = vector_to_json(tm.support_labels);
    t["features"] = matrix_to_json(tm.support_features);
    tasks.push_back(std::move(t));
  }
  j["tasks"] = std::move(tasks);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw ParseError("write failed: " + path);
}

MtlModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("model file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("model file " + path + ": not an object");
  const json& ver = require(j, "schema_version");
  if (!ver.is_number_integer() || ver.get<int>() != 1) {
    throw ParseError("model file " + path + ": unsupported schema_version");
  }
  const json& mt = require(j, "model_type");
  if (!mt.is_string() ||
      (mt.get<std::string>() != "mtl" && mt.get<std::string>() != "mkl")) {
    throw ParseError("model file " + path + ": bad model_type");
  }

  MtlModel model;
  try {
    model.s = exponent_from_json(require(j, "s"), "s");
    if (j.contains("r")) {
      model.r = exponent_from_json(j["r"], "r");
    } else if (mt.get<std::string>() == "mkl") {
      throw ParseError("mkl model without r");
    }
    const json& c = require(j, "C");
    if (!c.is_number()) throw ParseError("C: expected a number");
    model.C = c.get<double>();
    const json& ks = require(j, "kernels");
    if (!ks.is_array() || ks.empty()) {
      throw ParseError("kernels: expected a nonempty array");
    }
    for (const auto& k : ks) {
      model.kernels.push_back(kernel_spec_from_json(k, false));
    }
    model.task_weights = vector_from_json(require(j, "task_weights"),
                                          "task_weights");
    model.kernel_weights = vector_from_json(require(j, "kernel_weights"),
                                            "kernel_weights");
    if (model.kernel_weights.size() !=
        static_cast<Eigen::Index>(model.kernels.size())) {
      throw ParseError("kernel_weights length does not match kernels");
    }
    const json& tasks = require(j, "tasks");
    if (!tasks.is_array() || tasks.empty()) {
      throw ParseError("tasks: expected a nonempty array");
    }
    for (const auto& t : tasks) {
      if (!t.is_object()) throw ParseError("tasks: expected objects");
      TaskModel tm;
      const json& name = require(t, "name");
      if (!name.is_string()) throw ParseError("task name: expected a string");
      tm.name = name.get<std::string>();
      tm.alpha = vector_from_json(require(t, "alpha"), "alpha");
      const json& b = require(t, "b");
      if (!b.is_number()) throw ParseError("b: expected a number");
      tm.b = b.get<double>();
      const json& scale = require(t, "scale");
      if (!scale.is_number()) throw ParseError("scale: expected a number");
      tm.scale = scale.get<double>();
      const json& deg = require(t, "degenerate");
      if (!deg.is_boolean()) throw ParseError("degenerate: expected a bool");
      tm.degenerate = deg.get<bool>();
      tm.support_labels = vector_from_json(require(t, "labels"), "labels");
      tm.support_features = matrix_from_json(require(t, "features"),
                                             "features");
      if (tm.support_features.rows() != tm.support_labels.size() ||
          tm.alpha.size() != tm.support_labels.size()) {
        throw ParseError("task '" + tm.name + "': inconsistent sizes");
      }
      model.tasks.push_back(std::move(tm));
    }
    if (model.task_weights.size() != model.num_tasks()) {
      throw ParseError("task_weights length does not match tasks");
    }
  } catch (const json::exception& e) {
    throw ParseError("model file " + path + ": " + e.what());
  }
  return model;
}

}  // namespace mtsvm
