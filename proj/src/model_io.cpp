#include <json.hpp>

#include "reachmap/chain_io.hpp"
#include "reachmap/error.hpp"
#include "reachmap/models.hpp"

namespace reachmap {

namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd mat_from(const json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Eigen::VectorXd row = vec_from(j[r]);
    if (row.size() != cols) throw Error(ErrorCode::kSchema, "matrix rows have unequal length");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

}  // namespace

std::string model_to_json(const ReachabilityMap& model) {
  json j;
  if (const auto* mlp = dynamic_cast<const MlpModel*>(&model)) {
    json layers = json::array();
    for (std::size_t l = 0; l < mlp->weights().size(); ++l) {
      layers.push_back({{"weights", mat_json(mlp->weights()[l])}, {"bias", vec_json(mlp->biases()[l])}});
    }
    j = {{"kind", "mlp"},
         {"space", model.space().name()},
         {"hyperparameters", {{"layer_sizes", mlp->layer_sizes()}}},
         {"offset", model.offset()},
         {"parameters",
          {{"input_mean", vec_json(mlp->input_mean())},
           {"input_scale", vec_json(mlp->input_scale())},
           {"layers", layers}}}};
  } else if (const auto* svm = dynamic_cast<const SvmModel*>(&model)) {
    j = {{"kind", model_kind_name(svm->kind())},
         {"space", model.space().name()},
         {"hyperparameters", {{"gamma", svm->gamma()}}},
         {"offset", model.offset()},
         {"parameters",
          {{"bias", svm->bias()}, {"coeffs", vec_json(svm->coeffs())}, {"support", mat_json(svm->support())}}}};
  } else {
    throw Error(ErrorCode::kInvalidArgument, "only trained MLP and SVM models can be saved");
  }
  return j.dump(1) + "\n";
}

std::shared_ptr<ReachabilityMap> model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    const TaskSpace space = TaskSpace::from_name(j.at("space").get<std::string>());
    const double offset = j.at("offset").get<double>();
    const json& p = j.at("parameters");
    if (kind == "mlp") {
      std::vector<Eigen::MatrixXd> W;
      std::vector<Eigen::VectorXd> b;
      Eigen::Index in = space.input_dim();
      for (const json& layer : p.at("layers")) {
        W.push_back(mat_from(layer.at("weights"), in));
        b.push_back(vec_from(layer.at("bias")));
        in = W.back().rows();
      }
      return std::make_shared<MlpModel>(space, W, b, vec_from(p.at("input_mean")),
                                        vec_from(p.at("input_scale")), offset);
    }
    if (kind == "svm" || kind == "ocsvm") {
      const Eigen::VectorXd coeffs = vec_from(p.at("coeffs"));
      return std::make_shared<SvmModel>(kind == "svm" ? ModelKind::kSvm : ModelKind::kOcSvm, space,
                                        j.at("hyperparameters").at("gamma").get<double>(), coeffs,
                                        mat_from(p.at("support"), space.input_dim()),
                                        p.at("bias").get<double>(), offset);
    }
    throw Error(ErrorCode::kSchema, "unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("model file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchema) throw;
    throw Error(ErrorCode::kSchema, std::string("model file: ") + e.what());
  }
}

void save_model(const ReachabilityMap& model, const std::string& path) {
  save_text(path, model_to_json(model));
}

std::shared_ptr<ReachabilityMap> load_model(const std::string& path) {
  return model_from_json(load_text(path));
}

}  // namespace reachmap
