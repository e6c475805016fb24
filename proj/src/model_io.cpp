#include "hiergibbs/model_io.hpp"

#include <fstream>
#include <set>

#include "hiergibbs/errors.hpp"

namespace hiergibbs {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key()))
      throw ConfigError("unknown field '" + it.key() + "' in " + where);
  }
}

std::vector<double> per_leaf_values(const json& v, const HierarchyTree& tree,
                                    const std::string& field) {
  const auto& leaves = tree.leaves();
  std::vector<double> out(tree.size(), 0.0);
  if (v.is_number()) {
    for (int t : leaves) out[t] = v.get<double>();
    return out;
  }
  if (!v.is_array() || v.size() != leaves.size())
    throw ConfigError("'" + field + "' must be a number or an array with one "
                      "entry per leaf");
  for (size_t i = 0; i < leaves.size(); ++i) out[leaves[i]] = v[i].get<double>();
  return out;
}

}  // namespace

LoadedModel model_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("model spec must be a JSON object");
  reject_unknown(doc,
                 {"levels", "branching", "parents", "variances", "leaf_counts",
                  "data", "simulate", "assignment"},
                 "model spec");

  HierarchyTree tree = [&] {
    const bool has_branching = doc.contains("branching");
    const bool has_parents = doc.contains("parents");
    if (has_branching == has_parents)
      throw ConfigError("give exactly one of 'branching' or 'parents'");
    if (has_branching)
      return HierarchyTree::balanced(
          doc.at("branching").get<std::vector<int>>());
    return HierarchyTree::from_parents(
        doc.at("parents").get<std::vector<int>>());
  }();
  if (doc.contains("levels") &&
      doc.at("levels").get<int>() != tree.depth())
    throw ConfigError("'levels' disagrees with the tree depth");

  if (!doc.contains("variances"))
    throw ConfigError("model spec needs 'variances'");
  const json& var = doc.at("variances");
  reject_unknown(var, {"levels", "nodes", "noise"}, "'variances'");
  std::vector<double> node_prec(tree.size(), 0.0);
  if (var.contains("levels") == var.contains("nodes"))
    throw ConfigError("'variances' needs exactly one of 'levels' or 'nodes'");
  if (var.contains("levels")) {
    const auto lv = var.at("levels").get<std::vector<double>>();
    if (static_cast<int>(lv.size()) != tree.depth() - 1)
      throw ConfigError("'variances.levels' needs one entry per level below "
                        "the root");
    for (int t = 1; t < tree.size(); ++t)
      node_prec[t] = 1.0 / lv[tree.level(t) - 1];
  } else {
    const auto nv = var.at("nodes").get<std::vector<double>>();
    if (static_cast<int>(nv.size()) != tree.size() - 1)
      throw ConfigError("'variances.nodes' needs one entry per non-root node "
                        "in breadth-first order");
    for (int t = 1; t < tree.size(); ++t) node_prec[t] = 1.0 / nv[t - 1];
  }
  if (!var.contains("noise"))
    throw ConfigError("'variances' needs a 'noise' entry");
  std::vector<double> noise_var =
      per_leaf_values(var.at("noise"), tree, "variances.noise");
  std::vector<double> noise_prec(tree.size(), 0.0);
  for (int t : tree.leaves()) noise_prec[t] = 1.0 / noise_var[t];

  if (!doc.contains("leaf_counts"))
    throw ConfigError("model spec needs 'leaf_counts'");
  std::vector<double> counts =
      per_leaf_values(doc.at("leaf_counts"), tree, "leaf_counts");
  std::vector<int64_t> leaf_count(tree.size(), 0);
  for (int t : tree.leaves())
    leaf_count[t] = static_cast<int64_t>(counts[t]);

  LoadedModel out{ModelInstance::general(std::move(tree), std::move(node_prec),
                                         std::move(noise_prec),
                                         std::move(leaf_count)),
                  std::nullopt};
  const HierarchyTree& t = out.model.tree;

  const bool has_data = doc.contains("data");
  const bool has_sim = doc.contains("simulate");
  if (has_data && has_sim)
    throw ConfigError("give at most one of 'data' or 'simulate'");
  if (has_data) {
    const json& data = doc.at("data");
    reject_unknown(data, {"means", "ssd"}, "'data'");
    const auto means = data.at("means").get<std::vector<double>>();
    if (means.size() != t.leaves().size())
      throw ConfigError("'data.means' needs one entry per leaf");
    out.model.leaf_mean.assign(t.size(), 0.0);
    out.model.leaf_ssd.assign(t.size(), 0.0);
    for (size_t i = 0; i < means.size(); ++i)
      out.model.leaf_mean[t.leaves()[i]] = means[i];
    if (data.contains("ssd")) {
      const auto ssd = data.at("ssd").get<std::vector<double>>();
      if (ssd.size() != t.leaves().size())
        throw ConfigError("'data.ssd' needs one entry per leaf");
      for (size_t i = 0; i < ssd.size(); ++i)
        out.model.leaf_ssd[t.leaves()[i]] = ssd[i];
    }
    out.model.has_data = true;
  } else if (has_sim) {
    const json& sim = doc.at("simulate");
    reject_unknown(sim, {"seed", "mu"}, "'simulate'");
    out.model = simulate_data(out.model,
                              sim.value("mu", 0.0),
                              sim.value("seed", uint64_t{1}));
  }

  if (doc.contains("assignment")) {
    const json& a = doc.at("assignment");
    if (a.is_string()) {
      out.assignment = CenteringAssignment::from_shorthand(
          t, a.get<std::string>());
    } else {
      const auto v = a.get<std::vector<int>>();
      if (static_cast<int>(v.size()) != t.size())
        throw ConfigError("'assignment' needs one 0/1 entry per node");
      CenteringAssignment assign{v};
      if (assign.lambda[0] != 0)
        throw ConfigError("the root entry of 'assignment' must be 0");
      for (int x : v) {
        if (x != 0 && x != 1)
          throw ConfigError("'assignment' entries must be 0 or 1");
      }
      out.assignment = std::move(assign);
    }
  }
  return out;
}

LoadedModel load_model_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model spec '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("model spec '" + path + "' is not valid JSON: " +
                      e.what());
  }
  try {
    return model_from_json(doc);
  } catch (const json::exception& e) {
    throw ConfigError("model spec '" + path + "': " + e.what());
  }
}

}  // namespace hiergibbs
