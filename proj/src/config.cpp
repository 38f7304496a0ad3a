#include "dalkit/config.hpp"

#include <fstream>
#include <set>

namespace dalkit {

using nlohmann::json;

namespace {

void require_known_keys(const json& j, const std::string& where,
                        const std::set<std::string>& known) {
  for (const auto& [key, _] : j.items())
    if (!known.contains(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
}

double number_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number())
    throw ConfigError(std::string("'") + key + "' must be a number");
  return j[key].get<double>();
}

Index integer_or(const json& j, const char* key, Index fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer())
    throw ConfigError(std::string("'") + key + "' must be an integer");
  return j[key].get<Index>();
}

Schedule parse_schedule(const json& j) {
  require_known_keys(j, "optimizer.schedule",
                     {"kind", "drop_epoch", "factor", "gamma", "beta"});
  Schedule s;
  const std::string kind = j.value("kind", "inv");
  if (kind == "inv") {
    s.kind = ScheduleKind::inv;
  } else if (kind == "step") {
    s.kind = ScheduleKind::step;
  } else {
    throw ConfigError("schedule kind must be 'inv' or 'step'");
  }
  s.drop_epoch = integer_or(j, "drop_epoch", s.drop_epoch);
  s.drop_factor = number_or(j, "factor", s.drop_factor);
  s.gamma = number_or(j, "gamma", s.gamma);
  s.beta = number_or(j, "beta", s.beta);
  if (s.drop_factor <= 0.0) throw ConfigError("schedule factor must be > 0");
  return s;
}

ShiftSpec parse_shift(const json& j) {
  require_known_keys(j, "data.synthetic",
                     {"classes", "dim", "separation", "covariance", "rotation",
                      "translation", "scale", "n_source", "n_target", "seed"});
  ShiftSpec s;
  s.class_count = integer_or(j, "classes", s.class_count);
  s.dim = integer_or(j, "dim", s.dim);
  s.separation = number_or(j, "separation", s.separation);
  s.covariance_scale = number_or(j, "covariance", s.covariance_scale);
  s.rotation_angle = number_or(j, "rotation", s.rotation_angle);
  s.scale_factor = number_or(j, "scale", s.scale_factor);
  s.n_source = integer_or(j, "n_source", s.n_source);
  s.n_target = integer_or(j, "n_target", s.n_target);
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("translation")) {
    const json& t = j["translation"];
    if (t.is_number()) {
      s.translation = Eigen::VectorXd::Constant(s.dim, t.get<double>());
    } else if (t.is_array()) {
      s.translation = Eigen::VectorXd(static_cast<Index>(t.size()));
      for (Index i = 0; i < s.translation.size(); ++i)
        s.translation[i] = t[static_cast<std::size_t>(i)].get<double>();
    } else {
      throw ConfigError("translation must be a number or an array");
    }
  }
  return s;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::source: return "source";
    case Variant::entropy: return "entropy";
    case Variant::autodial_fixed: return "autodial_fixed";
    case Variant::autodial: return "autodial";
  }
  throw ConfigError("unreachable variant");
}

Variant variant_from_name(const std::string& name) {
  std::string n = name;
  for (char& c : n)
    if (c == '-') c = '_';
  if (n == "source") return Variant::source;
  if (n == "entropy") return Variant::entropy;
  if (n == "autodial_fixed") return Variant::autodial_fixed;
  if (n == "autodial") return Variant::autodial;
  throw ConfigError("unknown variant '" + name +
                    "' (expected source, entropy, autodial_fixed, autodial)");
}

ExperimentConfig parse_config(const json& j) {
  require_known_keys(j, "config",
                     {"variant", "net", "loss", "optimizer", "data", "batch",
                      "epochs", "seeds", "output_dir", "histogram"});
  ExperimentConfig cfg;
  if (j.contains("variant"))
    cfg.variant = variant_from_name(j["variant"].get<std::string>());

  // The entropy weight defaults to 0 wherever the prior is disabled.
  cfg.lambda = cfg.variant == Variant::source ? 0.0 : 0.1;

  if (j.contains("net")) {
    const json& n = j["net"];
    require_known_keys(n, "net", {"hidden", "alpha_init", "eps", "momentum_ma"});
    if (n.contains("hidden")) {
      if (!n["hidden"].is_array())
        throw ConfigError("net.hidden must be an array of layer widths");
      cfg.hidden.clear();
      for (const auto& w : n["hidden"]) cfg.hidden.push_back(w.get<Index>());
    }
    if (n.contains("alpha_init")) {
      cfg.alpha_init = n["alpha_init"].get<double>();
      if (cfg.variant == Variant::autodial_fixed && cfg.alpha_init != 1.0)
        throw ConfigError("autodial_fixed pins alpha at 1.0");
    }
    cfg.da_eps = number_or(n, "eps", cfg.da_eps);
    cfg.da_momentum = number_or(n, "momentum_ma", cfg.da_momentum);
  }

  if (j.contains("loss")) {
    const json& l = j["loss"];
    require_known_keys(l, "loss", {"lambda"});
    cfg.lambda = number_or(l, "lambda", cfg.lambda);
  }

  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    require_known_keys(
        o, "optimizer",
        {"learning_rate", "momentum", "weight_decay", "schedule"});
    cfg.learning_rate = number_or(o, "learning_rate", cfg.learning_rate);
    cfg.momentum = number_or(o, "momentum", cfg.momentum);
    cfg.weight_decay = number_or(o, "weight_decay", cfg.weight_decay);
    if (o.contains("schedule")) cfg.schedule = parse_schedule(o["schedule"]);
  }

  if (j.contains("data")) {
    const json& d = j["data"];
    require_known_keys(d, "data", {"synthetic", "source_file", "target_file"});
    if (d.contains("synthetic") ==
        (d.contains("source_file") || d.contains("target_file")))
      throw ConfigError(
          "data needs either 'synthetic' or 'source_file'/'target_file'");
    if (d.contains("synthetic")) {
      cfg.synthetic = true;
      cfg.shift = parse_shift(d["synthetic"]);
    } else {
      cfg.synthetic = false;
      if (!d.contains("source_file") || !d.contains("target_file"))
        throw ConfigError("file data needs both source_file and target_file");
      cfg.source_path = d["source_file"].get<std::string>();
      cfg.target_path = d["target_file"].get<std::string>();
    }
  }

  if (j.contains("batch")) {
    const json& b = j["batch"];
    require_known_keys(b, "batch", {"source", "target", "total", "proportional"});
    cfg.proportional = b.value("proportional", false);
    if (cfg.proportional) {
      if (b.contains("source") || b.contains("target"))
        throw ConfigError(
            "proportional batches take 'total', not explicit counts");
      cfg.batch_total = integer_or(b, "total", cfg.batch_total);
    } else {
      cfg.batch_source = integer_or(b, "source", cfg.batch_source);
      cfg.batch_target = integer_or(b, "target", cfg.batch_target);
    }
  }

  cfg.epochs = integer_or(j, "epochs", cfg.epochs);
  if (j.contains("seeds")) {
    if (!j["seeds"].is_array() || j["seeds"].empty())
      throw ConfigError("seeds must be a non-empty array");
    cfg.seeds.clear();
    for (const auto& s : j["seeds"]) cfg.seeds.push_back(s.get<std::uint64_t>());
  }
  if (j.contains("output_dir"))
    cfg.output_dir = j["output_dir"].get<std::string>();

  if (j.contains("histogram")) {
    const json& h = j["histogram"];
    require_known_keys(h, "histogram", {"bins", "channels", "sample_seed"});
    cfg.hist_bins = integer_or(h, "bins", cfg.hist_bins);
    cfg.hist_channels = integer_or(h, "channels", cfg.hist_channels);
    if (h.contains("sample_seed"))
      cfg.hist_seed = h["sample_seed"].get<std::uint64_t>();
  }

  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_config(j);
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.lambda < 0.0) throw ConfigError("lambda must be non-negative");
  switch (cfg.variant) {
    case Variant::source:
      if (cfg.lambda != 0.0)
        throw ConfigError("the source variant requires lambda = 0");
      break;
    case Variant::entropy:
      if (cfg.lambda <= 0.0)
        throw ConfigError("the entropy variant requires lambda > 0");
      break;
    case Variant::autodial_fixed:
    case Variant::autodial:
      if (cfg.alpha_init < 0.5 || cfg.alpha_init > 1.0)
        throw ConfigError("alpha_init must lie in [0.5, 1]");
      break;
  }
  for (Index w : cfg.hidden)
    if (w < 1) throw ConfigError("hidden layer widths must be positive");
  if (cfg.da_eps < 0.0) throw ConfigError("eps must be non-negative");
  if (cfg.da_momentum <= 0.0 || cfg.da_momentum > 1.0)
    throw ConfigError("momentum_ma must lie in (0, 1]");
  if (cfg.learning_rate <= 0.0)
    throw ConfigError("learning rate must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw ConfigError("momentum must lie in [0, 1)");
  if (cfg.weight_decay < 0.0)
    throw ConfigError("weight decay must be non-negative");
  if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
  if (cfg.proportional) {
    if (cfg.batch_total < 2)
      throw ConfigError("total batch size must be at least 2");
  } else if (cfg.batch_source < 1 || cfg.batch_target < 1) {
    throw ConfigError("per-domain batch counts must be at least 1");
  }
  if (cfg.hist_bins < 1 || cfg.hist_channels < 1)
    throw ConfigError("histogram bins and channels must be positive");
  if (!cfg.synthetic && (cfg.source_path.empty() || cfg.target_path.empty()))
    throw ConfigError("file data needs both source and target paths");
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["variant"] = variant_name(cfg.variant);
  j["net"] = {{"hidden", cfg.hidden},
              {"alpha_init", cfg.alpha_init},
              {"eps", cfg.da_eps},
              {"momentum_ma", cfg.da_momentum}};
  j["loss"] = {{"lambda", cfg.lambda}};
  json schedule;
  if (cfg.schedule.kind == ScheduleKind::inv) {
    schedule = {{"kind", "inv"},
                {"gamma", cfg.schedule.gamma},
                {"beta", cfg.schedule.beta}};
  } else {
    schedule = {{"kind", "step"},
                {"drop_epoch", cfg.schedule.drop_epoch},
                {"factor", cfg.schedule.drop_factor}};
  }
  j["optimizer"] = {{"learning_rate", cfg.learning_rate},
                    {"momentum", cfg.momentum},
                    {"weight_decay", cfg.weight_decay},
                    {"schedule", schedule}};
  if (cfg.synthetic) {
    json t;
    if (cfg.shift.translation.size() > 0) {
      std::vector<double> v(cfg.shift.translation.data(),
                            cfg.shift.translation.data() +
                                cfg.shift.translation.size());
      t = v;
    } else {
      t = 0.0;
    }
    j["data"] = {{"synthetic",
                  {{"classes", cfg.shift.class_count},
                   {"dim", cfg.shift.dim},
                   {"separation", cfg.shift.separation},
                   {"covariance", cfg.shift.covariance_scale},
                   {"rotation", cfg.shift.rotation_angle},
                   {"translation", t},
                   {"scale", cfg.shift.scale_factor},
                   {"n_source", cfg.shift.n_source},
                   {"n_target", cfg.shift.n_target},
                   {"seed", cfg.shift.seed}}}};
  } else {
    j["data"] = {{"source_file", cfg.source_path},
                 {"target_file", cfg.target_path}};
  }
  if (cfg.proportional) {
    j["batch"] = {{"total", cfg.batch_total}, {"proportional", true}};
  } else {
    j["batch"] = {{"source", cfg.batch_source}, {"target", cfg.batch_target}};
  }
  j["epochs"] = cfg.epochs;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["histogram"] = {{"bins", cfg.hist_bins},
                    {"channels", cfg.hist_channels},
                    {"sample_seed", cfg.hist_seed}};
  return j;
}

Network build_network(const ExperimentConfig& cfg, Index input_dim,
                      Index class_count, std::uint64_t init_seed) {
  if (class_count < 2) throw ConfigError("need at least two classes");
  Network net(input_dim);
  const bool align = cfg.uses_alignment();
  for (Index width : cfg.hidden) {
    net.add_dense(width);
    if (align)
      net.add_align(cfg.effective_alpha_init(), cfg.alpha_trainable(),
                    cfg.da_eps, cfg.da_momentum);
    net.add_relu();
  }
  net.add_dense(class_count);
  if (align)
    net.add_align(cfg.effective_alpha_init(), cfg.alpha_trainable(), cfg.da_eps,
                  cfg.da_momentum);
  net.add_softmax();
  net.init_params(init_seed);
  return net;
}

}  // namespace dalkit
