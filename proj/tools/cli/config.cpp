// Copyright 2026 the tempair authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli/config.hpp"

#include <fstream>
#include <set>

#include "tempair/errors.hpp"

namespace tempair::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) {
    throw ConfigError(where + " must be a JSON object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) {
    throw ConfigError("missing key '" + key + "' in " + where);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

sampler::TemperMode parse_mode(const std::string& text) {
  if (text == "temper_likelihood") return sampler::TemperMode::TemperLikelihood;
  if (text == "temper_posterior") return sampler::TemperMode::TemperPosterior;
  throw ConfigError("mode must be temper_likelihood or temper_posterior, got '" +
                    text + "'");
}

GaussianMeanConfig parse_gaussian_mean(const json& obj) {
  check_keys(obj, "model", {"kind", "mu0", "sigma0_sq", "sigma_sq",
                            "sigma_eta_sq", "cases", "max_n", "max_b",
                            "force_temperature"});
  GaussianMeanConfig out;
  out.mu0 = get_or(obj, "mu0", out.mu0);
  out.sigma0_sq = get_or(obj, "sigma0_sq", out.sigma0_sq);
  out.sigma_sq = get_or(obj, "sigma_sq", out.sigma_sq);
  out.sigma_eta_sq = get_or(obj, "sigma_eta_sq", out.sigma_eta_sq);
  out.cases = get_or(obj, "cases", out.cases);
  out.max_n = get_or(obj, "max_n", out.max_n);
  out.max_b = get_or(obj, "max_b", out.max_b);
  if (obj.contains("force_temperature") &&
      !obj.at("force_temperature").is_null()) {
    out.force_temperature = obj.at("force_temperature").get<double>();
  }
  if (out.max_n == 0 || out.max_b == 0) {
    throw ConfigError("max_n and max_b must be >= 1");
  }
  return out;
}

KlGridConfig parse_kl_grid(const json& obj) {
  check_keys(obj, "model", {"kind", "b_values", "sigma_eps_sq_values",
                            "sigma_eta_sq_values"});
  KlGridConfig out;
  out.b_values = require<std::vector<std::size_t>>(obj, "b_values", "model");
  out.sigma_eps_sq_values =
      require<std::vector<double>>(obj, "sigma_eps_sq_values", "model");
  out.sigma_eta_sq_values =
      require<std::vector<double>>(obj, "sigma_eta_sq_values", "model");
  if (out.b_values.empty() || out.sigma_eps_sq_values.empty() ||
      out.sigma_eta_sq_values.empty()) {
    throw ConfigError("kl grid must be nonempty in every dimension");
  }
  return out;
}

NetworkConfig parse_network(const json& obj) {
  check_keys(obj, "model",
             {"kind", "architecture", "group", "stride", "padding",
              "channels", "classes", "dataset"});
  NetworkConfig out;
  out.architecture = get_or<std::string>(obj, "architecture", "gconv");
  if (out.architecture != "gconv" && out.architecture != "conv") {
    throw ConfigError("architecture must be gconv or conv");
  }
  const std::string group = get_or<std::string>(obj, "group", "p4m");
  if (group == "p4") {
    out.group = net::Group::P4;
  } else if (group == "p4m") {
    out.group = net::Group::P4M;
  } else {
    throw ConfigError("group must be p4 or p4m");
  }
  out.stride = get_or<std::size_t>(obj, "stride", 1);
  const std::string padding = get_or<std::string>(obj, "padding", "circular");
  if (padding == "circular") {
    out.padding = net::Padding::Circular;
  } else if (padding == "zero") {
    out.padding = net::Padding::Zero;
  } else {
    throw ConfigError("padding must be circular or zero");
  }
  out.channels = get_or(obj, "channels", out.channels);
  out.classes = get_or<std::size_t>(obj, "classes", 2);
  if (out.channels.empty() || out.classes < 2) {
    throw ConfigError("network needs channels and at least 2 classes");
  }

  if (obj.contains("dataset")) {
    const json& ds = obj.at("dataset");
    check_keys(ds, "model.dataset", {"synthetic", "pixel_csv"});
    if (ds.contains("synthetic") == ds.contains("pixel_csv")) {
      throw ConfigError("dataset must specify exactly one of synthetic and "
                        "pixel_csv");
    }
    if (ds.contains("synthetic")) {
      const json& syn = ds.at("synthetic");
      check_keys(syn, "model.dataset.synthetic",
                 {"n_train", "n_test", "size", "label_flip_prob", "noise_sd"});
      SyntheticDataConfig s;
      s.n_train = get_or(syn, "n_train", s.n_train);
      s.n_test = get_or(syn, "n_test", s.n_test);
      s.size = get_or(syn, "size", s.size);
      s.label_flip_prob = get_or(syn, "label_flip_prob", s.label_flip_prob);
      s.noise_sd = get_or(syn, "noise_sd", s.noise_sd);
      if (s.n_train == 0 || s.size < 4 || s.size % 2 != 0) {
        throw ConfigError("synthetic dataset needs n_train >= 1 and an even "
                          "size >= 4");
      }
      if (s.label_flip_prob < 0.0 || s.label_flip_prob >= 0.5) {
        throw ConfigError("label_flip_prob must lie in [0, 0.5)");
      }
      out.dataset = s;
    } else {
      const json& csv = ds.at("pixel_csv");
      check_keys(csv, "model.dataset.pixel_csv", {"train", "test"});
      CsvDataConfig c;
      c.train = require<std::string>(csv, "train", "pixel_csv");
      c.test = require<std::string>(csv, "test", "pixel_csv");
      out.dataset = c;
    }
  } else {
    out.dataset = SyntheticDataConfig{};
  }
  return out;
}

}  // namespace

augment::AugmentationSpec parse_augmentation_spec(const json& doc) {
  const std::string kind = require<std::string>(doc, "kind", "augmentation");
  if (kind == "additive_gaussian") {
    check_keys(doc, "augmentation", {"kind", "variance", "covariance"});
    if (doc.contains("covariance")) {
      const auto rows = doc.at("covariance").get<std::vector<std::vector<double>>>();
      const std::size_t d = rows.size();
      Eigen::MatrixXd sigma(d, d);
      for (std::size_t i = 0; i < d; ++i) {
        if (rows[i].size() != d) {
          throw ConfigError("covariance must be square");
        }
        for (std::size_t j = 0; j < d; ++j) {
          sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              rows[i][j];
        }
      }
      return augment::AdditiveGaussian{sigma};
    }
    return augment::additive_gaussian_iso(
        require<double>(doc, "variance", "augmentation"));
  }
  if (kind == "rot90_flip") {
    check_keys(doc, "augmentation", {"kind"});
    return augment::Rot90Flip{};
  }
  if (kind == "small_rotation") {
    check_keys(doc, "augmentation", {"kind", "max_degrees"});
    return augment::SmallRotation{
        require<double>(doc, "max_degrees", "augmentation")};
  }
  if (kind == "crop") {
    check_keys(doc, "augmentation", {"kind", "pad_pixels"});
    return augment::Crop{require<std::size_t>(doc, "pad_pixels",
                                              "augmentation")};
  }
  if (kind == "composition") {
    check_keys(doc, "augmentation", {"kind", "steps"});
    augment::Composition comp;
    for (const auto& step : doc.at("steps")) {
      comp.steps.push_back(parse_augmentation_spec(step));
    }
    return comp;
  }
  throw ConfigError("unknown augmentation kind '" + kind + "'");
}

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, "config", {"seed", "model", "prior", "augmentation",
                             "sampler", "sweep", "output"});
  ExperimentConfig out;
  out.echo = doc;
  out.seed = get_or<std::uint64_t>(doc, "seed", 0);

  if (doc.contains("model")) {
    const json& model = doc.at("model");
    const std::string kind = require<std::string>(model, "kind", "model");
    if (kind == "gaussian_mean") {
      out.gaussian_mean = parse_gaussian_mean(model);
    } else if (kind == "kl_grid") {
      out.kl_grid = parse_kl_grid(model);
    } else if (kind == "network") {
      out.network = parse_network(model);
    } else {
      throw ConfigError("model.kind must be gaussian_mean, kl_grid or "
                        "network");
    }
  }

  if (doc.contains("prior")) {
    check_keys(doc.at("prior"), "prior", {"sigma_sq"});
    out.prior_sigma_sq = get_or(doc.at("prior"), "sigma_sq", 1.0);
    if (!(out.prior_sigma_sq > 0.0)) {
      throw ConfigError("prior sigma_sq must be positive");
    }
  }

  if (doc.contains("augmentation")) {
    const json& aug = doc.at("augmentation");
    if (!aug.contains("spec")) {
      throw ConfigError("augmentation section needs a spec object");
    }
    check_keys(aug, "augmentation", {"spec", "bank_size"});
    AugmentationSection section;
    section.spec = parse_augmentation_spec(aug.at("spec"));
    section.bank_size = get_or<std::size_t>(aug, "bank_size", 1);
    if (section.bank_size == 0) {
      throw ConfigError("bank_size must be >= 1");
    }
    try {
      augment::validate_spec(section.spec);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid augmentation spec: ") + e.what());
    }
    out.augmentation = std::move(section);
  }

  if (doc.contains("sampler")) {
    const json& s = doc.at("sampler");
    check_keys(s, "sampler",
               {"alpha0", "cycle_len", "burn_in", "epochs", "batch_size",
                "temperature", "mode", "precondition"});
    out.sampler.alpha0 = get_or(s, "alpha0", out.sampler.alpha0);
    out.sampler.cycle_len = get_or(s, "cycle_len", out.sampler.cycle_len);
    out.sampler.burn_in = get_or(s, "burn_in", out.sampler.burn_in);
    out.sampler.epochs = get_or(s, "epochs", out.sampler.epochs);
    out.sampler.batch_size = get_or(s, "batch_size", out.sampler.batch_size);
    out.sampler.temperature = get_or(s, "temperature", out.sampler.temperature);
    if (s.contains("mode")) {
      out.sampler.mode = parse_mode(s.at("mode").get<std::string>());
    }
    out.sampler.precondition =
        get_or(s, "precondition", out.sampler.precondition);
  }

  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    check_keys(s, "sweep",
               {"temperatures", "modes", "alpha_scales_with_t",
                "chains_per_point"});
    SweepSection section;
    section.temperatures =
        require<std::vector<double>>(s, "temperatures", "sweep");
    if (section.temperatures.empty()) {
      throw ConfigError("sweep.temperatures must be nonempty");
    }
    for (const double t : section.temperatures) {
      if (!(t > 0.0)) throw ConfigError("sweep temperatures must be positive");
    }
    if (s.contains("modes")) {
      for (const auto& m : s.at("modes")) {
        section.modes.push_back(parse_mode(m.get<std::string>()));
      }
    }
    if (section.modes.empty()) {
      section.modes.push_back(sampler::TemperMode::TemperLikelihood);
    }
    section.alpha_scales_with_t =
        get_or(s, "alpha_scales_with_t", section.alpha_scales_with_t);
    section.chains_per_point =
        get_or(s, "chains_per_point", section.chains_per_point);
    if (section.chains_per_point == 0) {
      throw ConfigError("chains_per_point must be >= 1");
    }
    out.sweep = std::move(section);
  }

  if (doc.contains("output")) {
    const json& o = doc.at("output");
    check_keys(o, "output", {"dir", "formats"});
    out.output.dir = get_or<std::string>(o, "dir", out.output.dir);
    if (o.contains("formats")) {
      out.output.csv = false;
      out.output.json = false;
      for (const auto& f : o.at("formats")) {
        const auto text = f.get<std::string>();
        if (text == "csv") {
          out.output.csv = true;
        } else if (text == "json") {
          out.output.json = true;
        } else {
          throw ConfigError("output formats are csv and json");
        }
      }
    }
  }
  return out;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(doc);
}

}  // namespace tempair::cli
