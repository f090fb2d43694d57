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

#include "cli/commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <thread>

#include "cli/dataset.hpp"
#include "cli/io.hpp"
#include "tempair/conjugate.hpp"
#include "tempair/diagnostics.hpp"
#include "tempair/errors.hpp"
#include "tempair/linreg.hpp"
#include "tempair/rng.hpp"

namespace tempair::cli {

namespace {

using nlohmann::json;

double rel_err(double actual, double expected) {
  return std::abs(actual - expected) /
         std::max(std::abs(expected), 1e-12);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

std::string mode_name(sampler::TemperMode mode) {
  return mode == sampler::TemperMode::TemperLikelihood ? "temper_likelihood"
                                                       : "temper_posterior";
}

// ---------------------------------------------------------------------------
// theorem1

struct Theorem1Case {
  conjugate::GaussianMeanModel model;
  std::size_t n = 1;
  std::size_t B = 1;
  double temperature = 1.0;
  double mean_err_tempered = 0.0;
  double var_err_tempered = 0.0;
  double mean_err_oracle = 0.0;
  double var_err_oracle = 0.0;
};

Theorem1Case evaluate_theorem1_case(const conjugate::GaussianMeanModel& model,
                                    std::size_t n, std::size_t B,
                                    std::optional<double> forced_t,
                                    Rng& rng) {
  std::vector<double> sources(n);
  for (auto& s : sources) {
    s = model.mu0 + std::sqrt(model.sigma_sq) * rng.normal();
  }
  const auto data =
      conjugate::augment_gaussian(model, sources, B, rng.next_u64());

  Theorem1Case out;
  out.model = model;
  out.n = n;
  out.B = B;
  out.temperature =
      forced_t ? *forced_t : conjugate::optimal_temperature(model, B);

  const auto corr = conjugate::correlated_posterior(model, data);
  const auto tempered =
      conjugate::iid_tempered_posterior(model, data, out.temperature);
  const auto oracle = conjugate::dense_posterior_oracle(model, data);

  out.mean_err_tempered = rel_err(tempered.mean, corr.mean);
  out.var_err_tempered = rel_err(tempered.variance, corr.variance);
  out.mean_err_oracle = rel_err(corr.mean, oracle.mean);
  out.var_err_oracle = rel_err(corr.variance, oracle.variance);
  return out;
}

json case_to_json(const Theorem1Case& c) {
  return json{{"mu0", c.model.mu0},
              {"sigma0_sq", c.model.sigma0_sq},
              {"sigma_sq", c.model.sigma_sq},
              {"sigma_eta_sq", c.model.sigma_eta_sq},
              {"n", c.n},
              {"B", c.B},
              {"temperature", c.temperature},
              {"mean_rel_err_tempered", c.mean_err_tempered},
              {"var_rel_err_tempered", c.var_err_tempered},
              {"mean_rel_err_oracle", c.mean_err_oracle},
              {"var_rel_err_oracle", c.var_err_oracle}};
}

// ---------------------------------------------------------------------------
// kl-temperature: numeric side of the closed-form-vs-minimizer pair

double kl_of_temperature(double T, double sigma_eps_sq, double sigma_eta_sq,
                         std::size_t B) {
  const auto b = static_cast<Eigen::Index>(B);
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(b);
  const Eigen::MatrixXd tempered =
      ((sigma_eps_sq + sigma_eta_sq) / T) * Eigen::MatrixXd::Identity(b, b);
  const Eigen::MatrixXd correlated =
      sigma_eta_sq * Eigen::MatrixXd::Identity(b, b) +
      sigma_eps_sq * Eigen::MatrixXd::Ones(b, b);
  return linreg::kl_gaussians(mu, tempered, mu, correlated);
}

double golden_section_temperature(double sigma_eps_sq, double sigma_eta_sq,
                                  std::size_t B) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 1e-3;
  double b = 200.0;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = kl_of_temperature(c, sigma_eps_sq, sigma_eta_sq, B);
  double fd = kl_of_temperature(d, sigma_eps_sq, sigma_eta_sq, B);
  for (int it = 0; it < 160 && (b - a) > 1e-9; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = kl_of_temperature(c, sigma_eps_sq, sigma_eta_sq, B);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = kl_of_temperature(d, sigma_eps_sq, sigma_eta_sq, B);
    }
  }
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// sweep

struct SweepPoint {
  std::size_t index = 0;
  double temperature = 1.0;
  sampler::TemperMode mode = sampler::TemperMode::TemperLikelihood;
  std::uint64_t chain_seed = 0;
  double test_nll = 0.0;
  double test_accuracy = 0.0;
  bool diverged = false;
  sampler::Chain chain;
};

struct SweepContext {
  const ExperimentConfig* config = nullptr;
  net::NetworkSpec spec;
  net::ParamVector init;
  std::vector<augment::LabeledImage> train;
  std::vector<net::ClassifiedExample> test;
  augment::AugmentationBank bank;
  std::size_t dataset_scale = 0;
};

void run_sweep_point(const SweepContext& ctx, SweepPoint& point) {
  sampler::PriorSpec prior{ctx.config->prior_sigma_sq};
  const auto layout = ctx.spec.param_layout();
  const std::size_t n_chains = ctx.config->sweep->chains_per_point;

  double nll_acc = 0.0;
  double acc_acc = 0.0;
  for (std::size_t c = 0; c < n_chains; ++c) {
    sampler::NetClassificationLikelihood likelihood(ctx.spec, ctx.train,
                                                    ctx.bank);
    sampler::SgMcmcConfig run;
    const auto& s = ctx.config->sampler;
    run.alpha0 = ctx.config->sweep->alpha_scales_with_t
                     ? s.alpha0 * point.temperature
                     : s.alpha0;
    run.cycle_len = s.cycle_len;
    run.burn_in = s.burn_in;
    run.epochs = s.epochs;
    run.batch_size = s.batch_size;
    run.temperature = point.temperature;
    run.mode = point.mode;
    run.dataset_scale = ctx.dataset_scale;
    run.precondition = s.precondition;
    run.seed = derive_seed(point.chain_seed, c);

    auto chain = sampler::run_chain(likelihood, prior, run, ctx.init, &layout);

    bool finite = true;
    for (const auto& row : chain.trace) {
      finite = finite && std::isfinite(row.energy_estimate) &&
               std::isfinite(row.grad_norm);
    }
    for (const auto& sample : chain.samples) {
      finite = finite && sample.allFinite();
    }
    if (!finite || chain.samples.empty()) {
      point.diverged = true;
      point.test_nll = std::numeric_limits<double>::quiet_NaN();
      point.test_accuracy = std::numeric_limits<double>::quiet_NaN();
      point.chain = std::move(chain);
      return;
    }

    double nll = 0.0;
    std::size_t correct = 0;
    for (const auto& ex : ctx.test) {
      const Eigen::VectorXd p = sampler::bma_predict(chain, ctx.spec, ex.x);
      nll += -std::log(std::max(p(ex.label), 1e-300));
      Eigen::Index argmax = 0;
      p.maxCoeff(&argmax);
      if (argmax == ex.label) ++correct;
    }
    nll_acc += nll / static_cast<double>(ctx.test.size());
    acc_acc +=
        static_cast<double>(correct) / static_cast<double>(ctx.test.size());
    if (c == 0) point.chain = std::move(chain);  // checkpointed chain
  }
  point.test_nll = nll_acc / static_cast<double>(n_chains);
  point.test_accuracy = acc_acc / static_cast<double>(n_chains);
}

// ---------------------------------------------------------------------------
// residual helpers

void write_residuals_csv(const std::string& path,
                         const diagnostics::GroupedResiduals& residuals) {
  CsvWriter csv(path, {"global_index", "group", "aug_index", "residual"});
  std::size_t global = 0;
  for (const auto& [group, values] : residuals.groups) {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      csv.row({CsvWriter::cell(global++), CsvWriter::cell(group),
               CsvWriter::cell(static_cast<std::size_t>(i)),
               CsvWriter::cell(values(i))});
    }
  }
}

}  // namespace

int cmd_theorem1(const ExperimentConfig& config) {
  if (!config.gaussian_mean) {
    throw ConfigError("theorem1 needs a model section with kind "
                      "gaussian_mean");
  }
  const auto& mc = *config.gaussian_mean;
  Stopwatch watch;
  ensure_dir(config.output.dir);

  conjugate::GaussianMeanModel fixed{mc.mu0, mc.sigma0_sq, mc.sigma_sq,
                                     mc.sigma_eta_sq};
  Rng rng(config.seed);

  std::vector<Theorem1Case> cases;
  int exit_code = kExitOk;
  json report;
  try {
    // The configured model itself, then the randomized sweep around it.
    cases.push_back(evaluate_theorem1_case(fixed, mc.max_n, mc.max_b,
                                           mc.force_temperature, rng));
    for (std::size_t i = 0; i < mc.cases; ++i) {
      conjugate::GaussianMeanModel model;
      model.mu0 = rng.uniform(-2.0, 2.0);
      model.sigma0_sq = rng.uniform(0.1, 5.0);
      model.sigma_sq = rng.uniform(0.05, 4.0);
      model.sigma_eta_sq = rng.uniform(0.01, 4.0);
      const std::size_t n = 1 + rng.uniform_int(mc.max_n);
      const std::size_t B = 1 + rng.uniform_int(mc.max_b);
      cases.push_back(
          evaluate_theorem1_case(model, n, B, mc.force_temperature, rng));
    }
  } catch (const SingularCovarianceError& e) {
    report["error"] = e.what();
    report["status"] = "degenerate_model";
    write_json_file(config.output.dir + "/report.json", report);
    write_manifest(config.output.dir, "theorem1", config, watch.seconds());
    std::cerr << "theorem1: " << e.what() << "\n";
    return kExitDegenerate;
  }

  const Theorem1Case* worst = &cases.front();
  double max_tempered = 0.0;
  double max_oracle = 0.0;
  for (const auto& c : cases) {
    const double t = std::max(c.mean_err_tempered, c.var_err_tempered);
    if (t >= max_tempered) {
      max_tempered = t;
      worst = &c;
    }
    max_oracle = std::max(
        max_oracle, std::max(c.mean_err_oracle, c.var_err_oracle));
  }

  const bool pass = max_tempered <= 1e-10 && max_oracle <= 1e-8;
  report["cases"] = cases.size();
  report["forced_temperature"] = mc.force_temperature
                                     ? json(*mc.force_temperature)
                                     : json(nullptr);
  report["max_rel_err_tempered_vs_correlated"] = max_tempered;
  report["max_rel_err_correlated_vs_oracle"] = max_oracle;
  report["tolerance_tempered"] = 1e-10;
  report["tolerance_oracle"] = 1e-8;
  report["pass"] = pass;
  report["worst_case"] = case_to_json(*worst);
  report["status"] = pass ? "ok" : "tolerance_breach";
  write_json_file(config.output.dir + "/report.json", report);
  if (!pass) {
    std::cerr << "theorem1: max tempered-vs-correlated deviation "
              << max_tempered << " (tolerance 1e-10), oracle deviation "
              << max_oracle << " (tolerance 1e-8)\n";
    exit_code = kExitTolerance;
  }
  write_manifest(config.output.dir, "theorem1", config, watch.seconds());
  return exit_code;
}

int cmd_kl_temperature(const ExperimentConfig& config) {
  if (!config.kl_grid) {
    throw ConfigError("kl-temperature needs a model section with kind "
                      "kl_grid");
  }
  const auto& grid = *config.kl_grid;
  Stopwatch watch;
  ensure_dir(config.output.dir);

  CsvWriter csv(config.output.dir + "/kl_temperature.csv",
                {"B", "sigma_eps_sq", "sigma_eta_sq", "T_closed", "T_numeric",
                 "kl_at_opt", "agrees", "status"});

  bool all_agree = true;
  // kl_at_opt per (eps, eta) in the order B runs, for the monotonicity note.
  std::map<std::pair<double, double>, std::vector<std::pair<std::size_t, double>>>
      by_variances;
  for (const std::size_t B : grid.b_values) {
    for (const double eps : grid.sigma_eps_sq_values) {
      for (const double eta : grid.sigma_eta_sq_values) {
        if (B > 1 && eta == 0.0) {
          csv.row({CsvWriter::cell(B), CsvWriter::cell(eps),
                   CsvWriter::cell(eta), "", "", "", "", "singular"});
          continue;
        }
        const double closed = linreg::optimal_kl_temperature(eps, eta, B);
        const double numeric = golden_section_temperature(eps, eta, B);
        const double kl = linreg::kl_residual_mismatch(eps, eta, B);
        const bool agrees =
            std::abs(closed - numeric) <= 1e-6 * std::max(1.0, closed);
        all_agree = all_agree && agrees;
        by_variances[{eps, eta}].emplace_back(B, kl);
        csv.row({CsvWriter::cell(B), CsvWriter::cell(eps),
                 CsvWriter::cell(eta), CsvWriter::cell(closed),
                 CsvWriter::cell(numeric), CsvWriter::cell(kl),
                 agrees ? "1" : "0", "ok"});
      }
    }
  }

  json report;
  report["all_agree_within_1e-6"] = all_agree;
  json monotone = json::array();
  for (const auto& [variances, rows] : by_variances) {
    auto sorted = rows;
    std::sort(sorted.begin(), sorted.end());
    bool increasing = true;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      increasing = increasing && sorted[i].second > sorted[i - 1].second;
    }
    monotone.push_back({{"sigma_eps_sq", variances.first},
                        {"sigma_eta_sq", variances.second},
                        {"kl_strictly_increasing_in_B", increasing}});
  }
  report["kl_at_opt_monotonicity"] = monotone;
  write_json_file(config.output.dir + "/report.json", report);
  write_manifest(config.output.dir, "kl-temperature", config, watch.seconds());
  if (!all_agree) {
    std::cerr << "kl-temperature: closed form and numeric minimizer "
                 "disagree beyond 1e-6\n";
    return kExitTolerance;
  }
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& config, std::size_t workers) {
  if (!config.network) {
    throw ConfigError("sweep needs a model section with kind network");
  }
  if (!config.sweep) throw ConfigError("sweep needs a sweep section");
  if (!config.augmentation) {
    throw ConfigError("sweep needs an augmentation section");
  }
  Stopwatch watch;
  ensure_dir(config.output.dir);
  ensure_dir(config.output.dir + "/chains");

  SweepContext ctx;
  ctx.config = &config;
  const auto data = load_dataset(*config.network, config.seed);
  ctx.train = data.train;
  for (const auto& row : data.test) {
    ctx.test.push_back(net::ClassifiedExample{net::to_feature_map(row.image),
                                              row.label});
  }
  const std::size_t image_size = data.train.front().image.height;
  ctx.spec = build_network(*config.network, image_size);
  ctx.init = net::init_params(ctx.spec, derive_seed(config.seed, 7001));
  ctx.bank = augment::make_bank(config.augmentation->spec,
                                config.augmentation->bank_size,
                                derive_seed(config.seed, 7002));
  ctx.dataset_scale = ctx.bank.B * ctx.train.size();

  std::vector<SweepPoint> points;
  for (const auto mode : config.sweep->modes) {
    for (const double t : config.sweep->temperatures) {
      SweepPoint p;
      p.index = points.size();
      p.temperature = t;
      p.mode = mode;
      p.chain_seed = derive_seed(config.seed, 9000 + p.index);
      points.push_back(std::move(p));
    }
  }

  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min(workers, points.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= points.size()) return;
        run_sweep_point(ctx, points[i]);
      }
    });
  }
  for (auto& t : pool) t.join();

  // Probe subset for the total-variation-during-learning series.
  std::vector<ImageTensor> tv_probe;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, data.test.size());
       ++i) {
    tv_probe.push_back(data.test[i].image);
  }

  CsvWriter csv(config.output.dir + "/sweep.csv",
                {"T", "mode", "test_nll", "test_accuracy", "ess",
                 "chain_seed", "status"});
  const auto layout = ctx.spec.param_layout();
  for (const auto& p : points) {
    csv.row({CsvWriter::cell(p.temperature), mode_name(p.mode),
             p.diverged ? "" : CsvWriter::cell(p.test_nll),
             p.diverged ? "" : CsvWriter::cell(p.test_accuracy),
             CsvWriter::cell(static_cast<double>(ctx.bank.B) / p.temperature),
             std::to_string(p.chain_seed),
             p.diverged ? "diverged" : "ok"});
    json meta;
    meta["temperature"] = p.temperature;
    meta["mode"] = mode_name(p.mode);
    meta["chain_seed"] = p.chain_seed;
    meta["config"] = config.echo;
    if (meta["config"].contains("output")) {
      meta["config"]["output"].erase("dir");  // run-relative, not chain state
    }
    write_chain_checkpoint(
        config.output.dir + "/chains/point_" + std::to_string(p.index),
        p.chain, layout, meta);
    write_trace_csv(config.output.dir + "/chains/point_" +
                        std::to_string(p.index) + "_trace.csv",
                    p.chain);
    if (!p.diverged && ctx.bank.B >= 2 && !tv_probe.empty()) {
      const auto series = diagnostics::chain_total_variation(
          p.chain, ctx.spec, tv_probe, ctx.bank);
      CsvWriter tv_csv(config.output.dir + "/chains/point_" +
                           std::to_string(p.index) + "_tv.csv",
                       {"sample_epoch", "mean_tv"});
      for (std::size_t s = 0; s < series.size(); ++s) {
        tv_csv.row({CsvWriter::cell(p.chain.sample_epochs[s]),
                    CsvWriter::cell(series[s])});
      }
    }
  }

  // Report: per-mode argmin over the finished points; T = B marked.
  json report;
  report["t_equals_b"] = ctx.bank.B;
  json per_mode = json::array();
  for (const auto mode : config.sweep->modes) {
    const SweepPoint* best = nullptr;
    for (const auto& p : points) {
      if (p.mode != mode || p.diverged) continue;
      if (!best || p.test_nll < best->test_nll) best = &p;
    }
    json entry;
    entry["mode"] = mode_name(mode);
    if (best) {
      entry["argmin_temperature"] = best->temperature;
      entry["argmin_test_nll"] = best->test_nll;
      entry["argmin_ess"] =
          static_cast<double>(ctx.bank.B) / best->temperature;
    } else {
      entry["argmin_temperature"] = nullptr;
    }
    per_mode.push_back(entry);
  }
  report["modes"] = per_mode;
  report["parameters"] = ctx.spec.param_count();
  write_json_file(config.output.dir + "/report.json", report);
  write_manifest(config.output.dir, "sweep", config, watch.seconds());
  return kExitOk;
}

int cmd_residuals(const ExperimentConfig& config) {
  if (!config.network) {
    throw ConfigError("residuals needs a model section with kind network");
  }
  if (!config.augmentation) {
    throw ConfigError("residuals needs an augmentation section");
  }
  Stopwatch watch;
  ensure_dir(config.output.dir);

  const auto data = load_dataset(*config.network, config.seed);
  const std::size_t image_size = data.train.front().image.height;
  const auto spec = build_network(*config.network, image_size);
  // Untrained network: residual clustering is architectural, not learned.
  const auto params = net::init_params(spec, derive_seed(config.seed, 21));

  const auto bank = augment::make_bank(config.augmentation->spec,
                                       config.augmentation->bank_size,
                                       derive_seed(config.seed, 22));
  const auto augmented_rows = augment::expand_full_bank(data.train, bank);
  const auto augmented = diagnostics::residual_series(spec, params,
                                                      augmented_rows);

  // Null reference: independent images in pseudo-groups of two.
  const std::size_t null_groups = 2000;
  const auto* syn = std::get_if<SyntheticDataConfig>(&config.network->dataset);
  const auto null_data = make_synthetic_dataset(
      null_groups * 2, syn ? syn->size : image_size,
      syn ? syn->noise_sd : 0.1, 0.0, derive_seed(config.seed, 23));
  std::vector<augment::AugmentedImage> null_rows;
  null_rows.reserve(null_data.size());
  for (std::size_t i = 0; i < null_data.size(); ++i) {
    null_rows.push_back(augment::AugmentedImage{null_data[i].image,
                                                null_data[i].label, i / 2});
  }
  const auto unaugmented = diagnostics::residual_series(spec, params,
                                                        null_rows);

  const double icc_augmented = diagnostics::intraclass_correlation(augmented);
  const double icc_unaugmented =
      diagnostics::intraclass_correlation(unaugmented);

  write_residuals_csv(config.output.dir + "/residuals_augmented.csv",
                      augmented);
  write_residuals_csv(config.output.dir + "/residuals_unaugmented.csv",
                      unaugmented);

  json report;
  report["icc_augmented"] = icc_augmented;
  report["icc_unaugmented"] = icc_unaugmented;
  report["empirical_error_correlation_augmented"] =
      diagnostics::empirical_error_correlation(augmented);
  report["groups_augmented"] = augmented.groups.size();
  report["groups_unaugmented"] = unaugmented.groups.size();
  report["augmentations_per_group"] = bank.B;
  write_json_file(config.output.dir + "/report.json", report);
  write_manifest(config.output.dir, "residuals", config, watch.seconds());
  return kExitOk;
}

int cmd_equivariance(const ExperimentConfig& config) {
  if (!config.network) {
    throw ConfigError("equivariance needs a model section with kind network");
  }
  Stopwatch watch;
  ensure_dir(config.output.dir);

  const auto* syn = std::get_if<SyntheticDataConfig>(&config.network->dataset);
  const std::size_t image_size = syn ? syn->size : 16;
  const auto probe_data =
      make_synthetic_dataset(3, image_size, syn ? syn->noise_sd : 0.1, 0.0,
                             derive_seed(config.seed, 31));

  json deviations = json::array();
  double worst_invariant = 0.0;
  bool strided_breaks = false;
  for (const std::size_t stride : {std::size_t{1}, std::size_t{2}}) {
    for (const net::Padding padding :
         {net::Padding::Circular, net::Padding::Zero}) {
      NetworkConfig variant = *config.network;
      variant.stride = stride;
      variant.padding = padding;
      const auto spec = build_network(variant, image_size);
      const auto params =
          net::init_params(spec, derive_seed(config.seed, 32));

      // Prefixes ending at each group-indexed layer.
      const auto shapes = spec.shapes();
      for (std::size_t layer = 0; layer < spec.layers.size(); ++layer) {
        if (shapes[layer].group < 4) continue;
        for (std::size_t e = 0; e < net::group_size(config.network->group);
             ++e) {
          const auto g = net::group_element(config.network->group, e);
          double dev = 0.0;
          for (const auto& probe : probe_data) {
            dev = std::max(
                dev, net::equivariance_deviation(
                         spec, params, net::to_feature_map(probe.image), g,
                         layer + 1));
          }
          deviations.push_back(
              {{"stride", stride},
               {"padding",
                padding == net::Padding::Circular ? "circular" : "zero"},
               {"layer", layer},
               {"rotation", g.rotation},
               {"flip", g.flip},
               {"deviation", dev}});
          if (stride == 1 && padding == net::Padding::Circular) {
            worst_invariant = std::max(worst_invariant, dev);
          }
          if (stride == 2 && dev > 1e-3) strided_breaks = true;
        }
      }
    }
  }

  // Total variation with and without an extra small rotation in the bank.
  json tv_rows = json::array();
  const std::size_t tv_bank_size =
      config.augmentation ? config.augmentation->bank_size : 8;
  for (const std::size_t stride : {std::size_t{1}, std::size_t{2}}) {
    NetworkConfig variant = *config.network;
    variant.stride = stride;
    variant.padding = net::Padding::Circular;
    const auto spec = build_network(variant, image_size);
    const auto params = net::init_params(spec, derive_seed(config.seed, 32));

    for (const bool with_small_rotation : {false, true}) {
      augment::AugmentationSpec aug = augment::Rot90Flip{};
      if (with_small_rotation) {
        aug = augment::Composition{
            {augment::Rot90Flip{}, augment::SmallRotation{10.0}}};
      }
      const auto bank =
          augment::make_bank(aug, tv_bank_size, derive_seed(config.seed, 33));
      double tv = 0.0;
      for (const auto& probe : probe_data) {
        tv += net::total_variation_invariance(spec, params, probe.image,
                                              bank);
      }
      tv /= static_cast<double>(probe_data.size());
      tv_rows.push_back({{"stride", stride},
                         {"bank", with_small_rotation
                                      ? "rot90_flip+small_rotation"
                                      : "rot90_flip"},
                         {"mean_total_variation", tv}});
    }
  }

  json report;
  report["deviations"] = deviations;
  report["total_variation"] = tv_rows;
  report["max_stride1_circular_deviation"] = worst_invariant;
  report["stride2_breaks_equivariance"] = strided_breaks;
  write_json_file(config.output.dir + "/report.json", report);
  write_manifest(config.output.dir, "equivariance", config, watch.seconds());

  if (worst_invariant > 1e-6) {
    std::cerr << "equivariance: stride-1 circular deviation "
              << worst_invariant << " exceeds 1e-6\n";
    return kExitTolerance;
  }
  return kExitOk;
}

int run_command(const std::string& name, const ExperimentConfig& config,
                std::size_t workers) {
  try {
    if (name == "theorem1") return cmd_theorem1(config);
    if (name == "kl-temperature") return cmd_kl_temperature(config);
    if (name == "sweep") return cmd_sweep(config, workers);
    if (name == "residuals") return cmd_residuals(config);
    if (name == "equivariance") return cmd_equivariance(config);
    throw ConfigError("unknown subcommand '" + name + "'");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SingularCovarianceError& e) {
    std::cerr << "degenerate model: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace tempair::cli
