// Command line front end: explain predictions, print root points, audit
// conservation, summarize models.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dexpl/dexpl.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDataError = 3;
constexpr int kExitTolerance = 4;

struct CommonOptions {
  std::string model_path;
  std::string data_path;
  std::string rows_spec;
  std::string stats_path;
  std::string groups_path;
  std::string out_path;
  std::string format = "csv";
  std::string mode = "min";
  std::string scheme = "midpoint";
  std::string chain = "exact";
  std::string redistribute;  // "", "on" or "off"
  double threshold = 0.0;
  bool threshold_set = false;
  double tol = 1e-6;
  double grid_step = 0.01;
  long grid_min = 50;
  long grid_max = 1L << 20;
};

void add_model_option(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--model", opt.model_path, "model file (json)")->required();
}

void add_pipeline_options(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--data", opt.data_path, "dataset file (delimited, header row)")
      ->required();
  cmd->add_option("--rows", opt.rows_spec,
                  "1-based row selection, e.g. \"1-20\" or \"3,7,9\" (default: all)");
  cmd->add_option("--grid-step", opt.grid_step, "proportional grid step");
  cmd->add_option("--grid-min", opt.grid_min, "minimum grid points");
  cmd->add_option("--grid-max", opt.grid_max, "maximum grid points");
  cmd->add_option("--scheme", opt.scheme, "quadrature scheme")
      ->check(CLI::IsMember({"left", "midpoint"}));
  cmd->add_option("--tol", opt.tol, "reconstruction error tolerance");
  cmd->add_option("--mode", opt.mode, "reference mode")
      ->check(CLI::IsMember({"min", "threshold"}));
  cmd->add_option("--threshold", opt.threshold, "decision threshold (threshold mode)");
  cmd->add_option("--stats", opt.stats_path, "standardization stats sidecar (mean,std)");
  cmd->add_option("--chain", opt.chain, "layer chaining")
      ->check(CLI::IsMember({"exact", "shared"}));
}

std::vector<std::size_t> parse_rows(const std::string& spec, std::size_t available) {
  std::vector<std::size_t> rows;
  if (spec.empty()) {
    for (std::size_t r = 1; r <= available; ++r) rows.push_back(r);
    return rows;
  }
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) throw dexpl::Error("--rows: empty selection token");
    const std::size_t dash = token.find('-');
    std::size_t first = 0, last = 0;
    try {
      if (dash == std::string::npos) {
        first = last = std::stoul(token);
      } else {
        first = std::stoul(token.substr(0, dash));
        last = std::stoul(token.substr(dash + 1));
      }
    } catch (const std::exception&) {
      throw dexpl::Error("--rows: cannot parse \"" + token + "\"");
    }
    if (first == 0 || last < first)
      throw dexpl::Error("--rows: bad range \"" + token + "\"");
    for (std::size_t r = first; r <= last; ++r) {
      if (r > available)
        throw dexpl::Error("--rows: row " + std::to_string(r) + " out of range (dataset has " +
                           std::to_string(available) + " rows)");
      rows.push_back(r);
    }
  }
  return rows;
}

dexpl::DeepConfig make_config(const CommonOptions& opt, const dexpl::MlpModel& model) {
  dexpl::DeepConfig cfg;
  cfg.grid = dexpl::GridSpec::proportional(
      opt.grid_step, opt.grid_min, opt.grid_max,
      opt.scheme == "left" ? dexpl::PathScheme::left : dexpl::PathScheme::midpoint);
  cfg.tol = opt.tol;
  cfg.chain =
      opt.chain == "shared" ? dexpl::ChainMode::shared : dexpl::ChainMode::exact;
  if (opt.mode == "threshold") {
    cfg.mode = dexpl::ExplainMode::threshold;
    cfg.threshold.level = opt.threshold;
    cfg.redistribute = opt.redistribute == "on";
  } else {
    cfg.mode = dexpl::ExplainMode::attainable_minimum;
    cfg.redistribute = opt.redistribute != "off";
  }
  (void)model;
  return cfg;
}

struct Pipeline {
  dexpl::MlpModel model;
  dexpl::DataTable table;                 // standardized
  dexpl::StandardizationStats stats;
  dexpl::LayerDomains domains;
  std::vector<std::size_t> rows;          // 1-based selection
};

Pipeline build_pipeline(const CommonOptions& opt, bool need_domains = true) {
  Pipeline p;
  p.model = dexpl::load_model(opt.model_path);
  p.table = dexpl::load_dataset(opt.data_path);
  if (p.table.names.size() != p.model.input_dim)
    throw dexpl::DimensionError("dataset has " + std::to_string(p.table.names.size()) +
                                " columns, model expects " +
                                std::to_string(p.model.input_dim));
  if (p.table.values.rows > 0) {
    std::optional<dexpl::StandardizationStats> stats;
    if (!opt.stats_path.empty()) stats = dexpl::load_stats(opt.stats_path);
    auto [standardized, used] = dexpl::standardize(p.table.values, std::move(stats));
    p.table.values = std::move(standardized);
    p.stats = std::move(used);
    if (need_domains) p.domains = dexpl::activation_domains(p.model, p.table.values);
  }
  p.rows = parse_rows(opt.rows_spec, p.table.values.rows);
  return p;
}

std::string fmt(double v) { return dexpl::detail::format_double(v); }

int run_explain(const CommonOptions& opt) {
  Pipeline p = build_pipeline(opt);
  const dexpl::DeepConfig cfg = make_config(opt, p.model);

  std::optional<dexpl::FeatureGrouping> grouping;
  if (!opt.groups_path.empty()) grouping = dexpl::load_grouping(opt.groups_path);

  std::vector<std::pair<std::size_t, dexpl::DeepAttribution>> results;
  std::size_t failures = 0;
  for (std::size_t row : p.rows) {
    try {
      results.emplace_back(row, dexpl::deep_explain(p.model, p.table.values.row(row - 1),
                                                    p.domains, cfg));
    } catch (const dexpl::Error& e) {
      ++failures;
      std::cerr << "row " << row << ": " << e.what() << '\n';
    }
  }

  const dexpl::ReportFormat format =
      opt.format == "json" ? dexpl::ReportFormat::json : dexpl::ReportFormat::csv;
  const dexpl::FeatureGrouping* gp = grouping ? &*grouping : nullptr;
  if (!opt.out_path.empty()) {
    std::ofstream out(opt.out_path, std::ios::binary);
    if (!out) throw dexpl::Error("cannot open output file \"" + opt.out_path + "\"");
    dexpl::emit_decomposition(out, results, p.table.names, gp, format);
  } else {
    dexpl::emit_decomposition(std::cout, results, p.table.names, gp, format);
  }
  return failures == 0 ? 0 : kExitTolerance;
}

int run_validate(const CommonOptions& opt) {
  Pipeline p = build_pipeline(opt);
  const dexpl::DeepConfig cfg = make_config(opt, p.model);

  dexpl::Matrix selected(p.rows.size(), p.table.values.cols);
  for (std::size_t i = 0; i < p.rows.size(); ++i)
    for (std::size_t c = 0; c < p.table.values.cols; ++c)
      selected(i, c) = p.table.values(p.rows[i] - 1, c);

  const dexpl::ValidationReport report =
      dexpl::validate_dataset(p.model, selected, p.domains, cfg);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const dexpl::ValidationRow& row = report.rows[i];
    std::cout << "row " << p.rows[i] << ": ";
    if (!row.failure.empty() && row.grid_points == 0)
      std::cout << "FAIL " << row.failure << '\n';
    else if (!row.failure.empty())
      std::cout << "FAIL error=" << fmt(row.error) << " (" << row.failure << ")\n";
    else
      std::cout << "error=" << fmt(row.error) << " grid_points=" << row.grid_points
                << '\n';
  }
  std::cout << "validate: " << report.rows.size() << " observations, max_error="
            << fmt(report.max_error) << ", tol=" << fmt(cfg.tol) << ": "
            << (report.pass() ? "PASS" : "FAIL") << '\n';
  return report.pass() ? 0 : kExitTolerance;
}

int run_root(const CommonOptions& opt, long layer_flag, long neuron_flag) {
  Pipeline p = build_pipeline(opt);
  const std::size_t n_layers = p.model.layers.size();
  const std::size_t layer_index =
      layer_flag < 0 ? n_layers - 1 : static_cast<std::size_t>(layer_flag);
  if (layer_index >= n_layers)
    throw dexpl::Error("--layer " + std::to_string(layer_flag) + " out of range (model has " +
                       std::to_string(n_layers) + " layers)");
  const dexpl::Layer& layer = p.model.layers[layer_index];
  if (neuron_flag < 0 || static_cast<std::size_t>(neuron_flag) >= layer.out_dim())
    throw dexpl::Error("--neuron " + std::to_string(neuron_flag) + " out of range (layer has " +
                       std::to_string(layer.out_dim()) + " neurons)");
  const std::size_t neuron = static_cast<std::size_t>(neuron_flag);

  const dexpl::RootTarget target = opt.mode == "threshold"
                                       ? dexpl::RootTarget::at_level(opt.threshold)
                                       : dexpl::RootTarget::minimum();
  std::size_t failures = 0;
  for (std::size_t row : p.rows) {
    const dexpl::ForwardTrace trace = forward(p.model, p.table.values.row(row - 1));
    const auto observation = p.table.values.row(row - 1);
    const dexpl::Vector inputs =
        layer_index == 0 ? dexpl::Vector(observation.begin(), observation.end())
                         : trace.post[layer_index - 1];
    try {
      const dexpl::RootPoint root =
          solve_root(inputs, layer.weights.row(neuron), layer.biases[neuron], layer.link,
                     p.domains.boxes[layer_index], target);
      std::cout << "row " << row << ": theta=(";
      for (std::size_t i = 0; i < root.theta.size(); ++i)
        std::cout << (i ? ", " : "") << fmt(root.theta[i]);
      std::cout << ") achieved=" << fmt(root.achieved)
                << " residual=" << fmt(root.residual)
                << " distance=" << fmt(root.distance) << '\n';
    } catch (const dexpl::Error& e) {
      ++failures;
      std::cerr << "row " << row << ": " << e.what() << '\n';
    }
  }
  return failures == 0 ? 0 : kExitTolerance;
}

int run_model_info(const CommonOptions& opt) {
  const dexpl::MlpModel model = dexpl::load_model(opt.model_path);
  std::cout << "format_version: " << model.format_version << '\n';
  std::cout << "input_dim: " << model.input_dim << '\n';
  std::cout << "layers: " << model.layers.size() << " (hidden: " << model.hidden_count()
            << ")\n";
  std::size_t params = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const dexpl::Layer& layer = model.layers[l];
    const std::size_t layer_params = layer.out_dim() * layer.in_dim() + layer.out_dim();
    params += layer_params;
    std::cout << "  layer " << l << ": " << link_name(layer.link);
    if (layer.link.kind == dexpl::LinkKind::leaky_relu)
      std::cout << "(slope=" << fmt(layer.link.slope) << ")";
    std::cout << ", " << layer.in_dim() << " -> " << layer.out_dim() << ", params "
              << layer_params << ", "
              << (is_trivial(layer.link) ? "trivial" : "non-trivial") << '\n';
  }
  std::cout << "parameters: " << params << '\n';
  std::cout << "output_dim: " << model.output_dim() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Additive decomposition of MLP predictions into per-input "
               "contributions via stepwise Taylor path integration"};
  app.require_subcommand(1);

  CommonOptions opt;
  long layer_flag = -1;
  long neuron_flag = 0;

  CLI::App* explain = app.add_subcommand("explain", "explain observations and emit a report");
  add_model_option(explain, opt);
  add_pipeline_options(explain, opt);
  explain->add_option("--groups", opt.groups_path, "feature grouping file (feature,group)");
  explain->add_option("--redistribute", opt.redistribute,
                      "redistribute the baseline over features")
      ->check(CLI::IsMember({"on", "off"}));
  explain->add_option("--out", opt.out_path, "report path (default: stdout)");
  explain->add_option("--format", opt.format, "report format")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* validate = app.add_subcommand("validate", "conservation audit over a dataset");
  add_model_option(validate, opt);
  add_pipeline_options(validate, opt);

  CLI::App* root_cmd = app.add_subcommand("root", "print root points for a neuron");
  add_model_option(root_cmd, opt);
  add_pipeline_options(root_cmd, opt);
  root_cmd->add_option("--layer", layer_flag, "0-based layer index (default: output layer)");
  root_cmd->add_option("--neuron", neuron_flag, "0-based neuron index within the layer");

  CLI::App* info = app.add_subcommand("model-info", "architecture summary");
  add_model_option(info, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  opt.threshold_set = explain->count("--threshold") || validate->count("--threshold") ||
                      root_cmd->count("--threshold");
  if (opt.mode == "threshold" && !opt.threshold_set) {
    std::cerr << "--mode threshold requires --threshold\n";
    return kExitUsage;
  }
  if (opt.mode != "threshold" && opt.threshold_set) {
    std::cerr << "--threshold requires --mode threshold\n";
    return kExitUsage;
  }
  if (!(opt.grid_step > 0.0) || opt.grid_min < 1 || opt.grid_max < opt.grid_min) {
    std::cerr << "grid flags must satisfy --grid-step > 0 and 1 <= --grid-min <= --grid-max\n";
    return kExitUsage;
  }
  if (!(opt.tol > 0.0)) {
    std::cerr << "--tol must be positive\n";
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(explain)) return run_explain(opt);
    if (app.got_subcommand(validate)) return run_validate(opt);
    if (app.got_subcommand(root_cmd)) return run_root(opt, layer_flag, neuron_flag);
    return run_model_info(opt);
  } catch (const dexpl::InfeasibleTarget& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTolerance;
  } catch (const dexpl::ToleranceNotReached& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTolerance;
  } catch (const dexpl::ChainBudgetExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTolerance;
  } catch (const dexpl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
