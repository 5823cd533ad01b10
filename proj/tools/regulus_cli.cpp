// Command-line front end: analyze, reduce, export, serve, synth.

#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regulus/api.hpp"
#include "regulus/regulus.hpp"

namespace fs = std::filesystem;
using namespace regulus;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open file");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot write file");
  out << text;
  if (!out) throw Error(path + ": write failed");
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else write_file(path, text);
}

AnalysisBundle load_bundle(const std::string& path) {
  const auto text = read_file(path);
  try {
    return AnalysisBundle::load(text);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::pair<double, double> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw Error("value range must look like low:high");
  try {
    std::size_t used = 0;
    const double lo = std::stod(s.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("");
    const std::string rest = s.substr(colon + 1);
    const double hi = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("");
    if (lo > hi) throw Error("value range low end exceeds high end");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw Error("value range must look like low:high");
  }
}

ApiServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regulus: topology-guided partitioning and partition-local regression"};
  app.require_subcommand(1);

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Decompose a CSV table and write an analysis file");
  std::string csv_path, output_col, save_path;
  std::vector<std::string> output_cols, measures;
  std::size_t k = kDefaultNeighbors;
  double lambda = kDefaultRidgeLambda, bandwidth = kDefaultBandwidth;
  std::size_t samples = kDefaultCurveSamples;
  bool ols = false;
  analyze_cmd->add_option("csv", csv_path, "Input table")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--output", output_col, "Output column driving the decomposition")->required();
  analyze_cmd->add_option("--outputs", output_cols, "Output columns (instead of a '|' marker column)")
      ->delimiter(',');
  analyze_cmd->add_option("--k", k, "Nearest neighbors per point")->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
  analyze_cmd->add_option("--ridge-lambda", lambda, "Ridge penalty")->check(CLI::NonNegativeNumber);
  analyze_cmd->add_flag("--ols", ols, "Fit ordinary least squares instead of ridge");
  analyze_cmd->add_option("--measures", measures, "Measures to evaluate on every node")->delimiter(',');
  analyze_cmd->add_option("--bandwidth", bandwidth, "Inverse-curve kernel bandwidth")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--samples", samples, "Inverse-curve levels")->check(CLI::Range(2, 100000));
  analyze_cmd->add_option("--save", save_path, "Analysis file (default: <csv>.analysis.json)");

  // reduce
  auto* reduce_cmd = app.add_subcommand("reduce", "Add a simplified tree to an analysis file");
  std::string analysis_path, from = kOriginalHandle, value_range;
  std::size_t min_points = 0;
  double min_lifespan = 0.0;
  reduce_cmd->add_option("analysis", analysis_path, "Analysis file")->required()->check(CLI::ExistingFile);
  reduce_cmd->add_option("--from", from, "Tree handle to reduce");
  auto* min_points_opt = reduce_cmd->add_option("--min-points", min_points, "Remove partitions with fewer points");
  auto* min_life_opt = reduce_cmd->add_option("--min-lifespan", min_lifespan, "Remove partitions with a shorter lifespan")
                           ->check(CLI::NonNegativeNumber);
  auto* range_opt = reduce_cmd->add_option("--value-range", value_range,
                                           "Keep partitions whose output values meet low:high");
  reduce_cmd->add_option("--save", save_path, "Write here instead of updating the file");

  // export
  auto* export_cmd = app.add_subcommand("export", "Export layout, measures or a projection");
  std::string what, format = "json", handle = kOriginalHandle, out_path, preset;
  std::vector<std::string> export_measures_list;
  double persistence = 0.0;
  export_cmd->add_option("analysis", analysis_path, "Analysis file")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--what", what, "layout | measures | projection")
      ->required()
      ->check(CLI::IsMember({"layout", "measures", "projection"}));
  export_cmd->add_option("--format", format, "json | csv | svg")->check(CLI::IsMember({"json", "csv", "svg"}));
  export_cmd->add_option("--handle", handle, "Tree handle");
  export_cmd->add_option("--measure", export_measures_list, "Measures to export or color by")->delimiter(',');
  export_cmd->add_option("--persistence", persistence, "Cut level for projection edges")->check(CLI::Range(0.0, 1.0));
  export_cmd->add_option("--preset", preset, "Projection preset (default: star coordinates)");
  export_cmd->add_option("--out", out_path, "Output file (default: stdout)");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve the JSON API for an analysis");
  int port = kDefaultPort;
  std::string host = "127.0.0.1";
  serve_cmd->add_option("analysis", analysis_path, "Analysis file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "Interface to bind");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic sample table");
  std::string kind;
  std::uint64_t seed = 0;
  synth_cmd->add_option("kind", kind, "four-bumps | two-segments | combustion | saddle-grid")
      ->required()
      ->check(CLI::IsMember({"four-bumps", "two-segments", "combustion", "saddle-grid"}));
  synth_cmd->add_option("--seed", seed, "Random seed");
  synth_cmd->add_option("--out", out_path, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze_cmd) {
      std::ifstream in(csv_path);
      if (!in) throw Error(csv_path + ": cannot open file");
      Dataset raw;
      try {
        raw = load_table(in, output_col, output_cols);
      } catch (const Error& e) {
        throw Error(csv_path + ": " + e.what());
      }
      if (k >= raw.n()) throw Error("--k must be smaller than the number of rows (" + std::to_string(raw.n()) + ")");
      AnalysisSettings settings;
      settings.k = k;
      settings.fit = ols ? FitSpec{FitKind::ols, 0.0} : FitSpec{FitKind::ridge, lambda};
      settings.curve = {bandwidth, samples};
      if (!measures.empty()) settings.measures = measures;
      auto data = std::make_shared<const Dataset>(standardize(std::move(raw)));
      auto bundle = analyze(data, settings);
      if (save_path.empty()) save_path = (fs::path(csv_path).replace_extension("").string()) + ".analysis.json";
      write_file(save_path, bundle.save());

      const auto& t = bundle.tree();
      std::size_t leaves = 0;
      for (NodeId id : t.nodes()) leaves += t.is_leaf(id) ? 1 : 0;
      std::cout << "n=" << data->n() << " d=" << data->d() << " leaves=" << leaves
                << " nodes=" << t.node_count()
                << " root_fitness=" << detail::number(bundle.store().get<double>("fitness", t.root()))
                << "\nwrote " << save_path << "\n";
    } else if (*reduce_cmd) {
      auto bundle = load_bundle(analysis_path);
      ReduceRule rule;
      if (*min_points_opt) rule.min_points = min_points;
      if (*min_life_opt) rule.min_lifespan = min_lifespan;
      if (*range_opt) rule.value_range = parse_range(value_range);
      const auto h = bundle.reduce(from, rule);
      bundle.evaluate(h, bundle.settings().measures);
      write_file(save_path.empty() ? analysis_path : save_path, bundle.save());
      std::cout << "handle=" << h << " nodes=" << bundle.tree(h).node_count()
                << " (from " << from << ", " << bundle.tree(from).node_count() << " nodes)\n";
    } else if (*export_cmd) {
      auto bundle = load_bundle(analysis_path);
      const auto fmt = export_format_from_string(format);
      if (what == "layout") {
        emit(out_path, export_layout(bundle, handle, fmt,
                                     export_measures_list.empty() ? "fitness" : export_measures_list.front()));
      } else if (what == "measures") {
        emit(out_path, export_measures(bundle, handle, fmt,
                                       export_measures_list.empty() ? bundle.settings().measures
                                                                    : export_measures_list));
      } else {
        ProjectionSpec spec = initial_spec(bundle.dataset().d());
        if (!preset.empty()) {
          auto it = bundle.presets().find(preset);
          if (it == bundle.presets().end()) throw Error("unknown projection preset '" + preset + "'");
          spec = it->second;
        }
        emit(out_path, export_projection(bundle, handle, fmt, spec, persistence));
      }
    } else if (*serve_cmd) {
      auto bundle = load_bundle(analysis_path);
      ApiService service(bundle);
      ApiServer server(service);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving " << analysis_path << " on http://" << host << ':' << bound << "/api" << std::endl;
      server.run();
    } else if (*synth_cmd) {
      Dataset ds;
      if (kind == "four-bumps") ds = synthetic::four_bump_samples(seed);
      else if (kind == "two-segments") ds = synthetic::two_segments();
      else if (kind == "combustion") ds = synthetic::combustion_analog(5172, 10, seed);
      else ds = synthetic::saddle_grid();
      std::ostringstream s;
      synthetic::write_table(s, ds);
      emit(out_path, s.str());
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
