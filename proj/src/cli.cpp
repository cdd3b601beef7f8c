#include "panellp/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "panellp/dgp_sim.hpp"
#include "panellp/error.hpp"
#include "panellp/format.hpp"
#include "panellp/lp_driver.hpp"

namespace panellp {
namespace fs = std::filesystem;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

namespace {

struct OutputDir {
  fs::path root;
  std::vector<std::string> written;

  explicit OutputDir(const std::string& dir) : root(dir) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw ValidationError("cannot create output directory '" + dir + "': " + ec.message());
  }

  template <typename Fn>
  void write(const std::string& name, Fn&& fn) {
    std::ofstream f(root / name, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + (root / name).string() + "'");
    fn(f);
    if (!f) throw ValidationError("failed writing '" + (root / name).string() + "'");
    written.push_back(name);
  }
};

nlohmann::json input_entry(const std::string& role, const std::string& path) {
  return {{"role", role}, {"path", path}, {"sha256", sha256_file(path)}};
}

void write_manifest(OutputDir& out, const std::string& command, const nlohmann::json& config,
                    const nlohmann::json& inputs, const nlohmann::json& options, const nlohmann::json& seed) {
  nlohmann::json m{{"tool", "panellp"},
                   {"version", kVersion},
                   {"command", command},
                   {"config", config},
                   {"options", options},
                   {"inputs", inputs},
                   {"seed", seed}};
  m["outputs"] = out.written;
  out.write("manifest.json", [&](std::ostream& f) { f << m.dump(2) << '\n'; });
}

struct EstimateArgs {
  std::string data;
  std::string spec;
  std::string out = "out";
  std::string format = "csv";
  std::string peak_rule = "most-negative";
  std::string unit_column = "unit";
  std::string time_column = "time";
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  const LPSpec spec = load_lp_spec(a.spec);
  const PeakRule rule = parse_peak_rule(a.peak_rule);
  CsvSchema schema;
  schema.unit_column = a.unit_column;
  schema.time_column = a.time_column;
  const PanelDataset data = load_csv(a.data, schema);
  const IRFResult result = run_lp(data, spec);

  OutputDir dir(a.out);
  dir.write("spec.resolved.json", [&](std::ostream& f) { f << to_json(spec).dump(2) << '\n'; });
  dir.write("irf.csv", [&](std::ostream& f) { write_irf_csv(f, result); });
  if (a.format == "json") {
    dir.write("irf.json", [&](std::ostream& f) { f << irf_to_json(result).dump(2) << '\n'; });
  }
  dir.write("warnings.csv", [&](std::ostream& f) { write_warnings_csv(f, result); });

  std::size_t ok = 0;
  for (const auto& r : result.rows) {
    if (r.ok) {
      ++ok;
    } else {
      err << "warning: " << r.error << '\n';
    }
  }
  if (spec.estimators.size() >= 2 && ok > 0) {
    try {
      const auto cmp = compare_estimators(result, rule);
      dir.write("comparison.csv", [&](std::ostream& f) { write_comparison_csv(f, cmp, rule); });
    } catch (const Error& e) {
      err << "warning: comparison skipped: " << e.what() << '\n';
    }
  }
  write_manifest(dir, "estimate", to_json(spec),
                 nlohmann::json::array({input_entry("data", a.data), input_entry("spec", a.spec)}),
                 {{"format", a.format}, {"peak_rule", a.peak_rule}, {"unit_column", a.unit_column},
                  {"time_column", a.time_column}},
                 nullptr);
  if (ok == 0) {
    err << "error: no horizon could be estimated\n";
    return 2;
  }
  out << "wrote " << result.rows.size() << " rows to " << (dir.root / "irf.csv").string() << '\n';
  return 0;
}

struct SimulateArgs {
  std::string config;
  std::string out = "out";
  int threads = -1;
  bool keep_raw = false;
};

unsigned resolve_threads(int flag) {
  if (flag >= 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("PANELLP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) {
      throw ValidationError(std::string("PANELLP_THREADS must be a non-negative integer, got '") + env + "'");
    }
    return static_cast<unsigned>(v);
  }
  return 0;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const SimConfig cfg = load_sim_config(a.config);
  const SimReport report = run_mc(cfg, resolve_threads(a.threads), a.keep_raw);

  OutputDir dir(a.out);
  dir.write("config.resolved.json", [&](std::ostream& f) { f << to_json(cfg).dump(2) << '\n'; });
  dir.write("report.csv", [&](std::ostream& f) { write_report_csv(f, report); });
  dir.write("report.json", [&](std::ostream& f) { f << report_to_json(report).dump(2) << '\n'; });
  if (a.keep_raw) dir.write("raw.csv", [&](std::ostream& f) { write_raw_csv(f, report); });
  write_manifest(dir, "simulate", to_json(cfg), nlohmann::json::array({input_entry("config", a.config)}),
                 {{"keep_raw", a.keep_raw}}, cfg.seed);
  out << "simulated " << report.cells.size() << " cells";
  if (const auto f = report.total_failures()) out << " (" << f << " failed estimates)";
  out << "; report in " << (dir.root / "report.csv").string() << '\n';
  return 0;
}

struct GenerateArgs {
  std::string config;
  std::string out = "out";
  std::size_t cell = 0;
  std::uint64_t replication = 0;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const SimConfig cfg = load_sim_config(a.config);
  const auto cells = cfg.cells();
  if (a.cell >= cells.size()) {
    throw InvalidParameter("cell " + std::to_string(a.cell) + " out of range (config has " +
                           std::to_string(cells.size()) + " cells)");
  }
  const auto data = generate(cells[a.cell], cfg.seed, a.replication);
  OutputDir dir(a.out);
  dir.write("data.csv", [&](std::ostream& f) {
    f << "unit,time,y,x\n";
    const auto y = data.column("y");
    const auto x = data.column("x");
    const auto t = data.times();
    for (const auto& u : data.units()) {
      for (std::size_t r = u.begin; r < u.end; ++r) {
        f << u.id << ',' << t[r] << ',' << format_double(y[r]) << ',' << format_double(x[r]) << '\n';
      }
    }
  });
  write_manifest(dir, "generate", to_json(cfg), nlohmann::json::array({input_entry("config", a.config)}),
                 {{"cell", a.cell}, {"replication", a.replication}}, cfg.seed);
  out << "wrote " << data.rows() << " rows to " << (dir.root / "data.csv").string() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Panel local projections with FE, split-panel jackknife and bias-corrected estimators"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Estimate an impulse response from panel data");
  e->add_option("--data", est.data, "Long-format CSV")->required()->check(CLI::ExistingFile);
  e->add_option("--spec", est.spec, "Study specification (YAML or JSON)")->required()->check(CLI::ExistingFile);
  e->add_option("--out", est.out, "Output directory")->capture_default_str();
  e->add_option("--format", est.format, "csv, or json to add irf.json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  e->add_option("--peak-rule", est.peak_rule, "most-negative, most-positive or max-abs")->capture_default_str();
  e->add_option("--unit-column", est.unit_column)->capture_default_str();
  e->add_option("--time-column", est.time_column)->capture_default_str();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run a Monte Carlo study");
  s->add_option("--config", sim.config, "Simulation config (YAML or JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", sim.out, "Output directory")->capture_default_str();
  s->add_option("--threads", sim.threads, "Worker threads; 0 = all cores (default: PANELLP_THREADS or 0)")
      ->check(CLI::NonNegativeNumber);
  s->add_flag("--keep-raw", sim.keep_raw, "Also write per-replication estimates");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write one simulated panel to CSV");
  g->add_option("--config", gen.config, "Simulation config (YAML or JSON)")->required()->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output directory")->capture_default_str();
  g->add_option("--cell", gen.cell, "Index into the rho x sizes grid")->capture_default_str();
  g->add_option("--replication", gen.replication, "Replication index")->capture_default_str();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    return 1;
  }

  try {
    if (*e) return cmd_estimate(est, out, err);
    if (*s) return cmd_simulate(sim, out);
    if (*g) return cmd_generate(gen, out);
  } catch (const UnstableSystem& ex) {
    err << "error: " << ex.what() << " (spectral radius " << format_double(ex.spectral_radius()) << ")\n";
    return 1;
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  } catch (const NumericalError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace panellp
