// Command-line front end: run registry entries or config files, list the
// registry, sweep the finite-difference baseline, summarize a run directory.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "pmnn/baseline_fdm.hpp"
#include "pmnn/error.hpp"
#include "pmnn/format.hpp"
#include "pmnn/harness.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
namespace h = pmnn::harness;

int fail(const std::string& code, const std::string& message, const json& extra = json::object()) {
  json j = {{"error", code}, {"message", message}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  std::cerr << j.dump() << '\n';
  return code == "usage" ? 2 : 1;
}

h::ExperimentConfig resolve(const std::string& target) {
  if (fs::exists(target)) return h::load_config(target);
  if (auto c = h::find_config(target)) return *c;
  throw pmnn::ConfigError({"'" + target + "' is neither a config file nor a registry entry"});
}

void print_summary(const json& r, std::ostream& out) {
  const json& c = r.at("config");
  out << c.at("name").get<std::string>() << "  (" << r.at("directory").get<std::string>() << ")\n";
  auto field = [&](const char* key, const char* label) {
    if (r.contains(key) && !r.at(key).is_null()) out << "  " << label << ' ' << r.at(key).dump() << '\n';
  };
  field("lambda", "lambda       ");
  field("exact_lambda", "exact lambda ");
  field("abs_error", "abs error    ");
  field("rel_error", "rel error    ");
  field("u_err_max", "max |u - u*| ");
  field("density_discrepancy", "density L-inf");
  field("epochs_run", "epochs       ");
  field("wall_seconds", "wall seconds ");
  if (r.contains("sweep")) {
    out << "  n_h  fdm_lambda_err  nn_lambda_err\n";
    for (const json& row : r.at("sweep"))
      out << "  " << row.at("n_h").dump() << "  " << row.at("fdm_lambda_err").dump() << "  "
          << row.at("nn_lambda_err").dump() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural power and inverse power eigensolvers"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string profile = "full";
  std::optional<std::string> out_dir;
  bool quiet = false;
  bool as_json = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Override the training seed");
    sub->add_option("--profile", profile, "Scale profile")->check(CLI::IsMember({"full", "desk"}));
    sub->add_option("--out", out_dir, "Root directory for run artifacts");
  };

  std::string target;
  auto* run = app.add_subcommand("run", "Run a config file or registry entry");
  run->add_option("config", target, "Config path or registry name")->required();
  run->add_flag("--quiet", quiet, "Suppress per-record progress");
  run->add_flag("--json", as_json, "Print the report as JSON");
  add_common(run);

  auto* list = app.add_subcommand("list", "List registry entries");
  bool list_json = false;
  list->add_flag("--json", list_json, "Emit full configs as JSON");

  int sweep_d = 2;
  std::vector<int> grids = pmnn::fdm::default_sweep();
  bool with_nn = false;
  auto* sweep = app.add_subcommand("sweep-fdm", "Finite-difference error sweep, optionally against IPMNN");
  sweep->add_option("--dim", sweep_d, "Dimension (1 or 2)");
  sweep->add_option("--grids", grids, "Interior points per axis");
  sweep->add_flag("--with-nn", with_nn, "Also train IPMNN on each grid");
  add_common(sweep);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize a run directory");
  report->add_option("dir", report_dir, "Run directory")->required();
  report->add_flag("--json", as_json, "Print report.json unchanged");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    h::RunOptions opt;
    opt.profile = profile;
    opt.seed = seed;
    if (out_dir) opt.out = *out_dir;

    if (*run) {
      if (!quiet)
        opt.progress = [](const pmnn::IterationRecord& r) {
          std::cerr << "epoch " << r.epoch << "  loss " << pmnn::fmt_real(r.loss) << "  lambda "
                    << pmnn::fmt_real(r.lambda) << '\n';
        };
      const h::RunReport rep = h::run(resolve(target), opt);
      if (as_json)
        std::cout << h::to_json(rep).dump(2) << '\n';
      else
        print_summary(h::to_json(rep), std::cout);
      return 0;
    }
    if (*list) {
      if (list_json) {
        json all = json::array();
        for (const auto& c : h::registry()) all.push_back(h::to_json(c));
        std::cout << all.dump(2) << '\n';
      } else {
        for (const auto& c : h::registry()) std::cout << c.name << "\t" << c.description << '\n';
      }
      return 0;
    }
    if (*sweep) {
      h::ExperimentConfig c = *h::find_config("fdm-sweep");
      c.problem.dimension = sweep_d;
      c.architecture.layers.front() = sweep_d;
      c.sweep.grids = grids;
      c.sweep.with_network = with_nn;
      const h::RunReport rep = h::run(c, opt);
      h::write_sweep_csv(std::cout, rep.sweep);
      return 0;
    }
    if (*report) {
      const json r = h::read_report(report_dir);
      if (as_json)
        std::cout << r.dump(2) << '\n';
      else
        print_summary(r, std::cout);
      return 0;
    }
  } catch (const pmnn::ConfigError& e) {
    return fail(e.code(), e.what(), {{"violations", e.violations()}});
  } catch (const pmnn::DegenerateError& e) {
    return fail(e.code(), e.what(), {{"epoch", e.epoch()}});
  } catch (const pmnn::DivergenceError& e) {
    return fail(e.code(), e.what(), {{"epoch", e.epoch()}});
  } catch (const pmnn::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
