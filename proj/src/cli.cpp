#include "etk/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "etk/engine.hpp"
#include "etk/generator.hpp"
#include "etk/report.hpp"

namespace etk {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::string body = text;
  if (std::filesystem::is_regular_file(text)) {
    std::ifstream in(text);
    std::stringstream buf;
    buf << in.rdbuf();
    body = buf.str();
  }
  for (char& c : body) {
    if (c == '\n' || c == '\r' || c == ' ' || c == '\t' || c == ';') c = ',';
  }
  std::vector<std::uint64_t> seeds;
  for (const auto& raw : split(body, ',')) {
    const auto tok = std::string(trim(raw));
    if (tok.empty()) continue;
    try {
      const auto dash = tok.find('-');
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(tok));
      } else {
        const auto lo = std::stoull(tok.substr(0, dash));
        const auto hi = std::stoull(tok.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument("descending range");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::exception&) {
      throw InputError("bad seed '" + tok + "'");
    }
  }
  if (seeds.empty()) throw InputError("empty seed list");
  return seeds;
}

namespace {

struct Common {
  std::string settings;
  std::string policy;
  std::string out;
  std::string seeds;
  int runs = 0;
  int workers = 1;
  bool trace = false;
  std::string unplaced;
};

Settings load_settings(const Common& o) {
  auto s = Settings::load(o.settings);
  if (!o.unplaced.empty()) {
    try {
      s.unplaced = parse_unplaced_mode(o.unplaced);
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("--unplaced: ") + e.what());
    }
  }
  if (o.trace) s.trace = true;
  if (!o.seeds.empty()) {
    s.seeds = parse_seed_list(o.seeds);
  } else if (o.runs > 0) {
    s.seeds.clear();
    for (int i = 1; i <= o.runs; ++i) s.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  if (!o.out.empty()) s.output_dir = o.out;
  return s;
}

std::shared_ptr<const Inputs> inputs_for(const Settings& s, const std::string& policy_path) {
  if (policy_path.empty()) return load_inputs(s);
  return load_inputs(s, load_policy(policy_path));
}

std::vector<RunStatistics> statistics_of(const std::vector<SimulationOutput>& outs, const Inputs& in) {
  std::vector<RunStatistics> stats;
  for (const auto& o : outs) stats.push_back(compute_statistics(o, in.policy.members));
  return stats;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path().empty() ? "." : p.parent_path());
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

template <typename F>
std::string render(F&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

void add_common(CLI::App* cmd, Common& o, bool batch) {
  cmd->add_option("--settings", o.settings, "settings JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--policy", o.policy, "policy JSON (default: the one named in the settings)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--unplaced", o.unplaced, "discard or force");
  cmd->add_flag("--trace", o.trace, "write every offer to offers.csv");
  if (batch) {
    cmd->add_option("--runs", o.runs, "number of runs, seeds 1..N");
    cmd->add_option("--seeds", o.seeds, "seed list (1,2,5 or 1-20) or a file holding one");
    cmd->add_option("--workers", o.workers, "parallel runs")->check(CLI::PositiveNumber);
  }
}

int do_run(const Common& o, std::uint64_t seed_override, std::ostream& out) {
  const auto s = load_settings(o);
  const auto in = inputs_for(s, o.policy);
  const auto seed = seed_override ? seed_override : s.seeds.front();
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = run_simulation(in, seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_outputs(result, s.output_dir, s.trace);
  const auto stats = compute_statistics(result, in->policy.members);
  write_file(s.output_dir / "statistics.csv", render([&](std::ostream& os) { write_statistics_csv(os, {stats}, {seed}); }));
  const auto summary = summarize({stats});
  const auto text = render([&](std::ostream& os) { render_summary(os, summary); });
  write_file(s.output_dir / "summary.txt", text);
  out << "policy " << in->policy.name << ", seed " << seed << ", " << result.transplants.size()
      << " transplantations in " << std::fixed << std::setprecision(2) << secs << " s\n"
      << text;
  if (!result.ledger_invariant) {
    out << "warning: balance ledger country sums changed during the run\n";
    return 1;
  }
  return 0;
}

std::vector<SimulationOutput> batch_runs(const Settings& s, const std::shared_ptr<const Inputs>& in,
                                         int workers, bool write_runs) {
  auto outs = run_batch(in, s.seeds, workers);
  if (write_runs) {
    for (const auto& r : outs) write_run_outputs(r, s.output_dir / ("run_" + std::to_string(r.seed)), s.trace);
  }
  return outs;
}

int do_batch(const Common& o, const std::string& actual_path, std::ostream& out) {
  const auto s = load_settings(o);
  const auto in = inputs_for(s, o.policy);
  const auto outs = batch_runs(s, in, o.workers, true);
  const auto stats = statistics_of(outs, *in);
  const auto actual = actual_path.empty() ? std::vector<Statistic>{} : load_actual(actual_path);
  const auto summary = summarize(stats, actual);
  write_file(s.output_dir / "statistics.csv", render([&](std::ostream& os) { write_statistics_csv(os, stats, s.seeds); }));
  write_file(s.output_dir / "summary.csv", render([&](std::ostream& os) { write_summary_csv(os, summary); }));
  const auto text = render([&](std::ostream& os) { render_summary(os, summary); });
  write_file(s.output_dir / "summary.txt", text);
  out << "policy " << in->policy.name << ", " << outs.size() << " runs\n" << text;
  int miscalibrated = 0;
  for (const auto& r : summary) miscalibrated += r.miscalibrated;
  if (!actual.empty()) out << miscalibrated << " statistic(s) outside the 95%-IQR (marked !)\n";
  return 0;
}

int do_compare(const Common& o, const std::vector<std::string>& variants, bool unpaired, std::ostream& out) {
  const auto s = load_settings(o);
  const auto base_in = inputs_for(s, o.policy);
  const auto base = statistics_of(batch_runs(s, base_in, o.workers, false), *base_in);
  for (const auto& v : variants) {
    const auto in = load_inputs(s, load_policy(v));
    const auto var = statistics_of(batch_runs(s, in, o.workers, false), *in);
    const auto rows = compare_policies(base, var, !unpaired);
    const auto name = in->policy.name;
    write_file(s.output_dir / ("delta_" + name + ".csv"), render([&](std::ostream& os) { write_delta_csv(os, rows); }));
    const auto text = render([&](std::ostream& os) { render_delta(os, rows, base_in->policy.name, name); });
    write_file(s.output_dir / ("delta_" + name + ".txt"), text);
    out << text;
  }
  return 0;
}

int do_check(const Common& o, std::ostream& out) {
  const auto s = load_settings(o);
  const auto in = inputs_for(s, o.policy);
  // Initializing a run also checks overlapping registrations.
  Simulation sim(in, s.seeds.front());
  sim.initialize();
  std::size_t updates = 0;
  for (const auto& c : in->candidates) updates += c.updates.size();
  out << "ok: " << in->candidates.size() << " registrations, " << updates << " status updates, "
      << in->donors.size() << " donors, " << in->balance_events.size() << " balance events, "
      << in->centers.size() << " centers, panel of " << in->panel->size() << ", policy "
      << in->policy.name << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete-event simulator of ETKAS and ESP kidney allocation", "etksim"};
  app.require_subcommand(1);

  Common run_o, batch_o, val_o, cmp_o, chk_o;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run", "single simulation run");
  add_common(run, run_o, false);
  run->add_option("--seed", run_seed, "seed (default: first seed in the settings)");

  auto* batch = app.add_subcommand("batch", "repeated runs, optionally in parallel");
  add_common(batch, batch_o, true);

  std::string actual;
  auto* validate_cmd = app.add_subcommand("validate", "batch plus comparison with actual data");
  add_common(validate_cmd, val_o, true);
  validate_cmd->add_option("--actual", actual, "CSV with group,label,value")->required()->check(CLI::ExistingFile);

  std::vector<std::string> variants;
  bool unpaired = false;
  auto* compare = app.add_subcommand("compare", "policy variants against a baseline under common seeds");
  add_common(compare, cmp_o, true);
  compare->add_option("--variant", variants, "variant policy JSON (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_flag("--unpaired", unpaired, "Welch test instead of the paired t-test");

  auto* check = app.add_subcommand("check-inputs", "load and validate every input stream");
  add_common(check, chk_o, false);

  GeneratorConfig gen;
  std::string gen_out, gen_start, gen_end;
  auto* generate = app.add_subcommand("generate", "write a synthetic dataset");
  generate->add_option("--out", gen_out, "output directory")->required();
  generate->add_option("--registrations", gen.registrations);
  generate->add_option("--donors", gen.donors);
  generate->add_option("--seed", gen.seed);
  generate->add_option("--runs", gen.runs, "seeds listed in settings.json");
  generate->add_option("--panel-size", gen.panel_size);
  generate->add_option("--initial-fraction", gen.initial_fraction);
  generate->add_option("--start", gen_start, "window start YYYY-MM-DD");
  generate->add_option("--end", gen_end, "window end YYYY-MM-DD");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*run) return do_run(run_o, run_seed, out);
    if (*batch) return do_batch(batch_o, "", out);
    if (*validate_cmd) return do_batch(val_o, actual, out);
    if (*compare) return do_compare(cmp_o, variants, unpaired, out);
    if (*check) return do_check(chk_o, out);
    if (*generate) {
      if (!gen_start.empty()) gen.window_start = Date::parse(gen_start);
      if (!gen_end.empty()) gen.window_end = Date::parse(gen_end);
      const auto c = generate_dataset(gen, gen_out);
      out << "wrote " << c.registrations << " registrations, " << c.status_updates << " status updates and "
          << c.donors << " donors to " << gen_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace etk
