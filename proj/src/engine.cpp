#include "etk/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace etk {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Settings

namespace {

[[noreturn]] void settings_error(const std::string& source, const std::string& path,
                                 const std::string& what) {
  throw InputError(source + ": " + path + ": " + what);
}

void expect_keys(const json& obj, const std::string& source, const std::string& path,
                 std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) settings_error(source, path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      settings_error(source, path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

std::string get_string(const json& obj, const std::string& key, const std::string& source,
                       const std::string& path) {
  if (!obj.contains(key)) return {};
  if (!obj[key].is_string()) settings_error(source, path + key, "expected a string");
  return obj[key].get<std::string>();
}

}  // namespace

Settings Settings::parse(const std::string& json_text, const std::filesystem::path& base_dir,
                         const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(source + ": " + e.what());
  }
  expect_keys(doc, source, "",
              {"window", "inputs", "models", "policy", "seeds", "runs", "seed", "unplaced",
               "immunization_probability", "post_transplant", "trace", "output_dir",
               "description"});
  Settings s;
  s.base_dir = base_dir;
  auto path_of = [&](const std::string& rel) -> std::filesystem::path {
    if (rel.empty()) return {};
    std::filesystem::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
  };

  if (!doc.contains("window")) settings_error(source, "window", "required");
  const auto& w = doc["window"];
  expect_keys(w, source, "window", {"start", "end"});
  try {
    s.window_start = Date::parse(get_string(w, "start", source, "window."));
    s.window_end = Date::parse(get_string(w, "end", source, "window."));
  } catch (const std::invalid_argument& e) {
    settings_error(source, "window", e.what());
  }
  if (s.window_end < s.window_start) settings_error(source, "window", "end precedes start");

  if (!doc.contains("inputs")) settings_error(source, "inputs", "required");
  const auto& in = doc["inputs"];
  expect_keys(in, source, "inputs",
              {"antigens", "frequencies", "panel", "centers", "candidates", "status_updates",
               "donors", "balance_history"});
  s.antigens = path_of(get_string(in, "antigens", source, "inputs."));
  s.frequencies = path_of(get_string(in, "frequencies", source, "inputs."));
  s.panel = path_of(get_string(in, "panel", source, "inputs."));
  s.centers = path_of(get_string(in, "centers", source, "inputs."));
  s.candidates = path_of(get_string(in, "candidates", source, "inputs."));
  s.status_updates = path_of(get_string(in, "status_updates", source, "inputs."));
  s.donors = path_of(get_string(in, "donors", source, "inputs."));
  s.balance_history = path_of(get_string(in, "balance_history", source, "inputs."));
  for (const auto& [name, p] : {std::pair{"antigens", &s.antigens}, {"panel", &s.panel},
                                {"centers", &s.centers}, {"candidates", &s.candidates},
                                {"donors", &s.donors}}) {
    if (p->empty()) settings_error(source, std::string("inputs.") + name, "required");
  }

  if (doc.contains("models")) {
    const auto& m = doc["models"];
    expect_keys(m, source, "models",
                {"max_offers_coefficients", "max_offers_baseline", "center_etkas", "center_esp",
                 "patient_etkas", "patient_esp", "dual", "weibull_coefficients",
                 "weibull_shapes", "relist_curves", "relist_pool"});
    s.max_offers_coefficients = path_of(get_string(m, "max_offers_coefficients", source, "models."));
    s.max_offers_baseline = path_of(get_string(m, "max_offers_baseline", source, "models."));
    s.center_etkas = path_of(get_string(m, "center_etkas", source, "models."));
    s.center_esp = path_of(get_string(m, "center_esp", source, "models."));
    s.patient_etkas = path_of(get_string(m, "patient_etkas", source, "models."));
    s.patient_esp = path_of(get_string(m, "patient_esp", source, "models."));
    s.dual = path_of(get_string(m, "dual", source, "models."));
    s.weibull_coefficients = path_of(get_string(m, "weibull_coefficients", source, "models."));
    s.weibull_shapes = path_of(get_string(m, "weibull_shapes", source, "models."));
    s.relist_curves = path_of(get_string(m, "relist_curves", source, "models."));
    s.relist_pool = path_of(get_string(m, "relist_pool", source, "models."));
  }
  s.policy = path_of(get_string(doc, "policy", source, ""));

  if (doc.contains("seeds")) {
    const auto& v = doc["seeds"];
    if (!v.is_array() || v.empty()) settings_error(source, "seeds", "expected a non-empty list");
    s.seeds.clear();
    for (const auto& x : v) {
      if (!x.is_number_unsigned()) settings_error(source, "seeds", "expected non-negative integers");
      s.seeds.push_back(x.get<std::uint64_t>());
    }
  } else if (doc.contains("runs")) {
    if (!doc["runs"].is_number_unsigned() || doc["runs"].get<int>() < 1) {
      settings_error(source, "runs", "expected a positive integer");
    }
    const std::uint64_t base = doc.contains("seed") ? doc["seed"].get<std::uint64_t>() : 1;
    s.seeds.clear();
    for (int i = 0; i < doc["runs"].get<int>(); ++i) s.seeds.push_back(base + static_cast<std::uint64_t>(i));
  }
  if (doc.contains("unplaced")) {
    try {
      s.unplaced = parse_unplaced_mode(get_string(doc, "unplaced", source, ""));
    } catch (const std::invalid_argument& e) {
      settings_error(source, "unplaced", e.what());
    }
  }
  if (doc.contains("immunization_probability")) {
    const auto& v = doc["immunization_probability"];
    if (!v.is_number() || v.get<double>() < 0 || v.get<double>() > 1) {
      settings_error(source, "immunization_probability", "expected a number in [0,1]");
    }
    s.immunization_probability = v.get<double>();
  }
  if (doc.contains("post_transplant")) {
    if (!doc["post_transplant"].is_boolean()) settings_error(source, "post_transplant", "expected true or false");
    s.post_transplant = doc["post_transplant"].get<bool>();
  }
  if (doc.contains("trace")) {
    if (!doc["trace"].is_boolean()) settings_error(source, "trace", "expected true or false");
    s.trace = doc["trace"].get<bool>();
  }
  if (doc.contains("output_dir")) s.output_dir = path_of(get_string(doc, "output_dir", source, ""));
  return s;
}

Settings Settings::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path(), path.string());
}

// ---------------------------------------------------------------------------
// Inputs

std::shared_ptr<const Inputs> load_inputs(const Settings& settings, const PolicyConfig& policy) {
  auto in = std::make_shared<Inputs>();
  in->settings = settings;
  in->policy = policy;
  if (const auto errors = validate(policy); !errors.empty()) {
    std::string msg = "invalid policy '" + policy.name + "':";
    for (const auto& e : errors) msg += "\n  " + e;
    throw InputError(msg);
  }
  in->dict = HlaDictionary::load(settings.antigens);
  if (!settings.frequencies.empty()) {
    in->frequencies = FrequencyTable::load(in->dict, settings.frequencies);
  } else if (policy.mmp_source == PleqSource::Analytic) {
    throw InputError("settings: inputs.frequencies is required for analytic mismatch probabilities");
  }
  in->panel = std::make_unique<DonorPanel>(DonorPanel::load(in->dict, settings.panel));
  in->centers = CenterRegistry::load(settings.centers);
  in->candidates = load_candidates(Table::read(settings.candidates), in->dict, in->centers);
  if (!settings.status_updates.empty()) {
    attach_status_updates(Table::read(settings.status_updates), in->candidates, in->dict);
  }
  in->donors = load_donors(Table::read(settings.donors), in->dict, in->centers);
  if (!settings.balance_history.empty()) {
    const auto table = Table::read(settings.balance_history);
    in->balance_events = load_balance_events(table);
    for (const auto& e : in->balance_events) {
      for (const auto& c : {e.donor_country, e.recipient_country}) {
        if (std::find(policy.members.begin(), policy.members.end(), c) == policy.members.end()) {
          throw InputError(table.source() + ": country '" + c + "' is not a member");
        }
      }
    }
  }

  auto require = [](const std::filesystem::path& p, const char* name) {
    if (p.empty()) throw InputError(std::string("settings: models.") + name + " is required");
    return p;
  };
  in->models.max_offers = CoxSampler::load(require(settings.max_offers_coefficients, "max_offers_coefficients"),
                                           require(settings.max_offers_baseline, "max_offers_baseline"));
  in->models.center_etkas = LogisticModel::load(require(settings.center_etkas, "center_etkas"));
  in->models.center_esp = LogisticModel::load(require(settings.center_esp, "center_esp"));
  in->models.patient_etkas = LogisticModel::load(require(settings.patient_etkas, "patient_etkas"));
  in->models.patient_esp = LogisticModel::load(require(settings.patient_esp, "patient_esp"));
  in->models.dual = LogisticModel::load(require(settings.dual, "dual"));
  if (settings.post_transplant) {
    in->weibull = WeibullModel::load(require(settings.weibull_coefficients, "weibull_coefficients"),
                                     require(settings.weibull_shapes, "weibull_shapes"));
    in->relist_curves = RelistCurveSet::load(require(settings.relist_curves, "relist_curves"));
    in->relist_pool = RelistingPool::load(require(settings.relist_pool, "relist_pool"));
  }
  return in;
}

std::shared_ptr<const Inputs> load_inputs(const Settings& settings) {
  const PolicyConfig policy = settings.policy.empty() ? PolicyConfig{} : load_policy(settings.policy);
  return load_inputs(settings, policy);
}

// ---------------------------------------------------------------------------
// Future event set

std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::BalanceUpdate: return "balance";
    case EventType::PatientUpdate: return "patient";
    case EventType::DonorArrival: return "donor";
  }
  return "?";
}

std::uint64_t FutureEventSet::push(Date date, EventType type, int index) {
  const auto seq = next_seq_++;
  heap_.push(Event{date, type, seq, index});
  return seq;
}

Event FutureEventSet::pop() {
  Event e = heap_.top();
  heap_.pop();
  return e;
}

std::vector<Event> FutureEventSet::snapshot() const {
  auto copy = heap_;
  std::vector<Event> out;
  while (!copy.empty()) {
    out.push_back(copy.top());
    copy.pop();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

std::optional<Date> terminal_date(const Candidate& c) {
  if (is_terminal(c.status)) return c.registration;
  for (const auto& u : c.updates) {
    if (u.type == UpdateType::Status && is_terminal(parse_urgency(u.value))) return u.date;
  }
  return std::nullopt;
}

void check_overlaps(const std::vector<Candidate>& cands) {
  std::map<std::string, std::vector<std::pair<Date, Date>>> spans;
  std::map<std::string, std::vector<std::string>> ids;
  for (const auto& c : cands) {
    const Date end = terminal_date(c).value_or(Date{INT32_MAX});
    spans[c.patient_id].emplace_back(c.registration, end);
    ids[c.patient_id].push_back(c.id);
  }
  for (const auto& [pid, v] : spans) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        if (v[i].first < v[j].second && v[j].first < v[i].second) {
          throw InputError("overlapping registrations for patient '" + pid + "': " +
                           ids[pid][i] + " and " + ids[pid][j]);
        }
      }
    }
  }
}

std::string fmt_hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string opt_date(const std::optional<Date>& d) { return d ? d->to_string() : "-"; }

bool touches_balance(const std::string& donor_country, const std::string& recipient_country) {
  return donor_country != recipient_country || donor_country == kAustria;
}

}  // namespace

Simulation::Simulation(std::shared_ptr<const Inputs> inputs, std::uint64_t seed)
    : in_(std::move(inputs)), streams_(seed) {
  out_.seed = seed;
}

void Simulation::add_candidate(Candidate c) {
  const int i = static_cast<int>(candidates_.size());
  by_group_[static_cast<std::size_t>(c.blood_group)].push_back(i);
  candidates_.push_back(std::move(c));
  pending_.push_back(0);
}

void Simulation::initialize() {
  const auto& s = in_->settings;
  candidates_.clear();
  pending_.clear();
  for (auto& g : by_group_) g.clear();
  std::vector<Candidate> included;
  for (const auto& c : in_->candidates) {
    // Repeat registrations following an in-window transplant are simulated instead.
    if (c.previous_tx && *c.previous_tx >= s.window_start) continue;
    included.push_back(c);
  }
  check_overlaps(included);

  ledger_ = init_ledger(in_->balance_events, s.window_start - 1, in_->policy.members);
  for (std::size_t i = 0; i < in_->balance_events.size(); ++i) {
    const auto& e = in_->balance_events[i];
    if (e.date >= s.window_start && e.date <= s.window_end) {
      fes_.push(e.date, EventType::BalanceUpdate, static_cast<int>(i));
    }
  }

  const auto hla = in_->hla();
  for (auto& c : included) {
    c.listed = false;
    c.next_update = 0;
    const Date fold_until = std::min(c.registration, s.window_start);
    if (c.registration < s.window_start) c.listed = true;
    while (c.next_update < c.updates.size() &&
           c.updates[c.next_update].date < std::max(fold_until, c.listed ? s.window_start : c.registration)) {
      apply_update(c, c.updates[c.next_update], in_->dict);
      ++c.next_update;
    }
    refresh_derived(c, hla, in_->policy);
    add_candidate(std::move(c));
  }
  for (std::size_t i = 0; i < candidates_.size(); ++i) schedule_next_update(static_cast<int>(i));

  for (std::size_t i = 0; i < in_->donors.size(); ++i) {
    const auto& d = in_->donors[i];
    if (d.date >= s.window_start && d.date <= s.window_end) {
      fes_.push(d.date, EventType::DonorArrival, static_cast<int>(i));
    }
  }
  for (std::size_t g = 0; g < kNumAgeGroups; ++g) {
    ledger_sums_[g] = ledger_.country_sum(static_cast<DonorAgeGroup>(g));
  }
  initial_candidates_ = candidates_;
  initial_ledger_ = ledger_;
}

void Simulation::schedule_next_update(int ci) {
  auto& c = candidates_[static_cast<std::size_t>(ci)];
  pending_[static_cast<std::size_t>(ci)] = 0;
  const Date end = in_->settings.window_end;
  if (!c.listed) {
    if (c.registration <= end) {
      pending_[static_cast<std::size_t>(ci)] = fes_.push(c.registration, EventType::PatientUpdate, ci);
    }
    return;
  }
  if (is_terminal(c.status)) return;
  if (c.next_update < c.updates.size() && c.updates[c.next_update].date <= end) {
    pending_[static_cast<std::size_t>(ci)] =
        fes_.push(c.updates[c.next_update].date, EventType::PatientUpdate, ci);
  }
}

void Simulation::apply_patient_event(int ci) {
  auto& c = candidates_[static_cast<std::size_t>(ci)];
  if (!c.listed) {
    c.listed = true;
    refresh_derived(c, in_->hla(), in_->policy);
    return;
  }
  const auto& u = c.updates[c.next_update++];
  const auto before = c.status;
  apply_update(c, u, in_->dict);
  if (u.type == UpdateType::Unacceptable) refresh_derived(c, in_->hla(), in_->policy);
  if (!is_terminal(before) && before != c.status) {
    const auto& country = in_->centers.at(c.center).country;
    if (c.status == Urgency::D) ++out_.waitlist_deaths[country];
    if (c.status == Urgency::R) ++out_.removals[country];
  }
}

void Simulation::handle_patient(int ci, LogEntry& entry) {
  (void)entry;
  apply_patient_event(ci);
  schedule_next_update(ci);
}

std::vector<int> Simulation::active_pool(BloodGroup bg) {
  auto& v = by_group_[static_cast<std::size_t>(bg)];
  std::erase_if(v, [&](int i) { return is_terminal(candidates_[static_cast<std::size_t>(i)].status) &&
                                       candidates_[static_cast<std::size_t>(i)].listed; });
  std::vector<int> pool;
  pool.reserve(v.size());
  for (int i : v) {
    if (candidates_[static_cast<std::size_t>(i)].listed) pool.push_back(i);
  }
  return pool;
}

bool Simulation::ledger_balanced() const {
  for (std::size_t g = 0; g < kNumAgeGroups; ++g) {
    if (ledger_.country_sum(static_cast<DonorAgeGroup>(g)) != ledger_sums_[g]) return false;
  }
  return true;
}

void Simulation::handle_donor(int di, LogEntry& entry) {
  const Donor& d = in_->donors[static_cast<std::size_t>(di)];
  ++out_.donors;
  out_.kidneys_available += d.kidneys;
  const auto program = program_for(d, in_->policy);
  const auto pool = active_pool(d.blood_group);
  const MatchContext ctx{in_->dict, in_->centers, ledger_, in_->policy};
  // An empty pool would mean "every candidate" to build_match_list.
  const auto list = pool.empty() ? MatchList{program, {}}
                                 : build_match_list(d, candidates_, d.date, ctx, program, pool);
  const auto& donor_country = in_->centers.at(d.center).country;
  const int k_max = sample_max_offers(d, program, donor_country, in_->models.max_offers,
                                      streams_.uniform(Stream::MaxOffers, hash_id(d.id)));
  AllocationInputs ai{list, d, candidates_, in_->centers, in_->models, streams_, d.date,
                      in_->settings.unplaced};
  const auto outcome = run_allocation(ai, k_max);
  if (in_->settings.trace) {
    for (const auto& t : outcome.trace) {
      out_.trace.push_back({d.id, candidates_[static_cast<std::size_t>(t.candidate)].id, t.decision,
                            t.stage, t.probability});
    }
  }
  for (const auto& a : outcome.accepted) {
    const MatchRecord rec = list.records[static_cast<std::size_t>(a.rank - 1)];
    transplant(a.candidate, d, rec, a, program, entry);
  }
  out_.kidneys_discarded += outcome.unplaced;
}

void Simulation::transplant(int ci, const Donor& d, const MatchRecord& rec, const Acceptance& a,
                            Program program, LogEntry& entry) {
  const auto& s = in_->settings;
  Candidate& c = candidates_[static_cast<std::size_t>(ci)];
  const auto& cand_country = in_->centers.at(c.center).country;
  const auto& donor_country = in_->centers.at(d.center).country;

  TransplantRecord t;
  t.donor_id = d.id;
  t.candidate_id = c.id;
  t.date = d.date;
  t.program = program;
  t.mechanism = a.mechanism;
  t.mm = rec.mm;
  t.geo = rec.geo;
  t.points = rec.total;
  t.rank = a.rank;
  t.kidneys = a.kidneys;
  t.dual = a.dual;
  t.candidate_age = c.age_at(d.date);
  t.donor_age = d.age;
  t.vpra = c.vpra;
  t.homozygosity = homozygosity_level(c.hla);
  t.candidate_country = cand_country;
  t.donor_country = donor_country;
  t.repeat = c.prior_tx;
  out_.transplants.push_back(t);
  out_.kidneys_transplanted += a.kidneys;
  entry.transplants.emplace_back(ci, a.kidneys);

  c.status = Urgency::FU;
  pending_[static_cast<std::size_t>(ci)] = 0;  // lazily cancels the pending update
  if (touches_balance(donor_country, cand_country) && ledger_.knows(donor_country) &&
      ledger_.knows(cand_country)) {
    ledger_.record_transfer({d.date, donor_country, cand_country, d.age, std::string(to_string(program)),
                             in_->centers.at(d.center).region, in_->centers.at(c.center).region});
  }

  if (!s.post_transplant) return;
  const auto cand_key = hash_id(c.id);
  const auto donor_key = hash_id(d.id);
  Covariates x{{"recipient_age", t.candidate_age},
               {"donor_age", d.age},
               {"mm_total", rec.mm ? rec.mm->abdr() : 0},
               {"prior_tx", c.prior_tx ? 1 : 0},
               {"dialysis_years", c.dialysis_days(d.date) / kDaysPerYear},
               {"donor_dcd", d.dcd ? 1 : 0},
               {"esp", program == Program::ESP ? 1 : 0}};
  const double scale = in_->weibull.scale(x);
  const double time_to_event = sample_failure_time(
      scale, in_->weibull.shape(cand_country), streams_.uniform(Stream::PostTransplant, cand_key, donor_key));
  if (!(time_to_event > 0)) return;
  const auto r = sample_relist_time(time_to_event, t.candidate_age, in_->relist_curves,
                                    streams_.uniform(Stream::Relisting, cand_key, donor_key));
  const Date end = s.window_end;
  if (r && d.date + static_cast<int>(std::lround(*r)) <= end) {
    Rng imm = streams_.stream(Stream::Immunization, cand_key, donor_key);
    const auto additions =
        simulate_de_novo_immunization(in_->dict, d.hla, c.hla, s.immunization_probability, imm);
    Rng pick = streams_.stream(Stream::Relisting, cand_key, donor_key);
    auto built = build_synthetic_relisting(c, d.date, time_to_event, *r, in_->relist_pool, additions,
                                           pick, c.id + "/r", cand_country);
    if (built.candidate) {
      Candidate nc = std::move(*built.candidate);
      refresh_derived(nc, in_->hla(), in_->policy);
      entry.relistings.push_back(nc);
      ++out_.relistings;
      add_candidate(std::move(nc));
      schedule_next_update(static_cast<int>(candidates_.size()) - 1);
      return;
    }
    out_.notes.push_back("no re-listing for " + t.candidate_id + ": " + built.note);
  }
  if (d.date + static_cast<int>(std::lround(time_to_event)) <= end) ++out_.post_transplant_deaths;
}

SimulationOutput Simulation::run() {
  const Date end = in_->settings.window_end;
  while (!fes_.empty()) {
    const Event ev = fes_.pop();
    if (ev.date > end) break;
    LogEntry entry{ev, {}, {}};
    switch (ev.type) {
      case EventType::BalanceUpdate:
        ledger_.record_transfer(in_->balance_events[static_cast<std::size_t>(ev.index)]);
        break;
      case EventType::PatientUpdate:
        if (pending_[static_cast<std::size_t>(ev.index)] != ev.seq) continue;  // cancelled
        handle_patient(ev.index, entry);
        break;
      case EventType::DonorArrival:
        handle_donor(ev.index, entry);
        break;
    }
    if (!ledger_balanced()) out_.ledger_invariant = false;
    out_.log.push_back(std::move(entry));
  }
  for (const auto& c : candidates_) {
    if (c.listed && is_active(c.status)) ++out_.active_at_end;
  }
  out_.final_state = serialize_state();
  return std::move(out_);
}

std::string Simulation::serialize_state() const {
  std::ostringstream os;
  for (const auto& c : candidates_) {
    os << c.id << ' ' << c.listed << ' ' << to_string(c.status) << ' ' << c.next_update << ' '
       << c.unacceptables.to_string(in_->dict) << '|' << fmt_hex(c.vpra) << ' ' << fmt_hex(c.mmp)
       << ' ' << fmt_hex(c.hmpp) << ' ' << opt_date(c.last_screening) << ' '
       << opt_date(c.dialysis_start) << ' ' << c.am << c.kaoo << c.esp_opt_in << ' '
       << static_cast<int>(c.esp_choice) << ' ' << c.profile.to_string() << ' '
       << to_string(c.mm_criteria) << '\n';
  }
  for (const auto& [country, v] : ledger_.national()) {
    os << "balance " << country;
    for (int x : v) os << ' ' << x;
    os << '\n';
  }
  for (const auto& [region, v] : ledger_.regional()) {
    os << "region " << region;
    for (int x : v) os << ' ' << x;
    os << '\n';
  }
  return os.str();
}

std::string Simulation::replay(const std::vector<LogEntry>& log) const {
  Simulation sim(in_, streams_.seed());
  sim.candidates_ = initial_candidates_;
  sim.ledger_ = initial_ledger_;
  sim.pending_.assign(sim.candidates_.size(), 0);
  for (const auto& entry : log) {
    const auto& ev = entry.event;
    switch (ev.type) {
      case EventType::BalanceUpdate:
        sim.ledger_.record_transfer(in_->balance_events[static_cast<std::size_t>(ev.index)]);
        break;
      case EventType::PatientUpdate:
        sim.apply_patient_event(ev.index);
        break;
      case EventType::DonorArrival: {
        const auto& d = in_->donors[static_cast<std::size_t>(ev.index)];
        const auto program = program_for(d, in_->policy);
        for (const auto& [ci, kidneys] : entry.transplants) {
          (void)kidneys;
          auto& c = sim.candidates_[static_cast<std::size_t>(ci)];
          c.status = Urgency::FU;
          const auto& dc = in_->centers.at(d.center).country;
          const auto& cc = in_->centers.at(c.center).country;
          if (touches_balance(dc, cc) && sim.ledger_.knows(dc) && sim.ledger_.knows(cc)) {
            sim.ledger_.record_transfer({d.date, dc, cc, d.age, std::string(to_string(program)),
                                         in_->centers.at(d.center).region,
                                         in_->centers.at(c.center).region});
          }
        }
        for (const auto& nc : entry.relistings) sim.add_candidate(nc);
        break;
      }
    }
  }
  return sim.serialize_state();
}

SimulationOutput run_simulation(std::shared_ptr<const Inputs> inputs, std::uint64_t seed) {
  Simulation sim(std::move(inputs), seed);
  sim.initialize();
  return sim.run();
}

std::vector<SimulationOutput> run_batch(std::shared_ptr<const Inputs> inputs,
                                        const std::vector<std::uint64_t>& seeds, int workers) {
  std::vector<SimulationOutput> results(seeds.size());
  std::vector<std::string> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        results[i] = run_simulation(inputs, seeds[i]);
        results[i].log.clear();  // not needed after the run; keeps batches small
        results[i].log.shrink_to_fit();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(seeds.size())));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!errors[i].empty()) {
      throw std::runtime_error("run " + std::to_string(i) + " (seed " + std::to_string(seeds[i]) +
                               ") failed: " + errors[i]);
    }
  }
  return results;
}

void write_run_outputs(const SimulationOutput& out, const std::filesystem::path& dir, bool trace) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "transplants.csv");
    TableWriter w(f, {"donor_id", "candidate_id", "date", "program", "mechanism", "mm", "geography",
                      "points", "rank", "kidneys", "dual", "candidate_age", "donor_age", "vpra",
                      "candidate_country", "donor_country", "repeat"});
    for (const auto& t : out.transplants) {
      char pts[32], vpra[32];
      std::snprintf(pts, sizeof pts, "%.4f", t.points);
      std::snprintf(vpra, sizeof vpra, "%.4f", t.vpra);
      w.row({t.donor_id, t.candidate_id, t.date.to_string(), std::string(to_string(t.program)),
             std::string(to_string(t.mechanism)), t.mm ? t.mm->code() : "",
             std::string(to_string(t.geo)), pts, std::to_string(t.rank), std::to_string(t.kidneys),
             t.dual ? "1" : "0", std::to_string(t.candidate_age), std::to_string(t.donor_age), vpra,
             t.candidate_country, t.donor_country, t.repeat ? "1" : "0"});
    }
  }
  {
    std::ofstream f(dir / "final_state.txt");
    f << out.final_state;
  }
  if (trace) {
    std::ofstream f(dir / "offers.csv");
    TableWriter w(f, {"donor_id", "candidate_id", "decision", "stage", "probability"});
    for (const auto& t : out.trace) {
      char p[32];
      std::snprintf(p, sizeof p, "%.6f", t.probability);
      w.row({t.donor_id, t.candidate_id, std::string(to_string(t.decision)),
             std::string(to_string(t.stage)), p});
    }
  }
}

}  // namespace etk
