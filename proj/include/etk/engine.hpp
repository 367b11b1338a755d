#pragma once

// Discrete-event simulation core: settings, shared inputs, the future event
// set and the event loop.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "etk/balance.hpp"
#include "etk/entities.hpp"
#include "etk/graft_offering.hpp"
#include "etk/hla.hpp"
#include "etk/match_list.hpp"
#include "etk/policy.hpp"
#include "etk/post_transplant.hpp"
#include "etk/rng.hpp"

namespace etk {

struct Settings {
  std::filesystem::path base_dir;  // relative paths resolve against this
  Date window_start;
  Date window_end;

  std::filesystem::path antigens, frequencies, panel, centers, candidates, status_updates, donors,
      balance_history;
  std::filesystem::path max_offers_coefficients, max_offers_baseline, center_etkas, center_esp,
      patient_etkas, patient_esp, dual, weibull_coefficients, weibull_shapes, relist_curves,
      relist_pool;
  std::filesystem::path policy;

  std::vector<std::uint64_t> seeds = {1};
  UnplacedMode unplaced = UnplacedMode::Discard;
  double immunization_probability = 0.2;
  bool post_transplant = true;
  bool trace = false;
  std::filesystem::path output_dir = "out";

  /// Paths inside the document are relative to its directory.
  static Settings load(const std::filesystem::path& path);
  static Settings parse(const std::string& json_text, const std::filesystem::path& base_dir,
                        const std::string& source = "settings");
};

/// Immutable inputs shared by every run of a batch.
struct Inputs {
  Settings settings;
  PolicyConfig policy;
  HlaDictionary dict;
  FrequencyTable frequencies;
  std::unique_ptr<DonorPanel> panel;
  CenterRegistry centers;
  std::vector<Candidate> candidates;
  std::vector<Donor> donors;
  std::vector<BalanceEvent> balance_events;
  OfferModels models;
  WeibullModel weibull;
  RelistCurveSet relist_curves;
  RelistingPool relist_pool;

  [[nodiscard]] HlaResources hla() const { return {&dict, panel.get(), &frequencies}; }
};

/// Loads and validates every input named by the settings. Throws InputError.
std::shared_ptr<const Inputs> load_inputs(const Settings& settings);
/// Same, with a policy other than the one named in the settings.
std::shared_ptr<const Inputs> load_inputs(const Settings& settings, const PolicyConfig& policy);

enum class EventType : std::uint8_t { BalanceUpdate = 0, PatientUpdate = 1, DonorArrival = 2 };
std::string_view to_string(EventType t);

struct Event {
  Date date;
  EventType type = EventType::PatientUpdate;
  std::uint64_t seq = 0;
  int index = 0;  // balance event, candidate or donor index

  /// Order used by the future event set: date, type priority, sequence.
  [[nodiscard]] bool before(const Event& o) const {
    if (date != o.date) return date < o.date;
    if (type != o.type) return type < o.type;
    return seq < o.seq;
  }
};

class FutureEventSet {
 public:
  std::uint64_t push(Date date, EventType type, int index);
  Event pop();
  [[nodiscard]] bool empty() const { return heap_.empty(); }
  [[nodiscard]] std::size_t size() const { return heap_.size(); }
  /// Pending events in processing order (copies the heap).
  [[nodiscard]] std::vector<Event> snapshot() const;

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const { return b.before(a); }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 1;
};

struct TransplantRecord {
  std::string donor_id;
  std::string candidate_id;
  Date date;
  Program program = Program::ETKAS;
  Mechanism mechanism = Mechanism::Standard;
  std::optional<MismatchCount> mm;
  Geography geo = Geography::International;
  double points = 0;
  int rank = 0;
  int kidneys = 1;
  bool dual = false;
  int candidate_age = 0;
  int donor_age = 0;
  double vpra = 0;
  Homozygosity homozygosity;
  std::string candidate_country;
  std::string donor_country;
  bool repeat = false;
};

struct OfferTraceRow {
  std::string donor_id;
  std::string candidate_id;
  Decision decision = Decision::Decline;
  Mechanism stage = Mechanism::Standard;
  double probability = 0;
};

/// One processed event, with enough detail to refold the final state.
struct LogEntry {
  Event event;
  std::vector<std::pair<int, int>> transplants;  // (candidate index, kidneys)
  std::vector<Candidate> relistings;             // synthetic registrations created
};

struct SimulationOutput {
  std::uint64_t seed = 0;
  std::vector<TransplantRecord> transplants;
  std::vector<OfferTraceRow> trace;
  std::vector<LogEntry> log;
  int donors = 0;
  int kidneys_available = 0;
  int kidneys_transplanted = 0;
  int kidneys_discarded = 0;
  int relistings = 0;
  int post_transplant_deaths = 0;
  std::map<std::string, int> waitlist_deaths;  // by country
  std::map<std::string, int> removals;
  int active_at_end = 0;
  bool ledger_invariant = true;  // country sums unchanged after every event
  std::string final_state;       // canonical serialization
  std::vector<std::string> notes;
};

/// Mutable state of one run.
class Simulation {
 public:
  Simulation(std::shared_ptr<const Inputs> inputs, std::uint64_t seed);

  /// Folds pre-window history and schedules in-window events.
  void initialize();
  /// Processes events until the set is empty or past the window end.
  SimulationOutput run();

  [[nodiscard]] const std::vector<Candidate>& candidates() const { return candidates_; }
  [[nodiscard]] const BalanceLedger& ledger() const { return ledger_; }
  [[nodiscard]] const FutureEventSet& events() const { return fes_; }
  [[nodiscard]] std::string serialize_state() const;

  /// Refolds the log over the post-initialization state and returns the
  /// resulting serialized state.
  [[nodiscard]] std::string replay(const std::vector<LogEntry>& log) const;

 private:
  void schedule_next_update(int ci);
  void handle_patient(int ci, LogEntry& entry);
  void apply_patient_event(int ci);
  void handle_donor(int di, LogEntry& entry);
  void transplant(int ci, const Donor& d, const MatchRecord& rec, const Acceptance& a,
                  Program program, LogEntry& entry);
  void add_candidate(Candidate c);
  std::vector<int> active_pool(BloodGroup bg);
  [[nodiscard]] bool ledger_balanced() const;

  std::shared_ptr<const Inputs> in_;
  RandomStreams streams_;
  std::vector<Candidate> candidates_;
  std::vector<std::uint64_t> pending_;  // sequence of each candidate's pending event, 0 = none
  std::array<std::vector<int>, kNumBloodGroups> by_group_;
  BalanceLedger ledger_;
  FutureEventSet fes_;
  SimulationOutput out_;
  std::array<long, kNumAgeGroups> ledger_sums_{};

  // Snapshot after initialize(), used by replay().
  std::vector<Candidate> initial_candidates_;
  BalanceLedger initial_ledger_;
};

/// One complete run: initialize + run.
SimulationOutput run_simulation(std::shared_ptr<const Inputs> inputs, std::uint64_t seed);

/// Independent runs, one per seed, on up to `workers` threads. Output order
/// follows the seed order. Throws std::runtime_error naming the failed run.
std::vector<SimulationOutput> run_batch(std::shared_ptr<const Inputs> inputs,
                                        const std::vector<std::uint64_t>& seeds, int workers = 1);

/// Writes transplants.csv, final_state.csv and (when traced) offers.csv.
void write_run_outputs(const SimulationOutput& out, const std::filesystem::path& dir,
                       bool trace);

}  // namespace etk
