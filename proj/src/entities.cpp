#include "etk/entities.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <sstream>

namespace etk {

BloodGroup parse_blood_group(std::string_view text) {
  if (text == "A") return BloodGroup::A;
  if (text == "B") return BloodGroup::B;
  if (text == "AB") return BloodGroup::AB;
  if (text == "O" || text == "0") return BloodGroup::O;
  throw std::invalid_argument("unknown blood group '" + std::string(text) + "'");
}

std::string_view to_string(BloodGroup bg) {
  switch (bg) {
    case BloodGroup::A: return "A";
    case BloodGroup::B: return "B";
    case BloodGroup::AB: return "AB";
    case BloodGroup::O: return "O";
  }
  return "?";
}

Urgency parse_urgency(std::string_view text) {
  if (text == "T") return Urgency::T;
  if (text == "NT") return Urgency::NT;
  if (text == "HU") return Urgency::HU;
  if (text == "I") return Urgency::I;
  if (text == "R") return Urgency::R;
  if (text == "D") return Urgency::D;
  if (text == "FU") return Urgency::FU;
  throw std::invalid_argument("unknown urgency status '" + std::string(text) + "'");
}

std::string_view to_string(Urgency u) {
  switch (u) {
    case Urgency::T: return "T";
    case Urgency::NT: return "NT";
    case Urgency::HU: return "HU";
    case Urgency::I: return "I";
    case Urgency::R: return "R";
    case Urgency::D: return "D";
    case Urgency::FU: return "FU";
  }
  return "?";
}

std::string_view to_string(Program p) { return p == Program::ETKAS ? "ETKAS" : "ESP"; }

GermanChoice parse_german_choice(std::string_view text) {
  if (text.empty() || text == "none") return GermanChoice::None;
  if (text == "ETKAS") return GermanChoice::ETKAS;
  if (text == "ESP") return GermanChoice::ESP;
  throw std::invalid_argument("unknown program choice '" + std::string(text) + "'");
}

namespace {

std::string_view choice_string(GermanChoice c) {
  switch (c) {
    case GermanChoice::None: return "";
    case GermanChoice::ETKAS: return "ETKAS";
    case GermanChoice::ESP: return "ESP";
  }
  return "";
}

int parse_int(std::string_view text, std::string_view what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(std::string(text), &pos);
    if (pos != text.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string(what) + ": not an integer: '" + std::string(text) +
                                "'");
  }
}

bool parse_bool(std::string_view text, std::string_view what) {
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no" || text.empty()) return false;
  throw std::invalid_argument(std::string(what) + ": not a flag: '" + std::string(text) + "'");
}

}  // namespace

AllocationProfile AllocationProfile::parse(std::string_view text) {
  AllocationProfile p;
  for (const auto& item : split(text, ';')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("profile item without '=': " + item);
    const auto key = item.substr(0, eq);
    const auto val = item.substr(eq + 1);
    if (key == "min") p.min_donor_age = parse_int(val, key);
    else if (key == "max") p.max_donor_age = parse_int(val, key);
    else if (key == "dcd") p.accept_dcd = parse_bool(val, key);
    else if (key == "hcv") p.accept_hcv = parse_bool(val, key);
    else if (key == "hbv") p.accept_hbv = parse_bool(val, key);
    else if (key == "ext") p.accept_extended = parse_bool(val, key);
    else throw std::invalid_argument("unknown profile key '" + key + "'");
  }
  return p;
}

std::string AllocationProfile::to_string() const {
  return "min=" + std::to_string(min_donor_age) + ";max=" + std::to_string(max_donor_age) +
         ";dcd=" + (accept_dcd ? "1" : "0") + ";hcv=" + (accept_hcv ? "1" : "0") +
         ";hbv=" + (accept_hbv ? "1" : "0") + ";ext=" + (accept_extended ? "1" : "0");
}

std::vector<MismatchPattern> parse_mismatch_criteria(std::string_view text) {
  std::vector<MismatchPattern> out;
  std::string normalized(text);
  std::replace(normalized.begin(), normalized.end(), ';', ' ');
  std::istringstream in(normalized);
  std::string tok;
  auto digit = [&](char ch) -> std::int8_t {
    if (ch == '*') return -1;
    if (ch >= '0' && ch <= '2') return static_cast<std::int8_t>(ch - '0');
    throw std::invalid_argument("bad mismatch pattern '" + tok + "'");
  };
  while (in >> tok) {
    MismatchPattern p;
    if (tok.size() == 3 && tok.find_first_not_of("012*") == std::string::npos) {
      p = {digit(tok[0]), digit(tok[1]), digit(tok[2])};
    } else if (tok.size() >= 2 && tok[0] >= '0' && tok[0] <= '2') {
      const auto locus = tok.substr(1);
      const auto n = digit(tok[0]);
      if (locus == "A") p.a = n;
      else if (locus == "B") p.b = n;
      else if (locus == "DR") p.dr = n;
      else throw std::invalid_argument("bad mismatch pattern '" + tok + "'");
    } else {
      throw std::invalid_argument("bad mismatch pattern '" + tok + "'");
    }
    out.push_back(p);
  }
  return out;
}

std::string to_string(const std::vector<MismatchPattern>& criteria) {
  std::string out;
  auto ch = [](std::int8_t v) { return v < 0 ? '*' : static_cast<char>('0' + v); };
  for (const auto& p : criteria) {
    if (!out.empty()) out += ' ';
    out += ch(p.a);
    out += ch(p.b);
    out += ch(p.dr);
  }
  return out;
}

// ---------------------------------------------------------------------------

CenterRegistry CenterRegistry::from_table(const Table& table) {
  table.require_columns({"center", "country", "region"});
  CenterRegistry reg;
  for (const auto& row : table.rows()) {
    if (reg.find(row.at("center"))) throw row.error("duplicate center '" + row.at("center") + "'");
    reg.add({row.at("center"), row.at("country"), row.at("region"),
             row.opt("esp_subregion").value_or(row.at("region"))});
  }
  return reg;
}

CenterRegistry CenterRegistry::load(const std::filesystem::path& path) {
  return from_table(Table::read(path));
}

int CenterRegistry::add(Center c) {
  const int i = static_cast<int>(centers_.size());
  index_.emplace(c.code, i);
  centers_.push_back(std::move(c));
  return i;
}

std::optional<int> CenterRegistry::find(std::string_view code) const {
  const auto it = index_.find(std::string(code));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int CenterRegistry::index(std::string_view code) const {
  if (auto i = find(code)) return *i;
  throw InputError("unknown center '" + std::string(code) + "'");
}

std::vector<std::string> CenterRegistry::countries() const {
  std::set<std::string> s;
  for (const auto& c : centers_) s.insert(c.country);
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------

UpdateType parse_update_type(std::string_view text) {
  if (text == "STATUS") return UpdateType::Status;
  if (text == "PROFILE") return UpdateType::Profile;
  if (text == "UNACC") return UpdateType::Unacceptable;
  if (text == "SCREENING") return UpdateType::Screening;
  if (text == "DIALYSIS") return UpdateType::Dialysis;
  if (text == "ESP_CHOICE") return UpdateType::EspChoice;
  if (text == "AM") return UpdateType::Am;
  if (text == "MMCRIT") return UpdateType::MmCriteria;
  if (text == "KAOO") return UpdateType::Kaoo;
  throw std::invalid_argument("unknown update type '" + std::string(text) + "'");
}

std::string_view to_string(UpdateType t) {
  switch (t) {
    case UpdateType::Status: return "STATUS";
    case UpdateType::Profile: return "PROFILE";
    case UpdateType::Unacceptable: return "UNACC";
    case UpdateType::Screening: return "SCREENING";
    case UpdateType::Dialysis: return "DIALYSIS";
    case UpdateType::EspChoice: return "ESP_CHOICE";
    case UpdateType::Am: return "AM";
    case UpdateType::MmCriteria: return "MMCRIT";
    case UpdateType::Kaoo: return "KAOO";
  }
  return "?";
}

void apply_update(Candidate& c, const StatusUpdate& u, const HlaDictionary& dict) {
  switch (u.type) {
    case UpdateType::Status: c.status = parse_urgency(u.value); break;
    case UpdateType::Profile: c.profile = AllocationProfile::parse(u.value); break;
    case UpdateType::Unacceptable: c.unacceptables = UnacceptableSet::parse(dict, u.value); break;
    case UpdateType::Screening:
      c.last_screening = u.value.empty() ? u.date : Date::parse(u.value);
      break;
    case UpdateType::Dialysis:
      if (u.value.empty()) c.dialysis_start.reset();
      else c.dialysis_start = Date::parse(u.value);
      break;
    case UpdateType::EspChoice: c.esp_choice = parse_german_choice(u.value); break;
    case UpdateType::Am: c.am = parse_bool(u.value, "AM"); break;
    case UpdateType::MmCriteria: c.mm_criteria = parse_mismatch_criteria(u.value); break;
    case UpdateType::Kaoo: c.kaoo = parse_bool(u.value, "KAOO"); break;
  }
}

namespace {

HlaTyping read_typing(const TableRow& row, const HlaDictionary& dict) {
  HlaTyping t;
  const std::array<std::pair<Locus, std::string_view>, 3> cols = {
      std::pair{Locus::A, std::string_view("a")}, std::pair{Locus::B, std::string_view("b")},
      std::pair{Locus::DR, std::string_view("dr")}};
  for (const auto& [locus, prefix] : cols) {
    const auto first = row.opt(std::string(prefix) + "1");
    if (!first) continue;
    t.set(dict, locus, *first, row.opt(std::string(prefix) + "2").value_or(""));
  }
  return t;
}

std::optional<Date> opt_date(const TableRow& row, std::string_view col) {
  if (auto v = row.opt(col)) return Date::parse(*v);
  return std::nullopt;
}

bool opt_flag(const TableRow& row, std::string_view col) {
  return row.opt(col) ? row.flag(col) : false;
}

std::string typing_cells(const HlaTyping& t, const HlaDictionary& dict, Locus l) {
  const auto ids = t.at(l).ids();
  std::string out = ids.empty() ? "" : dict.code(ids[0]);
  out += ',';
  if (ids.size() > 1) out += dict.code(ids[1]);
  return out;
}

std::string date_cell(const std::optional<Date>& d) { return d ? d->to_string() : ""; }

}  // namespace

std::vector<Candidate> load_candidates(const Table& table, const HlaDictionary& dict,
                                       const CenterRegistry& centers) {
  table.require_columns({"id", "center", "blood_group", "dob", "registration_date"});
  std::vector<Candidate> out;
  std::set<std::string> ids;
  for (const auto& row : table.rows()) {
    try {
      Candidate c;
      c.id = row.at("id");
      if (!ids.insert(c.id).second) throw row.error("duplicate candidate id '" + c.id + "'");
      c.patient_id = row.opt("patient_id").value_or(c.id);
      c.center = centers.index(row.at("center"));
      c.blood_group = parse_blood_group(row.at("blood_group"));
      c.dob = Date::parse(row.at("dob"));
      c.hla = read_typing(row, dict);
      c.registration = Date::parse(row.at("registration_date"));
      c.prior_tx = opt_flag(row, "prior_tx");
      c.previous_tx = opt_date(row, "previous_tx");
      if (c.previous_tx) c.prior_tx = true;
      c.synthetic = opt_flag(row, "synthetic");
      if (row.opt("mmp")) c.mmp_override = row.number("mmp");
      c.status = parse_urgency(row.opt("status").value_or("T"));
      c.unacceptables = UnacceptableSet::parse(dict, row.opt("unacceptables").value_or(""));
      c.profile = AllocationProfile::parse(row.opt("profile").value_or(""));
      c.mm_criteria = parse_mismatch_criteria(row.opt("mm_criteria").value_or(""));
      c.dialysis_start = opt_date(row, "dialysis_start");
      c.last_screening = opt_date(row, "last_screening");
      c.am = opt_flag(row, "am");
      c.esp_choice = parse_german_choice(row.opt("esp_choice").value_or(""));
      c.esp_opt_in = opt_flag(row, "esp_opt_in");
      c.kaoo = opt_flag(row, "kaoo");
      out.push_back(std::move(c));
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw row.error(e.what());
    }
  }
  return out;
}

void attach_status_updates(const Table& table, std::vector<Candidate>& candidates,
                           const HlaDictionary& dict) {
  table.require_columns({"candidate_id", "date", "type"});
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < candidates.size(); ++i) index.emplace(candidates[i].id, i);
  for (const auto& row : table.rows()) {
    const auto it = index.find(row.at("candidate_id"));
    if (it == index.end()) throw row.error("unknown candidate '" + row.at("candidate_id") + "'");
    try {
      StatusUpdate u{Date::parse(row.at("date")), parse_update_type(row.at("type")),
                     row.opt("value").value_or("")};
      // Validate the payload now so malformed rows fail with their location.
      Candidate probe;
      apply_update(probe, u, dict);
      candidates[it->second].updates.push_back(std::move(u));
    } catch (const std::exception& e) {
      throw row.error(e.what());
    }
  }
  for (auto& c : candidates) {
    std::stable_sort(c.updates.begin(), c.updates.end(),
                     [](const StatusUpdate& a, const StatusUpdate& b) { return a.date < b.date; });
  }
}

std::vector<Donor> load_donors(const Table& table, const HlaDictionary& dict,
                               const CenterRegistry& centers) {
  table.require_columns({"id", "date", "age", "blood_group", "center"});
  std::vector<Donor> out;
  for (const auto& row : table.rows()) {
    try {
      Donor d;
      d.id = row.at("id");
      d.date = Date::parse(row.at("date"));
      d.age = static_cast<int>(row.integer("age"));
      if (d.age < 0) throw std::invalid_argument("negative donor age");
      d.blood_group = parse_blood_group(row.at("blood_group"));
      d.hla = read_typing(row, dict);
      d.center = centers.index(row.at("center"));
      d.death_cause = row.opt("death_cause").value_or("");
      d.dcd = opt_flag(row, "dcd");
      if (row.opt("creatinine")) d.creatinine = row.number("creatinine");
      d.diabetes = opt_flag(row, "diabetes");
      d.smoking = opt_flag(row, "smoking");
      d.proteinuria = opt_flag(row, "proteinuria");
      d.hypertension = opt_flag(row, "hypertension");
      d.malignancy = opt_flag(row, "malignancy");
      d.extended_criteria = opt_flag(row, "extended");
      d.hcv = opt_flag(row, "hcv");
      d.hbv = opt_flag(row, "hbv");
      d.kidneys = row.opt("kidneys") ? static_cast<int>(row.integer("kidneys")) : 2;
      if (d.kidneys < 1 || d.kidneys > 2) throw std::invalid_argument("kidneys must be 1 or 2");
      out.push_back(std::move(d));
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw row.error(e.what());
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Donor& a, const Donor& b) { return a.date < b.date; });
  return out;
}

void write_candidates(std::ostream& out, const std::vector<Candidate>& candidates,
                      const HlaDictionary& dict, const CenterRegistry& centers) {
  out << "id,patient_id,center,blood_group,dob,a1,a2,b1,b2,dr1,dr2,registration_date,status,"
         "unacceptables,dialysis_start,prior_tx,previous_tx,profile,mm_criteria,last_screening,"
         "am,esp_choice,esp_opt_in,kaoo\n";
  for (const auto& c : candidates) {
    out << c.id << ',' << c.patient_id << ',' << centers.at(c.center).code << ','
        << to_string(c.blood_group) << ',' << c.dob.to_string() << ','
        << typing_cells(c.hla, dict, Locus::A) << ',' << typing_cells(c.hla, dict, Locus::B) << ','
        << typing_cells(c.hla, dict, Locus::DR) << ',' << c.registration.to_string() << ','
        << to_string(c.status) << ',' << c.unacceptables.to_string(dict) << ','
        << date_cell(c.dialysis_start) << ',' << (c.prior_tx ? 1 : 0) << ','
        << date_cell(c.previous_tx) << ',' << c.profile.to_string() << ','
        << to_string(c.mm_criteria) << ',' << date_cell(c.last_screening) << ','
        << (c.am ? 1 : 0) << ',' << choice_string(c.esp_choice) << ',' << (c.esp_opt_in ? 1 : 0)
        << ',' << (c.kaoo ? 1 : 0) << '\n';
  }
}

void write_status_updates(std::ostream& out, const std::vector<Candidate>& candidates) {
  out << "candidate_id,date,type,value\n";
  for (const auto& c : candidates) {
    for (const auto& u : c.updates) {
      out << c.id << ',' << u.date.to_string() << ',' << to_string(u.type) << ',' << u.value
          << '\n';
    }
  }
}

void write_donors(std::ostream& out, const std::vector<Donor>& donors, const HlaDictionary& dict,
                  const CenterRegistry& centers) {
  out << "id,date,age,blood_group,a1,a2,b1,b2,dr1,dr2,center,death_cause,dcd,creatinine,"
         "diabetes,smoking,proteinuria,hypertension,malignancy,extended,hcv,hbv,kidneys\n";
  for (const auto& d : donors) {
    out << d.id << ',' << d.date.to_string() << ',' << d.age << ',' << to_string(d.blood_group)
        << ',' << typing_cells(d.hla, dict, Locus::A) << ','
        << typing_cells(d.hla, dict, Locus::B) << ',' << typing_cells(d.hla, dict, Locus::DR)
        << ',' << centers.at(d.center).code << ',' << d.death_cause << ',' << (d.dcd ? 1 : 0)
        << ',' << format_number(d.creatinine, 3) << ',' << (d.diabetes ? 1 : 0) << ','
        << (d.smoking ? 1 : 0) << ',' << (d.proteinuria ? 1 : 0) << ','
        << (d.hypertension ? 1 : 0) << ',' << (d.malignancy ? 1 : 0) << ','
        << (d.extended_criteria ? 1 : 0) << ',' << (d.hcv ? 1 : 0) << ',' << (d.hbv ? 1 : 0)
        << ',' << d.kidneys << '\n';
  }
}

}  // namespace etk
