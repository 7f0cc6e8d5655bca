#include "cbctox/cohort/clinical.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "cbctox/error.hpp"

namespace cbctox::cohort {

bool ToxicityLabels::get(const std::string& name) const {
  if (name == "ng_tube") return ng_tube;
  if (name == "hospitalization") return hospitalization;
  if (name == "radionecrosis") return radionecrosis;
  fail("domain", "unknown toxicity '" + name + "'");
}

const char* to_string(Sex v) { return v == Sex::male ? "M" : "F"; }

const char* to_string(TumorLocation v) {
  switch (v) {
    case TumorLocation::oropharynx: return "oropharynx";
    case TumorLocation::larynx: return "larynx";
    case TumorLocation::nasopharynx: return "nasopharynx";
    case TumorLocation::hypopharynx: return "hypopharynx";
    case TumorLocation::oral_cavity: return "oral cavity";
    case TumorLocation::unknown_primary: return "unknown primary";
  }
  return "?";
}

const char* to_string(Smoker v) {
  switch (v) {
    case Smoker::never: return "never";
    case Smoker::former: return "former";
    case Smoker::current: return "current";
  }
  return "?";
}

const char* to_string(P16 v) {
  switch (v) {
    case P16::positive: return "pos";
    case P16::negative: return "neg";
    case P16::unknown: return "unknown";
  }
  return "?";
}

namespace {

template <class E>
E enum_from(const std::string& s, const std::map<std::string, E>& table,
            const char* what) {
  const auto it = table.find(s);
  require(it != table.end(), "format",
          std::string("unknown ") + what + " value '" + s + "'");
  return it->second;
}

const std::map<std::string, Sex> kSex{{"M", Sex::male}, {"F", Sex::female}};
const std::map<std::string, TumorLocation> kLocation{
    {"oropharynx", TumorLocation::oropharynx},
    {"larynx", TumorLocation::larynx},
    {"nasopharynx", TumorLocation::nasopharynx},
    {"hypopharynx", TumorLocation::hypopharynx},
    {"oral cavity", TumorLocation::oral_cavity},
    {"unknown primary", TumorLocation::unknown_primary}};
const std::map<std::string, Smoker> kSmoker{{"never", Smoker::never},
                                            {"former", Smoker::former},
                                            {"current", Smoker::current}};
const std::map<std::string, P16> kP16{{"pos", P16::positive},
                                      {"neg", P16::negative},
                                      {"unknown", P16::unknown}};

}  // namespace

void PatientRecord::validate() const {
  require(age_years >= 0 && age_years <= 120, "domain",
          id + ": age out of range");
  require(kps >= 0 && kps <= 100, "domain", id + ": KPS out of range");
  require(t_stage >= 0 && t_stage <= 4, "domain", id + ": bad T stage");
  require(n_stage >= 0 && n_stage <= 4, "domain", id + ": bad N stage");
  require(m_stage >= 0 && m_stage <= 2, "domain", id + ": bad M stage");
  int prev = 0;
  for (const auto& im : images) {
    require(im.fraction >= 1 && im.fraction <= 35, "domain",
            id + ": fraction index must be in 1..35");
    require(im.fraction > prev, "domain",
            id + ": fraction indices must be strictly increasing");
    prev = im.fraction;
  }
}

std::array<double, kClinicalVectorWidth> encode_clinical(
    const PatientRecord& rec) {
  rec.validate();
  std::array<double, kClinicalVectorWidth> v{};
  int at = 0;
  v[std::size_t(at++)] = rec.age_years / 100.0;
  v[std::size_t(at + int(rec.sex))] = 1.0;
  at += 2;
  v[std::size_t(at++)] = rec.kps / 100.0;
  v[std::size_t(at + int(rec.location))] = 1.0;
  at += 6;
  v[std::size_t(at + int(rec.smoker))] = 1.0;
  at += 3;
  v[std::size_t(at + (rec.alcohol ? 1 : 0))] = 1.0;
  at += 2;
  v[std::size_t(at + rec.t_stage)] = 1.0;
  at += 5;
  v[std::size_t(at + rec.n_stage)] = 1.0;
  at += 5;
  v[std::size_t(at + rec.m_stage)] = 1.0;
  at += 3;
  v[std::size_t(at + int(rec.p16))] = 1.0;
  at += 3;
  v[std::size_t(at + (rec.surgery ? 1 : 0))] = 1.0;
  at += 2;
  v[std::size_t(at + (rec.chemo ? 1 : 0))] = 1.0;
  at += 2;
  require(at == kClinicalVectorWidth, "domain", "encoding width drifted");
  return v;
}

std::vector<PatientRecord> exclusion_filter(
    const std::vector<PatientRecord>& records) {
  std::vector<PatientRecord> out;
  for (const auto& r : records)
    if (!r.feeding_tube_at_onset) out.push_back(r);
  return out;
}

namespace {

nlohmann::json record_to_json(const PatientRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["age_years"] = r.age_years;
  j["sex"] = to_string(r.sex);
  j["kps"] = r.kps;
  j["tumor_location"] = to_string(r.location);
  j["smoker"] = to_string(r.smoker);
  j["alcohol"] = r.alcohol ? "yes" : "no";
  static const char* kT[] = {"T1", "T2", "T3", "T4", "Tx"};
  static const char* kN[] = {"N0", "N1", "N2", "N3", "Nx"};
  static const char* kM[] = {"M0", "M1", "Mx"};
  j["t_stage"] = kT[r.t_stage];
  j["n_stage"] = kN[r.n_stage];
  j["m_stage"] = kM[r.m_stage];
  j["p16"] = to_string(r.p16);
  j["surgery"] = r.surgery;
  j["chemo"] = r.chemo;
  j["feeding_tube_at_onset"] = r.feeding_tube_at_onset;
  j["labels"] = {{"ng_tube", r.labels.ng_tube},
                 {"hospitalization", r.labels.hospitalization},
                 {"radionecrosis", r.labels.radionecrosis}};
  j["pct"] = r.pct_path;
  nlohmann::json images = nlohmann::json::array();
  for (const auto& im : r.images) {
    nlohmann::json e{{"fraction", im.fraction}, {"cbct", im.cbct_path}};
    if (!im.dvf_path.empty()) e["dvf"] = im.dvf_path;
    images.push_back(e);
  }
  j["images"] = images;
  if (!r.landmarks_path.empty()) j["landmarks"] = r.landmarks_path;
  return j;
}

int stage_index(const std::string& s, const char* const* names, int count,
                const char* what) {
  for (int i = 0; i < count; ++i)
    if (s == names[i]) return i;
  fail("format", std::string("unknown ") + what + " '" + s + "'");
}

PatientRecord record_from_json(const nlohmann::json& j) {
  PatientRecord r;
  r.id = j.at("id").get<std::string>();
  r.age_years = j.at("age_years").get<double>();
  r.sex = enum_from(j.at("sex").get<std::string>(), kSex, "sex");
  r.kps = j.at("kps").get<double>();
  r.location = enum_from(j.at("tumor_location").get<std::string>(), kLocation,
                         "tumor_location");
  r.smoker = enum_from(j.at("smoker").get<std::string>(), kSmoker, "smoker");
  const std::string alc = j.at("alcohol").get<std::string>();
  require(alc == "yes" || alc == "no", "format", "bad alcohol value");
  r.alcohol = alc == "yes";
  static const char* kT[] = {"T1", "T2", "T3", "T4", "Tx"};
  static const char* kN[] = {"N0", "N1", "N2", "N3", "Nx"};
  static const char* kM[] = {"M0", "M1", "Mx"};
  r.t_stage = stage_index(j.at("t_stage").get<std::string>(), kT, 5, "T stage");
  r.n_stage = stage_index(j.at("n_stage").get<std::string>(), kN, 5, "N stage");
  r.m_stage = stage_index(j.at("m_stage").get<std::string>(), kM, 3, "M stage");
  r.p16 = enum_from(j.at("p16").get<std::string>(), kP16, "p16");
  r.surgery = j.at("surgery").get<bool>();
  r.chemo = j.at("chemo").get<bool>();
  r.feeding_tube_at_onset = j.at("feeding_tube_at_onset").get<bool>();
  const auto& lb = j.at("labels");
  r.labels.ng_tube = lb.at("ng_tube").get<bool>();
  r.labels.hospitalization = lb.at("hospitalization").get<bool>();
  r.labels.radionecrosis = lb.at("radionecrosis").get<bool>();
  r.pct_path = j.at("pct").get<std::string>();
  for (const auto& e : j.at("images")) {
    ImageRef im;
    im.fraction = e.at("fraction").get<int>();
    im.cbct_path = e.at("cbct").get<std::string>();
    if (e.contains("dvf")) im.dvf_path = e.at("dvf").get<std::string>();
    r.images.push_back(im);
  }
  if (j.contains("landmarks"))
    r.landmarks_path = j.at("landmarks").get<std::string>();
  r.validate();
  return r;
}

}  // namespace

void write_manifest(const std::vector<PatientRecord>& records,
                    const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) arr.push_back(record_to_json(r));
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), "io", "cannot write manifest " + path.string());
  f << arr.dump(2) << "\n";
  require(f.good(), "io", "short write to " + path.string());
}

std::vector<PatientRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(f.good(), "io", "cannot open manifest " + path.string());
  nlohmann::json arr;
  try {
    f >> arr;
  } catch (const nlohmann::json::exception& e) {
    fail("format", "malformed manifest " + path.string() + ": " + e.what());
  }
  std::vector<PatientRecord> out;
  for (const auto& j : arr) out.push_back(record_from_json(j));
  return out;
}

}  // namespace cbctox::cohort
