#pragma once

// Clinical data model: patient records, the fixed one-hot encoding (width
// 35), the feeding-tube exclusion rule and cohort manifest (de)serialization.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cbctox::cohort {

enum class Sex { male, female };
enum class TumorLocation {
  oropharynx,
  larynx,
  nasopharynx,
  hypopharynx,
  oral_cavity,
  unknown_primary
};
enum class Smoker { never, former, current };
enum class P16 { positive, negative, unknown };

struct ToxicityLabels {
  bool ng_tube = false;
  bool hospitalization = false;
  bool radionecrosis = false;

  bool get(const std::string& name) const;
};

struct ImageRef {
  int fraction = 0;       // 1..35, strictly increasing within a record
  std::string cbct_path;  // relative v3j path
  std::string dvf_path;   // composed DVF for this fraction (optional)
};

struct PatientRecord {
  std::string id;
  double age_years = 0;
  Sex sex = Sex::male;
  double kps = 0;  // 0..100
  TumorLocation location = TumorLocation::oropharynx;
  Smoker smoker = Smoker::never;
  bool alcohol = false;
  int t_stage = 0;  // 0..3 = T1..T4, 4 = Tx
  int n_stage = 0;  // 0..3 = N0..N3, 4 = Nx
  int m_stage = 0;  // 0 = M0, 1 = M1, 2 = Mx
  P16 p16 = P16::unknown;
  bool surgery = false;
  bool chemo = false;
  bool feeding_tube_at_onset = false;
  ToxicityLabels labels;

  std::string pct_path;
  std::vector<ImageRef> images;
  std::string landmarks_path;

  void validate() const;
};

inline constexpr int kClinicalVectorWidth = 35;

// age/100 | sex(2) | kps/100 | location(6) | smoker(3) | alcohol(2) |
// T(5) | N(5) | M(3) | p16(3) | surgery(2) | chemo(2)
std::array<double, kClinicalVectorWidth> encode_clinical(
    const PatientRecord& rec);

// Drops records with a feeding tube at therapy onset; order preserved.
std::vector<PatientRecord> exclusion_filter(
    const std::vector<PatientRecord>& records);

// manifest: JSON array of records with relative paths
void write_manifest(const std::vector<PatientRecord>& records,
                    const std::filesystem::path& path);
std::vector<PatientRecord> read_manifest(const std::filesystem::path& path);

const char* to_string(Sex v);
const char* to_string(TumorLocation v);
const char* to_string(Smoker v);
const char* to_string(P16 v);

}  // namespace cbctox::cohort
