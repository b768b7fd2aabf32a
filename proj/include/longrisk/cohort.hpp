#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "longrisk/image.hpp"
#include "longrisk/rng.hpp"

namespace longrisk {

// Fixed slot order for the four images of a screening visit.
enum ImageSlot : int { kLeftCC = 0, kLeftMLO = 1, kRightCC = 2, kRightMLO = 3 };
extern const std::array<const char*, 4> kSlotNames;

enum class PayloadKind { image, embedding };

/// One screening visit: four views, either raw images or precomputed
/// per-image embedding vectors (all four slots share one kind).
struct VisitRecord {
  std::string subject_id;
  int year = 0;
  PayloadKind kind = PayloadKind::image;
  std::array<Image, 4> images;
  std::array<std::vector<double>, 4> embeddings;
};

struct SubjectTimeline {
  std::string subject_id;
  std::vector<VisitRecord> visits;  // sorted by year, unique years
  std::optional<int> diagnosis_year;
  int last_followup_year = 0;

  /// Throws ValidationError naming the subject on any invariant violation.
  void validate() const;
};

/// One training/evaluation unit anchored at a visit ("now"). History slots
/// cover relative offsets -4..0 (slot i holds offset i-4); labels are
/// cumulative 1..5-year diagnosis indicators with a known/censored mask.
struct TrajectorySample {
  int subject_index = -1;  // position in the cohort the sample came from
  std::string subject_id;
  int now_year = 0;
  std::array<int, 5> history{{-1, -1, -1, -1, -1}};  // visit index or -1
  std::array<int, 5> labels{};
  std::array<bool, 5> known{};

  int now_visit_index() const { return history[4]; }
};

/// Synthetic lesion model. Every subject carries one focal blob on a random
/// side; controls keep a static baseline amplitude while cancer subjects ramp
/// up by growth_per_year over the last growth_years before diagnosis. The
/// baseline spread is wide enough that a single mid-growth frame is ambiguous
/// against high-baseline controls; the across-visit trend is not.
struct SignalParams {
  double lesion_base = 1.0;
  double lesion_base_sd = 0.5;
  double growth_per_year = 0.5;
  int growth_years = 4;
  double frame_jitter = 0.08;        // per-visit amplitude noise
  double pixel_noise = 0.05;
  double blob_sigma_frac = 0.08;     // blob sigma relative to min(h, w)
  double center_jitter_frac = 0.10;  // blob center spread around image center
};

struct CohortConfig {
  std::size_t n_subjects = 300;
  int start_year = 2008;
  int n_screening_years = 9;  // annual attendance slots
  double attendance = 0.7;
  double incidence = 0.3;
  SignalParams signal;
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  double norm_mean = 0.0;
  double norm_std = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static CohortConfig from_json(const nlohmann::json& j);
};

/// Ground truth of the planted signal, for analysis and localization tests.
struct SubjectTruth {
  bool cancer = false;
  int affected_side = 0;  // 0 = left, 1 = right
  double baseline_amp = 0.0;
  double blob_sigma = 0.0;
  std::array<double, 2> center_row{};  // per view (CC, MLO) on affected side
  std::array<double, 2> center_col{};
};

struct GeneratedCohort {
  std::vector<SubjectTimeline> timelines;
  std::vector<SubjectTruth> truth;
  CohortConfig config;
};

GeneratedCohort generate_cohort(const CohortConfig& cfg, Rng& rng);

std::vector<TrajectorySample> expand_trajectories(const SubjectTimeline& timeline,
                                                  int subject_index = -1);
std::vector<TrajectorySample> expand_cohort(
    const std::vector<SubjectTimeline>& timelines);

/// Subject-level train/test split. Returns sorted index lists into
/// `timelines` (or `subset` when given). Stratification splits diagnosed and
/// never-diagnosed subjects separately so their proportions are preserved to
/// within one subject.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_subjects(
    const std::vector<SubjectTimeline>& timelines,
    const std::vector<std::size_t>& subset, double train_ratio, bool stratify,
    Rng& rng);
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_subjects(
    const std::vector<SubjectTimeline>& timelines, double train_ratio,
    bool stratify, Rng& rng);

/// Follow-up structure of a cohort, one count per horizon year 1..5.
struct FollowupSummary {
  std::array<std::size_t, 5> exams_with_followup{};
  std::array<std::size_t, 5> exams_cancer_within{};
  std::size_t n_subjects = 0;
  std::size_t n_exams = 0;
  std::size_t n_cancer_subjects = 0;
};
FollowupSummary summarize_cohort(const std::vector<SubjectTimeline>& timelines);
std::string render_summary(const FollowupSummary& s);

// ---- archive / manifest I/O ----

/// Writes manifest.csv, meta.json, truth.json and one PFM per image under
/// `dir`. Refuses a non-empty existing directory unless force is set.
void save_cohort_archive(const std::string& dir, const GeneratedCohort& cohort,
                         bool force);

/// Parses a manifest (comma-delimited, header row, '#' comments). Image
/// cells are paths relative to the manifest; embedding cells use
/// "vec:v0;v1;...". Validates every timeline invariant.
std::vector<SubjectTimeline> load_manifest(const std::string& path);

void save_manifest(const std::string& path,
                   const std::vector<SubjectTimeline>& timelines,
                   const std::string& image_dir_prefix = "");

struct CohortArchive {
  std::vector<SubjectTimeline> timelines;
  std::vector<SubjectTruth> truth;  // empty when absent
  nlohmann::json meta;
  CohortConfig config;  // parsed from meta when present
};
CohortArchive load_cohort_archive(const std::string& dir);

}  // namespace longrisk
