#include "longrisk/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "longrisk/errors.hpp"
#include "longrisk/version.hpp"

namespace fs = std::filesystem;

namespace longrisk {

const std::array<const char*, 4> kSlotNames = {"L_CC", "L_MLO", "R_CC", "R_MLO"};

void SubjectTimeline::validate() const {
  const std::string who = "subject '" + subject_id + "': ";
  if (visits.empty()) throw ValidationError(who + "no visits");
  int prev_year = visits.front().year - 1;
  const PayloadKind kind = visits.front().kind;
  std::size_t img_h = 0, img_w = 0;
  for (const auto& v : visits) {
    if (v.year <= prev_year) {
      throw ValidationError(who + "visit years must be strictly increasing, saw " +
                            std::to_string(v.year) + " after " +
                            std::to_string(prev_year));
    }
    prev_year = v.year;
    if (v.kind != kind) {
      throw ValidationError(who + "mixed image/embedding payloads");
    }
    if (v.kind == PayloadKind::image) {
      for (const auto& img : v.images) {
        if (img.empty()) throw ValidationError(who + "missing image payload");
        if (img_h == 0) {
          img_h = img.height;
          img_w = img.width;
        } else if (img.height != img_h || img.width != img_w) {
          throw ValidationError(who + "image resolutions differ within timeline");
        }
      }
    } else {
      const std::size_t d = v.embeddings[0].size();
      for (const auto& e : v.embeddings) {
        if (e.empty() || e.size() != d) {
          throw ValidationError(who + "embedding widths differ or are empty");
        }
      }
    }
  }
  if (diagnosis_year && *diagnosis_year < visits.front().year) {
    throw ValidationError(who + "diagnosis year " + std::to_string(*diagnosis_year) +
                          " precedes first visit " +
                          std::to_string(visits.front().year));
  }
  if (last_followup_year < visits.back().year) {
    throw ValidationError(who + "last follow-up year " +
                          std::to_string(last_followup_year) +
                          " precedes last visit " +
                          std::to_string(visits.back().year));
  }
}

void CohortConfig::validate() const {
  if (n_subjects == 0) throw ConfigError("cohort: n_subjects must be positive");
  if (n_screening_years < 1 || n_screening_years > 9) {
    throw ConfigError("cohort: n_screening_years must be in [1, 9]");
  }
  if (attendance < 0.0 || attendance > 1.0) {
    throw ConfigError("cohort: attendance must be a probability in [0, 1]");
  }
  if (incidence < 0.0 || incidence > 1.0) {
    throw ConfigError("cohort: incidence must be a probability in [0, 1]");
  }
  if (image_height < 8 || image_width < 8) {
    throw ConfigError("cohort: image resolution must be at least 8x8");
  }
  if (norm_std <= 0.0) throw ConfigError("cohort: norm_std must be positive");
  if (signal.growth_years < 0) throw ConfigError("cohort: growth_years must be >= 0");
}

nlohmann::json CohortConfig::to_json() const {
  return nlohmann::json{
      {"n_subjects", n_subjects},
      {"start_year", start_year},
      {"n_screening_years", n_screening_years},
      {"attendance", attendance},
      {"incidence", incidence},
      {"image_height", image_height},
      {"image_width", image_width},
      {"norm_mean", norm_mean},
      {"norm_std", norm_std},
      {"seed", seed},
      {"signal",
       {{"lesion_base", signal.lesion_base},
        {"lesion_base_sd", signal.lesion_base_sd},
        {"growth_per_year", signal.growth_per_year},
        {"growth_years", signal.growth_years},
        {"frame_jitter", signal.frame_jitter},
        {"pixel_noise", signal.pixel_noise},
        {"blob_sigma_frac", signal.blob_sigma_frac},
        {"center_jitter_frac", signal.center_jitter_frac}}}};
}

CohortConfig CohortConfig::from_json(const nlohmann::json& j) {
  CohortConfig c;
  c.n_subjects = j.value("n_subjects", c.n_subjects);
  c.start_year = j.value("start_year", c.start_year);
  c.n_screening_years = j.value("n_screening_years", c.n_screening_years);
  c.attendance = j.value("attendance", c.attendance);
  c.incidence = j.value("incidence", c.incidence);
  c.image_height = j.value("image_height", c.image_height);
  c.image_width = j.value("image_width", c.image_width);
  c.norm_mean = j.value("norm_mean", c.norm_mean);
  c.norm_std = j.value("norm_std", c.norm_std);
  c.seed = j.value("seed", c.seed);
  if (j.contains("signal")) {
    const auto& s = j.at("signal");
    c.signal.lesion_base = s.value("lesion_base", c.signal.lesion_base);
    c.signal.lesion_base_sd = s.value("lesion_base_sd", c.signal.lesion_base_sd);
    c.signal.growth_per_year = s.value("growth_per_year", c.signal.growth_per_year);
    c.signal.growth_years = s.value("growth_years", c.signal.growth_years);
    c.signal.frame_jitter = s.value("frame_jitter", c.signal.frame_jitter);
    c.signal.pixel_noise = s.value("pixel_noise", c.signal.pixel_noise);
    c.signal.blob_sigma_frac = s.value("blob_sigma_frac", c.signal.blob_sigma_frac);
    c.signal.center_jitter_frac =
        s.value("center_jitter_frac", c.signal.center_jitter_frac);
  }
  return c;
}

namespace {

std::string subject_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%04zu", i);
  return buf;
}

void add_blob(Image& img, double amp, double cr, double cc, double sigma) {
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      const double dr = static_cast<double>(r) - cr;
      const double dc = static_cast<double>(c) - cc;
      img.at(r, c) += amp * std::exp(-(dr * dr + dc * dc) * inv2s2);
    }
  }
}

}  // namespace

GeneratedCohort generate_cohort(const CohortConfig& cfg, Rng& rng) {
  cfg.validate();
  GeneratedCohort out;
  out.config = cfg;
  out.timelines.reserve(cfg.n_subjects);
  out.truth.reserve(cfg.n_subjects);

  const auto& sig = cfg.signal;
  const double h = static_cast<double>(cfg.image_height);
  const double w = static_cast<double>(cfg.image_width);
  const double sigma = sig.blob_sigma_frac * std::min(h, w);

  for (std::size_t si = 0; si < cfg.n_subjects; ++si) {
    Rng sub = rng.child(0x5347u ^ (si * 2 + 1));
    SubjectTimeline tl;
    tl.subject_id = subject_name(si);

    // Annual attendance over the screening window; at least one visit.
    std::vector<int> years;
    for (int y = 0; y < cfg.n_screening_years; ++y) {
      if (sub.uniform() < cfg.attendance) years.push_back(cfg.start_year + y);
    }
    if (years.empty()) {
      years.push_back(cfg.start_year +
                      static_cast<int>(sub.below(cfg.n_screening_years)));
    }

    const bool cancer = sub.uniform() < cfg.incidence;
    SubjectTruth truth;
    truth.cancer = cancer;
    truth.affected_side = static_cast<int>(sub.below(2));
    truth.baseline_amp = std::max(0.05, sub.normal(sig.lesion_base, sig.lesion_base_sd));
    truth.blob_sigma = sigma;
    for (int view = 0; view < 2; ++view) {
      truth.center_row[view] =
          h * (0.5 + sig.center_jitter_frac * (sub.uniform() * 2.0 - 1.0));
      truth.center_col[view] =
          w * (0.5 + sig.center_jitter_frac * (sub.uniform() * 2.0 - 1.0));
    }

    // Diagnosis lands at or after the last screen so the screening record is
    // never truncated; distance to the last visit spans 0..growth_years+1.
    if (cancer) {
      tl.diagnosis_year = years.back() + static_cast<int>(
          sub.below(static_cast<std::uint64_t>(sig.growth_years) + 2));
    }

    for (int year : years) {
      VisitRecord visit;
      visit.subject_id = tl.subject_id;
      visit.year = year;
      visit.kind = PayloadKind::image;
      double amp = truth.baseline_amp;
      if (cancer) {
        const int to_diag = *tl.diagnosis_year - year;
        amp += sig.growth_per_year *
               std::max(0, sig.growth_years - to_diag);
      }
      for (int slot = 0; slot < 4; ++slot) {
        Image img(cfg.image_height, cfg.image_width);
        for (auto& px : img.px) px = sub.normal(0.0, sig.pixel_noise);
        const int side = slot < 2 ? 0 : 1;
        if (side == truth.affected_side) {
          const int view = slot % 2;  // CC or MLO
          const double frame_amp = amp + sub.normal(0.0, sig.frame_jitter);
          add_blob(img, frame_amp, truth.center_row[view], truth.center_col[view],
                   sigma);
        }
        quantize_to_float32(img);
        visit.images[slot] = std::move(img);
      }
      tl.visits.push_back(std::move(visit));
    }

    if (cancer) {
      tl.last_followup_year = std::max(*tl.diagnosis_year, tl.visits.back().year);
    } else {
      tl.last_followup_year =
          tl.visits.back().year + static_cast<int>(sub.below(7));
    }
    tl.validate();
    out.timelines.push_back(std::move(tl));
    out.truth.push_back(truth);
  }
  return out;
}

std::vector<TrajectorySample> expand_trajectories(const SubjectTimeline& timeline,
                                                  int subject_index) {
  std::vector<TrajectorySample> samples;
  samples.reserve(timeline.visits.size());
  for (std::size_t vi = 0; vi < timeline.visits.size(); ++vi) {
    TrajectorySample s;
    s.subject_index = subject_index;
    s.subject_id = timeline.subject_id;
    s.now_year = timeline.visits[vi].year;
    for (std::size_t vj = 0; vj <= vi; ++vj) {
      const int offset = timeline.visits[vj].year - s.now_year;  // -4..0 kept
      if (offset >= -4 && offset <= 0) s.history[offset + 4] = static_cast<int>(vj);
    }
    for (int k = 1; k <= 5; ++k) {
      const bool diagnosed_by_k =
          timeline.diagnosis_year && *timeline.diagnosis_year <= s.now_year + k;
      s.labels[k - 1] = diagnosed_by_k ? 1 : 0;
      s.known[k - 1] =
          diagnosed_by_k || timeline.last_followup_year >= s.now_year + k;
    }
    samples.push_back(s);
  }
  return samples;
}

std::vector<TrajectorySample> expand_cohort(
    const std::vector<SubjectTimeline>& timelines) {
  std::vector<TrajectorySample> all;
  for (std::size_t i = 0; i < timelines.size(); ++i) {
    auto s = expand_trajectories(timelines[i], static_cast<int>(i));
    all.insert(all.end(), s.begin(), s.end());
  }
  return all;
}

namespace {

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_group(
    std::vector<std::size_t> group, double train_ratio, Rng& rng) {
  rng.shuffle(group);
  const double want = static_cast<double>(group.size()) * (1.0 - train_ratio);
  const std::size_t n_test = static_cast<std::size_t>(std::floor(want + 0.5));
  std::vector<std::size_t> test(group.begin(), group.begin() + n_test);
  std::vector<std::size_t> train(group.begin() + n_test, group.end());
  return {std::move(train), std::move(test)};
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_subjects(
    const std::vector<SubjectTimeline>& timelines,
    const std::vector<std::size_t>& subset, double train_ratio, bool stratify,
    Rng& rng) {
  if (train_ratio <= 0.0 || train_ratio >= 1.0) {
    throw SplitError("train ratio must be strictly between 0 and 1, got " +
                     std::to_string(train_ratio));
  }
  std::vector<std::size_t> train, test;
  if (stratify) {
    std::vector<std::size_t> cases, controls;
    for (auto i : subset) {
      (timelines[i].diagnosis_year ? cases : controls).push_back(i);
    }
    for (const auto* group : {&cases, &controls}) {
      if (!group->empty() && group->size() < 2) {
        throw SplitError("stratum with " + std::to_string(group->size()) +
                         " subject(s); need at least 2 per non-empty stratum");
      }
    }
    auto [tr_c, te_c] = split_group(cases, train_ratio, rng);
    auto [tr_h, te_h] = split_group(controls, train_ratio, rng);
    train = std::move(tr_c);
    train.insert(train.end(), tr_h.begin(), tr_h.end());
    test = std::move(te_c);
    test.insert(test.end(), te_h.begin(), te_h.end());
  } else {
    auto [tr, te] = split_group(subset, train_ratio, rng);
    train = std::move(tr);
    test = std::move(te);
  }
  if (train.empty() || test.empty()) {
    throw SplitError("split leaves an empty side (train=" +
                     std::to_string(train.size()) + ", test=" +
                     std::to_string(test.size()) + ")");
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_subjects(
    const std::vector<SubjectTimeline>& timelines, double train_ratio,
    bool stratify, Rng& rng) {
  std::vector<std::size_t> all(timelines.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return split_subjects(timelines, all, train_ratio, stratify, rng);
}

FollowupSummary summarize_cohort(const std::vector<SubjectTimeline>& timelines) {
  FollowupSummary s;
  s.n_subjects = timelines.size();
  for (const auto& tl : timelines) {
    if (tl.diagnosis_year) ++s.n_cancer_subjects;
    for (const auto& v : tl.visits) {
      ++s.n_exams;
      for (int n = 1; n <= 5; ++n) {
        if (tl.last_followup_year - v.year >= n) ++s.exams_with_followup[n - 1];
        if (tl.diagnosis_year && *tl.diagnosis_year <= v.year + n) {
          ++s.exams_cancer_within[n - 1];
        }
      }
    }
  }
  return s;
}

std::string render_summary(const FollowupSummary& s) {
  std::ostringstream os;
  os << "subjects: " << s.n_subjects << " (" << s.n_cancer_subjects
     << " diagnosed), exams: " << s.n_exams << "\n";
  os << "                                 n=1     n=2     n=3     n=4     n=5\n";
  os << "exams with >= n years followup ";
  for (auto v : s.exams_with_followup) {
    os << " " << std::setw(7) << v;
  }
  os << "\nexams with cancer within n yrs ";
  for (auto v : s.exams_cancer_within) {
    os << " " << std::setw(7) << v;
  }
  os << "\n";
  return os.str();
}

// ---- archive / manifest I/O ----

namespace {

std::string image_rel_path(const std::string& subject, int year, int slot) {
  return "images/" + subject + "/" + std::to_string(year) + "_" +
         kSlotNames[slot] + ".pfm";
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void save_manifest(const std::string& path,
                   const std::vector<SubjectTimeline>& timelines,
                   const std::string& image_dir_prefix) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  out << "subject_id,visit_year,L_CC,L_MLO,R_CC,R_MLO,diagnosis_year,last_followup_year\n";
  for (const auto& tl : timelines) {
    for (const auto& v : tl.visits) {
      out << tl.subject_id << "," << v.year;
      for (int slot = 0; slot < 4; ++slot) {
        out << ",";
        if (v.kind == PayloadKind::image) {
          out << image_dir_prefix << image_rel_path(tl.subject_id, v.year, slot);
        } else {
          out << "vec:";
          const auto& e = v.embeddings[slot];
          for (std::size_t i = 0; i < e.size(); ++i) {
            if (i) out << ";";
            out << format_double(e[i]);
          }
        }
      }
      out << ",";
      if (tl.diagnosis_year) out << *tl.diagnosis_year;
      out << "," << tl.last_followup_year << "\n";
    }
  }
  if (!out) throw IoError("short write to manifest: " + path);
}

void save_cohort_archive(const std::string& dir, const GeneratedCohort& cohort,
                         bool force) {
  fs::path root(dir);
  if (fs::exists(root)) {
    if (!fs::is_directory(root)) {
      throw IoError("output path exists and is not a directory: " + dir);
    }
    if (!fs::is_empty(root) && !force) {
      throw IoError("output directory is not empty (use --force to overwrite): " +
                    dir);
    }
  }
  fs::create_directories(root);

  for (const auto& tl : cohort.timelines) {
    for (const auto& v : tl.visits) {
      if (v.kind != PayloadKind::image) continue;
      const fs::path subj_dir = root / "images" / tl.subject_id;
      fs::create_directories(subj_dir);
      for (int slot = 0; slot < 4; ++slot) {
        write_pfm((root / image_rel_path(tl.subject_id, v.year, slot)).string(),
                  v.images[slot]);
      }
    }
  }
  save_manifest((root / "manifest.csv").string(), cohort.timelines);

  nlohmann::json meta;
  meta["kind"] = "cohort";
  meta["tool_version"] = std::string(kVersion);
  meta["config"] = cohort.config.to_json();
  const auto summary = summarize_cohort(cohort.timelines);
  meta["n_subjects"] = summary.n_subjects;
  meta["n_exams"] = summary.n_exams;
  meta["n_cancer_subjects"] = summary.n_cancer_subjects;
  std::ofstream meta_out(root / "meta.json");
  meta_out << meta.dump(2) << "\n";

  nlohmann::json truth = nlohmann::json::array();
  for (std::size_t i = 0; i < cohort.truth.size(); ++i) {
    const auto& t = cohort.truth[i];
    truth.push_back({{"subject_id", cohort.timelines[i].subject_id},
                     {"cancer", t.cancer},
                     {"affected_side", t.affected_side},
                     {"baseline_amp", t.baseline_amp},
                     {"blob_sigma", t.blob_sigma},
                     {"center_row", t.center_row},
                     {"center_col", t.center_col}});
  }
  std::ofstream truth_out(root / "truth.json");
  truth_out << truth.dump(2) << "\n";
}

std::vector<SubjectTimeline> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  struct Row {
    int year;
    std::array<std::string, 4> cells;
    std::optional<int> diagnosis;
    int followup;
  };
  // preserve first-appearance order of subjects
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;

  auto fail = [&](const std::string& why) -> void {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + why);
  };
  auto parse_int = [&](const std::string& s, const char* what) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(what);
      return v;
    } catch (const std::exception&) {
      fail(std::string("cannot parse ") + what + " from '" + s + "'");
    }
    return 0;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // header row; column order is fixed
      continue;
    }
    auto cells = split_csv_line(stripped);
    if (cells.size() != 8) {
      fail("expected 8 columns, got " + std::to_string(cells.size()));
    }
    for (auto& c : cells) c = trim(c);
    Row row;
    const std::string& sid = cells[0];
    if (sid.empty()) fail("empty subject_id");
    row.year = parse_int(cells[1], "visit_year");
    for (int slot = 0; slot < 4; ++slot) {
      if (cells[2 + slot].empty()) {
        fail(std::string("empty payload cell for ") + kSlotNames[slot]);
      }
      row.cells[slot] = cells[2 + slot];
    }
    if (!cells[6].empty()) row.diagnosis = parse_int(cells[6], "diagnosis_year");
    row.followup = parse_int(cells[7], "last_followup_year");
    if (!rows.count(sid)) order.push_back(sid);
    rows[sid].push_back(std::move(row));
  }
  if (!header_seen) throw ParseError(path + ": missing header row");

  std::vector<SubjectTimeline> timelines;
  timelines.reserve(order.size());
  for (const auto& sid : order) {
    SubjectTimeline tl;
    tl.subject_id = sid;
    auto& subject_rows = rows[sid];
    std::sort(subject_rows.begin(), subject_rows.end(),
              [](const Row& a, const Row& b) { return a.year < b.year; });
    tl.diagnosis_year = subject_rows.front().diagnosis;
    tl.last_followup_year = subject_rows.front().followup;
    for (const auto& row : subject_rows) {
      if (row.diagnosis != tl.diagnosis_year || row.followup != tl.last_followup_year) {
        throw ValidationError("subject '" + sid +
                              "': inconsistent diagnosis/follow-up across rows");
      }
      VisitRecord v;
      v.subject_id = sid;
      v.year = row.year;
      const bool is_vec = row.cells[0].rfind("vec:", 0) == 0;
      v.kind = is_vec ? PayloadKind::embedding : PayloadKind::image;
      for (int slot = 0; slot < 4; ++slot) {
        const std::string& cell = row.cells[slot];
        if ((cell.rfind("vec:", 0) == 0) != is_vec) {
          throw ValidationError("subject '" + sid +
                                "': mixed payload kinds within one visit");
        }
        if (is_vec) {
          std::vector<double> vec;
          std::stringstream ss(cell.substr(4));
          std::string tok;
          while (std::getline(ss, tok, ';')) {
            try {
              vec.push_back(std::stod(tok));
            } catch (const std::exception&) {
              throw ParseError(path + ": subject '" + sid +
                               "': bad embedding value '" + tok + "'");
            }
          }
          if (vec.empty()) {
            throw ParseError(path + ": subject '" + sid + "': empty embedding");
          }
          v.embeddings[slot] = std::move(vec);
        } else {
          v.images[slot] = read_pfm((base / cell).string());
        }
      }
      tl.visits.push_back(std::move(v));
    }
    tl.validate();
    timelines.push_back(std::move(tl));
  }
  return timelines;
}

CohortArchive load_cohort_archive(const std::string& dir) {
  fs::path root(dir);
  CohortArchive arc;
  const fs::path meta_path = root / "meta.json";
  if (fs::exists(meta_path)) {
    std::ifstream meta_in(meta_path);
    arc.meta = nlohmann::json::parse(meta_in, nullptr, false);
    if (arc.meta.is_discarded()) {
      throw ParseError("invalid JSON in " + meta_path.string());
    }
    if (arc.meta.contains("config")) {
      arc.config = CohortConfig::from_json(arc.meta["config"]);
    }
  }
  arc.timelines = load_manifest((root / "manifest.csv").string());
  const fs::path truth_path = root / "truth.json";
  if (fs::exists(truth_path)) {
    std::ifstream truth_in(truth_path);
    auto tj = nlohmann::json::parse(truth_in, nullptr, false);
    if (!tj.is_discarded() && tj.is_array()) {
      for (const auto& t : tj) {
        SubjectTruth truth;
        truth.cancer = t.value("cancer", false);
        truth.affected_side = t.value("affected_side", 0);
        truth.baseline_amp = t.value("baseline_amp", 0.0);
        truth.blob_sigma = t.value("blob_sigma", 0.0);
        if (t.contains("center_row")) {
          truth.center_row = t["center_row"].get<std::array<double, 2>>();
          truth.center_col = t["center_col"].get<std::array<double, 2>>();
        }
        arc.truth.push_back(truth);
      }
    }
  }
  return arc;
}

}  // namespace longrisk
