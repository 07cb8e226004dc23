#include "ddatr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ddatr/rng.hpp"
#include "ddatr/tensor_io.hpp"

namespace ddatr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kProgressionNames[5] = {"unchanged", "new", "resolved", "increased",
                                          "decreased"};

// Per-finding render state for one visit.
enum class Regime : std::uint8_t { kNone, kStrong, kFaint, kDashed };

struct FindingState {
  Attribute attr = Attribute::kBlank;
  Progression tag = Progression::kUnchanged;
  Regime regime = Regime::kNone;
  double severity = 0.0;
};

using PatientState = std::array<FindingState, kNumFindings>;

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

double shape_mask(const FindingSpec& f, double radius, double px, double py) {
  const double dx = px - f.center_x;
  const double dy = py - f.center_y;
  auto clamp01 = [](double v) { return v < 0 ? 0.0 : (v > 1 ? 1.0 : v); };
  auto box = [&](double half_w, double half_h) {
    return clamp01(half_w + 0.5 - std::abs(dx)) * clamp01(half_h + 0.5 - std::abs(dy));
  };
  switch (f.shape) {
    case ShapeKind::kDisk:
      return clamp01(radius + 0.5 - std::hypot(dx, dy));
    case ShapeKind::kRing:
      return clamp01(1.1 - std::abs(std::hypot(dx, dy) - radius));
    case ShapeKind::kHBar:
      return box(radius, 1.1);
    case ShapeKind::kVBar:
      return box(1.1, radius);
    case ShapeKind::kDiagonal:
      return clamp01(1.2 - std::abs(dx - dy) * 0.7071) *
             clamp01(radius + 0.5 - std::max(std::abs(dx), std::abs(dy)));
    case ShapeKind::kCross:
      return std::max(box(radius, 0.9), box(0.9, radius));
    case ShapeKind::kBox:
      return clamp01(1.1 - std::abs(std::max(std::abs(dx), std::abs(dy)) - radius));
  }
  return 0.0;
}

double regime_amplitude(Regime regime, double severity) {
  switch (regime) {
    case Regime::kStrong:
    case Regime::kDashed:
      return 0.30 + 0.35 * severity;
    case Regime::kFaint:
      return 0.08 + 0.08 * severity;
    case Regime::kNone:
      return 0.0;
  }
  return 0.0;
}

std::vector<float> render_image(const SyntheticOntology& onto, const PatientState& state,
                                std::size_t size, double noise_sigma, Rng& rng) {
  std::vector<float> img(size * size, 0.05f);
  for (std::size_t i = 0; i < kNumFindings; ++i) {
    const FindingState& st = state[i];
    if (st.regime == Regime::kNone) continue;
    const FindingSpec& spec = onto.findings[i];
    const double radius = spec.base_radius * (0.8 + 0.4 * st.severity);
    const double amp = regime_amplitude(st.regime, st.severity);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        double m = shape_mask(spec, radius, double(x), double(y));
        if (m <= 0.0) continue;
        if (st.regime == Regime::kDashed && ((x + y) % 2 == 0)) continue;
        img[y * size + x] += static_cast<float>(amp * m);
      }
    }
  }
  for (auto& v : img) {
    v += static_cast<float>(rng.normal(0.0, noise_sigma));
    v = std::min(1.0f, std::max(0.0f, v));
  }
  return img;
}

// ---------------------------------------------------------------------------
// state dynamics
// ---------------------------------------------------------------------------

FindingState initial_state(Rng& rng) {
  FindingState st;
  const double u = rng.uniform();
  if (u < 0.30) {
    st.attr = Attribute::kPositive;
    st.regime = Regime::kStrong;
    st.severity = rng.uniform(0.55, 0.95);
  } else if (u < 0.38) {
    st.attr = Attribute::kUncertain;
    st.regime = Regime::kDashed;
    st.severity = rng.uniform(0.5, 0.8);
  } else if (u < 0.53) {
    st.attr = Attribute::kNegative;
  }  // else blank
  st.tag = Progression::kUnchanged;
  return st;
}

FindingState transition(const FindingState& prev, Rng& rng) {
  FindingState st;
  st.tag = Progression::kUnchanged;
  switch (prev.attr) {
    case Attribute::kPositive: {
      const bool was_faint = prev.regime == Regime::kFaint;
      const double u = rng.uniform();
      if (u < 0.22) {
        st.attr = Attribute::kNegative;
        st.tag = Progression::kResolved;
        // A strong finding leaves a faint residual ghost; a faint one
        // vanishes cleanly.
        if (!was_faint) {
          st.regime = Regime::kFaint;
          st.severity = rng.uniform(0.5, 0.8);
        }
      } else if (u < 0.40 || (was_faint && u < 0.70)) {
        st.attr = Attribute::kPositive;
        st.tag = Progression::kIncreased;
        st.regime = Regime::kStrong;
        st.severity = std::min(1.0, std::max(0.55, prev.severity) + rng.uniform(0.10, 0.25));
      } else if (u < 0.58 && !was_faint) {
        st.attr = Attribute::kPositive;
        st.tag = Progression::kDecreased;
        st.regime = Regime::kStrong;
        st.severity = std::max(0.45, prev.severity - rng.uniform(0.15, 0.30));
      } else {
        st.attr = Attribute::kPositive;
        st.tag = Progression::kUnchanged;
        st.regime = prev.regime;
        st.severity = prev.severity;
      }
      break;
    }
    case Attribute::kUncertain: {
      if (rng.bernoulli(0.5)) {
        st.attr = Attribute::kPositive;
        st.tag = Progression::kIncreased;  // dashed-faint confirmed into strong
        st.regime = Regime::kStrong;
        st.severity = rng.uniform(0.55, 0.95);
      } else {
        st.attr = Attribute::kNegative;
        st.tag = Progression::kResolved;  // ruled out, nothing rendered
      }
      break;
    }
    case Attribute::kNegative:
    case Attribute::kBlank: {
      const double u = rng.uniform();
      if (u < 0.10) {
        st.attr = Attribute::kPositive;
        st.tag = Progression::kNew;
        st.regime = Regime::kFaint;  // early-stage: same look as a residual
        st.severity = rng.uniform(0.5, 0.8);
      } else if (u < 0.18) {
        st.attr = Attribute::kNegative;
      } else if (u < 0.48 && prev.attr == Attribute::kNegative) {
        st.attr = Attribute::kBlank;
      } else {
        st.attr = prev.attr;
      }
      break;
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// report templates
// ---------------------------------------------------------------------------

std::string render_report(const SyntheticOntology& onto, const PatientState& state,
                          bool with_prior, Rng& rng) {
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 0; i < kNumFindings; ++i) {
    const FindingState& st = state[i];
    const FindingSpec& spec = onto.findings[i];
    const bool use_adj = rng.bernoulli(0.5);
    const std::string adj = use_adj ? spec.adjective + " " : "";
    std::string sentence;
    switch (st.attr) {
      case Attribute::kBlank:
        continue;
      case Attribute::kNegative:
        if (with_prior && st.tag == Progression::kResolved) {
          sentence = spec.name + " has resolved .";
        } else {
          sentence = "no " + adj + spec.name + " .";
        }
        break;
      case Attribute::kUncertain:
        sentence = "possible " + adj + spec.name + " .";
        break;
      case Attribute::kPositive:
        if (!with_prior) {
          sentence = adj + spec.name + " is present .";
        } else {
          switch (st.tag) {
            case Progression::kNew:
              sentence = "new " + adj + spec.name + " .";
              break;
            case Progression::kIncreased:
              sentence = spec.name + " has increased .";
              break;
            case Progression::kDecreased:
              sentence = spec.name + " has decreased .";
              break;
            default:
              sentence = spec.name + " is unchanged .";
              break;
          }
        }
        break;
    }
    if (!first) os << ' ';
    os << sentence;
    first = false;
  }
  if (first) os << "no findings .";
  return os.str();
}

}  // namespace

const std::string& progression_name(Progression p) {
  return kProgressionNames[static_cast<std::size_t>(p)];
}

Progression progression_from_name(const std::string& name) {
  for (std::size_t i = 0; i < 5; ++i) {
    if (kProgressionNames[i] == name) return static_cast<Progression>(i);
  }
  throw std::invalid_argument("unknown progression: " + name);
}

SyntheticOntology SyntheticOntology::standard(std::size_t image_size) {
  const char* names[kNumFindings] = {
      "atelectasis", "cardiomegaly", "consolidation", "edema",        "effusion",
      "emphysema",   "fibrosis",     "fracture",      "infiltration", "mass",
      "nodule",      "opacity",      "pneumothorax",  "congestion"};
  const char* adjectives[kNumFindings] = {
      "bibasilar", "borderline", "focal",    "interstitial", "small",
      "apical",    "chronic",    "acute",    "patchy",       "large",
      "calcified", "hazy",       "moderate", "mild"};
  const ShapeKind shapes[kNumFindings] = {
      ShapeKind::kDisk,  ShapeKind::kRing,  ShapeKind::kHBar, ShapeKind::kVBar,
      ShapeKind::kDiagonal, ShapeKind::kCross, ShapeKind::kBox,  ShapeKind::kDisk,
      ShapeKind::kRing,  ShapeKind::kHBar,  ShapeKind::kVBar, ShapeKind::kDiagonal,
      ShapeKind::kCross, ShapeKind::kBox};

  SyntheticOntology onto;
  const double cell = double(image_size) / 4.0;
  for (std::size_t i = 0; i < kNumFindings; ++i) {
    // 14 findings on a 4x4 grid, skipping two corner cells
    const std::size_t slot = i < 3 ? i : i + (i < 11 ? 1 : 2);
    FindingSpec spec;
    spec.name = names[i];
    spec.adjective = adjectives[i];
    spec.shape = shapes[i];
    spec.center_x = (double(slot % 4) + 0.5) * cell;
    spec.center_y = (double(slot / 4) + 0.5) * cell;
    spec.base_radius = cell * (0.22 + 0.06 * double(i % 3));
    onto.findings[i] = spec;
  }
  return onto;
}

Vocabulary SyntheticOntology::build_vocabulary() const {
  Vocabulary v;
  for (const char* w : {"no", "possible", "new", "has", "increased", "decreased", "resolved",
                        "is", "present", "unchanged", "findings", "."}) {
    v.add(w);
  }
  for (const auto& f : findings) {
    v.add(f.name);
    v.add(f.adjective);
  }
  return v;
}

int SyntheticOntology::finding_index(const std::string& name) const {
  for (std::size_t i = 0; i < kNumFindings; ++i) {
    if (findings[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<StudyRecord> generate_corpus(const CorpusConfig& cfg, const SyntheticOntology& onto) {
  if (cfg.prior_fraction < 0.0 || cfg.prior_fraction > 1.0) {
    throw std::invalid_argument("generate_corpus: prior_fraction must lie in [0, 1]");
  }
  const std::size_t total = cfg.n_patients * cfg.visits_per_patient;
  if (total == 0) throw std::invalid_argument("generate_corpus: empty corpus requested");
  const std::size_t eligible = cfg.n_patients * (cfg.visits_per_patient - 1);
  const std::size_t need = static_cast<std::size_t>(std::llround(cfg.prior_fraction * double(total)));
  if (need > eligible) {
    throw std::invalid_argument(
        "generate_corpus: prior_fraction " + std::to_string(cfg.prior_fraction) +
        " is not achievable with " + std::to_string(cfg.visits_per_patient) +
        " visits per patient (first visits never have priors)");
  }

  // Deterministic selection of which eligible visits carry their prior.
  std::vector<std::size_t> eligible_slots(eligible);
  for (std::size_t i = 0; i < eligible; ++i) eligible_slots[i] = i;
  {
    Rng sel(derive_seed(cfg.seed, "prior_selection"));
    for (std::size_t i = eligible; i > 1; --i) {
      std::swap(eligible_slots[i - 1], eligible_slots[sel.below(i)]);
    }
  }
  std::vector<bool> carries_prior(eligible, false);
  for (std::size_t i = 0; i < need; ++i) carries_prior[eligible_slots[i]] = true;

  std::vector<StudyRecord> records;
  records.reserve(total);
  std::size_t eligible_index = 0;
  for (std::size_t p = 0; p < cfg.n_patients; ++p) {
    Rng rng(derive_seed(cfg.seed, "patient" + std::to_string(p)));
    const std::string patient_id = "p" + std::to_string(p);

    PatientState state{};
    StudyRecord prev;
    for (std::size_t n = 1; n <= cfg.visits_per_patient; ++n) {
      bool with_prior = false;
      if (n > 1) {
        with_prior = carries_prior[eligible_index];
        ++eligible_index;
      }
      if (n == 1 || !with_prior) {
        // Fresh segment: longitudinal-only appearances (faint lesions,
        // residual ghosts) never occur in a no-prior record.
        for (auto& st : state) st = initial_state(rng);
      } else {
        for (auto& st : state) st = transition(st, rng);
      }

      StudyRecord rec;
      rec.patient_id = patient_id;
      rec.visit = static_cast<int>(n);
      rec.study_id = patient_id + "_v" + std::to_string(n);
      rec.image = render_image(onto, state, cfg.image_size, cfg.noise_sigma, rng);
      rec.report = render_report(onto, state, with_prior, rng);
      for (std::size_t i = 0; i < kNumFindings; ++i) {
        rec.labels_cur[i] = state[i].attr;
        rec.progressions[i] = with_prior ? state[i].tag : Progression::kUnchanged;
      }
      if (with_prior) {
        rec.has_prior = true;
        rec.prior_image = prev.image;
        rec.prior_report = prev.report;
        rec.labels_prior = prev.labels_cur;
      }
      records.push_back(rec);
      prev = std::move(rec);
    }
  }
  return records;
}

LabelVector rule_label(const SyntheticOntology& onto, const std::string& report) {
  LabelVector labels = all_blank_labels();
  std::vector<std::string> words;
  try {
    words = split_words(report);
  } catch (const EmptyTextError&) {
    return labels;
  }

  std::vector<std::vector<std::string>> sentences(1);
  for (const auto& w : words) {
    sentences.back().push_back(w);
    if (w == ".") sentences.emplace_back();
  }
  for (const auto& sentence : sentences) {
    const bool has_resolved =
        std::find(sentence.begin(), sentence.end(), "resolved") != sentence.end();
    for (std::size_t k = 0; k < sentence.size(); ++k) {
      const int idx = onto.finding_index(sentence[k]);
      if (idx < 0) continue;
      Attribute attr = Attribute::kPositive;
      if (has_resolved) {
        attr = Attribute::kNegative;
      } else {
        for (std::size_t j = 0; j < k; ++j) {
          if (sentence[j] == "no") {
            attr = Attribute::kNegative;
            break;
          }
          if (sentence[j] == "possible") {
            attr = Attribute::kUncertain;
            break;
          }
        }
      }
      labels[idx] = attr;  // last mention wins
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// corpus directory IO
// ---------------------------------------------------------------------------

namespace {

json labels_to_json(const LabelVector& labels) {
  json arr = json::array();
  for (Attribute a : labels) arr.push_back(attribute_name(a));
  return arr;
}

LabelVector labels_from_json(const json& arr) {
  LabelVector v{};
  for (std::size_t i = 0; i < kNumFindings; ++i) {
    v[i] = attribute_from_name(arr.at(i).get<std::string>());
  }
  return v;
}

Tensor<float> image_tensor(const std::vector<float>& img, std::size_t size) {
  return Tensor<float>::from_data({1, size, size}, std::vector<float>(img));
}

}  // namespace

void save_corpus(const std::string& dir, const std::vector<StudyRecord>& records,
                 const SyntheticOntology& onto, const CorpusConfig& cfg) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "reports");

  onto.build_vocabulary().save((fs::path(dir) / "vocab.txt").string());

  json onto_js;
  onto_js["image_size"] = cfg.image_size;
  onto_js["findings"] = json::array();
  for (const auto& f : onto.findings) {
    onto_js["findings"].push_back({{"name", f.name}, {"adjective", f.adjective}});
  }
  std::ofstream(fs::path(dir) / "ontology.json") << onto_js.dump(2) << '\n';

  std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write corpus manifest in " + dir);
  for (const auto& rec : records) {
    const std::string img_rel = "images/" + rec.study_id + ".ddtr";
    const std::string rep_rel = "reports/" + rec.study_id + ".txt";
    save_tensor((fs::path(dir) / img_rel).string(), image_tensor(rec.image, cfg.image_size));
    std::ofstream(fs::path(dir) / rep_rel) << rec.report << '\n';

    json row;
    row["study_id"] = rec.study_id;
    row["patient_id"] = rec.patient_id;
    row["visit"] = rec.visit;
    row["image"] = img_rel;
    row["report"] = rep_rel;
    row["labels"] = labels_to_json(rec.labels_cur);
    row["has_prior"] = rec.has_prior;
    if (rec.has_prior) {
      row["prior_image"] = "images/" + rec.patient_id + "_v" + std::to_string(rec.visit - 1) +
                           ".ddtr";
      row["prior_report"] = "reports/" + rec.patient_id + "_v" + std::to_string(rec.visit - 1) +
                            ".txt";
      row["prior_labels"] = labels_to_json(rec.labels_prior);
      json prog = json::array();
      for (Progression p : rec.progressions) prog.push_back(progression_name(p));
      row["progressions"] = prog;
    }
    manifest << row.dump() << '\n';
  }
}

Corpus load_corpus(const std::string& dir) {
  Corpus corpus;
  {
    std::ifstream is(fs::path(dir) / "ontology.json");
    if (!is) throw std::runtime_error("corpus missing ontology.json in " + dir);
    json onto_js = json::parse(is);
    corpus.image_size = onto_js.at("image_size").get<std::size_t>();
    corpus.ontology = SyntheticOntology::standard(corpus.image_size);
    for (std::size_t i = 0; i < kNumFindings; ++i) {
      if (corpus.ontology.findings[i].name != onto_js.at("findings").at(i).at("name")) {
        throw std::runtime_error("corpus ontology does not match the built-in finding table");
      }
    }
  }
  corpus.vocab = Vocabulary::load((fs::path(dir) / "vocab.txt").string());

  std::ifstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("corpus missing manifest.jsonl in " + dir);
  std::string line;
  auto read_report = [&](const std::string& rel) {
    std::ifstream is(fs::path(dir) / rel);
    if (!is) throw std::runtime_error("missing report file " + rel);
    std::string text, l;
    while (std::getline(is, l)) {
      if (!text.empty()) text += ' ';
      text += l;
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    return text;
  };
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    json row = json::parse(line);
    StudyRecord rec;
    rec.study_id = row.at("study_id").get<std::string>();
    rec.patient_id = row.at("patient_id").get<std::string>();
    rec.visit = row.at("visit").get<int>();
    rec.image = load_tensor<float>((fs::path(dir) / row.at("image").get<std::string>()).string())
                    .values();
    rec.report = read_report(row.at("report").get<std::string>());
    rec.labels_cur = labels_from_json(row.at("labels"));
    rec.has_prior = row.at("has_prior").get<bool>();
    if (rec.has_prior) {
      rec.prior_image =
          load_tensor<float>((fs::path(dir) / row.at("prior_image").get<std::string>()).string())
              .values();
      rec.prior_report = read_report(row.at("prior_report").get<std::string>());
      rec.labels_prior = labels_from_json(row.at("prior_labels"));
      for (std::size_t i = 0; i < kNumFindings; ++i) {
        rec.progressions[i] = progression_from_name(row.at("progressions").at(i).get<std::string>());
      }
    }
    corpus.records.push_back(std::move(rec));
  }
  if (corpus.records.empty()) throw std::runtime_error("corpus manifest is empty in " + dir);
  return corpus;
}

}  // namespace ddatr
