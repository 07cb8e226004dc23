#pragma once

// Deterministic synthetic longitudinal corpus. Each of the 14 findings owns
// a fixed geometric renderer (shape + cell position); visits evolve finding
// states with seeded dynamics; reports come from a closed template grammar
// whose rule-based labeler is exact by construction.
//
// The visual regimes are designed so that temporal difference information is
// genuinely required: a newly appeared finding and the residual ghost of a
// resolved one are rendered identically faint in the current image and can
// only be told apart by comparing against the prior image.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ddatr/labels.hpp"
#include "ddatr/vocab.hpp"

namespace ddatr {

enum class Progression : std::uint8_t {
  kUnchanged = 0,
  kNew = 1,
  kResolved = 2,
  kIncreased = 3,
  kDecreased = 4,
};

const std::string& progression_name(Progression p);
Progression progression_from_name(const std::string& name);

enum class ShapeKind : std::uint8_t { kDisk, kRing, kHBar, kVBar, kDiagonal, kCross, kBox };

struct FindingSpec {
  std::string name;       // single-word keyword, e.g. "effusion"
  std::string adjective;  // optional modifier used by the templates
  ShapeKind shape = ShapeKind::kDisk;
  double center_x = 0, center_y = 0;  // in pixels
  double base_radius = 2.5;
};

struct SyntheticOntology {
  std::array<FindingSpec, kNumFindings> findings;

  static SyntheticOntology standard(std::size_t image_size = 32);

  // Closed vocabulary of everything the template grammar can emit.
  Vocabulary build_vocabulary() const;

  int finding_index(const std::string& name) const;  // -1 when unknown
};

struct StudyRecord {
  std::string study_id;
  std::string patient_id;
  int visit = 1;
  std::vector<float> image;  // image_size^2 values in [0,1], row-major
  bool has_prior = false;
  std::vector<float> prior_image;
  std::string prior_report;
  std::string report;
  LabelVector labels_cur{};
  LabelVector labels_prior{};                            // valid iff has_prior
  std::array<Progression, kNumFindings> progressions{};  // valid iff has_prior
};

struct CorpusConfig {
  std::uint64_t seed = 0;
  std::size_t n_patients = 1000;
  std::size_t visits_per_patient = 2;
  double prior_fraction = 0.5;
  std::size_t image_size = 32;
  double noise_sigma = 0.02;
};

// Generates n_patients * visits_per_patient records. Exactly
// round(prior_fraction * N) of them carry a prior exam (the prior image is
// bit-identical to the stored previous visit). A visit deselected from
// carrying its prior restarts the patient's finding chain, so no-prior
// records never contain longitudinal-only appearances.
std::vector<StudyRecord> generate_corpus(const CorpusConfig& cfg, const SyntheticOntology& onto);

// Keyword/negation labeler over the template grammar: unmentioned -> blank,
// negation cue ("no ...", "... has resolved") -> negative, "possible" ->
// uncertain, any other mention -> positive. Total over arbitrary text; the
// last mention of a finding wins.
LabelVector rule_label(const SyntheticOntology& onto, const std::string& report);

// Corpus directory layout: manifest.jsonl + vocab.txt + ontology.json +
// images/*.ddtr + reports/*.txt.
void save_corpus(const std::string& dir, const std::vector<StudyRecord>& records,
                 const SyntheticOntology& onto, const CorpusConfig& cfg);

struct Corpus {
  std::vector<StudyRecord> records;
  SyntheticOntology ontology;
  Vocabulary vocab;
  std::size_t image_size = 32;
};

Corpus load_corpus(const std::string& dir);

}  // namespace ddatr
