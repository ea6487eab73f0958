#include "cogmark/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cogmark/embedding.hpp"
#include "cogmark/error.hpp"
#include "cogmark/features.hpp"
#include "cogmark/parallel.hpp"
#include "cogmark/pipeline.hpp"
#include "cogmark/rng.hpp"
#include "text_util.hpp"

namespace cogmark {

void CohortSpec::validate() const {
  const auto bad = [](const std::string& what) { return Error(ErrorCode::kInvalidConfig, "cohort spec: " + what); };
  for (int c : train_counts) {
    if (c < 0) throw bad("class counts must be >= 0");
  }
  for (int c : dev_counts) {
    if (c < 0) throw bad("class counts must be >= 0");
  }
  if (!(mmse_fraction >= 0.0 && mmse_fraction <= 1.0)) throw bad("mmse_fraction must lie in [0, 1]");
  if (!(separation >= 0.0) || !std::isfinite(separation)) throw bad("separation must be >= 0");
  if (embedding_dim == 0) throw bad("embedding_dim must be positive");
  if (informative_dims < 0 || static_cast<std::size_t>(3 * informative_dims) > embedding_dim) {
    throw bad("3 * informative_dims must fit in embedding_dim");
  }
  if (!(mmse_sd >= 0.0)) throw bad("mmse_sd must be >= 0");
  if (mmse_range[0] < 0 || mmse_range[1] > 30 || mmse_range[0] > mmse_range[1]) {
    throw bad("mmse_range must be an ordered pair inside [0, 30]");
  }
  if (frames[0] < 1 || frames[0] > frames[1]) throw bad("frames must be an ordered pair >= 1");
}

Json to_json(const CohortSpec& s) {
  return Json{{"train_counts", s.train_counts}, {"dev_counts", s.dev_counts},
              {"mmse_fraction", s.mmse_fraction}, {"embedding_dim", s.embedding_dim},
              {"informative_dims", s.informative_dims}, {"separation", s.separation},
              {"mmse_means", s.mmse_means}, {"mmse_sd", s.mmse_sd},
              {"mmse_range", s.mmse_range}, {"frames", s.frames},
              {"binary_embeddings", s.binary_embeddings}, {"seed", s.seed}};
}

CohortSpec cohort_spec_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "cohort spec must be a JSON object");
  CohortSpec s;
  const Json defaults = to_json(s);
  for (const auto& [key, _] : j.items()) {
    if (!defaults.contains(key)) throw Error(ErrorCode::kInvalidConfig, "unknown cohort spec key '" + key + "'");
  }
  try {
    s.train_counts = j.value("train_counts", s.train_counts);
    s.dev_counts = j.value("dev_counts", s.dev_counts);
    s.mmse_fraction = j.value("mmse_fraction", s.mmse_fraction);
    s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
    s.informative_dims = j.value("informative_dims", s.informative_dims);
    s.separation = j.value("separation", s.separation);
    s.mmse_means = j.value("mmse_means", s.mmse_means);
    s.mmse_sd = j.value("mmse_sd", s.mmse_sd);
    s.mmse_range = j.value("mmse_range", s.mmse_range);
    s.frames = j.value("frames", s.frames);
    s.binary_embeddings = j.value("binary_embeddings", s.binary_embeddings);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("cohort spec: ") + e.what());
  }
  s.validate();
  return s;
}

Eigen::VectorXd class_embedding_mean(const CohortSpec& spec, Diagnosis d) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.embedding_dim));
  const int c = static_cast<int>(d);
  mean.segment(c * spec.informative_dims, spec.informative_dims).setConstant(spec.separation);
  return mean;
}

namespace {

// Per-participant template knobs.
struct Style {
  double filler = 0.0;
  double pronoun = 0.0;
  double complex = 0.0;
  double definite = 0.0;
  double terminal = 0.0;
  double seconds_per_word = 0.0;
  int ctd_sentences = 0;
  int fluency_items = 0;
};

template <std::size_t N>
const char* pick(Rng& rng, const std::array<const char*, N>& words) {
  return words[rng.index(N)];
}

constexpr std::array<const char*, 5> kAgents = {"boy", "girl", "mother", "woman", "kid"};
constexpr std::array<const char*, 10> kThings = {"cookie", "jar", "stool", "sink", "water",
                                                 "dish", "window", "plate", "curtain", "cupboard"};
constexpr std::array<const char*, 7> kTransitive = {"takes", "grabs", "washes", "dries", "holds", "reaches", "drops"};
constexpr std::array<const char*, 5> kIntransitive = {"falls", "overflows", "tips", "laughs", "stands"};
constexpr std::array<const char*, 3> kSpeech = {"says", "thinks", "knows"};
constexpr std::array<const char*, 4> kPronouns = {"he", "she", "it", "they"};
constexpr std::array<const char*, 3> kFillers = {"um", "uh", "er"};
constexpr std::array<const char*, 4> kAdverbs = {"quickly", "just", "really", "also"};
constexpr std::array<const char*, 3> kSubordinators = {"while", "because", "when"};
constexpr std::array<const char*, 15> kAnimals = {"dog",   "cat",    "horse", "cow",  "lion",
                                                  "tiger", "bear",   "mouse", "rabbit", "sheep",
                                                  "goat",  "zebra",  "monkey", "bird", "fish"};
constexpr std::array<const char*, 14> kPWords = {"pig",   "paper",  "pencil", "pan",   "pot",   "plate", "pear",
                                                 "pony",  "piano",  "pepper", "puppy", "pizza", "park",  "pool"};

// Sentence under construction; heads are draft indices, -1 for the root.
class Draft {
 public:
  int add(const char* form, Upos upos) {
    toks_.push_back({form, upos, -2, ""});
    return static_cast<int>(toks_.size()) - 1;
  }
  void link(int dep, int head, const char* rel) {
    toks_[static_cast<std::size_t>(dep)].head = head;
    toks_[static_cast<std::size_t>(dep)].rel = rel;
  }
  void root(int i) { link(i, -1, "root"); }
  // Fillers and punctuation attach to the root once it is known.
  void dangling(int i, const char* rel) { pending_.push_back({i, rel}); }

  AnnotatedSentence finish(bool terminal) {
    int root_index = -1;
    for (std::size_t i = 0; i < toks_.size(); ++i) {
      if (toks_[i].head == -1) root_index = static_cast<int>(i);
    }
    if (terminal) dangling(add(".", Upos::kPunct), "punct");
    for (const auto& [i, rel] : pending_) link(i, root_index, rel);
    AnnotatedSentence out;
    for (std::size_t i = 0; i < toks_.size(); ++i) {
      AnnotatedToken t;
      t.index = static_cast<int>(i) + 1;
      t.surface_form = toks_[i].form;
      t.lemma = toks_[i].form;
      t.upos = toks_[i].upos;
      t.head = toks_[i].head + 1;
      t.deprel = toks_[i].rel;
      out.tokens.push_back(std::move(t));
    }
    out.ends_with_terminal_punct = terminal;
    return out;
  }

 private:
  struct Tok {
    std::string form;
    Upos upos;
    int head;
    std::string rel;
  };
  std::vector<Tok> toks_;
  std::vector<std::pair<int, const char*>> pending_;
};

void maybe_filler(Draft& s, Rng& rng, double p) {
  if (rng.uniform() < p) s.dangling(s.add(pick(rng, kFillers), Upos::kIntj), "discourse");
}

// Determiner + noun, or a pronoun. Returns the head index.
int noun_phrase(Draft& s, Rng& rng, const Style& st, bool agent, bool allow_pronoun) {
  if (allow_pronoun && rng.uniform() < st.pronoun) return s.add(pick(rng, kPronouns), Upos::kPron);
  const bool definite = rng.uniform() < st.definite;
  const int det = s.add(definite ? (rng.uniform() < 0.8 ? "the" : "this") : "a", Upos::kDet);
  const int noun = s.add(agent ? pick(rng, kAgents) : pick(rng, kThings), Upos::kNoun);
  s.link(det, noun, "det");
  return noun;
}

AnnotatedSentence ctd_sentence(Rng& rng, const Style& st) {
  Draft s;
  maybe_filler(s, rng, st.filler);
  const bool complex = rng.uniform() < st.complex;
  const std::size_t shape = complex ? rng.index(4) : rng.index(3);
  if (!complex && shape == 2) {
    // it is there
    const int subj = s.add("it", Upos::kPron);
    const int cop = s.add("is", Upos::kAux);
    const int head = s.add("there", Upos::kAdv);
    s.link(subj, head, "nsubj");
    s.link(cop, head, "cop");
    s.root(head);
    return s.finish(rng.uniform() < st.terminal);
  }
  const int subj = noun_phrase(s, rng, st, true, true);
  maybe_filler(s, rng, st.filler * 0.5);
  int adv = -1;
  if (!complex && shape == 1) adv = s.add(pick(rng, kAdverbs), Upos::kAdv);
  if (complex && shape == 1) {
    // S says that S2 V O
    const int verb = s.add(pick(rng, kSpeech), Upos::kVerb);
    s.link(subj, verb, "nsubj");
    s.root(verb);
    const int mark = s.add("that", Upos::kSconj);
    const int subj2 = noun_phrase(s, rng, st, true, true);
    const int verb2 = s.add(pick(rng, kTransitive), Upos::kVerb);
    const int obj = noun_phrase(s, rng, st, false, false);
    s.link(mark, verb2, "mark");
    s.link(subj2, verb2, "nsubj");
    s.link(obj, verb2, "obj");
    s.link(verb2, verb, "ccomp");
    return s.finish(rng.uniform() < st.terminal);
  }
  if (complex && shape == 3) {
    // S V and V
    const int verb = s.add(pick(rng, kIntransitive), Upos::kVerb);
    const int cc = s.add("and", Upos::kCconj);
    const int verb2 = s.add(pick(rng, kIntransitive), Upos::kVerb);
    s.link(subj, verb, "nsubj");
    s.root(verb);
    s.link(cc, verb2, "cc");
    s.link(verb2, verb, "conj");
    return s.finish(rng.uniform() < st.terminal);
  }
  const int verb = s.add(pick(rng, kTransitive), Upos::kVerb);
  s.link(subj, verb, "nsubj");
  s.root(verb);
  if (adv >= 0) s.link(adv, verb, "advmod");
  const int obj = noun_phrase(s, rng, st, false, !complex);
  s.link(obj, verb, "obj");
  if (complex && shape == 0) {
    // ... while S2 V2
    const int mark = s.add(pick(rng, kSubordinators), Upos::kSconj);
    const int subj2 = noun_phrase(s, rng, st, false, true);
    const int verb2 = s.add(pick(rng, kIntransitive), Upos::kVerb);
    s.link(mark, verb2, "mark");
    s.link(subj2, verb2, "nsubj");
    s.link(verb2, verb, "advcl");
  } else if (complex && shape == 2) {
    // ... a cookie that falls
    const int rel = s.add("that", Upos::kPron);
    const int verb2 = s.add(pick(rng, kIntransitive), Upos::kVerb);
    s.link(rel, verb2, "nsubj");
    s.link(verb2, obj, "acl:relcl");
  }
  return s.finish(rng.uniform() < st.terminal);
}

template <std::size_t N>
std::vector<AnnotatedSentence> fluency_sentences(Rng& rng, const Style& st, const std::array<const char*, N>& words) {
  std::vector<AnnotatedSentence> out;
  int remaining = st.fluency_items;
  while (remaining > 0) {
    const int group = std::min(remaining, 1 + static_cast<int>(rng.index(3)));
    remaining -= group;
    Draft s;
    maybe_filler(s, rng, st.filler);
    int first = -1;
    for (int g = 0; g < group; ++g) {
      if (g > 0) maybe_filler(s, rng, st.filler * 0.5);
      int cc = -1;
      if (g > 0 && rng.uniform() < 0.3) cc = s.add("and", Upos::kCconj);
      const int item = s.add(pick(rng, words), Upos::kNoun);
      if (first < 0) {
        first = item;
        s.root(item);
      } else {
        s.link(item, first, "conj");
        if (cc >= 0) s.link(cc, item, "cc");
      }
    }
    out.push_back(s.finish(rng.uniform() < st.terminal * 0.5));
  }
  return out;
}

double rounded(double seconds) { return std::round(seconds * 100.0) / 100.0; }

long spoken_words(const AnnotatedTranscript& t) {
  long n = 0;
  for (const auto& s : t.sentences) {
    for (const auto& tok : s.tokens) n += tok.upos != Upos::kPunct;
  }
  return n;
}

struct Participant {
  std::string id;
  Diagnosis diagnosis = Diagnosis::kHc;
  bool train = true;
  bool has_mmse = false;
  int mmse = 0;
  std::array<double, 3> durations{};
};

void generate_participant(const CohortSpec& spec, std::size_t index, Participant& p,
                          const std::filesystem::path& out_dir) {
  Rng rng(derive_seed(spec.seed, index + 1));
  const double c = static_cast<double>(static_cast<int>(p.diagnosis));
  const double s = spec.separation;
  Style st;
  st.filler = std::clamp(0.15 + 0.12 * s * c + rng.normal(0.0, 0.05), 0.0, 0.95);
  st.pronoun = std::clamp(0.25 + 0.08 * s * c + rng.normal(0.0, 0.05), 0.0, 0.95);
  st.complex = std::clamp(0.5 - 0.1 * s * c + rng.normal(0.0, 0.05), 0.02, 0.98);
  st.definite = std::clamp(0.7 - 0.1 * s * c + rng.normal(0.0, 0.05), 0.05, 0.95);
  st.terminal = std::clamp(0.85 - 0.1 * s * c + rng.normal(0.0, 0.05), 0.1, 1.0);
  st.seconds_per_word = std::max(0.25, 0.45 + 0.04 * s * c + rng.normal(0.0, 0.05));
  st.ctd_sentences = std::max(3, 6 + static_cast<int>(rng.index(7)) - static_cast<int>(std::lround(0.5 * s * c)));
  const double mmse = rng.normal(spec.mmse_means[static_cast<std::size_t>(c)], spec.mmse_sd);
  p.mmse = static_cast<int>(std::clamp(std::round(mmse), static_cast<double>(spec.mmse_range[0]),
                                       static_cast<double>(spec.mmse_range[1])));

  for (Task task : kAllTasks) {
    AnnotatedTranscript t;
    t.participant_id = p.id;
    t.task = task;
    if (task == Task::kCtd) {
      for (int i = 0; i < st.ctd_sentences; ++i) t.sentences.push_back(ctd_sentence(rng, st));
    } else {
      st.fluency_items = std::max(3, 16 - static_cast<int>(std::lround(1.5 * s * c)) + static_cast<int>(rng.index(7)) - 3);
      t.sentences = task == Task::kSf ? fluency_sentences(rng, st, kAnimals) : fluency_sentences(rng, st, kPWords);
    }
    const double pause = task == Task::kCtd ? rng.uniform(2.0, 6.0) : rng.uniform(4.0, 10.0);
    const double per_word = task == Task::kCtd ? st.seconds_per_word : 2.5 * st.seconds_per_word;
    p.durations[static_cast<std::size_t>(task)] = rounded(static_cast<double>(spoken_words(t)) * per_word + pause);
    detail::write_file(out_dir / "transcripts" / (p.id + "_" + std::string(task_name(task)) + ".conllu"),
                       serialize_transcript(t));
  }

  const int frames = spec.frames[0] + static_cast<int>(rng.index(static_cast<std::size_t>(spec.frames[1] - spec.frames[0] + 1)));
  const Eigen::VectorXd mean = class_embedding_mean(spec, p.diagnosis);
  Eigen::VectorXd latent(mean.size());
  for (Eigen::Index j = 0; j < latent.size(); ++j) latent(j) = mean(j) + rng.normal();
  Eigen::MatrixXd m(frames, latent.size());
  for (int f = 0; f < frames; ++f) {
    for (Eigen::Index j = 0; j < latent.size(); ++j) m(f, j) = latent(j) + rng.normal();
  }
  detail::write_file(out_dir / "embeddings" / (p.id + "_CTD.emb"),
                     spec.binary_embeddings ? serialize_embedding_binary(m) : serialize_embedding_text(m));
}

CohortManifest manifest_for(const std::vector<Participant>& people, const std::filesystem::path& base,
                            int which) {  // 0 train, 1 dev, 2 all
  CohortManifest m;
  m.base_dir = base;
  for (const auto& p : people) {
    if ((which == 0 && !p.train) || (which == 1 && p.train)) continue;
    for (Task task : kAllTasks) {
      ManifestRow row;
      row.participant_id = p.id;
      row.task = task;
      row.transcript_path = "transcripts/" + p.id + "_" + std::string(task_name(task)) + ".conllu";
      if (task == Task::kCtd) row.embedding_path = "embeddings/" + p.id + "_CTD.emb";
      row.duration_seconds = p.durations[static_cast<std::size_t>(task)];
      row.diagnosis = p.diagnosis;
      if (p.has_mmse) row.mmse = p.mmse;
      m.rows.push_back(std::move(row));
    }
  }
  return m;
}

void write_manifests(const GeneratedCohort& c, const std::filesystem::path& out_dir) {
  write_manifest(c.train, out_dir / "train.csv");
  write_manifest(c.dev, out_dir / "dev.csv");
  write_manifest(c.all, out_dir / "manifest.csv");
}

std::vector<Participant> plan_participants(const CohortSpec& spec) {
  std::vector<Participant> people;
  Rng assign(derive_seed(spec.seed, 0xC1A55));
  for (int split = 0; split < 2; ++split) {
    const auto& counts = split == 0 ? spec.train_counts : spec.dev_counts;
    std::vector<int> classes;
    for (int c = 0; c < 3; ++c) classes.insert(classes.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(c)]), c);
    assign.shuffle(std::span<int>(classes));
    for (int c : classes) {
      Participant p;
      p.diagnosis = static_cast<Diagnosis>(c);
      p.train = split == 0;
      people.push_back(std::move(p));
    }
  }
  const std::size_t width = std::max<std::size_t>(3, std::to_string(people.size()).size());
  for (std::size_t i = 0; i < people.size(); ++i) {
    const std::string n = std::to_string(i + 1);
    people[i].id = "P" + std::string(width - n.size(), '0') + n;
  }
  std::vector<std::size_t> order(people.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng select(derive_seed(spec.seed, 0x33E5E));
  select.shuffle(std::span<std::size_t>(order));
  const auto with_mmse = static_cast<std::size_t>(std::llround(spec.mmse_fraction * static_cast<double>(people.size())));
  for (std::size_t i = 0; i < with_mmse; ++i) people[order[i]].has_mmse = true;
  return people;
}

}  // namespace

GeneratedCohort gen_cohort(const CohortSpec& spec, const std::filesystem::path& out_dir, unsigned jobs) {
  spec.validate();
  std::filesystem::create_directories(out_dir / "transcripts");
  std::filesystem::create_directories(out_dir / "embeddings");
  auto people = plan_participants(spec);
  parallel_for(people.size(), jobs, [&](std::size_t i) { generate_participant(spec, i, people[i], out_dir); });
  GeneratedCohort c{manifest_for(people, out_dir, 0), manifest_for(people, out_dir, 1), manifest_for(people, out_dir, 2)};
  write_manifests(c, out_dir);
  detail::write_file(out_dir / "cohort_spec.json", to_json(spec).dump(2) + "\n");
  return c;
}

RegressionSignal default_regression_signal() {
  RegressionSignal s;
  s.coefficients.assign(kParticipantFeatureCount, 0.0);
  const auto names = participant_feature_names();
  const auto set = [&](const std::string& name, double value) {
    const auto it = std::find(names.begin(), names.end(), name);
    s.coefficients[static_cast<std::size_t>(it - names.begin())] = value;
  };
  set("CTD__filler_word_rate", -1.5);
  set("CTD__total_clause_rate_minimal", 1.0);
  set("SF__total_word_count_rate", 1.0);
  return s;
}

RegressionCohort gen_regression_signal(const CohortSpec& spec, const RegressionSignal& signal,
                                       const std::filesystem::path& out_dir, unsigned jobs) {
  if (signal.coefficients.size() != kParticipantFeatureCount) {
    throw Error(ErrorCode::kLengthMismatch, "regression signal needs 42 coefficients");
  }
  for (double c : signal.coefficients) {
    if (!std::isfinite(c)) throw Error(ErrorCode::kInvalidConfig, "coefficients must be finite");
  }
  if (!std::isfinite(signal.intercept) || !(signal.noise_sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "intercept must be finite and noise_sigma >= 0");
  }
  RegressionCohort out;
  out.cohort = gen_cohort(spec, out_dir, jobs);

  FeatureOptions options;
  options.jobs = jobs;
  const auto features = extract_linguistic_table(out.cohort.all, options);
  std::map<std::string, bool> carries;
  for (const auto& row : out.cohort.all.rows) carries[row.participant_id] = row.mmse.has_value();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < features.table.row_ids.size(); ++i) {
    if (carries[features.table.row_ids[i]]) rows.push_back(i);
  }

  const std::size_t dim = kParticipantFeatureCount;
  std::vector<double> center(dim, 0.0), scale(dim, 1.0);
  if (!rows.empty()) {
    for (std::size_t j = 0; j < dim; ++j) {
      double sum = 0.0;
      for (std::size_t i : rows) sum += features.table.rows[i][j];
      center[j] = sum / static_cast<double>(rows.size());
      double var = 0.0;
      for (std::size_t i : rows) var += (features.table.rows[i][j] - center[j]) * (features.table.rows[i][j] - center[j]);
      var /= static_cast<double>(rows.size());
      scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
  }

  Rng noise(derive_seed(spec.seed, 0x5151));
  std::map<std::string, int> mmse;
  Json participants = Json::object();
  for (std::size_t i : rows) {
    double linear = signal.intercept;
    for (std::size_t j = 0; j < dim; ++j) {
      linear += signal.coefficients[j] * (features.table.rows[i][j] - center[j]) / scale[j];
    }
    const double noisy = linear + signal.noise_sigma * noise.normal();
    const int value = static_cast<int>(std::clamp(std::round(noisy), kMmseMin, kMmseMax));
    const auto& id = features.table.row_ids[i];
    mmse[id] = value;
    participants[id] = Json{{"linear", linear}, {"mmse", value}};
  }
  for (auto* m : {&out.cohort.train, &out.cohort.dev, &out.cohort.all}) {
    for (auto& row : m->rows) {
      const auto it = mmse.find(row.participant_id);
      row.mmse = it == mmse.end() ? std::nullopt : std::optional<int>(it->second);
    }
  }
  write_manifests(out.cohort, out_dir);

  Json coefficients = Json::object();
  const auto names = participant_feature_names();
  for (std::size_t j = 0; j < dim; ++j) coefficients[names[j]] = signal.coefficients[j];
  out.ground_truth = Json{{"intercept", signal.intercept}, {"noise_sigma", signal.noise_sigma},
                          {"coefficients", coefficients}, {"centers", center},
                          {"scales", scale}, {"participants", participants}};
  detail::write_file(out_dir / "ground_truth.json", out.ground_truth.dump(2) + "\n");
  return out;
}

}  // namespace cogmark
