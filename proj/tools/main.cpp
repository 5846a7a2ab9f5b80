// uverify: script / voice-over match verification over a GMM phoneme model.
//
// Subcommands: train, verify, align, gen-corpus, evaluate, sweep.
// Exit codes: 0 success (or match), 1 mismatch (verify only), 2 error.

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "uverify/audio.hpp"
#include "uverify/corpus.hpp"
#include "uverify/frontend.hpp"
#include "uverify/genspec_io.hpp"
#include "uverify/lexicon.hpp"
#include "uverify/model.hpp"
#include "uverify/verify.hpp"

namespace {

using namespace uverify;

std::size_t default_jobs() {
  unsigned n = std::thread::hardware_concurrency();
  return n ? n : 1;
}

struct FrontendFlags {
  FrontendConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--frame-length-ms", cfg.frame_length_ms, "Frame length in ms");
    cmd->add_option("--frame-shift-ms", cfg.frame_shift_ms, "Frame shift in ms");
    cmd->add_option("--pre-emphasis", cfg.pre_emphasis, "Pre-emphasis coefficient");
    cmd->add_option("--num-mel-filters", cfg.num_mel_filters, "Mel filterbank size");
    cmd->add_option("--num-ceps", cfg.num_ceps, "Cepstral coefficients per frame");
    cmd->add_option("--fft-size", cfg.fft_size, "FFT size (0 = auto power of two)");
    cmd->add_option("--delta-window", cfg.delta_window, "Delta regression window");
  }
};

struct AlignFlags {
  AlignOptions opts;
  bool no_silence = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--min-phone-frames", opts.min_phone_frames, "Minimum frames per phoneme");
    cmd->add_option("--min-silence-frames", opts.min_silence_frames,
                    "Minimum frames per silence stretch");
    cmd->add_flag("--no-silence", no_silence, "Disable optional silence insertion");
    cmd->add_option("--max-expansions", opts.max_expansions,
                    "Cap on pronunciation expansions per script");
  }
  AlignOptions resolved() const {
    AlignOptions o = opts;
    o.allow_silence = !no_silence;
    return o;
  }
};

// A RIFF/WAVE input goes through the MFCC frontend (with a fingerprint
// check against the model); anything else is read as a feature dump.
FeatureMatrix load_input_features(const std::string& path, const FrontendConfig& cfg,
                                  const AcousticModel& model, bool ignore_fingerprint) {
  bool is_wav = false;
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open input: " + path);
    char head[4] = {0, 0, 0, 0};
    probe.read(head, 4);
    is_wav = probe.gcount() == 4 && std::string_view(head, 4) == "RIFF";
  }
  if (is_wav) {
    Waveform w = load_wav(path);
    std::string fp = cfg.fingerprint(w.sample_rate);
    if (!ignore_fingerprint && model.fingerprint() != "none" && model.fingerprint() != fp)
      throw ValidationError("frontend fingerprint mismatch: model was trained with '" +
                            model.fingerprint() + "', current configuration is '" + fp +
                            "' (use --ignore-fingerprint to override)");
    return compute_features(w, cfg);
  }
  FeatureMatrix feat = load_features(path);
  if (feat.dim != model.feature_dim())
    throw ValidationError("feature dimension " + std::to_string(feat.dim) +
                          " does not match model dimension " +
                          std::to_string(model.feature_dim()));
  return feat;
}

bool looks_like_wav(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open input: " + path);
  char head[4] = {0, 0, 0, 0};
  probe.read(head, 4);
  return probe.gcount() == 4 && std::string_view(head, 4) == "RIFF";
}

// Segments file for training: phone <TAB or space> file begin end, where
// file is a feature dump or a WAV (featurized with the active frontend
// configuration), begin/end are frame indices, and end = -1 means "to the
// last frame".
std::vector<LabeledSegment> load_segments_file(const std::string& path,
                                               const FrontendConfig& fe,
                                               std::vector<FeatureMatrix>& storage,
                                               std::uint32_t* wav_sample_rate) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open segments file: " + path);
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<std::array<std::string, 4>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto cells = split_ws(line);
    if (cells.empty() || cells[0][0] == '#') continue;
    if (cells.size() != 4)
      throw FormatError("segments line " + std::to_string(lineno) +
                        " needs: phone file begin end");
    rows.push_back({cells[0], cells[1], cells[2], cells[3]});
  }
  std::map<std::string, std::size_t> file_index;
  for (const auto& r : rows)
    if (!file_index.count(r[1])) {
      std::filesystem::path f = r[1];
      std::string resolved = f.is_absolute() ? f.string() : (base / f).string();
      file_index[r[1]] = storage.size();
      if (looks_like_wav(resolved)) {
        Waveform w = load_wav(resolved);
        if (wav_sample_rate && *wav_sample_rate == 0)
          *wav_sample_rate = static_cast<std::uint32_t>(w.sample_rate);
        storage.push_back(compute_features(w, fe));
      } else {
        storage.push_back(load_features(resolved));
      }
    }
  std::vector<LabeledSegment> segments;
  for (const auto& r : rows) {
    const FeatureMatrix& feat = storage[file_index[r[1]]];
    auto begin = static_cast<std::size_t>(parse_int(r[2], "begin"));
    std::int64_t end_raw = parse_int(r[3], "end");
    std::size_t end = end_raw < 0 ? feat.num_frames : static_cast<std::size_t>(end_raw);
    segments.push_back({r[0], FrameView(feat, begin, end)});
  }
  return segments;
}

void write_or_print(const std::string& out_path, const std::string& body) {
  if (out_path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write output file: " + out_path);
  out << body;
  if (!out) throw IoError("write failed: " + out_path);
}

std::vector<double> parse_grid(const std::string& s) {
  auto parts = split_char(s, ':');
  if (parts.size() != 3) throw ValidationError("grid must be lo:hi:step, got '" + s + "'");
  return make_grid(parse_double(parts[0], "grid lo"), parse_double(parts[1], "grid hi"),
                   parse_double(parts[2], "grid step"));
}

struct TrainArgs {
  std::string inventory, gen_spec, segments, out, fingerprint;
  std::size_t components = 4, iters = 50, segments_per_phone = 60;
  std::uint64_t seed = 1;
  double var_floor = kDefaultVarianceFloor;
  FrontendFlags frontend;
};

int cmd_train(const TrainArgs& a) {
  PhoneInventory inv = load_inventory(a.inventory);
  TrainingSet generated;
  std::vector<FeatureMatrix> storage;
  std::vector<LabeledSegment> segments;
  std::string fp = a.fingerprint;
  if (!a.gen_spec.empty()) {
    GeneratorSpec spec = load_generator_spec(a.gen_spec);
    generated = synthesize_training_set(inv, spec, a.segments_per_phone, a.seed);
    segments = generated.segments;
    if (fp.empty()) fp = "synthetic:d=" + std::to_string(spec.dim);
  } else {
    std::uint32_t wav_sr = 0;
    segments = load_segments_file(a.segments, a.frontend.cfg, storage, &wav_sr);
    if (fp.empty()) fp = wav_sr ? a.frontend.cfg.fingerprint(wav_sr) : "none";
  }

  EmOptions opts;
  opts.var_floor = a.var_floor;
  TrainLog log;
  AcousticModel model = train_em(segments, inv, a.components, a.iters, a.seed, fp, opts, &log);
  for (const auto& [phone, lls] : log.loglik)
    for (std::size_t i = 0; i < lls.size(); ++i)
      std::printf("em %s iter %zu loglik %s\n", phone.c_str(), i + 1,
                  format_double(lls[i]).c_str());
  save_model(model, a.out);
  std::printf("wrote model: %s (%zu phones, K=%zu, D=%zu)\n", a.out.c_str(),
              model.inventory().size(), model.phone_gmm(0).num_components(),
              model.feature_dim());
  return 0;
}

struct PairArgs {
  std::string model, lexicon, inventory, script, script_file, input, out;
  std::string method = "APR";
  bool ignore_fingerprint = false;
  FrontendFlags frontend;
  AlignFlags align;
  VerifierConfig cfg;
};

struct PairInputs {
  AcousticModel model;
  Lexicon lexicon;
  std::string script;
  FeatureMatrix features;
};

PairInputs load_pair_inputs(const PairArgs& a) {
  PairInputs p;
  std::optional<PhoneInventory> expect;
  if (!a.inventory.empty()) expect = load_inventory(a.inventory);
  p.model = load_model(a.model, expect ? &*expect : nullptr);
  p.lexicon = load_lexicon(a.lexicon, p.model.inventory());
  if (!a.script_file.empty()) {
    std::ifstream in(a.script_file);
    if (!in) throw IoError("cannot open script file: " + a.script_file);
    p.script.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  } else {
    p.script = a.script;
  }
  p.features = load_input_features(a.input, a.frontend.cfg, p.model, a.ignore_fingerprint);
  return p;
}

int cmd_verify(const PairArgs& a) {
  PairInputs in = load_pair_inputs(a);
  VerifierConfig cfg = a.cfg;
  cfg.method = parse_method(a.method);
  cfg.validate(in.model.inventory().size());
  VerdictReport report =
      verify_pair(in.model, in.lexicon, in.script, in.features, cfg, a.align.resolved());
  std::cout << report_header() << '\n' << report_record(report) << '\n';
  return report.decision == Decision::match ? 0 : 1;
}

int cmd_align(const PairArgs& a) {
  PairInputs in = load_pair_inputs(a);
  auto lattice = script_to_lattice(in.script, in.lexicon);
  Alignment al = viterbi_align(in.features, lattice, in.model, a.align.resolved());
  std::ostringstream os;
  save_alignment(al, os);
  write_or_print(a.out, os.str());
  return 0;
}

struct GenArgs {
  std::string make_spec, perturb_of, inventory, spec, lexicon, out_dir;
  std::size_t dim = 4, gen_components = 1, random_lexicon = 0;
  std::size_t word_min_phones = 2, word_max_phones = 4;
  double box = 3.0, min_dist = 1.8, within_std = 1.0;
  double mean_jitter = 0.5, var_scale = 1.3;
  std::size_t pairs = 200, words_per_script = 5, edit_k = 4;
  std::string mode = "reassign", style = "read";
  double shift_gamma = 1.0, shift_offset = 0.0, gain_min = 1.0, gain_max = 1.0;
  double degenerate_frac = 0.0;
  std::uint64_t seed = 1;
};

int cmd_gen_corpus(const GenArgs& a) {
  PhoneInventory inv = a.inventory.empty() ? default_inventory() : load_inventory(a.inventory);

  if (!a.make_spec.empty()) {
    GeneratorSpec spec;
    if (!a.perturb_of.empty())
      spec = perturb_generator_spec(load_generator_spec(a.perturb_of), a.mean_jitter,
                                    a.var_scale, a.seed);
    else
      spec = random_generator_spec(inv, a.dim, a.box, a.min_dist, a.within_std,
                                   a.gen_components, a.seed);
    save_generator_spec(spec, a.make_spec);
    std::printf("wrote generator spec: %s (%zu phones, D=%zu)\n", a.make_spec.c_str(),
                spec.phones.size(), spec.dim);
    return 0;
  }

  if (a.spec.empty() || a.out_dir.empty())
    throw ValidationError("gen-corpus needs --spec and --out-dir (or --make-spec)");
  GeneratorSpec spec = load_generator_spec(a.spec);

  Lexicon lex;
  if (!a.lexicon.empty()) {
    lex = load_lexicon(a.lexicon, inv);
  } else if (a.random_lexicon > 0) {
    lex = random_lexicon(inv, a.random_lexicon, a.word_min_phones, a.word_max_phones,
                         mix_seed(a.seed, fnv1a("lexicon")));
    std::filesystem::create_directories(a.out_dir);
    save_lexicon(lex, (std::filesystem::path(a.out_dir) / "lexicon.txt").string());
    save_inventory(inv, (std::filesystem::path(a.out_dir) / "inventory.txt").string());
  } else {
    throw ValidationError("gen-corpus needs --lexicon or --random-lexicon N");
  }

  CorpusOptions co;
  co.num_pairs = a.pairs;
  co.words_per_script = a.words_per_script;
  co.mode = parse_mode(a.mode);
  co.edit_k = a.edit_k;
  co.style = a.style;
  co.degenerate_frac = a.degenerate_frac;
  co.seed = a.seed;
  co.out_dir = a.out_dir;
  if (a.shift_gamma != 1.0 || a.shift_offset != 0.0 || a.gain_min != 1.0 ||
      a.gain_max != 1.0) {
    StyleShift shift;
    shift.cov_inflation = a.shift_gamma;
    if (a.shift_offset != 0.0) shift.mean_offset.assign(spec.dim, a.shift_offset);
    shift.gain_min = a.gain_min;
    shift.gain_max = a.gain_max;
    co.shift = shift;
  }

  CorpusManifest manifest = generate_corpus(lex, spec, co);
  std::printf("wrote corpus: %s (%zu correct + %zu incorrect pairs)\n", a.out_dir.c_str(),
              manifest.count(PairLabel::correct), manifest.count(PairLabel::incorrect));
  return 0;
}

struct EvalArgs {
  std::string manifest, model, lexicon, out;
  std::vector<std::string> methods{"LRT", "APR"};
  double tau = 0.0, theta = 4.0;
  AlignFlags align;
  std::size_t jobs = 1;
};

int cmd_evaluate(const EvalArgs& a) {
  AcousticModel model = load_model(a.model);
  Lexicon lex = load_lexicon(a.lexicon, model.inventory());
  CorpusManifest manifest = load_manifest(a.manifest);
  auto scored = score_pairs(manifest, model, lex, a.align.resolved(), a.jobs);
  const std::size_t inv_size = model.inventory().size();

  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return scored[x].entry.pair_id < scored[y].entry.pair_id;
  });

  std::ostringstream os;
  os << report_header() << "\tlabel\tfailed\n";
  std::ostringstream summary;
  summary << "# method\tthreshold\tACC\tTP\tTN\tFP\tFN\tdelta\n";
  double baseline_acc = 0.0;
  for (std::size_t mi = 0; mi < a.methods.size(); ++mi) {
    VerifierConfig cfg;
    cfg.method = parse_method(a.methods[mi]);
    cfg.tau = a.tau;
    cfg.theta = a.theta;
    EvalResult res = evaluate_scored(scored, cfg, inv_size);
    for (std::size_t oi : order) {
      const auto& sp = scored[oi];
      VerdictReport r;
      r.pair_id = sp.entry.pair_id;
      r.method = cfg.method;
      r.tau = cfg.tau;
      r.theta = cfg.theta;
      if (!sp.failed) {
        r.llr = sp.llr;
        r.apr = sp.apr;
        r.two_stage =
            sp.llr <= cfg.tau ? static_cast<double>(inv_size) : sp.apr;
        r.num_phones = sp.num_phones;
        r.per_phone = sp.per_phone;
        r.decision = decide(scored_value(sp, cfg, inv_size), cfg);
      }
      os << report_record(r) << '\t' << label_name(sp.entry.label) << '\t'
         << (sp.failed ? 1 : 0) << '\n';
    }
    double threshold = cfg.method == Method::LRT ? cfg.tau : cfg.theta;
    double delta = mi == 0 ? 0.0 : res.accuracy() - baseline_acc;
    if (mi == 0) baseline_acc = res.accuracy();
    char row[256];
    std::snprintf(row, sizeof(row), "%s\t%s\t%.4f\t%zu\t%zu\t%zu\t%zu\t%+.4f\n",
                  method_name(cfg.method).c_str(), format_double(threshold).c_str(),
                  res.accuracy(), res.counts.tp, res.counts.tn, res.counts.fp, res.counts.fn,
                  delta);
    summary << row;
  }
  os << "# summary\n" << summary.str();
  write_or_print(a.out, os.str());
  if (!a.out.empty()) std::cout << summary.str();
  return 0;
}

struct SweepArgs {
  std::string manifest, model, lexicon, out;
  std::string method = "APR", grid = "1.5:39.0:0.25";
  double tau = 0.0;
  AlignFlags align;
  std::size_t jobs = 1;
};

int cmd_sweep(const SweepArgs& a) {
  AcousticModel model = load_model(a.model);
  Lexicon lex = load_lexicon(a.lexicon, model.inventory());
  CorpusManifest manifest = load_manifest(a.manifest);
  Method method = parse_method(a.method);
  VerifierConfig base;
  base.tau = a.tau;
  auto scored = score_pairs(manifest, model, lex, a.align.resolved(), a.jobs);
  SweepResult res = sweep_threshold_scored(scored, method, parse_grid(a.grid), base,
                                           model.inventory().size());
  std::ostringstream os;
  os << "# threshold\taccuracy\tTP\tTN\tFP\tFN\n";
  for (const auto& p : res.curve) {
    char row[160];
    std::snprintf(row, sizeof(row), "%s\t%.6f\t%zu\t%zu\t%zu\t%zu\n",
                  format_double(p.threshold).c_str(), p.accuracy, p.counts.tp, p.counts.tn,
                  p.counts.fp, p.counts.fn);
    os << row;
  }
  write_or_print(a.out, os.str());
  std::printf("best %s threshold %s accuracy %.4f\n", method_name(method).c_str(),
              format_double(res.best_threshold).c_str(), res.best.accuracy());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"utterance verification: does a recording match its text script?"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file");

  std::size_t jobs = default_jobs();
  app.add_option("--jobs", jobs, "Worker threads for batch commands");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train per-phoneme GMMs and the anti-model");
  train->add_option("--inventory", tr.inventory, "Phoneme inventory file")->required();
  auto* tr_spec = train->add_option("--gen-spec", tr.gen_spec,
                                    "Generator spec JSON to synthesize training data");
  auto* tr_segs = train->add_option("--segments", tr.segments,
                                    "Labeled segments file (phone file begin end)");
  tr_spec->excludes(tr_segs);
  train->add_option("--components", tr.components, "GMM components per phoneme");
  train->add_option("--iters", tr.iters, "Maximum EM iterations");
  train->add_option("--seed", tr.seed, "Training seed");
  train->add_option("--segments-per-phone", tr.segments_per_phone,
                    "Synthesized segments per phoneme (with --gen-spec)");
  train->add_option("--var-floor", tr.var_floor, "Variance floor");
  train->add_option("--fingerprint", tr.fingerprint, "Frontend fingerprint to record");
  train->add_option("--out", tr.out, "Output model file")->required();
  tr.frontend.attach(train);

  PairArgs pa;
  auto add_pair_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--model", pa.model, "Acoustic model file")->required();
    cmd->add_option("--lexicon", pa.lexicon, "Lexicon file")->required();
    cmd->add_option("--inventory", pa.inventory, "Inventory file (cross-checked)");
    cmd->add_option("--script", pa.script, "Script text");
    cmd->add_option("--script-file", pa.script_file, "Script text file");
    cmd->add_option("input", pa.input, "WAV file or feature dump")->required();
    cmd->add_flag("--ignore-fingerprint", pa.ignore_fingerprint,
                  "Skip the frontend fingerprint check");
    pa.frontend.attach(cmd);
    pa.align.attach(cmd);
  };

  auto* verify = app.add_subcommand("verify", "Verify one script/recording pair");
  add_pair_inputs(verify);
  verify->add_option("--method", pa.method, "LRT, APR or APR2STAGE");
  verify->add_option("--tau", pa.cfg.tau, "LLR threshold");
  verify->add_option("--theta", pa.cfg.theta, "Average-rank threshold");

  auto* align = app.add_subcommand("align", "Dump the forced alignment for one pair");
  add_pair_inputs(align);
  align->add_option("--out", pa.out, "Write the alignment dump here instead of stdout");

  GenArgs ga;
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic evaluation corpus");
  gen->add_option("--make-spec", ga.make_spec, "Write a random generator spec JSON and exit");
  gen->add_option("--perturb-of", ga.perturb_of, "Perturb an existing spec (with --make-spec)");
  gen->add_option("--mean-jitter", ga.mean_jitter, "Mean jitter for --perturb-of");
  gen->add_option("--var-scale", ga.var_scale, "Variance scale for --perturb-of");
  gen->add_option("--inventory", ga.inventory,
                  "Inventory file (default: built-in toy inventory)");
  gen->add_option("--dim", ga.dim, "Feature dimension for --make-spec");
  gen->add_option("--box", ga.box, "Half-width of the mean placement box");
  gen->add_option("--min-dist", ga.min_dist, "Minimum distance between phone means");
  gen->add_option("--within-std", ga.within_std, "Within-phone standard deviation");
  gen->add_option("--gen-components", ga.gen_components,
                  "Mixture components per generator phone");
  gen->add_option("--spec", ga.spec, "Generator spec JSON");
  gen->add_option("--lexicon", ga.lexicon, "Lexicon file");
  gen->add_option("--random-lexicon", ga.random_lexicon, "Generate a random lexicon of N words");
  gen->add_option("--word-min-phones", ga.word_min_phones, "Shortest random word");
  gen->add_option("--word-max-phones", ga.word_max_phones, "Longest random word");
  gen->add_option("--pairs", ga.pairs, "Number of correct pairs");
  gen->add_option("--words-per-script", ga.words_per_script, "Script length in words");
  gen->add_option("--mode", ga.mode, "none, delete, insert, substitute or reassign");
  gen->add_option("--edit-k", ga.edit_k, "Words edited per mismatched script");
  gen->add_option("--style", ga.style, "Style tag recorded in the manifest");
  gen->add_option("--shift-gamma", ga.shift_gamma, "Covariance inflation factor");
  gen->add_option("--shift-offset", ga.shift_offset,
                  "Global mean offset applied to every dimension");
  gen->add_option("--gain-min", ga.gain_min, "Per-utterance gain lower bound");
  gen->add_option("--gain-max", ga.gain_max, "Per-utterance gain upper bound");
  gen->add_option("--degenerate-frac", ga.degenerate_frac,
                  "Fraction of incorrect pairs replaced by degenerate audio");
  gen->add_option("--seed", ga.seed, "Corpus seed");
  gen->add_option("--out-dir", ga.out_dir, "Corpus output directory");

  EvalArgs ea;
  auto* eval = app.add_subcommand("evaluate", "Batch-evaluate a manifest");
  eval->add_option("--manifest", ea.manifest, "Corpus manifest")->required();
  eval->add_option("--model", ea.model, "Acoustic model file")->required();
  eval->add_option("--lexicon", ea.lexicon, "Lexicon file")->required();
  eval->add_option("--method", ea.methods,
                   "Methods to evaluate (repeatable; first is the baseline)")
      ->delimiter(',');
  eval->add_option("--tau", ea.tau, "LLR threshold");
  eval->add_option("--theta", ea.theta, "Average-rank threshold");
  eval->add_option("--out", ea.out, "Write per-pair records and summary here");
  ea.align.attach(eval);

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Sweep a decision threshold over a grid");
  sweep->add_option("--manifest", sa.manifest, "Corpus manifest")->required();
  sweep->add_option("--model", sa.model, "Acoustic model file")->required();
  sweep->add_option("--lexicon", sa.lexicon, "Lexicon file")->required();
  sweep->add_option("--method", sa.method, "LRT, APR or APR2STAGE");
  sweep->add_option("--grid", sa.grid, "Threshold grid lo:hi:step");
  sweep->add_option("--tau", sa.tau, "Fixed tau when sweeping theta for APR2STAGE");
  sweep->add_option("--out", sa.out, "Write the accuracy curve here");
  sa.align.attach(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) {
      if (tr.gen_spec.empty() && tr.segments.empty())
        throw ValidationError("train needs --gen-spec or --segments");
      return cmd_train(tr);
    }
    if (verify->parsed() || align->parsed()) {
      if (pa.script.empty() && pa.script_file.empty())
        throw ValidationError("need --script or --script-file");
      pa.frontend.cfg.validate();
      return align->parsed() ? cmd_align(pa) : cmd_verify(pa);
    }
    if (gen->parsed()) return cmd_gen_corpus(ga);
    if (eval->parsed()) {
      ea.jobs = jobs;
      return cmd_evaluate(ea);
    }
    if (sweep->parsed()) {
      sa.jobs = jobs;
      return cmd_sweep(sa);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 2;
}
