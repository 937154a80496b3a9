// sdfa: skeleton fall-detection pipeline driver.
// Subcommands: preprocess, synth, train, eval, infer, flops.
// Exit codes: 0 success, 1 data/config error, 2 usage error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sdfa/checkpoint.hpp"
#include "sdfa/config.hpp"
#include "sdfa/manifest.hpp"
#include "sdfa/metrics.hpp"
#include "sdfa/model.hpp"
#include "sdfa/openpose.hpp"
#include "sdfa/preprocess.hpp"
#include "sdfa/runtime.hpp"
#include "sdfa/split.hpp"
#include "sdfa/synth.hpp"
#include "sdfa/train.hpp"

namespace fs = std::filesystem;
using namespace sdfa;

namespace {

struct WallClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

std::vector<std::string> collect_argv(int argc, char** argv) {
  return {argv, argv + argc};
}

// Cleans every sequence, resolves target 0 to the longest cleaned length,
// then pads, transforms and normalizes.
std::vector<SkeletonSequence> run_pipeline(std::vector<SkeletonSequence> seqs,
                                           int target) {
  for (auto& s : seqs) s = remove_empty_frames(s);
  if (target == 0) {
    std::size_t longest = 0;
    for (const auto& s : seqs) longest = std::max(longest, s.frames.size());
    target = static_cast<int>(longest);
  }
  for (auto& s : seqs) {
    s = pad_to_length(s, target);
    s = view_invariant_transform(s);
    s = normalize_sequence(s);
  }
  return seqs;
}

struct SplitFlags {
  std::string protocol = "seventy_thirty";
  std::string train_subjects, train_views, train_setups, train_trials;
  std::string held_out_fall;
  double train_fraction = 0.7;
  std::uint64_t split_seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--split", protocol,
                    "protocol: seventy_thirty|cross_subject|cross_view|"
                    "cross_setup|cross_trial|cross_fall");
    cmd->add_option("--train-subjects", train_subjects, "comma list of train subject ids");
    cmd->add_option("--train-views", train_views, "comma list of train view ids");
    cmd->add_option("--train-setups", train_setups, "comma list of train setup ids");
    cmd->add_option("--train-trials", train_trials, "comma list of train trial ids");
    cmd->add_option("--held-out-fall", held_out_fall, "fall type held out for testing");
    cmd->add_option("--train-fraction", train_fraction, "train share for sampled splits");
    cmd->add_option("--split-seed", split_seed, "seed for sampled splits");
  }

  SplitSpec spec() const {
    auto parse_ids = [](const std::string& s) {
      std::set<int> out;
      std::string item;
      std::stringstream ss(s);
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.insert(std::stoi(item));
      }
      return out;
    };
    SplitSpec spec;
    spec.protocol = protocol_from_string(protocol);
    spec.train_subjects = parse_ids(train_subjects);
    spec.train_views = parse_ids(train_views);
    spec.train_setups = parse_ids(train_setups);
    spec.train_trials = parse_ids(train_trials);
    spec.held_out_fall_type = held_out_fall;
    spec.train_fraction = train_fraction;
    spec.seed = split_seed;
    return spec;
  }
};

SequenceMeta meta_from_sidecar(const fs::path& dir, double* fps) {
  SequenceMeta meta;
  const fs::path sidecar = dir / "meta.json";
  if (!fs::exists(sidecar)) return meta;
  std::ifstream in(sidecar);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(sidecar.string() + ": " + e.what());
  }
  meta.subject_id = doc.value("subject_id", 0);
  meta.view_id = doc.value("view_id", 0);
  meta.setup_id = doc.value("setup_id", 0);
  meta.trial_id = doc.value("trial_id", 0);
  meta.action_label = doc.value("action_label", std::string());
  meta.fall_type = doc.value("fall_type", std::string());
  meta.is_fall = doc.value("is_fall", false);
  if (fps != nullptr && doc.contains("fps")) *fps = doc.at("fps").get<double>();
  return meta;
}

SkeletonSequence ingest_openpose_dir(const fs::path& dir, double default_fps) {
  double fps = default_fps;
  SequenceMeta meta = meta_from_sidecar(dir, &fps);
  auto candidates = load_openpose_dir(dir);
  auto tracks = associate_tracks(candidates);
  SkeletonSequence seq;
  seq.frames = select_primary_skeleton(tracks);
  seq.fps = fps;
  seq.meta = meta;
  return seq;
}

// ---------------------------------------------------------------------------

int cmd_preprocess(const fs::path& in_dir, const fs::path& out_file, int target,
                   double fps, const std::vector<std::string>& argv) {
  WallClock clock;
  if (!fs::is_directory(in_dir)) throw DataError(in_dir.string() + " is not a directory");

  std::vector<fs::path> seq_dirs;
  bool has_json = false;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.is_directory()) seq_dirs.push_back(entry.path());
    if (entry.is_regular_file() && entry.path().extension() == ".json") has_json = true;
  }
  std::sort(seq_dirs.begin(), seq_dirs.end());

  std::vector<SkeletonSequence> seqs;
  if (has_json && seq_dirs.empty()) {
    seqs.push_back(ingest_openpose_dir(in_dir, fps));
  } else if (!seq_dirs.empty()) {
    for (const auto& dir : seq_dirs) seqs.push_back(ingest_openpose_dir(dir, fps));
  } else {
    throw DataError(in_dir.string() + " holds neither keypoint files nor sequence directories");
  }

  seqs = run_pipeline(std::move(seqs), target);
  if (seqs.size() == 1) {
    save_sequence(out_file, seqs.front());
  } else {
    save_dataset(out_file, seqs);
  }
  std::cout << "wrote " << seqs.size() << " sequence(s) of length "
            << seqs.front().frames.size() << " to " << out_file.string() << "\n";

  RunManifest m{"preprocess", argv, "", 0, {in_dir.string()}, {out_file.string()},
                clock.ms()};
  write_manifest(out_file.string() + ".run.json", m);
  return 0;
}

int cmd_synth(const fs::path& out_file, const SynthSpec& spec,
              const std::vector<std::string>& argv) {
  WallClock clock;
  auto seqs = generate_synthetic_dataset(spec);
  save_dataset(out_file, seqs);
  std::cout << "wrote " << seqs.size() << " synthetic sequences to "
            << out_file.string() << "\n";

  RunManifest m{"synth", argv, "", spec.seed, {}, {out_file.string()}, clock.ms()};
  write_manifest(out_file.string() + ".run.json", m);
  return 0;
}

int cmd_train(const fs::path& data_file, const fs::path& ckpt_file,
              const PipelineConfig& cfg, const SplitSpec& split_spec,
              const std::string& history_file, const std::vector<std::string>& argv) {
  WallClock clock;
  auto dataset = run_pipeline(load_dataset(data_file), cfg.target_length);
  Split split = make_split(dataset, split_spec);

  SdfaModel model = build_model<float>(cfg.model, cfg.train.seed);
  TrainResult result = train(model, dataset, split, cfg.train);
  save_checkpoint(ckpt_file, model);
  if (!history_file.empty()) write_history(history_file, result.history);

  const EpochStats& last = result.history.back();
  std::cout << "trained " << result.history.size() << " epochs on "
            << split.train.size() << " samples; final loss " << last.train_loss
            << ", train accuracy " << last.train_acc << "\n";
  std::cout << "checkpoint: " << ckpt_file.string() << "\n";

  RunManifest m{"train", argv, pipeline_digest(cfg), cfg.train.seed,
                {data_file.string()}, {ckpt_file.string()}, clock.ms()};
  if (!history_file.empty()) m.outputs.push_back(history_file);
  write_manifest(ckpt_file.string() + ".run.json", m);
  return 0;
}

int cmd_eval(const fs::path& ckpt_file, const fs::path& data_file,
             const fs::path& report_file, int target, const SplitSpec& split_spec,
             int fold, std::uint64_t seed, const std::vector<std::string>& argv) {
  WallClock clock;
  SdfaModel model = load_checkpoint(ckpt_file);
  auto dataset = run_pipeline(load_dataset(data_file), target);
  Split split = make_split(dataset, split_spec);

  std::vector<double> scores = predict_scores(model, dataset, split.test);
  std::vector<int> labels;
  labels.reserve(split.test.size());
  for (int idx : split.test) labels.push_back(label_of(dataset[idx]));
  MetricsReport metrics = compute_metrics(scores, labels);

  PipelineConfig effective;
  effective.model = model.config;
  effective.train.seed = seed;
  effective.target_length = target;
  EvalRecord record{to_string(split_spec.protocol), fold, metrics,
                    pipeline_digest(effective), seed};
  write_results(report_file, {record});
  std::cout << format_results({record});

  RunManifest m{"eval", argv, record.config_digest, seed,
                {ckpt_file.string(), data_file.string()},
                {report_file.string()}, clock.ms()};
  write_manifest(report_file.string() + ".run.json", m);
  return 0;
}

int cmd_infer(const fs::path& ckpt_file, const fs::path& seq_file, int target,
              const std::string& manifest_file, const std::vector<std::string>& argv) {
  WallClock clock;
  SdfaModel model = load_checkpoint(ckpt_file);
  auto seqs = run_pipeline({load_sequence(seq_file)}, target);
  Tensor4<float> x = to_feature_tensor<float>(seqs, model.config.in_channels);
  Tensor4<float> probs = nn::softmax_probs(forward_eval(model, x));
  std::printf("fall_probability %.9g\n", static_cast<double>(probs.at(0, 1, 0, 0)));

  if (!manifest_file.empty()) {
    RunManifest m{"infer", argv, "", 0,
                  {ckpt_file.string(), seq_file.string()}, {}, clock.ms()};
    write_manifest(manifest_file, m);
  }
  return 0;
}

int cmd_flops(const PipelineConfig& cfg, int frames,
              const std::string& manifest_file, const std::vector<std::string>& argv) {
  WallClock clock;
  SdfaModel model = build_model<float>(cfg.model, cfg.train.seed);
  const std::size_t params = count_params(model);
  const std::size_t macs = count_flops(model, cfg.model.in_channels, frames,
                                       model.graph.num_joints);
  std::printf("params %zu (%.3f M)\n", params, static_cast<double>(params) / 1e6);
  std::printf("macs %zu (%.3f G) at input (%d,%d,%d)\n", macs,
              static_cast<double>(macs) / 1e9, cfg.model.in_channels, frames,
              model.graph.num_joints);
  std::printf("published reference model: 0.34 M params, 1.15 G\n");

  if (!manifest_file.empty()) {
    RunManifest m{"flops", argv, pipeline_digest(cfg), cfg.train.seed, {}, {},
                  clock.ms()};
    write_manifest(manifest_file, m);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"skeleton-based fall detection pipeline"};
  app.require_subcommand(1);
  const std::vector<std::string> full_argv = collect_argv(argc, argv);

  // preprocess
  auto* pre = app.add_subcommand("preprocess",
                                 "convert OpenPose keypoint directories to canonical sequences");
  std::string pre_in, pre_out;
  int pre_target = 300;
  double pre_fps = 30.0;
  pre->add_option("in-dir", pre_in, "directory of keypoint files, or of sequence directories")
      ->required();
  pre->add_option("out-file", pre_out, "canonical sequence/dataset file")->required();
  pre->add_option("--target", pre_target, "frame count after padding/subsampling");
  pre->add_option("--fps", pre_fps, "frame rate when no sidecar provides one");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic fall/ADL dataset");
  std::string synth_out, synth_spec_file, synth_adl;
  SynthSpec synth_spec;
  synth->add_option("--out", synth_out, "output dataset file")->required();
  synth->add_option("--spec", synth_spec_file, "key=value spec file");
  auto* opt_n = synth->add_option("--n", synth_spec.n_per_class, "sequences per class");
  auto* opt_frames = synth->add_option("--frames", synth_spec.frames, "sequence length");
  auto* opt_seed = synth->add_option("--seed", synth_spec.seed, "generator seed");
  auto* opt_noise = synth->add_option("--noise", synth_spec.noise_std, "pixel noise std");
  auto* opt_dur = synth->add_option("--fall-duration", synth_spec.fall_duration_frames,
                                    "fall transition frames");
  synth->add_option("--adl", synth_adl, "comma list from sit,lie_down,walk,pick_up");

  // train
  auto* tr = app.add_subcommand("train", "train a model on a canonical dataset");
  std::string tr_data, tr_ckpt, tr_config, tr_history, tr_fusion;
  std::optional<int> tr_epochs, tr_batch, tr_target;
  std::optional<std::uint64_t> tr_seed;
  SplitFlags tr_split;
  tr->add_option("--data", tr_data, "canonical dataset file")->required();
  tr->add_option("--out-checkpoint", tr_ckpt, "checkpoint path")->required();
  tr->add_option("--config", tr_config, "key=value config file");
  tr->add_option("--history", tr_history, "per-epoch history file");
  tr->add_option("--epochs", tr_epochs, "override epoch count");
  tr->add_option("--batch-size", tr_batch, "override batch size");
  tr->add_option("--seed", tr_seed, "override training seed");
  tr->add_option("--target", tr_target, "pad target (0: longest sequence)");
  tr->add_option("--fusion", tr_fusion, "joint|motion|early_fused");
  tr_split.attach(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint under a protocol");
  std::string ev_ckpt, ev_data, ev_report;
  int ev_target = 0, ev_fold = 0;
  std::uint64_t ev_seed = 0;
  SplitFlags ev_split;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--data", ev_data, "canonical dataset file")->required();
  ev->add_option("--report", ev_report, "metrics report file")->required();
  ev->add_option("--target", ev_target, "pad target (0: longest sequence)");
  ev->add_option("--fold", ev_fold, "fold index recorded in the report");
  ev->add_option("--seed", ev_seed, "seed recorded in the report");
  ev_split.attach(ev);

  // infer
  auto* inf = app.add_subcommand("infer", "print the fall probability of one sequence");
  std::string inf_ckpt, inf_seq, inf_manifest;
  int inf_target = 0;
  inf->add_option("--checkpoint", inf_ckpt, "checkpoint path")->required();
  inf->add_option("--sequence", inf_seq, "canonical sequence file")->required();
  inf->add_option("--target", inf_target, "pad target (0: keep length)");
  inf->add_option("--manifest", inf_manifest, "write a run manifest here");

  // flops
  auto* fl = app.add_subcommand("flops", "print analytic parameter and MAC counts");
  std::string fl_config, fl_manifest;
  int fl_frames = 300;
  fl->add_option("--config", fl_config, "key=value config file");
  fl->add_option("--frames", fl_frames, "input frame count");
  fl->add_option("--manifest", fl_manifest, "write a run manifest here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*pre) return cmd_preprocess(pre_in, pre_out, pre_target, pre_fps, full_argv);

    if (*synth) {
      SynthSpec spec = synth_spec;
      if (!synth_spec_file.empty()) {
        spec = synth_spec_from_key_values(load_key_values(synth_spec_file), spec);
        // explicit flags win over the spec file
        if (opt_n->count()) spec.n_per_class = synth_spec.n_per_class;
        if (opt_frames->count()) spec.frames = synth_spec.frames;
        if (opt_seed->count()) spec.seed = synth_spec.seed;
        if (opt_noise->count()) spec.noise_std = synth_spec.noise_std;
        if (opt_dur->count()) spec.fall_duration_frames = synth_spec.fall_duration_frames;
      }
      if (!synth_adl.empty()) {
        spec.adl_kinds.clear();
        std::stringstream ss(synth_adl);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) spec.adl_kinds.push_back(item);
        }
      }
      spec.validate();
      return cmd_synth(synth_out, spec, full_argv);
    }

    if (*tr) {
      PipelineConfig cfg;
      if (!tr_config.empty()) cfg = apply_key_values(load_key_values(tr_config));
      if (tr_epochs) cfg.train.epochs = *tr_epochs;
      if (tr_batch) cfg.train.batch_size = *tr_batch;
      if (tr_seed) cfg.train.seed = *tr_seed;
      if (tr_target) cfg.target_length = *tr_target;
      if (!tr_fusion.empty()) cfg.model.fusion = fusion_from_string(tr_fusion);
      cfg.model.validate();
      cfg.train.validate();
      return cmd_train(tr_data, tr_ckpt, cfg, tr_split.spec(), tr_history, full_argv);
    }

    if (*ev) {
      return cmd_eval(ev_ckpt, ev_data, ev_report, ev_target, ev_split.spec(),
                      ev_fold, ev_seed, full_argv);
    }

    if (*inf) return cmd_infer(inf_ckpt, inf_seq, inf_target, inf_manifest, full_argv);

    if (*fl) {
      PipelineConfig cfg;
      if (!fl_config.empty()) cfg = apply_key_values(load_key_values(fl_config));
      return cmd_flops(cfg, fl_frames, fl_manifest, full_argv);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
