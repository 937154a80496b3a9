// CLI surface checks: OpenPose ingestion through `preprocess`, counter
// delegation through `flops`, and the error-path exit codes. argv[1] is the
// sdfa binary. Prints one line per check; exit code is the failure count.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdfa/model.hpp"
#include "sdfa/openpose.hpp"
#include "sdfa/rng.hpp"
#include "sdfa/skeleton.hpp"

namespace fs = std::filesystem;
using namespace sdfa;

namespace {

std::string g_cli;
fs::path g_dir;
int g_failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  if (!ok) ++g_failures;
}

int run(const std::string& args, std::string* out = nullptr) {
  const fs::path capture = g_dir / "capture.txt";
  const std::string cmd = g_cli + " " + args + " > " + capture.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (out != nullptr) {
    std::ifstream in(capture);
    std::stringstream ss;
    ss << in.rdbuf();
    *out = ss.str();
  }
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

// Writes an OpenPose-style keypoint directory for one synthetic walk.
void write_openpose_dir(const fs::path& dir, int frames, float speed,
                        const nlohmann::json* sidecar) {
  fs::create_directories(dir);
  Rng rng(5);
  for (int t = 0; t < frames; ++t) {
    Frame person;
    for (int v = 0; v < kBody25Joints; ++v) {
      person.joints[v] = {100.0f + speed * t + 2.0f * v, 200.0f + 3.0f * v, 0.9f};
    }
    std::vector<Frame> people;
    if (t != 2) people.push_back(person);  // frame 2: nobody detected
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06d.json", t);
    std::ofstream out(dir / name);
    out << openpose_frame_to_json(people).dump();
  }
  if (sidecar != nullptr) {
    std::ofstream out(dir / "meta.json");
    out << sidecar->dump();
  }
}

void check_preprocess_single() {
  const fs::path in_dir = g_dir / "op_single";
  write_openpose_dir(in_dir, 12, 1.5f, nullptr);
  const fs::path out_file = g_dir / "single.json";
  std::string out;
  const int rc = run("preprocess " + in_dir.string() + " " + out_file.string() +
                         " --target 20",
                     &out);
  if (rc != 0) {
    report("preprocess-single", false, "exit code " + std::to_string(rc));
    return;
  }
  auto seq = load_sequence(out_file);
  const bool ok = seq.frames.size() == 20 && !seq.meta.is_fall &&
                  fs::exists(out_file.string() + ".run.json");
  report("preprocess-single", ok,
         "20-frame canonical sequence + run manifest from keypoint files");
}

void check_preprocess_dataset() {
  const fs::path root = g_dir / "op_multi";
  nlohmann::json meta_a = {{"subject_id", 1}, {"view_id", 2}, {"is_fall", true},
                           {"fall_type", "forward"}, {"action_label", "fall"}};
  nlohmann::json meta_b = {{"subject_id", 2}, {"view_id", 1}, {"is_fall", false},
                           {"action_label", "walk"}, {"fps", 25.0}};
  write_openpose_dir(root / "seq_a", 10, 4.0f, &meta_a);
  write_openpose_dir(root / "seq_b", 14, 1.0f, &meta_b);
  const fs::path out_file = g_dir / "multi.json";
  const int rc = run("preprocess " + root.string() + " " + out_file.string() +
                     " --target 16");
  if (rc != 0) {
    report("preprocess-dataset", false, "exit code " + std::to_string(rc));
    return;
  }
  auto data = load_dataset(out_file);
  bool ok = data.size() == 2;
  if (ok) {
    ok &= data[0].meta.is_fall && data[0].meta.fall_type == "forward";
    ok &= !data[1].meta.is_fall && data[1].fps == 25.0;
    ok &= data[0].frames.size() == 16 && data[1].frames.size() == 16;
  }
  report("preprocess-dataset", ok, "two sequences with sidecar metadata");
}

void check_flops_delegation() {
  std::string out;
  const int rc = run("flops", &out);
  auto model = build_model<float>(ModelConfig{}, 0);
  const std::string want_params = "params " + std::to_string(count_params(model));
  const std::string want_macs =
      "macs " + std::to_string(count_flops(model, 3, 300, 25));
  const bool ok = rc == 0 && out.find(want_params) != std::string::npos &&
                  out.find(want_macs) != std::string::npos &&
                  out.find("0.34 M params, 1.15 G") != std::string::npos;
  report("flops-delegation", ok,
         ok ? "counters match the library and reference points print"
            : "unexpected output: " + out);
}

void check_exit_codes() {
  std::string out;
  const int usage_rc = run("train --no-such-flag", &out);
  bool ok = usage_rc == 2;
  const int data_rc = run("train --data " + (g_dir / "missing.json").string() +
                              " --out-checkpoint " + (g_dir / "x.ckpt").string(),
                          &out);
  ok &= data_rc == 1;
  // the error is one machine-parseable line on stderr
  ok &= out.rfind("error: ", 0) == 0;
  ok &= std::count(out.begin(), out.end(), '\n') == 1;
  const int unknown_cmd = run("frobnicate", &out);
  ok &= unknown_cmd == 2;
  report("exit-codes", ok,
         "usage errors exit 2, data errors exit 1 with a one-line message");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: cli_tests <path-to-sdfa-cli>\n");
    return 64;
  }
  g_cli = argv[1];
  g_dir = fs::temp_directory_path() / "sdfa_cli_tests";
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);

  check_preprocess_single();
  check_preprocess_dataset();
  check_flops_delegation();
  check_exit_codes();

  if (g_failures == 0) std::printf("all CLI checks passed\n");
  return g_failures;
}
