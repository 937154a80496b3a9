#include "sdfa/synth.hpp"

#include <algorithm>
#include <cmath>

#include "sdfa/rng.hpp"

namespace sdfa {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Pose {
  std::array<double, kBody25Joints> x{};
  std::array<double, kBody25Joints> y{};
};

// Upright template skeleton in a 640x480 pixel frame (y grows downward).
Pose base_pose() {
  Pose p;
  auto set = [&p](int j, double x, double y) {
    p.x[j] = x;
    p.y[j] = y;
  };
  set(0, 320, 140);                                   // nose
  set(1, 320, 170);                                   // neck
  set(2, 295, 172); set(3, 288, 210); set(4, 285, 245);   // right arm
  set(5, 345, 172); set(6, 352, 210); set(7, 355, 245);   // left arm
  set(8, 320, 280);                                   // mid hip
  set(9, 305, 280); set(10, 303, 350); set(11, 300, 420); // right leg
  set(12, 335, 280); set(13, 337, 350); set(14, 340, 420); // left leg
  set(15, 312, 132); set(16, 328, 132);               // eyes
  set(17, 305, 140); set(18, 335, 140);               // ears
  set(19, 345, 438); set(20, 352, 438); set(21, 336, 428); // left foot
  set(22, 295, 438); set(23, 288, 438); set(24, 304, 428); // right foot
  return p;
}

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// Rotates the whole pose about a ground pivot; direction +1 topples right,
// -1 left. angle in radians, 0 = upright.
Pose rotate_about_ground(const Pose& p, double angle, int direction,
                         double pivot_x, double pivot_y) {
  Pose out;
  const double ca = std::cos(angle), sa = std::sin(angle) * direction;
  for (int j = 0; j < kBody25Joints; ++j) {
    const double dx = p.x[j] - pivot_x;
    const double dy = p.y[j] - pivot_y;
    out.x[j] = pivot_x + dx * ca - dy * sa;
    out.y[j] = pivot_y + dx * sa + dy * ca;
  }
  return out;
}

Pose lerp(const Pose& a, const Pose& b, double s) {
  Pose out;
  for (int j = 0; j < kBody25Joints; ++j) {
    out.x[j] = a.x[j] + s * (b.x[j] - a.x[j]);
    out.y[j] = a.y[j] + s * (b.y[j] - a.y[j]);
  }
  return out;
}

Pose sitting_pose(const Pose& base) {
  Pose p = base;
  auto drop = [&p](int j, double dx, double dy) {
    p.x[j] += dx;
    p.y[j] += dy;
  };
  for (int j : {0, 1, 2, 3, 4, 5, 6, 7, 15, 16, 17, 18}) drop(j, 0, 80);
  for (int j : {8, 9, 12}) drop(j, 0, 80);  // hips to chair height
  drop(10, 25, 30);                          // knees forward
  drop(13, 25, 30);
  return p;
}

Pose bent_pose(const Pose& base) {
  Pose p = base;
  auto move = [&p](int j, double dx, double dy) {
    p.x[j] += dx;
    p.y[j] += dy;
  };
  for (int j : {0, 15, 16, 17, 18}) move(j, 35, 160);  // head toward the ground
  move(1, 25, 110);
  for (int j : {2, 5}) move(j, 25, 115);
  for (int j : {3, 6}) move(j, 30, 150);
  for (int j : {4, 7}) move(j, 35, 190);               // hands reach down
  move(8, 0, 15);
  for (int j : {9, 12}) move(j, 0, 15);
  return p;
}

struct SampleParams {
  std::string kind;        // "fall" or an ADL kind
  std::string fall_type;   // nonempty for falls
  int transition_start = 0;
  int transition_frames = 1;
  int direction = 1;
  double angle_max = kPi / 2;
};

void build_trajectory(const SampleParams& params, const SynthSpec& spec,
                      const Pose& base, std::vector<Pose>& frames, Rng& rng) {
  const int t_len = spec.frames;
  frames.resize(t_len);
  const double pivot_x = base.x[8], pivot_y = 430.0;

  if (params.kind == "fall" || params.kind == "lie_down") {
    for (int t = 0; t < t_len; ++t) {
      const double u = (t - params.transition_start) /
                       static_cast<double>(params.transition_frames);
      const double angle = params.angle_max * smoothstep(u);
      frames[t] = rotate_about_ground(base, angle, params.direction, pivot_x, pivot_y);
    }
  } else if (params.kind == "sit") {
    const Pose target = sitting_pose(base);
    for (int t = 0; t < t_len; ++t) {
      const double u = (t - params.transition_start) /
                       static_cast<double>(params.transition_frames);
      frames[t] = lerp(base, target, smoothstep(u));
    }
  } else if (params.kind == "pick_up") {
    const Pose target = bent_pose(base);
    for (int t = 0; t < t_len; ++t) {
      const double u = std::clamp((t - params.transition_start) /
                                      static_cast<double>(params.transition_frames),
                                  0.0, 1.0);
      // down then back up
      const double s = u < 0.5 ? smoothstep(2.0 * u) : smoothstep(2.0 * (1.0 - u));
      frames[t] = lerp(base, target, s);
    }
  } else {  // walk
    const double speed = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(1.0, 2.0);
    const double period = rng.uniform(18.0, 26.0);
    for (int t = 0; t < t_len; ++t) {
      Pose p = base;
      const double phase = 2.0 * kPi * t / period;
      const double swing = 12.0 * std::sin(phase);
      for (int j : {3, 4}) p.x[j] += swing;        // arms counter-swing
      for (int j : {6, 7}) p.x[j] -= swing;
      for (int j : {10, 11}) p.x[j] -= 0.8 * swing;  // legs
      for (int j : {13, 14}) p.x[j] += 0.8 * swing;
      for (int j = 0; j < kBody25Joints; ++j) {
        p.x[j] += speed * t;
        p.y[j] += 2.0 * std::sin(2.0 * phase);     // slight bob
      }
      frames[t] = p;
    }
  }
}

}  // namespace

void SynthSpec::validate() const {
  if (n_per_class < 1) throw ConfigError("synth: n_per_class must be >= 1");
  if (frames < 8) throw ConfigError("synth: frames must be >= 8");
  if (fall_duration_frames < 1 || fall_duration_frames >= frames) {
    throw ConfigError("synth: fall_duration_frames must lie in [1, frames)");
  }
  if (noise_std < 0.0) throw ConfigError("synth: noise_std must be >= 0");
  if (adl_kinds.empty()) throw ConfigError("synth: adl_kinds must not be empty");
  for (const auto& kind : adl_kinds) {
    if (kind != "sit" && kind != "lie_down" && kind != "walk" && kind != "pick_up") {
      throw ConfigError("synth: unknown ADL kind '" + kind + "'");
    }
    if (kind == "lie_down" && 4 * fall_duration_frames >= frames) {
      throw ConfigError("synth: lie_down needs frames > 4*fall_duration_frames");
    }
  }
}

const std::vector<std::string>& synth_fall_kinds() {
  static const std::vector<std::string> kinds = {"forward", "backward", "sideways",
                                                 "knees", "sitting"};
  return kinds;
}

std::vector<SkeletonSequence> generate_synthetic_dataset(const SynthSpec& spec) {
  spec.validate();
  const auto& fall_kinds = synth_fall_kinds();

  std::vector<std::pair<std::string, std::string>> plan;  // (kind, fall_type)
  for (int i = 0; i < spec.n_per_class; ++i) {
    plan.emplace_back("fall", fall_kinds[i % fall_kinds.size()]);
  }
  for (const auto& kind : spec.adl_kinds) {
    for (int i = 0; i < spec.n_per_class; ++i) plan.emplace_back(kind, "");
  }

  const Pose base0 = base_pose();
  std::vector<SkeletonSequence> out;
  out.reserve(plan.size());
  Rng master(spec.seed);

  for (std::size_t idx = 0; idx < plan.size(); ++idx) {
    Rng rng = master.fork(idx);
    const auto& [kind, fall_type] = plan[idx];

    SampleParams params;
    params.kind = kind;
    params.fall_type = fall_type;
    params.direction = rng.uniform() < 0.5 ? 1 : -1;

    if (kind == "fall") {
      params.transition_frames = spec.fall_duration_frames;
      // Type variations: toppling direction and final angle.
      const double type_angle[] = {1.00, 0.95, 1.05, 0.90, 0.97};
      std::size_t type_idx = 0;
      for (std::size_t k = 0; k < fall_kinds.size(); ++k) {
        if (fall_kinds[k] == fall_type) type_idx = k;
      }
      if (fall_type == "backward") params.direction = -params.direction;
      params.angle_max = (kPi / 2) * type_angle[type_idx];
    } else if (kind == "lie_down") {
      params.transition_frames = 4 * spec.fall_duration_frames;
    } else if (kind == "sit") {
      params.transition_frames = std::min(spec.frames - 2, 3 * spec.fall_duration_frames);
    } else if (kind == "pick_up") {
      params.transition_frames = std::min(spec.frames - 2, 4 * spec.fall_duration_frames);
    }
    const int latest_start = std::max(1, spec.frames - params.transition_frames - 2);
    params.transition_start = 1 + static_cast<int>(rng.below(
        static_cast<std::uint64_t>(std::max(1, latest_start))));

    // Per-sequence body placement and per-subject stature.
    Pose base = base0;
    const double scale = rng.uniform(0.9, 1.1);
    const double dx = rng.uniform(-50.0, 50.0), dy = rng.uniform(-15.0, 15.0);
    for (int j = 0; j < kBody25Joints; ++j) {
      base.x[j] = 320.0 + scale * (base.x[j] - 320.0) + dx;
      base.y[j] = 430.0 + scale * (base.y[j] - 430.0) + dy;
    }

    std::vector<Pose> poses;
    build_trajectory(params, spec, base, poses, rng);

    SkeletonSequence seq;
    seq.fps = spec.fps;
    seq.meta.subject_id = 1 + static_cast<int>(idx % 8);
    seq.meta.view_id = 1 + static_cast<int>(idx % 3);
    seq.meta.setup_id = 1 + static_cast<int>(idx % 4);
    seq.meta.trial_id = 1 + static_cast<int>(idx % 3);
    seq.meta.action_label = kind;
    seq.meta.fall_type = fall_type;
    seq.meta.is_fall = (kind == "fall");

    // Camera view: 1 identity, 2 mirrored, 3 shifted and slightly scaled.
    const int view = seq.meta.view_id;
    seq.frames.resize(spec.frames);
    for (int t = 0; t < spec.frames; ++t) {
      Frame& f = seq.frames[t];
      for (int j = 0; j < kBody25Joints; ++j) {
        double x = poses[t].x[j], y = poses[t].y[j];
        if (view == 2) x = 640.0 - x;
        if (view == 3) {
          x = 0.92 * x + 40.0;
          y = 0.92 * y + 20.0;
        }
        x += rng.normal(0.0, spec.noise_std);
        y += rng.normal(0.0, spec.noise_std);
        f.joints[j].x = static_cast<float>(x);
        f.joints[j].y = static_cast<float>(y);
        f.joints[j].confidence = static_cast<float>(0.85 + 0.1 * rng.uniform());
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace sdfa
