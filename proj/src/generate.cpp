#include "ally/generate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ally/dualhead.hpp"
#include "ally/error.hpp"
#include "ally/io.hpp"

namespace ally {

AscentConfig AscentConfig::with_range(std::size_t dim, double lo, double hi) {
  AscentConfig c;
  c.clip_lo.assign(dim, lo);
  c.clip_hi.assign(dim, hi);
  return c;
}

void AscentConfig::validate(std::size_t dim) const {
  require(std::isfinite(step_size) && step_size >= 0.0, ErrorKind::config,
          "ascent: step_size must be finite and >= 0");
  require(snapshot_every >= 1, ErrorKind::config, "ascent: snapshot_every must be >= 1");
  require(clip_lo.size() == dim && clip_hi.size() == dim, ErrorKind::config,
          "ascent: clip range needs one [lo, hi] pair per feature (" + std::to_string(dim) + ")");
  for (std::size_t j = 0; j < dim; ++j)
    require(clip_lo[j] < clip_hi[j], ErrorKind::config,
            "ascent: clip range lo must be < hi at feature " + std::to_string(j));
}

InputGradient input_gradient(const ModelParams& params, std::span<const double> x) {
  require(!params.dual_head.empty(), ErrorKind::contract, "input_gradient: dual head not trained");
  require(x.size() == params.input_dim(), ErrorKind::shape,
          "input_gradient: input has " + std::to_string(x.size()) + " features, model expects " +
              std::to_string(params.input_dim()));
  const Matrix in(1, x.size(), std::vector<double>(x.begin(), x.end()));
  MlpCache cb, ch;
  const Matrix emb = mlp_forward(params.backbone, in, &cb);
  const Matrix z = mlp_forward(params.dual_head, emb, &ch);
  InputGradient out;
  out.score = softplus(z(0, 0));
  Matrix g(1, 1, sigmoid(z(0, 0)));
  Matrix g_emb, g_x;
  mlp_backward(params.dual_head, ch, g, &g_emb);
  mlp_backward(params.backbone, cb, g_emb, &g_x);
  out.grad_x = g_x.values();
  return out;
}

AscentTrajectory ascend_input(const ModelParams& params, std::span<const double> x0,
                              const AscentConfig& config) {
  config.validate(x0.size());
  AscentTrajectory traj;
  std::vector<double> x(x0.begin(), x0.end());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], config.clip_lo[j], config.clip_hi[j]);

  InputGradient g = input_gradient(params, x);
  if (!std::isfinite(g.score)) {
    traj.aborted = true;
    traj.diagnostic = "non-finite score at step 0";
    traj.snapshots.push_back({0, x, g.score});
    return traj;
  }
  traj.snapshots.push_back({0, x, g.score});

  std::size_t step = 0;
  while (step < config.n_steps) {
    bool moved = false;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double next = std::clamp(x[j] + config.step_size * g.grad_x[j], config.clip_lo[j],
                                     config.clip_hi[j]);
      moved = moved || next != x[j];
      x[j] = next;
    }
    ++step;
    if (!moved) {
      traj.stalled = true;
      traj.diagnostic = "update left x unchanged at step " + std::to_string(step);
      break;
    }
    g = input_gradient(params, x);
    if (!std::isfinite(g.score) ||
        !std::all_of(g.grad_x.begin(), g.grad_x.end(), [](double v) { return std::isfinite(v); })) {
      traj.aborted = true;
      traj.diagnostic = "non-finite score or gradient at step " + std::to_string(step);
      traj.steps_taken = step;
      return traj;
    }
    if (step % config.snapshot_every == 0 || step == config.n_steps)
      traj.snapshots.push_back({step, x, g.score});
  }
  traj.steps_taken = step;
  if (traj.snapshots.back().step != step) traj.snapshots.push_back({step, x, g.score});
  if (traj.final_score() < traj.initial_score()) {
    traj.stalled = true;
    if (traj.diagnostic.empty()) traj.diagnostic = "final score below initial score";
  }
  return traj;
}

std::vector<std::size_t> least_informative(const ModelParams& params, const Matrix& x,
                                           double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorKind::input,
          "least_informative: fraction must lie in (0, 1]");
  require(!params.dual_head.empty(), ErrorKind::contract, "least_informative: dual head not trained");
  const auto scores = predict_duals(params.dual_head, embed(params, x));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(scores.size())));
  order.resize(std::min(n, order.size()));
  return order;
}

void write_pgm_grid(const std::filesystem::path& path, const std::vector<std::vector<double>>& images,
                    std::size_t img_rows, std::size_t img_cols, std::size_t grid_cols, double lo,
                    double hi) {
  require(!images.empty(), ErrorKind::input, "pgm: no images");
  require(img_rows > 0 && img_cols > 0 && grid_cols > 0, ErrorKind::input, "pgm: empty geometry");
  require(lo < hi, ErrorKind::input, "pgm: lo must be < hi");
  const std::size_t cols = std::min(grid_cols, images.size());
  const std::size_t grid_rows = (images.size() + cols - 1) / cols;
  const std::size_t pad = 1;
  const std::size_t width = cols * (img_cols + pad) - pad;
  const std::size_t height = grid_rows * (img_rows + pad) - pad;
  std::string pixels(width * height, '\0');
  for (std::size_t k = 0; k < images.size(); ++k) {
    require(images[k].size() == img_rows * img_cols, ErrorKind::shape,
            "pgm: image " + std::to_string(k) + " has the wrong pixel count");
    const std::size_t oy = (k / cols) * (img_rows + pad), ox = (k % cols) * (img_cols + pad);
    for (std::size_t r = 0; r < img_rows; ++r)
      for (std::size_t c = 0; c < img_cols; ++c) {
        const double v = std::clamp((images[k][r * img_cols + c] - lo) / (hi - lo), 0.0, 1.0);
        pixels[(oy + r) * width + ox + c] = static_cast<char>(std::lround(v * 255.0));
      }
  }
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out += pixels;
  write_file_atomic(path, out);
}

void write_score_trace(const std::filesystem::path& path,
                       const std::vector<AscentTrajectory>& trajectories) {
  std::ostringstream os;
  os.precision(17);
  os << "trajectory,step,score\n";
  for (std::size_t t = 0; t < trajectories.size(); ++t)
    for (const auto& s : trajectories[t].snapshots) os << t << ',' << s.step << ',' << s.score << '\n';
  write_file_atomic(path, os.str());
}

}  // namespace ally
