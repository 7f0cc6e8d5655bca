#include "cbctox/regnet/dir.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "cbctox/error.hpp"
#include "cbctox/losses.hpp"
#include "cbctox/nn/checkpoint.hpp"
#include "cbctox/nn/field_ops.hpp"
#include "cbctox/nn/optim.hpp"
#include "cbctox/regnet/pyramid.hpp"
#include "cbctox/tensor_bridge.hpp"

namespace cbctox::reg {

const char* stage_name(Stage s) {
  return s == Stage::modality ? "modality" : "anatomy";
}

Stage stage_from_name(const std::string& name) {
  if (name == "modality") return Stage::modality;
  if (name == "anatomy") return Stage::anatomy;
  fail("format", "unknown DIR stage '" + name + "'");
}

double default_lambda(Stage s) { return s == Stage::modality ? 1.0 : 0.5; }

void DirModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nn::ParamList<float> params;
  net.params(params, "unet");
  std::vector<std::pair<std::string, std::vector<float>*>> buffers;
  auto arrays = nn::arrays_of(params, buffers);
  nn::save_checkpoint(dir / "weights.ckpt", arrays);

  nlohmann::json meta;
  meta["stage"] = stage_name(stage);
  meta["lambda"] = lambda;
  meta["grid_dims"] = grid_dims;
  meta["spacing_mm"] = spacing_mm;
  meta["encoder_channels"] = net.cfg.encoder_channels;
  meta["decoder_channels"] = net.cfg.decoder_channels;
  std::ofstream f(dir / "model.json");
  require(f.good(), "io", "cannot write " + (dir / "model.json").string());
  f << meta.dump(2) << "\n";
}

DirModel DirModel::load(const std::filesystem::path& dir) {
  std::ifstream f(dir / "model.json");
  require(f.good(), "io", "cannot open " + (dir / "model.json").string());
  nlohmann::json meta;
  f >> meta;

  DirModel m;
  m.stage = stage_from_name(meta.at("stage").get<std::string>());
  m.lambda = meta.at("lambda").get<double>();
  const auto gd = meta.at("grid_dims").get<std::vector<std::int64_t>>();
  const auto sp = meta.at("spacing_mm").get<std::vector<double>>();
  for (int i = 0; i < 3; ++i) {
    m.grid_dims[std::size_t(i)] = gd.at(std::size_t(i));
    m.spacing_mm[std::size_t(i)] = sp.at(std::size_t(i));
  }
  UNetConfig cfg;
  const auto ec = meta.at("encoder_channels").get<std::vector<std::int64_t>>();
  const auto dc = meta.at("decoder_channels").get<std::vector<std::int64_t>>();
  require(ec.size() == 4 && dc.size() == 7, "format",
          "unexpected UNet channel layout in model.json");
  std::copy(ec.begin(), ec.end(), cfg.encoder_channels.begin());
  std::copy(dc.begin(), dc.end(), cfg.decoder_channels.begin());
  Rng rng(0);
  m.net = UNet<float>::init(cfg, rng);

  nn::ParamList<float> params;
  m.net.params(params, "unet");
  std::vector<std::pair<std::string, std::vector<float>*>> buffers;
  auto arrays = nn::arrays_of(params, buffers);
  nn::load_checkpoint(dir / "weights.ckpt", arrays);
  return m;
}

namespace {

struct SplitIdx {
  std::vector<std::size_t> train, val, test;
};

SplitIdx split_pairs(std::size_t n, double ftrain, double fval,
                     std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed ^ 0x5917f3ull);
  rng.shuffle(idx.data(), idx.size());
  std::size_t nval = std::max<std::size_t>(1, std::llround(fval * double(n)));
  std::size_t ntest = std::max<std::size_t>(
      1, std::llround((1.0 - ftrain - fval) * double(n)));
  require(nval + ntest < n, "domain",
          "train_dir: split leaves no training pairs");
  SplitIdx s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < nval)
      s.val.push_back(idx[i]);
    else if (i < nval + ntest)
      s.test.push_back(idx[i]);
    else
      s.train.push_back(idx[i]);
  }
  return s;
}

double validation_loss(const DirModel& model,
                       const std::vector<std::pair<Volume, Volume>>& pairs,
                       const std::vector<std::size_t>& idx, double lambda,
                       double* ncc_out, double* defrac_out) {
  double total = 0, ncc_total = 0, defrac_total = 0;
  for (std::size_t i : idx) {
    const DisplacementField dvf =
        predict_dvf(model, pairs[i].first, pairs[i].second);
    const Volume warped = warp(pairs[i].second, dvf);
    const double v_ncc = ncc(pairs[i].first, warped);
    total += -v_ncc + lambda * l2_gradient_penalty(dvf);
    ncc_total += v_ncc;
    if (defrac_out)
      defrac_total += deformed_fraction(jacobian_field(dvf), 1e-6);
  }
  const double n = double(idx.size());
  if (ncc_out) *ncc_out = ncc_total / n;
  if (defrac_out) *defrac_out = defrac_total / n;
  return total / n;
}

std::vector<float> snapshot_params(nn::ParamList<float>& params) {
  std::vector<float> out;
  for (auto& [name, t] : params)
    out.insert(out.end(), t.data(), t.data() + t.numel());
  return out;
}

void restore_params(nn::ParamList<float>& params,
                    const std::vector<float>& snap) {
  std::size_t off = 0;
  for (auto& [name, t] : params) {
    std::copy(snap.begin() + long(off), snap.begin() + long(off + t.numel()),
              t.data());
    off += std::size_t(t.numel());
  }
}

}  // namespace

DirModel train_dir(const std::vector<std::pair<Volume, Volume>>& pairs,
                   double lambda, Stage stage, const DirTrainConfig& cfg,
                   RegistrationReport& report) {
  const auto t0 = std::chrono::steady_clock::now();
  require(pairs.size() >= 3, "domain", "train_dir needs at least 3 pairs");
  const Volume& g = pairs.front().first;
  for (const auto& [f, m] : pairs)
    require(f.same_grid(g) && m.same_grid(g), "shape",
            "train_dir: pairs must share one grid");

  Rng rng(cfg.seed);
  DirModel model;
  model.net = UNet<float>::init(UNetConfig{}, rng);
  model.stage = stage;
  model.lambda = lambda;
  model.grid_dims = g.dims;
  model.spacing_mm = g.spacing_mm;

  const SplitIdx split =
      split_pairs(pairs.size(), cfg.split_train, cfg.split_val, cfg.seed);

  nn::ParamList<float> params;
  model.net.params(params, "unet");
  nn::Adam<float> opt(params);
  const std::int64_t steps_per_epoch =
      std::int64_t((split.train.size() + std::size_t(cfg.batch) - 1) /
                   std::size_t(cfg.batch));
  nn::TrainSchedule sched;
  sched.max_lr = cfg.max_lr;
  sched.total_steps = std::max<std::int64_t>(1, cfg.epochs * steps_per_epoch);

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<float> best_snap = snapshot_params(params);
  int since_best = 0;
  std::int64_t step = 0;
  int epochs_run = 0;

  std::vector<std::size_t> order = split.train;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ++epochs_run;
    rng.shuffle(order.data(), order.size());
    for (std::size_t b0 = 0; b0 < order.size();
         b0 += std::size_t(cfg.batch)) {
      const std::size_t b1 =
          std::min(order.size(), b0 + std::size_t(cfg.batch));
      std::vector<const Volume*> fixed_b, moving_b;
      for (std::size_t i = b0; i < b1; ++i) {
        fixed_b.push_back(&pairs[order[i]].first);
        moving_b.push_back(&pairs[order[i]].second);
      }
      auto fixed_t = stack_volumes(fixed_b);
      auto moving_t = stack_volumes(moving_b);
      auto input = nn::concat_channels(fixed_t, moving_t);
      auto dvf = model.net.forward(input);
      auto loss =
          nn::dir_loss_graph(fixed_t, moving_t, dvf, g.spacing_mm, lambda);
      require(std::isfinite(double(loss.item())), "domain",
              "train_dir: loss diverged");
      opt.zero_grad();
      loss.backward();
      const double lr =
          nn::onecycle_lr(sched, std::min(step, sched.total_steps - 1));
      opt.step(lr);
      ++step;
    }
    double val_ncc = 0;
    const double val =
        validation_loss(model, pairs, split.val, lambda, &val_ncc, nullptr);
    if (val < best_val) {
      best_val = val;
      best_snap = snapshot_params(params);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  restore_params(params, best_snap);

  double val_ncc = 0, defrac = 0;
  const double val =
      validation_loss(model, pairs, split.val, lambda, &val_ncc, &defrac);
  report = {};
  report.engine = "unet";
  report.final_loss = val;
  report.ncc_value = val_ncc;
  report.deformed_fraction = defrac;
  report.epochs = epochs_run;
  report.iterations = step;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return model;
}

DisplacementField predict_dvf(const DirModel& model, const Volume& fixed,
                              const Volume& moving) {
  require(fixed.same_grid(moving), "shape", "predict_dvf: grid mismatch");
  require(fixed.dims == model.grid_dims, "shape",
          "predict_dvf: grid does not match the training resolution");
  auto fixed_t = volume_to_tensor(fixed);
  auto moving_t = volume_to_tensor(moving);
  auto dvf = model.net.forward(nn::concat_channels(fixed_t, moving_t));
  return DisplacementField::wrap(tensor_to_volume(dvf, fixed));
}

DisplacementField direct_field_register(const Volume& fixed,
                                        const Volume& moving, double lambda,
                                        RegistrationReport& report,
                                        const DirectFieldConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  require(fixed.same_grid(moving), "shape",
          "direct_field_register: grid mismatch");

  const auto fpyr = build_pyramid(fixed, cfg.levels);
  const auto mpyr = build_pyramid(moving, cfg.levels);
  const int levels = int(std::min(fpyr.size(), mpyr.size()));

  DisplacementField field = DisplacementField::zeros_like(fpyr.back());
  std::int64_t iters_total = 0;

  for (int level = levels - 1; level >= 0; --level) {
    const Volume& f = fpyr[std::size_t(level)];
    const Volume& m = mpyr[std::size_t(level)];
    if (!field.f.same_grid(f)) field = upsample_dvf(field, f);

    auto fixed_t = volume_to_tensor(f);
    auto moving_t = volume_to_tensor(m);
    auto dvf_t = volume_to_tensor(field.f, true);

    nn::Adam<float> opt({{"dvf", dvf_t}});
    const int iters = cfg.iters[std::size_t(
        std::min(level, int(cfg.iters.size()) - 1))];
    const double lr0 =
        cfg.lr_mm * std::pow(cfg.level_lr_decay, double(levels - 1 - level));
    double last_finite = 0;
    for (int it = 0; it < iters; ++it) {
      ++iters_total;
      auto loss =
          nn::dir_loss_graph(fixed_t, moving_t, dvf_t, f.spacing_mm, lambda);
      const double lv = double(loss.item());
      if (!std::isfinite(lv))
        fail("divergence", "direct_field_register: non-finite loss at level " +
                               std::to_string(level) + " iteration " +
                               std::to_string(it) + " (last finite " +
                               std::to_string(last_finite) + ")");
      last_finite = lv;
      opt.zero_grad();
      loss.backward();
      const double lr =
          lr0 * (0.1 + 0.9 * 0.5 *
                           (1.0 + std::cos(3.14159265358979 * double(it) /
                                           double(iters))));
      opt.step(lr);
    }
    field = DisplacementField::wrap(tensor_to_volume(dvf_t, f));
  }

  const Volume warped = warp(moving, field);
  report = {};
  report.engine = "direct-field";
  report.initial_ncc = ncc(fixed, moving);
  report.ncc_value = ncc(fixed, warped);
  report.final_loss = -report.ncc_value + lambda * l2_gradient_penalty(field);
  report.deformed_fraction = deformed_fraction(jacobian_field(field), 1e-6);
  report.iterations = iters_total;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return field;
}

TwoStageResult two_stage_apply(const DirModel& model_a, const DirModel& model_b,
                               const Volume& pct, const Volume& cbct_t,
                               const RigidTransform& rigid) {
  require(model_a.stage == Stage::modality, "domain",
          "two_stage_apply: first model must be the modality stage");
  require(model_b.stage == Stage::anatomy, "domain",
          "two_stage_apply: second model must be the anatomy stage");
  TwoStageResult r;
  const Volume aligned0 = apply_rigid(pct, rigid);
  const DisplacementField u_a = predict_dvf(model_a, cbct_t, aligned0);
  r.aligned_ct = warp(aligned0, u_a);
  const DisplacementField u_b = predict_dvf(model_b, cbct_t, r.aligned_ct);
  r.composed = compose(u_a, u_b);
  r.jf = jacobian_field(r.composed);
  r.deformed_fraction_value = deformed_fraction(r.jf, 1e-6);
  r.stage_a.engine = "unet";
  r.stage_a.ncc_value = ncc(cbct_t, r.aligned_ct);
  r.stage_b.engine = "unet";
  r.stage_b.ncc_value = ncc(cbct_t, warp(r.aligned_ct, u_b));
  return r;
}

TwoStageResult two_stage_direct(const Volume& pct, const Volume& cbct_0,
                                const Volume& cbct_t,
                                const RigidTransform& rigid, double lambda_a,
                                double lambda_b,
                                const DirectFieldConfig& cfg) {
  TwoStageResult r;
  const Volume aligned0 = apply_rigid(pct, rigid);
  const DisplacementField u_a =
      direct_field_register(cbct_0, aligned0, lambda_a, r.stage_a, cfg);
  r.aligned_ct = warp(aligned0, u_a);
  const DisplacementField u_b =
      direct_field_register(cbct_t, r.aligned_ct, lambda_b, r.stage_b, cfg);
  r.composed = compose(u_a, u_b);
  r.jf = jacobian_field(r.composed);
  r.deformed_fraction_value = deformed_fraction(r.jf, 1e-6);
  return r;
}

}  // namespace cbctox::reg
