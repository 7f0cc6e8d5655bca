#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cbctox/field.hpp"
#include "cbctox/losses.hpp"
#include "cbctox/nn/field_ops.hpp"
#include "cbctox/nn/gradcheck.hpp"
#include "cbctox/nn/layers.hpp"
#include "cbctox/nn/ops.hpp"
#include "cbctox/nn/optim.hpp"
#include "cbctox/nn/checkpoint.hpp"
#include "cbctox/rng.hpp"

using namespace cbctox;
using namespace cbctox::nn;

namespace {

template <class T>
Tensor<T> random_tensor(Rng& rng, std::vector<std::int64_t> shape,
                        double scale = 1.0, bool requires_grad = false) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape), requires_grad);
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = T(rng.normal(0.0, scale));
  return t;
}

}  // namespace

TEST_CASE("conv3d with a 1x1x1 identity kernel is the identity") {
  Rng rng(1);
  auto x = random_tensor<float>(rng, {2, 1, 3, 3, 3});
  auto w = Tensor<float>::filled({1, 1, 1, 1, 1}, 1.f);
  auto b = Tensor<float>::zeros({1});
  auto y = conv3d(x, w, b, 1, 0);
  REQUIRE(y.shape() == x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i)
    CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("all-ones 3x3x3 kernel on all-ones 3^3 input sums to 27") {
  auto x = Tensor<float>::filled({1, 1, 3, 3, 3}, 1.f);
  auto w = Tensor<float>::filled({1, 1, 3, 3, 3}, 1.f);
  auto b = Tensor<float>::zeros({1});
  auto y = conv3d(x, w, b, 1, 0);
  REQUIRE(y.numel() == 1);
  CHECK(y.data()[0] == 27.f);
}

TEST_CASE("conv3d stride/padding output dims") {
  Rng rng(2);
  auto x = random_tensor<float>(rng, {1, 2, 8, 8, 8});
  auto w = random_tensor<float>(rng, {4, 2, 3, 3, 3});
  auto b = Tensor<float>::zeros({4});
  auto y = conv3d(x, w, b, 2, 1);
  CHECK(y.shape() == std::vector<std::int64_t>{1, 4, 4, 4, 4});
}

TEST_CASE("conv3d gradcheck") {
  Rng rng(3);
  auto x = random_tensor<double>(rng, {2, 2, 4, 4, 4});
  auto w = random_tensor<double>(rng, {3, 2, 3, 3, 3}, 0.5);
  auto b = random_tensor<double>(rng, {3}, 0.1);
  auto loss = [&] { return mean(conv3d(x, w, b, 1, 1)); };
  CHECK(gradcheck(loss, {x, w, b}) < 1e-4);
  auto loss_strided = [&] { return mean(relu(conv3d(x, w, b, 2, 1))); };
  CHECK(gradcheck(loss_strided, {x, w, b}) < 1e-4);
}

TEST_CASE("linear identity and constant rows") {
  Rng rng(4);
  auto x = random_tensor<float>(rng, {3, 4});
  auto wi = Tensor<float>::zeros({4, 4});
  for (int i = 0; i < 4; ++i) wi.data()[i * 4 + i] = 1.f;
  auto b0 = Tensor<float>::zeros({4});
  auto y = linear(x, wi, b0);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    CHECK(y.data()[i] == x.data()[i]);

  auto wz = Tensor<float>::zeros({2, 4});
  auto bb = Tensor<float>::from({2}, {3.f, -1.f});
  auto rows = linear(x, wz, bb);
  for (int i = 0; i < 3; ++i) {
    CHECK(rows.data()[i * 2] == 3.f);
    CHECK(rows.data()[i * 2 + 1] == -1.f);
  }
}

TEST_CASE("linear gradcheck") {
  Rng rng(5);
  auto x = random_tensor<double>(rng, {3, 5});
  auto w = random_tensor<double>(rng, {4, 5});
  auto b = random_tensor<double>(rng, {4});
  auto loss = [&] { return mean(linear(x, w, b)); };
  CHECK(gradcheck(loss, {x, w, b}) < 1e-10);
}

TEST_CASE("relu and leaky relu point values") {
  auto x = Tensor<float>::from({4}, {-2.f, 0.f, 3.f, -0.5f});
  auto r = relu(x);
  CHECK(r.data()[0] == 0.f);
  CHECK(r.data()[1] == 0.f);
  CHECK(r.data()[2] == 3.f);
  auto l = leaky_relu(x, 0.2f);
  CHECK(l.data()[0] == doctest::Approx(-0.4f));
  CHECK(l.data()[3] == doctest::Approx(-0.1f));
}

TEST_CASE("dropout rate 0 is the identity in both modes") {
  Rng rng(6);
  auto x = random_tensor<float>(rng, {2, 8});
  Rng dd(1);
  auto a = dropout(x, 0.0, dd, true);
  auto b = dropout(x, 0.0, dd, false);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    CHECK(a.data()[i] == x.data()[i]);
    CHECK(b.data()[i] == x.data()[i]);
  }
}

TEST_CASE("dropout keeps expectation and differs across draws in training") {
  Rng rng(7);
  auto x = Tensor<float>::filled({1, 10000}, 1.f);
  Rng d1(11), d2(12);
  auto a = dropout(x, 0.4, d1, true);
  auto b = dropout(x, 0.4, d2, true);
  CHECK(std::memcmp(a.data(), b.data(), std::size_t(a.numel()) * 4) != 0);
  double s = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += a.data()[i];
  CHECK(s / double(a.numel()) == doctest::Approx(1.0).epsilon(0.05));
  auto e = dropout(x, 0.4, d1, false);
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(e.data()[i] == 1.f);
}

TEST_CASE("batchnorm training output has mean beta and variance gamma^2") {
  Rng rng(8);
  auto x = random_tensor<double>(rng, {16, 3, 4, 4, 4}, 2.0);
  auto bn = BatchNormLayer<double>::init(3);
  bn.gamma.data()[0] = 1.5;
  bn.gamma.data()[1] = 0.5;
  bn.beta.data()[1] = -0.75;
  auto y = bn(x, true);
  const std::int64_t s = 64, n = 16, c = 3;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double mean = 0, var = 0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < s; ++j)
        mean += y.data()[(i * c + ch) * s + j];
    mean /= double(n * s);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < s; ++j) {
        const double d = y.data()[(i * c + ch) * s + j] - mean;
        var += d * d;
      }
    var /= double(n * s);
    CHECK(mean == doctest::Approx(bn.beta.data()[ch]).epsilon(1e-4));
    const double g = bn.gamma.data()[ch];
    CHECK(var == doctest::Approx(g * g).epsilon(1e-3));
  }
}

TEST_CASE("batchnorm rejects training batches smaller than 2") {
  Rng rng(9);
  auto x = random_tensor<double>(rng, {1, 3, 2, 2, 2});
  auto bn = BatchNormLayer<double>::init(3);
  CHECK_THROWS_AS((void)bn(x, true), Error);
  CHECK_NOTHROW((void)bn(x, false));
}

TEST_CASE("batchnorm gradcheck in training and eval mode") {
  Rng rng(10);
  auto x = random_tensor<double>(rng, {4, 2, 3, 3, 3});
  auto bn = BatchNormLayer<double>::init(2);
  bn.running_mean = {0.3, -0.2};
  bn.running_var = {1.4, 0.6};
  for (bool training : {true, false}) {
    auto loss = [&] {
      auto saved_mean = bn.running_mean;
      auto saved_var = bn.running_var;
      auto out = mean(mul(bn(x, training), bn(x, training)));
      bn.running_mean = saved_mean;  // keep stats fixed across FD evals
      bn.running_var = saved_var;
      return out;
    };
    CHECK(gradcheck(loss, {x, bn.gamma, bn.beta}) < 1e-4);
  }
}

TEST_CASE("maxpool, global pool, upsample and concat gradcheck") {
  Rng rng(11);
  auto x = random_tensor<double>(rng, {2, 2, 4, 4, 4});
  auto y = random_tensor<double>(rng, {2, 1, 4, 4, 4});
  auto loss = [&] {
    auto up = upsample_nearest(maxpool3d(x, 3, 2, 1), {4, 4, 4});
    auto cat = concat_channels(up, y);
    return mean(global_avg_pool(cat));
  };
  CHECK(gradcheck(loss, {x, y}) < 1e-4);
}

TEST_CASE("softmax rows sum to one and gradcheck passes") {
  Rng rng(12);
  auto x = random_tensor<double>(rng, {3, 2});
  auto p = softmax(x);
  for (int i = 0; i < 3; ++i)
    CHECK(p.data()[i * 2] + p.data()[i * 2 + 1] == doctest::Approx(1.0));
  auto w = random_tensor<double>(rng, {2, 2});
  auto loss = [&] { return mean(mul(softmax(x), softmax(x))); };
  CHECK(gradcheck(loss, {x}) < 1e-4);
  (void)w;
}

TEST_CASE("uniform logits give loss log 2 under unit weights") {
  auto logits = Tensor<double>::zeros({3, 2});
  auto loss = weighted_cross_entropy(logits, {0, 1, 1}, {1.0, 1.0});
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("confident correct logits drive the loss to zero") {
  auto logits = Tensor<double>::from({2, 2}, {30.0, -30.0, -30.0, 30.0});
  auto loss = weighted_cross_entropy(logits, {0, 1}, {1.0, 1.0});
  CHECK(loss.item() < 1e-12);
}

TEST_CASE("inverse-frequency weights scale per-class terms exactly") {
  // 19.9% positive rate: raw weights 1/0.801 and 1/0.199
  const double w0 = 1.0 / 0.801, w1 = 1.0 / 0.199;
  CHECK(w1 == doctest::Approx(5.0251256).epsilon(1e-6));
  CHECK(w0 == doctest::Approx(1.2484395).epsilon(1e-6));
  Rng rng(13);
  auto logits = random_tensor<double>(rng, {6, 2});
  const std::vector<int> labels = {0, 1, 0, 0, 1, 0};
  auto unweighted =
      weighted_cross_entropy(logits, labels, {1.0, 1.0});
  // per-sample weighted terms sum to w[y] times the unweighted ones
  double expect = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto one = weighted_cross_entropy(
        Tensor<double>::from({1, 2}, {logits.data()[i * 2],
                                      logits.data()[i * 2 + 1]}),
        {labels[i]}, {1.0, 1.0});
    expect += (labels[i] ? w1 : w0) * one.item();
  }
  auto weighted = weighted_cross_entropy(logits, labels, {w0, w1});
  CHECK(weighted.item() == doctest::Approx(expect / 6.0).epsilon(1e-12));
  CHECK(unweighted.item() > 0);
}

TEST_CASE("weighted cross entropy gradcheck") {
  Rng rng(14);
  auto logits = random_tensor<double>(rng, {5, 2});
  const std::vector<int> labels = {1, 0, 1, 1, 0};
  auto loss = [&] {
    return weighted_cross_entropy(logits, labels, {1.248, 5.025});
  };
  CHECK(gradcheck(loss, {logits}) < 1e-4);
}

TEST_CASE("adam with zero gradients is a no-op") {
  Rng rng(15);
  auto p = random_tensor<float>(rng, {100}, 1.0, true);
  auto before = p.values();
  Adam<float> opt({{"p", p}});
  p.grad();  // allocated, zero
  opt.step(0.1);
  for (std::int64_t i = 0; i < p.numel(); ++i)
    CHECK(p.data()[i] == before[std::size_t(i)]);
}

TEST_CASE("first adam step moves by about lr in the gradient sign") {
  Rng rng(16);
  auto p = random_tensor<float>(rng, {50}, 1.0, true);
  auto before = p.values();
  std::vector<float> g(50);
  for (auto& v : g) v = float(rng.normal(0.0, 2.0));
  Adam<float> opt({{"p", p}});
  std::copy(g.begin(), g.end(), p.grad());
  const double lr = 0.05;
  opt.step(lr);
  for (std::int64_t i = 0; i < 50; ++i) {
    const double delta = double(p.data()[i]) - double(before[std::size_t(i)]);
    const double sign = g[std::size_t(i)] > 0 ? 1.0 : -1.0;
    CHECK(delta == doctest::Approx(-sign * lr).epsilon(1e-3));
  }
}

TEST_CASE("adam decreases a scalar quadratic") {
  auto w = Tensor<float>::from({1}, {1.f}, true);
  Adam<float> opt({{"w", w}});
  float prev = 1.f;
  for (int step = 0; step < 2; ++step) {
    opt.zero_grad();
    w.grad()[0] = 2.f * w.data()[0];  // d(w^2)/dw
    opt.step(0.1);
    CHECK(std::abs(w.data()[0]) < std::abs(prev));
    prev = w.data()[0];
  }
  // longer run: monotone decrease of the loss itself
  auto w2 = Tensor<float>::from({1}, {1.f}, true);
  Adam<float> opt2({{"w", w2}});
  float prev_loss = w2.data()[0] * w2.data()[0];
  for (int step = 0; step < 100; ++step) {
    opt2.zero_grad();
    w2.grad()[0] = 2.f * w2.data()[0];
    opt2.step(1e-3);
    const float loss = w2.data()[0] * w2.data()[0];
    CHECK(loss <= prev_loss + 1e-12f);
    prev_loss = loss;
  }
}

TEST_CASE("onecycle endpoints, peak and continuity") {
  TrainSchedule s;
  s.max_lr = 7e-4;
  s.total_steps = 200;
  CHECK(onecycle_lr(s, 0) == doctest::Approx(s.max_lr / s.div_factor));
  const std::int64_t peak = std::llround(s.pct_start * double(s.total_steps));
  CHECK(onecycle_lr(s, peak) == doctest::Approx(s.max_lr).epsilon(1e-9));
  CHECK(onecycle_lr(s, s.total_steps - 1) ==
        doctest::Approx(s.max_lr / s.final_div_factor).epsilon(1e-9));
  // continuity: the cosine ramp's steepest step is
  // pi/2 * max_lr / (pct_start * total_steps)
  const double bound = std::acos(-1.0) / 2.0 * s.max_lr /
                       (s.pct_start * double(s.total_steps)) * 1.001;
  for (std::int64_t t = 1; t < s.total_steps; ++t)
    CHECK(std::abs(onecycle_lr(s, t) - onecycle_lr(s, t - 1)) < bound);
  CHECK_THROWS_AS((void)onecycle_lr(s, s.total_steps), Error);
}

TEST_CASE("gradcheck flags a corrupted backward") {
  Rng rng(17);
  auto x = random_tensor<double>(rng, {6});
  auto broken_sum = [&] {
    Tensor<double> out = Tensor<double>::result({1}, {x.node()});
    double s = 0;
    for (std::int64_t i = 0; i < x.numel(); ++i) s += x.data()[i];
    out.data()[0] = s;
    out.set_backprop([x, out]() mutable {
      if (!x.requires_grad()) return;
      for (std::int64_t i = 0; i < x.numel(); ++i)
        x.grad()[i] += 1.17 * out.node()->grad[0];  // wrong on purpose
    });
    return out;
  };
  CHECK(gradcheck(broken_sum, {x}) > 1e-4);
}

// ---- graph field ops agree with the volume-level implementations ----------

namespace {

Volume tensor_to_volume(const Tensor<float>& t, std::array<double, 3> spacing) {
  // t is [1,C,D,H,W]
  Volume v = Volume::make({t.dim(4), t.dim(3), t.dim(2)}, t.dim(1), spacing);
  std::memcpy(v.data.data(), t.data(), sizeof(float) * std::size_t(t.numel()));
  return v;
}

}  // namespace

TEST_CASE("warp_stn matches field::warp") {
  Rng rng(18);
  auto mov = random_tensor<float>(rng, {1, 1, 6, 5, 7});
  auto dvf = random_tensor<float>(rng, {1, 3, 6, 5, 7}, 1.5);
  const std::array<double, 3> spacing{2, 2, 2};
  auto out = warp_stn(mov, dvf, spacing);

  const Volume vol = tensor_to_volume(mov, spacing);
  const Volume dv = tensor_to_volume(dvf, spacing);
  const Volume ref = warp(vol, DisplacementField::wrap(dv));
  for (std::int64_t i = 0; i < out.numel(); ++i)
    CHECK(out.data()[i] == doctest::Approx(ref.data[std::size_t(i)])
                               .epsilon(1e-6));
}

TEST_CASE("ncc_loss matches losses::ncc and self-correlation is 1") {
  Rng rng(19);
  auto a = random_tensor<float>(rng, {1, 1, 5, 6, 4});
  auto b = random_tensor<float>(rng, {1, 1, 5, 6, 4});
  const std::array<double, 3> spacing{2, 2, 2};
  const double graph = double(ncc_loss(a, b).item());
  const double ref =
      ncc(tensor_to_volume(a, spacing), tensor_to_volume(b, spacing));
  CHECK(graph == doctest::Approx(ref).epsilon(1e-6));
  CHECK(double(ncc_loss(a, a).item()) == doctest::Approx(1.0).epsilon(1e-6));

  // affine intensity invariance
  auto a2 = a;
  auto shifted = Tensor<float>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i)
    shifted.data()[i] = 3.f * a.data()[i] + 0.25f;
  CHECK(double(ncc_loss(a2, shifted).item()) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("ncc of perfectly anticorrelated vectors is -1") {
  auto a = Tensor<float>::from({1, 4}, {0.f, 1.f, 0.f, 1.f});
  auto b = Tensor<float>::from({1, 4}, {1.f, 0.f, 1.f, 0.f});
  CHECK(double(ncc_loss(a, b).item()) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("ncc symmetry within 1e-12") {
  Rng rng(20);
  const std::array<double, 3> spacing{2, 2, 2};
  auto a = random_tensor<float>(rng, {1, 1, 4, 4, 4});
  auto b = random_tensor<float>(rng, {1, 1, 4, 4, 4});
  const double ab =
      ncc(tensor_to_volume(a, spacing), tensor_to_volume(b, spacing));
  const double ba =
      ncc(tensor_to_volume(b, spacing), tensor_to_volume(a, spacing));
  CHECK(std::abs(ab - ba) < 1e-12);
}

TEST_CASE("l2 gradient loss values and invariances") {
  // constant field scores zero
  auto c = Tensor<float>::filled({1, 3, 4, 4, 4}, 2.5f);
  CHECK(double(l2_gradient_loss(c).item()) == 0.0);

  // unit ramp along x in the x component scores exactly 1/3
  auto ramp = Tensor<float>::zeros({1, 3, 4, 4, 5});
  for (std::int64_t z = 0; z < 4; ++z)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 5; ++x)
        ramp.data()[(z * 4 + y) * 5 + x] = float(x);
  // exact 1/3 up to the f32 storage of the scalar result
  CHECK(double(l2_gradient_loss(ramp).item()) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  // doubling quadruples
  Rng rng(21);
  auto u = random_tensor<float>(rng, {1, 3, 5, 5, 5});
  auto u2 = scale(u, 2.f);
  CHECK(double(l2_gradient_loss(u2).item()) ==
        doctest::Approx(4.0 * double(l2_gradient_loss(u).item()))
            .epsilon(1e-5));

  // translation invariance: adding a constant vector changes nothing
  auto ut = Tensor<float>::zeros(u.shape());
  const std::int64_t nvox = 125;
  for (int compi = 0; compi < 3; ++compi)
    for (std::int64_t i = 0; i < nvox; ++i)
      ut.data()[compi * nvox + i] = u.data()[compi * nvox + i] +
                                    float(1.5 + compi);
  CHECK(double(l2_gradient_loss(ut).item()) ==
        doctest::Approx(double(l2_gradient_loss(u).item())).epsilon(1e-5));

  // matches the volume-level implementation
  const Volume dv = tensor_to_volume(u, {2, 2, 2});
  CHECK(double(l2_gradient_loss(u).item()) ==
        doctest::Approx(l2_gradient_penalty(DisplacementField::wrap(dv)))
            .epsilon(1e-6));
}

TEST_CASE("field op gradchecks") {
  Rng rng(22);
  auto mov = random_tensor<double>(rng, {1, 1, 4, 4, 4});
  auto dvf = random_tensor<double>(rng, {1, 3, 4, 4, 4}, 0.8);
  auto fix = random_tensor<double>(rng, {1, 1, 4, 4, 4});
  const std::array<double, 3> spacing{2, 2, 2};

  auto warp_loss = [&] { return mean(warp_stn(mov, dvf, spacing)); };
  CHECK(gradcheck(warp_loss, {mov, dvf}) < 1e-4);

  auto ncc_l = [&] { return ncc_loss(fix, mov); };
  CHECK(gradcheck(ncc_l, {fix, mov}) < 1e-4);

  auto l2_l = [&] { return l2_gradient_loss(dvf); };
  CHECK(gradcheck(l2_l, {dvf}) < 1e-4);
}

TEST_CASE("dir_loss values and gradient against finite differences") {
  Rng rng(23);
  const std::array<double, 3> spacing{2, 2, 2};
  // identical images with zero DVF give exactly -1 for any lambda
  auto img = random_tensor<double>(rng, {1, 1, 6, 6, 6});
  auto zero = Tensor<double>::zeros({1, 3, 6, 6, 6});
  CHECK(double(dir_loss_graph(img, img, zero, spacing, 0.7).item()) ==
        doctest::Approx(-1.0).epsilon(1e-9));

  // lambda scaling: losses differ by exactly 0.5 * penalty
  auto fix = random_tensor<double>(rng, {1, 1, 6, 6, 6});
  auto mov = random_tensor<double>(rng, {1, 1, 6, 6, 6});
  auto dvf = random_tensor<double>(rng, {1, 3, 6, 6, 6}, 0.7);
  const double l10 = dir_loss_graph(fix, mov, dvf, spacing, 1.0).item();
  const double l05 = dir_loss_graph(fix, mov, dvf, spacing, 0.5).item();
  const double pen = l2_gradient_loss(dvf).item();
  CHECK(l10 - l05 == doctest::Approx(0.5 * pen).epsilon(1e-9));
  const double l0 = dir_loss_graph(fix, mov, dvf, spacing, 0.0).item();
  CHECK(l0 == doctest::Approx(-double(ncc_loss(
                   fix, warp_stn(mov, dvf, spacing)).item()))
                  .epsilon(1e-12));

  // gradient wrt the DVF on a random 8^3 instance
  auto fix8 = random_tensor<double>(rng, {1, 1, 8, 8, 8});
  auto mov8 = random_tensor<double>(rng, {1, 1, 8, 8, 8});
  auto dvf8 = random_tensor<double>(rng, {1, 3, 8, 8, 8}, 0.6);
  auto loss = [&] { return dir_loss_graph(fix8, mov8, dvf8, spacing, 0.5); };
  CHECK(gradcheck(loss, {dvf8}) < 1e-4);
}

TEST_CASE("checkpoints reload byte-exactly") {
  Rng rng(24);
  auto conv = Conv3dLayer<float>::init(2, 3, 3, 1, 1, rng);
  auto bn = BatchNormLayer<float>::init(3);
  bn.running_mean = {0.25f, -0.5f, 1.f};
  ParamList<float> params;
  conv.params(params, "conv");
  bn.params(params, "bn");
  std::vector<std::pair<std::string, std::vector<float>*>> buffers;
  bn.buffers(buffers, "bn");
  const auto path = std::filesystem::temp_directory_path() / "cbctox_ckpt.bin";
  save_checkpoint(path, arrays_of(params, buffers));

  auto conv2 = Conv3dLayer<float>::init(2, 3, 3, 1, 1, rng);  // different init
  auto bn2 = BatchNormLayer<float>::init(3);
  ParamList<float> params2;
  conv2.params(params2, "conv");
  bn2.params(params2, "bn");
  std::vector<std::pair<std::string, std::vector<float>*>> buffers2;
  bn2.buffers(buffers2, "bn");
  load_checkpoint(path, arrays_of(params2, buffers2));
  CHECK(std::memcmp(conv2.weight.data(), conv.weight.data(),
                    std::size_t(conv.weight.numel()) * 4) == 0);
  CHECK(bn2.running_mean == bn.running_mean);
}

TEST_CASE("forward passes are deterministic given seed") {
  auto build = [] {
    Rng rng(99);
    auto conv = Conv3dLayer<float>::init(1, 4, 3, 1, 1, rng);
    auto x = Tensor<float>::zeros({1, 1, 5, 5, 5});
    Rng data_rng(7);
    for (std::int64_t i = 0; i < x.numel(); ++i)
      x.data()[i] = float(data_rng.uniform());
    return relu(conv(x)).values();
  };
  const auto a = build();
  const auto b = build();
  CHECK(a == b);
}
