#include <cmath>

#include "test_support.hpp"

using namespace siamsa;
using namespace siamsa::testing;

namespace {

ConvKernel ones3(std::size_t out = 1, std::size_t in = 1) {
  ConvKernel k(out, in, 3, 3);
  std::fill(k.weights.begin(), k.weights.end(), 1.0);
  return k;
}

// Direct six-loop convolution with explicit zero padding.
Tensor conv_oracle(const Tensor& x, const ConvKernel& k, bool same) {
  const long H = static_cast<long>(x.dim(1)), W = static_cast<long>(x.dim(2));
  const long d = static_cast<long>(k.dilation);
  const long eh = (static_cast<long>(k.kh) - 1) * d + 1, ew = (static_cast<long>(k.kw) - 1) * d + 1;
  const long py = same ? eh / 2 : 0, px = same ? ew / 2 : 0;
  const long OH = same ? H : H - eh + 1, OW = same ? W : W - ew + 1;
  Tensor out = Tensor::chw(k.out_channels, static_cast<std::size_t>(OH), static_cast<std::size_t>(OW));
  for (std::size_t o = 0; o < k.out_channels; ++o)
    for (long y = 0; y < OH; ++y)
      for (long xx = 0; xx < OW; ++xx) {
        double acc = k.bias[o];
        for (std::size_t i = 0; i < k.in_channels; ++i)
          for (std::size_t ky = 0; ky < k.kh; ++ky)
            for (std::size_t kx = 0; kx < k.kw; ++kx) {
              const long sy = y + static_cast<long>(ky) * d - py, sx = xx + static_cast<long>(kx) * d - px;
              if (sy < 0 || sx < 0 || sy >= H || sx >= W) continue;
              acc += k.w(o, i, ky, kx) * x.at(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
        out.at(o, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) = acc;
      }
  return out;
}

}  // namespace

TEST(Tensor, ShapeAndLayoutChecks) {
  const Tensor t = Tensor::chw(2, 3, 4, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.at(1, 2, 3), 1.5);
  EXPECT_THROW(t.require_layout({Axis::Channel, Axis::Scale, Axis::Height, Axis::Width}, "op"),
               InvalidInput);
  EXPECT_THROW(Tensor({Axis::Row, Axis::Col}, {2, 2}, std::vector<double>(3)), InvalidInput);
}

TEST(Tensor, FiniteGuards) {
  Tensor t = Tensor::chw(1, 1, 2);
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(require_finite(Tensor(t), "op"), InvariantViolation);
  EXPECT_THROW(require_finite_input(t, "op"), InvalidInput);
}

TEST(Conv2d, OnesKernelNeighborhoodSums) {
  const Tensor out = conv2d(Tensor::chw(1, 3, 3, 1.0), ones3(), Padding::Same);
  EXPECT_EQ(out.at(0, 1, 1), 9.0);
  for (auto [y, x] : {std::pair{0, 0}, {0, 2}, {2, 0}, {2, 2}}) EXPECT_EQ(out.at(0, y, x), 4.0);
  for (auto [y, x] : {std::pair{0, 1}, {1, 0}, {1, 2}, {2, 1}}) EXPECT_EQ(out.at(0, y, x), 6.0);
}

TEST(Conv2d, IdentityAndBiasOnly) {
  Rng rng(1);
  const Tensor x = random_chw(rng, 3, 5, 4);
  ConvKernel id(3, 3, 1, 1);
  for (std::size_t c = 0; c < 3; ++c) id.w(c, c, 0, 0) = 1.0;
  EXPECT_EQ(conv2d(x, id, Padding::Same), x);

  ConvKernel k = random_kernel(rng, 2, 3, 3);
  k.bias = {0.25, -2.0};
  const Tensor out = conv2d(Tensor::chw(3, 4, 4), k, Padding::Same);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(out[i], 0.25);
    EXPECT_EQ(out[16 + i], -2.0);
  }
}

TEST(Conv2d, MatchesOracleAcrossPaddingAndDilation) {
  Rng rng(2);
  for (int n = 0; n < kPropertyCases; ++n) {
    const std::size_t cin = pick(rng, 1, 3), cout = pick(rng, 1, 3), d = pick(rng, 1, 3);
    const std::size_t kk = 2 * pick(rng, 0, 2) + 1;
    const std::size_t ext = (kk - 1) * d + 1;
    const std::size_t h = pick(rng, ext, ext + 6), w = pick(rng, ext, ext + 6);
    const Tensor x = random_chw(rng, cin, h, w);
    const ConvKernel k = random_kernel(rng, cout, cin, kk).dilated(d);
    EXPECT_LE(max_abs_diff(conv2d(x, k, Padding::Same), conv_oracle(x, k, true)), 1e-12) << "case " << n;
    EXPECT_LE(max_abs_diff(conv2d(x, k, Padding::Valid), conv_oracle(x, k, false)), 1e-12) << "case " << n;
  }
}

TEST(Conv2d, LinearInInput) {
  Rng rng(3);
  for (int n = 0; n < kPropertyCases; ++n) {
    const std::size_t c = pick(rng, 1, 4), h = pick(rng, 3, 9), w = pick(rng, 3, 9);
    const Tensor x1 = random_chw(rng, c, h, w), x2 = random_chw(rng, c, h, w);
    const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
    const ConvKernel k = random_kernel(rng, pick(rng, 1, 3), c, 3, false);
    Tensor mix = x1;
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x1[i] + b * x2[i];
    const Tensor lhs = conv2d(mix, k, Padding::Same);
    const Tensor y1 = conv2d(x1, k, Padding::Same), y2 = conv2d(x2, k, Padding::Same);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      const double rhs = a * y1[i] + b * y2[i];
      EXPECT_LE(std::abs(lhs[i] - rhs), 1e-6 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(Conv2d, Errors) {
  EXPECT_THROW(conv2d(Tensor::chw(2, 5, 5), ones3(1, 1), Padding::Same), InvalidInput);
  EXPECT_THROW(conv2d(Tensor::chw(1, 2, 5), ones3(), Padding::Valid), InvalidInput);
  EXPECT_THROW(ConvKernel(1, 1, 2, 3), InvalidInput);
  EXPECT_THROW(ConvKernel(1, 1, 3, 3, 0), InvalidInput);
  ConvKernel k = ones3();
  k.weights[0] = INFINITY;
  EXPECT_THROW(conv2d(Tensor::chw(1, 3, 3), k, Padding::Same), InvalidInput);
  try {
    conv2d(Tensor::chw(2, 5, 5), ones3(1, 3), Padding::Same);
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("channel axis is 2"), std::string::npos);
  }
}

TEST(DepthwiseXcorr, IdentityAndZero) {
  Rng rng(4);
  const Tensor s = random_chw(rng, 3, 6, 5);
  EXPECT_EQ(depthwise_xcorr(s, Tensor::chw(3, 1, 1, 1.0)), s);
  const Tensor z = depthwise_xcorr(Tensor::chw(3, 6, 5), random_chw(rng, 3, 2, 2));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(DepthwiseXcorr, BruteForceAllShapesUpTo4x8x8) {
  Rng rng(5);
  for (int n = 0; n < kPropertyCases; ++n) {
    const std::size_t c = pick(rng, 1, 4), H = pick(rng, 1, 8), W = pick(rng, 1, 8);
    const std::size_t h = pick(rng, 1, H), w = pick(rng, 1, W);
    const Tensor s = random_chw(rng, c, H, W), t = random_chw(rng, c, h, w);
    const Tensor out = depthwise_xcorr(s, t);
    ASSERT_EQ(out.shape(), (std::vector<std::size_t>{c, H - h + 1, W - w + 1}));
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t oy = 0; oy + h <= H; ++oy)
        for (std::size_t ox = 0; ox + w <= W; ++ox) {
          double acc = 0.0;
          for (std::size_t ty = 0; ty < h; ++ty)
            for (std::size_t tx = 0; tx < w; ++tx) acc += s.at(ch, oy + ty, ox + tx) * t.at(ch, ty, tx);
          EXPECT_NEAR(out.at(ch, oy, ox), acc, 1e-9);
        }
  }
}

TEST(DepthwiseXcorr, CropOfSearchPeaksAtItsPosition) {
  Rng rng(6);
  for (int n = 0; n < 20; ++n) {
    // Texture only inside the crop: every other window holds a strict subset
    // of the crop's energy, so by Cauchy-Schwarz none can beat the crop itself.
    Tensor s = Tensor::chw(1, 8, 8);
    const std::size_t py = pick(rng, 0, 5), px = pick(rng, 0, 5);
    Tensor t = random_chw(rng, 1, 3, 3);
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 3; ++x) s.at(0, py + y, px + x) = t.at(0, y, x);
    const Tensor out = depthwise_xcorr(s, t);
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.size(); ++i)
      if (out[i] > out[best]) best = i;
    EXPECT_EQ(best, py * 6 + px) << "case " << n;
  }
}

TEST(DepthwiseXcorr, Errors) {
  EXPECT_THROW(depthwise_xcorr(Tensor::chw(1, 3, 3), Tensor::chw(1, 4, 2)), InvalidInput);
  EXPECT_THROW(depthwise_xcorr(Tensor::chw(2, 3, 3), Tensor::chw(1, 2, 2)), InvalidInput);
}

TEST(GlobalPool, AverageMatchesIndependentSum) {
  Rng rng(7);
  Tensor x = Tensor::csw(2, 2, 3, 3);
  for (double& v : x.data()) v = rng.uniform(-5.0, 5.0);
  const Tensor avg = global_pool(x, PoolMode::Avg);
  ASSERT_EQ(avg.shape(), (std::vector<std::size_t>{2, 2}));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t s = 0; s < 2; ++s) {
      double sum = 0.0;
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t xx = 0; xx < 3; ++xx) sum += x.at(c, s, y, xx);
      EXPECT_NEAR(avg[c * 2 + s], sum / 9.0, 1e-12);
    }
}

TEST(GlobalPool, ConstantAndSingleSpike) {
  const Tensor c = global_pool(Tensor::csw(2, 3, 4, 4, -1.25), PoolMode::Max);
  for (double v : c.data()) EXPECT_EQ(v, -1.25);
  Tensor x = Tensor::csw(2, 3, 4, 5);
  x.at(1, 2, 3, 4) = 7.0;
  EXPECT_EQ(global_pool(x, PoolMode::Max)[1 * 3 + 2], 7.0);
  EXPECT_DOUBLE_EQ(global_pool(x, PoolMode::Avg)[1 * 3 + 2], 7.0 / 20.0);
  EXPECT_EQ(global_pool(x, PoolMode::Max)[0], 0.0);
  EXPECT_THROW(global_pool(Tensor::csw(1, 1, 0, 3), PoolMode::Avg), InvalidInput);
}

TEST(Softmax, HandValues) {
  Tensor m = Tensor::matrix(1, 2);
  m[1] = std::log(3.0);
  const Tensor p = softmax(m);
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
  const Tensor u = softmax(Tensor::matrix(2, 5, 3.0));
  for (double v : u.data()) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Rng rng(8);
  for (int n = 0; n < kPropertyCases; ++n) {
    const std::size_t r = pick(rng, 1, 6), c = pick(rng, 1, 9);
    Tensor m = Tensor::matrix(r, c);
    for (double& v : m.data()) v = rng.uniform(-700.0, 700.0);
    const Tensor p = softmax(m);
    Tensor shifted = m;
    for (std::size_t i = 0; i < r; ++i) {
      const double k = rng.uniform(-50.0, 50.0);
      for (std::size_t j = 0; j < c; ++j) shifted[i * c + j] += k;
    }
    const Tensor q = softmax(shifted);
    for (std::size_t i = 0; i < r; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        EXPECT_GE(p[i * c + j], 0.0);
        EXPECT_NEAR(p[i * c + j], q[i * c + j], 1e-9);
        sum += p[i * c + j];
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(Softmax, RejectsNonFinite) {
  Tensor m = Tensor::matrix(1, 2);
  m[0] = INFINITY;
  EXPECT_THROW(softmax(m), InvalidInput);
}

TEST(Ops, Deterministic) {
  Rng a(9), b(9);
  const Tensor xa = random_chw(a, 2, 7, 7), xb = random_chw(b, 2, 7, 7);
  const ConvKernel ka = random_kernel(a, 3, 2, 3), kb = random_kernel(b, 3, 2, 3);
  EXPECT_EQ(conv2d(xa, ka, Padding::Same), conv2d(xb, kb, Padding::Same));
}

TEST(Ops, MaxPoolAndCenterCrop) {
  Tensor x = Tensor::chw(1, 5, 4);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const Tensor p = max_pool2(x);
  ASSERT_EQ(p.shape(), (std::vector<std::size_t>{1, 2, 2}));
  EXPECT_EQ(p.at(0, 0, 0), 5.0);
  EXPECT_EQ(p.at(0, 1, 1), 15.0);
  const Tensor c = center_crop(x, 3, 2);
  EXPECT_EQ(c.at(0, 0, 0), x.at(0, 1, 1));
  EXPECT_THROW(center_crop(x, 6, 2), InvalidInput);
  EXPECT_THROW(max_pool2(Tensor::chw(1, 1, 4)), InvalidInput);
}

TEST(Rng, PinnedSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_EQ(value_noise(3, 1.5, 2.5, 4.0), value_noise(3, 1.5, 2.5, 4.0));
  EXPECT_NE(splitmix64(1), splitmix64(2));
}
