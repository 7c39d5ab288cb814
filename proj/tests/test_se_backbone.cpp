#include "test_support.hpp"

using namespace siamsa;
using namespace siamsa::testing;

namespace {

// Smoothing of one channel at dilation d, edges replicated, by direct indexing.
double smooth_at(const Tensor& f, std::size_t c, long y, long x, long d) {
  const double taps[3] = {0.25, 0.5, 0.25};
  const long H = static_cast<long>(f.dim(1)), W = static_cast<long>(f.dim(2));
  double acc = 0.0;
  for (long ky = -1; ky <= 1; ++ky)
    for (long kx = -1; kx <= 1; ++kx) {
      const long sy = std::clamp(y + ky * d, 0L, H - 1), sx = std::clamp(x + kx * d, 0L, W - 1);
      acc += taps[ky + 1] * taps[kx + 1] * f.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
    }
  return acc;
}

}  // namespace

TEST(ScaledTensor, ValidatesDilations) {
  EXPECT_THROW(ScaledTensor(Tensor::csw(1, 2, 2, 2), {2, 3}), InvalidInput);
  EXPECT_THROW(ScaledTensor(Tensor::csw(1, 2, 2, 2), {1, 1}), InvalidInput);
  EXPECT_THROW(ScaledTensor(Tensor::csw(1, 2, 2, 2), {1, 2, 3}), InvalidInput);
  EXPECT_THROW(ScaledTensor(Tensor::chw(1, 2, 2), {1}), InvalidInput);
  EXPECT_NO_THROW(ScaledTensor(Tensor::csw(1, 3, 2, 2), {1, 2, 4}));
}

TEST(ScaledTensor, SliceRoundTripAndCollapse) {
  Rng rng(10);
  const ScaledTensor x = random_stack(rng, 3, 3, 4, 5);
  std::vector<Tensor> slices;
  for (std::size_t s = 0; s < 3; ++s) slices.push_back(x.slice(s));
  EXPECT_EQ(ScaledTensor::from_slices(slices, x.dilations()), x);
  const Tensor m = x.collapse_max();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 20; ++i)
      EXPECT_EQ(m[c * 20 + i], std::max({slices[0][c * 20 + i], slices[1][c * 20 + i], slices[2][c * 20 + i]}));
}

TEST(Lift, SingleScaleIsIdentity) {
  Rng rng(11);
  const Tensor f = random_chw(rng, 2, 5, 6);
  const ScaledTensor s = lift_to_scale_stack(f, {1});
  EXPECT_EQ(s.scales(), 1u);
  EXPECT_EQ(s.slice(0), f);
}

TEST(Lift, ConstantStaysConstant) {
  const ScaledTensor s = lift_to_scale_stack(Tensor::chw(2, 4, 4, 3.5), {1, 2, 3});
  for (double v : s.tensor().data()) EXPECT_NEAR(v, 3.5, 1e-12);
}

TEST(Lift, SlicesMatchDirectSmoothing) {
  Rng rng(12);
  for (int n = 0; n < 20; ++n) {
    const std::size_t c = pick(rng, 1, 3), h = pick(rng, 1, 9), w = pick(rng, 1, 9);
    const Tensor f = random_chw(rng, c, h, w);
    const std::vector<std::size_t> d{1, 2, 4};
    const ScaledTensor s = lift_to_scale_stack(f, d);
    EXPECT_EQ(s.slice(0), f);
    for (std::size_t k = 1; k < 3; ++k) {
      const Tensor sl = s.slice(k);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            EXPECT_NEAR(sl.at(ch, y, x), smooth_at(f, ch, static_cast<long>(y), static_cast<long>(x),
                                                   static_cast<long>(d[k])), 1e-12);
    }
  }
}

TEST(Lift, SlicesMatchConv2dOnPaddedInput) {
  Rng rng(13);
  const Tensor f = random_chw(rng, 1, 6, 7);
  const ScaledTensor s = lift_to_scale_stack(f, {1, 2, 3});
  for (std::size_t k = 1; k < 3; ++k) {
    const std::size_t d = k + 1;
    const Tensor ref = conv2d(replicate_pad(f, d), binomial_smoothing_kernel().dilated(d), Padding::Valid);
    EXPECT_LE(max_abs_diff(s.slice(k), ref), 1e-12);
  }
}

TEST(SeConv, DeltaKernelIsIdentity) {
  Rng rng(14);
  const ScaledTensor x = random_stack(rng, 3, 3, 5, 5);
  ConvKernel delta(3, 3, 3, 3);
  for (std::size_t c = 0; c < 3; ++c) delta.w(c, c, 1, 1) = 1.0;
  EXPECT_EQ(se_conv(x, {{delta}}), x);
}

TEST(SeConv, SingleScaleIsConv2d) {
  Rng rng(15);
  const ScaledTensor x = random_stack(rng, 2, 1, 6, 6);
  const ConvKernel k = random_kernel(rng, 3, 2, 3);
  EXPECT_EQ(se_conv(x, {{k}}).slice(0), conv2d(x.slice(0), k, Padding::Same));
}

TEST(SeConv, PerSliceDilatedOracle) {
  Rng rng(16);
  for (int n = 0; n < kPropertyCases; ++n) {
    const std::size_t c = pick(rng, 1, 4), h = pick(rng, 1, 10), w = pick(rng, 1, 10);
    const ScaledTensor x = random_stack(rng, c, 3, h, w);
    const ConvKernel k = random_kernel(rng, pick(rng, 1, 4), c, 3);
    const ScaledTensor y = se_conv(x, {{k}});
    for (std::size_t s = 0; s < 3; ++s)
      EXPECT_LE(max_abs_diff(y.slice(s), conv2d(x.slice(s), k.dilated(s + 1), Padding::Same)), 1e-9);
  }
}

TEST(SeConv, InterScaleWindowSumsNeighbours) {
  Rng rng(17);
  const ScaledTensor x = random_stack(rng, 2, 3, 6, 6);
  SeKernelBank bank{{random_kernel(rng, 2, 2, 3), random_kernel(rng, 2, 2, 3), random_kernel(rng, 2, 2, 3)}};
  const ScaledTensor y = se_conv(x, bank);
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t d = s + 1;
    Tensor expect = conv2d(x.slice(s), bank.offsets[1].dilated(d), Padding::Same);
    for (int o : {-1, 1}) {
      const long src = static_cast<long>(s) + o;
      if (src < 0 || src > 2) continue;
      ConvKernel k = bank.offsets[static_cast<std::size_t>(o + 1)].dilated(d);
      std::fill(k.bias.begin(), k.bias.end(), 0.0);
      const Tensor part = conv2d(x.slice(static_cast<std::size_t>(src)), k, Padding::Same);
      for (std::size_t i = 0; i < expect.size(); ++i) expect[i] += part[i];
    }
    EXPECT_LE(max_abs_diff(y.slice(s), expect), 1e-12) << "slice " << s;
  }
}

TEST(SeConv, Errors) {
  Rng rng(18);
  const ScaledTensor x = random_stack(rng, 2, 3, 4, 4);
  EXPECT_THROW(se_conv(x, {{random_kernel(rng, 2, 3, 3)}}), InvalidInput);
  EXPECT_THROW(se_conv(x, {{random_kernel(rng, 2, 2, 3), random_kernel(rng, 2, 2, 3)}}), InvalidInput);
  const ScaledTensor one = random_stack(rng, 2, 1, 4, 4);
  SeKernelBank three{{random_kernel(rng, 2, 2, 3), random_kernel(rng, 2, 2, 3), random_kernel(rng, 2, 2, 3)}};
  EXPECT_THROW(se_conv(one, three), InvalidInput);
  EXPECT_THROW(se_conv(x, {}), InvalidInput);
}

TEST(SeDwXcorr, LoopsDepthwiseOverScales) {
  Rng rng(19);
  const ScaledTensor s = random_stack(rng, 2, 3, 6, 6), t = random_stack(rng, 2, 3, 3, 3);
  const ScaledTensor out = se_dw_xcorr(s, t);
  ASSERT_EQ(out.tensor().shape(), (std::vector<std::size_t>{2, 3, 4, 4}));
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t oy = 0; oy < 4; ++oy)
        for (std::size_t ox = 0; ox < 4; ++ox) {
          double acc = 0.0;
          for (std::size_t y = 0; y < 3; ++y)
            for (std::size_t x = 0; x < 3; ++x)
              acc += s.tensor().at(c, k, oy + y, ox + x) * t.tensor().at(c, k, y, x);
          EXPECT_NEAR(out.tensor().at(c, k, oy, ox), acc, 1e-12);
        }
}

TEST(SeDwXcorr, IdentityTemplateAndErrors) {
  Rng rng(20);
  const ScaledTensor s = random_stack(rng, 2, 3, 5, 5);
  ScaledTensor ones(Tensor::csw(2, 3, 1, 1, 1.0), {1, 2, 3});
  EXPECT_EQ(se_dw_xcorr(s, ones), s);
  EXPECT_THROW(se_dw_xcorr(s, random_stack(rng, 2, 2, 2, 2)), InvalidInput);
  EXPECT_THROW(se_dw_xcorr(s, random_stack(rng, 3, 3, 2, 2)), InvalidInput);
}

TEST(Backbone, ExtentsFollowStrideArithmetic) {
  const BackboneConfig cfg;
  // Hand arithmetic for {3,pool}×3 then {3}×2: 127→125→62→60→30→28→14→12→10.
  EXPECT_EQ(cfg.extent_after(127, 4), 12u);
  EXPECT_EQ(cfg.extent_after(127, 5), 10u);
  // 287→285→142→140→70→68→34→32→30.
  EXPECT_EQ(cfg.extent_after(287, 4), 32u);
  EXPECT_EQ(cfg.extent_after(287, 5), 30u);
  EXPECT_EQ(cfg.total_stride(), 8u);
  EXPECT_EQ((30u - 10u) * 8u, 287u - 127u);
  EXPECT_EQ(cfg.response_extent(), 21u);

  Rng rng(21);
  const BackboneWeights w = BackboneWeights::random(cfg, rng);
  const BackboneFeatures z = backbone_forward(Tensor::chw(3, 127, 127, 100.0), cfg, w);
  const BackboneFeatures x = backbone_forward(Tensor::chw(3, 287, 287, 100.0), cfg, w);
  EXPECT_EQ(z.phi4.shape(), (std::vector<std::size_t>{16, 12, 12}));
  EXPECT_EQ(z.phi5.shape(), (std::vector<std::size_t>{16, 10, 10}));
  EXPECT_EQ(x.phi5.dim(1) - z.phi5.dim(1), (287u - 127u) / cfg.total_stride());
}

TEST(Backbone, DeterministicAndZeroInput) {
  const BackboneConfig cfg;
  Rng a(22), b(22);
  const BackboneWeights wa = BackboneWeights::random(cfg, a), wb = BackboneWeights::random(cfg, b);
  Rng img(23);
  const Tensor patch = random_chw(img, 3, 127, 127, 0.0, 255.0);
  const auto fa = backbone_forward(patch, cfg, wa), fb = backbone_forward(patch, cfg, wb);
  EXPECT_EQ(fa.phi4, fb.phi4);
  EXPECT_EQ(fa.phi5, fb.phi5);
  const auto zero = backbone_forward(Tensor::chw(3, 127, 127), cfg, wa);
  for (double v : zero.phi5.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backbone, RejectsBadPatchesAndConfigs) {
  const BackboneConfig cfg;
  Rng rng(24);
  const BackboneWeights w = BackboneWeights::random(cfg, rng);
  EXPECT_THROW(backbone_forward(Tensor::chw(3, 128, 128), cfg, w), InvalidInput);
  EXPECT_THROW(backbone_forward(Tensor::chw(1, 127, 127), cfg, w), InvalidInput);
  EXPECT_THROW(backbone_forward(Tensor::chw(3, 127, 120), cfg, w), InvalidInput);
  BackboneConfig bad = cfg;
  bad.search_size = 290;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = cfg;
  bad.layers.pop_back();
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = cfg;
  bad.inter_scale = 2;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = cfg;
  bad.scale_dilations = {2, 3};
  EXPECT_THROW(bad.validate(), InvalidInput);
  EXPECT_NO_THROW(cfg.validate());
}
