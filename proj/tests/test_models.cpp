// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "pscal/error.hpp"
#include "pscal/models.hpp"
#include "pscal/render.hpp"

using namespace pscal;
using namespace pscal::models;
namespace fs = std::filesystem;

namespace {

ImageStack sample_stack(int q, int res = 32, std::uint64_t seed = 1) {
    Rng rng(seed);
    const auto lights = render::random_lights(rng, q, 0.2, 2.0);
    return render::render_stack(render::sphere_scene(res),
                                render::blinn_phong(Eigen::Array3d(0.5, 0.4, 0.3), 0.3, 20), lights, 0.0, rng);
}

nn::Tensor permute_items(const nn::Tensor& t, const std::vector<int>& perm) {
    nn::Tensor out(t.n, t.c, t.h, t.w);
    for (int i = 0; i < t.n; ++i) std::copy(t.item(perm[i]).begin(), t.item(perm[i]).end(), out.item(i).begin());
    return out;
}

void expect_items_match(const nn::Tensor& permuted, const nn::Tensor& original, const std::vector<int>& perm, double tol) {
    ASSERT_TRUE(permuted.same_shape(original));
    for (int i = 0; i < permuted.n; ++i)
        for (std::size_t e = 0; e < permuted.item_size(); ++e)
            EXPECT_NEAR(permuted.item(i)[e], original.item(perm[i])[e], tol);
}

std::size_t conv(std::size_t in, std::size_t out) { return 9 * in * out + out; }
std::size_t linear(std::size_t in, std::size_t out) { return in * out + out; }

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pscal_models_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(LcNet, GlobalFeatureInvariantAndOutputsEquivariant) {
    LcNetConfig cfg;
    LcNet net(cfg, 3);
    const auto stack = sample_stack(8);
    const nn::Tensor x = lcnet_input(stack, cfg);
    std::vector<int> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(2);
    pscal::shuffle(perm.begin(), perm.end(), rng);
    const auto a = net.forward(x, 8, false);
    const auto b = net.forward(permute_items(x, perm), 8, false);
    ASSERT_TRUE(a.global.same_shape(b.global));
    for (std::size_t i = 0; i < a.global.size(); ++i) EXPECT_NEAR(a.global.data[i], b.global.data[i], 1e-5);
    expect_items_match(b.azimuth, a.azimuth, perm, 1e-5);
    expect_items_match(b.elevation, a.elevation, perm, 1e-5);
    expect_items_match(b.intensity, a.intensity, perm, 1e-5);
}

TEST(LcNet, AcceptsAnyImageCount) {
    LcNet net(LcNetConfig{}, 4);
    for (int q : {1, 2, 8, 32}) {
        const auto preds = lcnet_forward(sample_stack(q), net);
        ASSERT_EQ(static_cast<int>(preds.size()), q);
        for (const auto& p : preds) {
            EXPECT_NEAR(std::accumulate(p.azimuth.begin(), p.azimuth.end(), 0.0), 1.0, 1e-9);
            EXPECT_EQ(p.intensity.size(), 20u);
        }
    }
}

TEST(LcNet, LocalVariantIgnoresOtherImages) {
    LcNetConfig cfg;
    cfg.use_global = false;
    LcNet net(cfg, 5);
    const auto stack = sample_stack(4);
    const auto all = net.forward(lcnet_input(stack, cfg), 4, false);
    ImageStack first = stack;
    first.images.resize(1);
    first.lights->resize(1);
    const auto one = net.forward(lcnet_input(first, cfg), 1, false);
    for (int k = 0; k < one.azimuth.c; ++k) EXPECT_NEAR(one.azimuth.at(0, k, 0, 0), all.azimuth.at(0, k, 0, 0), 1e-5);
}

TEST(LcNet, RegressionHeadGivesUnitDirectionsAndPositiveIntensity) {
    LcNetConfig cfg;
    cfg.head = LightingHead::regression;
    LcNet net(cfg, 6);
    const auto lights = estimate_lights(sample_stack(5), net);
    ASSERT_EQ(lights.size(), 5u);
    for (const auto& l : lights) {
        EXPECT_NEAR(l.direction.vec().norm(), 1.0, 1e-6);
        EXPECT_GE(l.direction.z(), 0.0);
        EXPECT_GT(l.intensity, 0.0);
    }
    EXPECT_THROW(lcnet_forward(sample_stack(2), net), DomainError);
}

TEST(NeNet, PermutationInvariantAndAnyImageCount) {
    NeNet net(NeNetConfig{}, 7);
    const auto stack = sample_stack(6);
    const auto a = nenet_forward(stack, *stack.lights, net);
    ImageStack rev = stack;
    auto lights = *stack.lights;
    std::reverse(rev.images.begin(), rev.images.end());
    std::reverse(lights.begin(), lights.end());
    const auto b = nenet_forward(rev, lights, net);
    for (std::size_t i = 0; i < a.normals.data().size(); ++i)
        EXPECT_NEAR(a.normals.data()[i], b.normals.data()[i], 1e-5);
    for (int q : {1, 2, 8, 32}) {
        const auto s = sample_stack(q, 16);
        const auto n = nenet_forward(s, *s.lights, net);
        EXPECT_NEAR(n.at(3, 5).norm(), 1.0, 1e-5);
    }
    auto bad = *stack.lights;
    bad[0].intensity = 0.0;
    EXPECT_THROW(nenet_forward(stack, bad, net), DomainError);
    bad.pop_back();
    EXPECT_THROW(nenet_forward(stack, bad, net), DomainError);
}

TEST(NeNet, TranslationCovariantAwayFromBorders) {
    NeNetConfig cfg;
    cfg.base_channels = 4;
    NeNet net(cfg, 8);
    std::mt19937_64 g(1);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    const int size = 64;
    nn::Tensor x(2, cfg.input_channels(), size, size);
    for (auto& v : x.data) v = u(g);
    nn::Tensor shifted(2, x.c, size, size);
    // Two stride-2 stages: exact covariance needs shifts by multiples of 4.
    const int dy = 4, dx = 8;
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < size; ++y)
                for (int xx = 0; xx < size; ++xx)
                    shifted.at(n, c, y, xx) = x.at(n, c, std::clamp(y - dy, 0, size - 1), std::clamp(xx - dx, 0, size - 1));
    const auto a = net.forward(x, 2, false);
    const auto b = net.forward(shifted, 2, false);
    const int border = 24;  // receptive field radius in input pixels, rounded up
    for (int c = 0; c < 3; ++c)
        for (int y = border; y < size - border - dy; ++y)
            for (int xx = border; xx < size - border - dx; ++xx)
                EXPECT_NEAR(b.at(0, c, y + dy, xx + dx), a.at(0, c, y, xx), 1e-5);
    EXPECT_THROW(net.forward(nn::Tensor(2, x.c, 30, 30), 2, false), DomainError);
}

TEST(UpsFcn, PermutationInvariantAndSizeRules) {
    UpsFcn net(UpsFcnConfig{}, 9);
    const auto stack = sample_stack(5);
    const auto a = ups_fcn_forward(stack, net);
    ImageStack rev = stack;
    std::reverse(rev.images.begin(), rev.images.end());
    const auto b = ups_fcn_forward(rev, net);
    // Eleven float layers deep, so rounding that depends on batch position
    // grows past 1e-5.
    for (std::size_t i = 0; i < a.normals.data().size(); ++i)
        EXPECT_NEAR(a.normals.data()[i], b.normals.data()[i], 1e-4);
    EXPECT_EQ(ups_fcn_forward(sample_stack(3, 30), net).height(), 30);
    EXPECT_THROW(net.forward(nn::Tensor(2, 4, 30, 30), 2, false), DomainError);
}

TEST(ParameterCounts, MatchLayerArithmetic) {
    for (int c : {8, 16}) {
        LcNetConfig lc;
        lc.base_channels = c;
        const std::size_t feat = 4 * c, spatial = (lc.input_resolution / 8) * (lc.input_resolution / 8);
        const std::size_t lc_expect = conv(4, c) + conv(c, 2 * c) + conv(2 * c, 2 * c) + conv(2 * c, 4 * c) +
                                      3 * conv(4 * c, 4 * c) + conv(2 * feat, 4 * c) + conv(4 * c, 4 * c) +
                                      linear(4 * c * spatial, 8 * c) + 2 * linear(8 * c, 36) + linear(8 * c, 20);
        LcNet lcnet(lc, 1);
        EXPECT_EQ(lcnet.parameter_count(), lc_expect);

        NeNetConfig ne;
        ne.base_channels = c;
        const std::size_t ne_expect = conv(6, c) + conv(c, 2 * c) + conv(2 * c, 2 * c) + conv(2 * c, 4 * c) +
                                      conv(4 * c, 4 * c) + conv(4 * c, 2 * c) + 3 * conv(2 * c, 2 * c) +
                                      conv(2 * c, c) + conv(c, 3);
        NeNet nenet(ne, 1);
        EXPECT_EQ(nenet.parameter_count(), ne_expect);

        UpsFcnConfig ups;
        ups.base_channels = c;
        UpsFcn baseline(ups, 1);
        const double ratio = static_cast<double>(baseline.parameter_count()) / static_cast<double>(lc_expect + ne_expect);
        EXPECT_GT(ratio, 0.8);
        EXPECT_LT(ratio, 1.2);
    }
}

TEST(Decode, ArgMaxTiesAndNan) {
    lightspace::LightingBins bins;
    LightingPrediction p;
    p.azimuth.assign(bins.kd(), 0.0);
    p.elevation.assign(bins.kd(), 0.0);
    p.intensity.assign(bins.ke(), 0.0);
    p.azimuth[4] = p.azimuth[9] = 0.5;
    p.elevation[20] = 1.0;
    p.intensity[0] = p.intensity[19] = 0.5;
    const auto lights = decode_predictions({p}, bins);
    const auto expect = lightspace::decode({4, 20, 0}, bins);
    EXPECT_EQ(lights[0].direction.vec(), expect.direction.vec());
    EXPECT_EQ(lights[0].intensity, expect.intensity);
    p.elevation[3] = std::nan("");
    EXPECT_THROW(decode_predictions({p}, bins), NumericError);
    p.elevation.pop_back();
    EXPECT_THROW(decode_predictions({p}, bins), DomainError);
}

TEST(Checkpoint, RoundtripGivesIdenticalOutputs) {
    const fs::path dir = temp_dir("roundtrip");
    LcNetConfig cfg;
    cfg.base_channels = 8;
    LcNet net(cfg, 11);
    KeyValueConfig extra;
    extra.set("note", std::string("x"));
    save_lcnet(net, extra).save(dir / "lc.ckpt");
    const auto loaded_ckpt = Checkpoint::load(dir / "lc.ckpt");
    EXPECT_EQ(loaded_ckpt.header.get_string("note", ""), "x");
    LcNet loaded = load_lcnet(loaded_ckpt);
    const auto stack = sample_stack(4);
    const auto a = net.forward(lcnet_input(stack, cfg), 4, false);
    const auto b = loaded.forward(lcnet_input(stack, cfg), 4, false);
    EXPECT_EQ(a.azimuth.data, b.azimuth.data);
    EXPECT_EQ(a.intensity.data, b.intensity.data);

    NeNet ne(NeNetConfig{}, 12);
    save_nenet(ne).save(dir / "ne.ckpt");
    NeNet ne2 = load_nenet(Checkpoint::load(dir / "ne.ckpt"));
    EXPECT_EQ(nenet_forward(stack, *stack.lights, ne), nenet_forward(stack, *stack.lights, ne2));
    EXPECT_THROW(load_lcnet(Checkpoint::load(dir / "ne.ckpt")), FormatError);
    fs::remove_all(dir);
}

TEST(Checkpoint, CorruptFilesRaiseFormatErrors) {
    const fs::path dir = temp_dir("corrupt");
    NeNetConfig cfg;
    cfg.base_channels = 4;
    NeNet ne(cfg, 1);
    save_nenet(ne).save(dir / "ok.ckpt");
    std::ifstream in(dir / "ok.ckpt", std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), {});
    {
        std::ofstream out(dir / "truncated.ckpt", std::ios::binary);
        out << bytes.substr(0, bytes.size() - 100);
    }
    {
        std::ofstream out(dir / "header.ckpt", std::ios::binary);
        out << "not-a-checkpoint\n" << bytes.substr(bytes.find('\n') + 1);
    }
    EXPECT_THROW(Checkpoint::load(dir / "truncated.ckpt"), FormatError);
    EXPECT_THROW(Checkpoint::load(dir / "header.ckpt"), FormatError);
    EXPECT_THROW(Checkpoint::load(dir / "missing.ckpt"), IoError);

    auto ckpt = Checkpoint::load(dir / "ok.ckpt");
    ckpt.tensors.pop_back();
    EXPECT_THROW(load_nenet(ckpt), FormatError);
    fs::remove_all(dir);
}

TEST(Configs, ValidationAndKeyValueRoundtrip) {
    LcNetConfig bad;
    bad.base_channels = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    LcNetConfig lc;
    lc.use_mask = false;
    lc.head = LightingHead::regression;
    lc.input_resolution = 64;
    KeyValueConfig kv;
    lc.write(kv);
    const auto back = LcNetConfig::read(kv);
    EXPECT_FALSE(back.use_mask);
    EXPECT_EQ(back.head, LightingHead::regression);
    EXPECT_EQ(back.input_resolution, 64);
    UpsFcnConfig ups;
    ups.deep_layers = -1;
    EXPECT_THROW(ups.validate(), ConfigError);
}

TEST(NeNet, ScalingAnImageAndItsIntensityTogetherChangesNothing) {
    NeNet net(NeNetConfig{}, 13);
    const auto stack = sample_stack(5);
    auto scaled = stack;
    auto lights = *stack.lights;
    for (auto& v : scaled.images[2].data()) v *= 0.5f;
    lights[2].intensity *= 0.5;
    const auto a = nenet_forward(stack, *stack.lights, net);
    const auto b = nenet_forward(scaled, lights, net);
    for (std::size_t i = 0; i < a.normals.data().size(); ++i)
        EXPECT_NEAR(a.normals.data()[i], b.normals.data()[i], 1e-6);
}
