// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>

#include "pscal/dataset.hpp"
#include "pscal/error.hpp"
#include "pscal/pipeline.hpp"
#include "pscal/render.hpp"

using namespace pscal;
using namespace pscal::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "pscal_pipeline_test";

render::DatasetConfig tiny_data(int scenes, std::uint64_t seed) {
    render::DatasetConfig d;
    d.scenes = scenes;
    d.resolution = 32;
    d.lights_per_scene = 6;
    d.format = io::ImageFormat::pfm;
    d.seed = seed;
    return d;
}

TrainConfig tiny_train(Phase phase, const fs::path& data) {
    TrainConfig t = TrainConfig::defaults(phase);
    t.dataset = data;
    t.epochs = 2;
    t.batch_size = 4;
    t.q_per_sample = 4;
    t.base_channels = 4;
    t.lr_halving_period_epochs = 1;
    t.learning_rate = 0.002;
    return t;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class PipelineTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
        generate_dataset(tiny_data(24, 3), kRoot / "train");
        generate_dataset(tiny_data(4, 99), kRoot / "test");
        lcnet_ckpt = kRoot / "lcnet.ckpt";
        train_lcnet(tiny_train(Phase::lcnet, kRoot / "train"), lcnet_ckpt);
    }
    static void TearDownTestSuite() {
        if (!std::getenv("PSCAL_KEEP_TMP")) fs::remove_all(kRoot);
    }
    static fs::path lcnet_ckpt;
};
fs::path PipelineTest::lcnet_ckpt;

}  // namespace

TEST(TrainConfig, LearningRateScheduleAndRoundtrip) {
    TrainConfig t;
    t.learning_rate = 0.0005;
    t.lr_halving_period_epochs = 5;
    EXPECT_DOUBLE_EQ(learning_rate_at(t, 0), 0.0005);
    EXPECT_DOUBLE_EQ(learning_rate_at(t, 4), 0.0005);
    EXPECT_DOUBLE_EQ(learning_rate_at(t, 5), 0.00025);
    EXPECT_DOUBLE_EQ(learning_rate_at(t, 19), 0.0005 / 8);

    const auto lc = TrainConfig::defaults(Phase::lcnet);
    EXPECT_EQ(lc.epochs, 20);
    EXPECT_EQ(lc.batch_size, 32);
    const auto ne = TrainConfig::defaults(Phase::nenet);
    EXPECT_EQ(ne.epochs, 10);
    EXPECT_EQ(ne.batch_size, 16);
    EXPECT_EQ(ne.lr_halving_period_epochs, 2);

    TrainConfig c = TrainConfig::defaults(Phase::ups_fcn);
    c.variant = "B5";
    c.use_mask = false;
    c.seed = 123456789012345ull;
    KeyValueConfig kv;
    c.write(kv);
    const auto back = TrainConfig::read(kv);
    EXPECT_EQ(back.phase, Phase::ups_fcn);
    EXPECT_EQ(back.variant, "B5");
    EXPECT_FALSE(back.use_mask);
    EXPECT_EQ(back.seed, c.seed);

    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(parse_phase("stage3"), ConfigError);
}

TEST(Dataset, GenerationIsDeterministicAndReusable) {
    const fs::path a = kRoot.string() + "_ds_a", b = kRoot.string() + "_ds_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const auto ma = generate_dataset(tiny_data(5, 8), a);
    const auto mb = generate_dataset(tiny_data(5, 8), b);
    EXPECT_EQ(ma.hash, mb.hash);
    EXPECT_NE(generate_dataset(tiny_data(5, 9), b).hash, ma.hash);

    const auto stamp = fs::last_write_time(a / "manifest.txt");
    EXPECT_EQ(ensure_dataset(tiny_data(5, 8), a).hash, ma.hash);
    EXPECT_EQ(fs::last_write_time(a / "manifest.txt"), stamp);
    EXPECT_EQ(ensure_dataset(tiny_data(5, 10), a).hash, generate_dataset(tiny_data(5, 10), b).hash);

    const auto data = load_dataset(a);
    ASSERT_EQ(data.scenes.size(), 5u);
    for (const auto& s : data.scenes) {
        EXPECT_TRUE(s.brdf.has_value());
        EXPECT_TRUE(s.stack.normals.has_value());
        EXPECT_EQ(s.stack.count(), 6);
        EXPECT_GE(s.stack.mask.count(), 32 * 32 / 16);
    }
    EXPECT_EQ(load_dataset(a, 2).scenes.size(), 2u);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Dataset, SceneSpecsAndBrdfMeta) {
    const auto cfg = tiny_data(10, 4);
    const auto s1 = render::make_scene(cfg, 7), s2 = render::make_scene(cfg, 7);
    EXPECT_EQ(s1.kind, s2.kind);
    ASSERT_EQ(s1.lights.size(), 6u);
    for (std::size_t i = 0; i < s1.lights.size(); ++i) EXPECT_EQ(s1.lights[i].intensity, s2.lights[i].intensity);
    const auto brdf = render::blinn_phong(Eigen::Array3d(0.1, 0.2, 0.3), 0.45, 17.5);
    const auto back = render::brdf_from_meta(render::brdf_to_meta(brdf, render::MaterialCategory::plastic));
    EXPECT_EQ(back.kind, brdf.kind);
    EXPECT_EQ(back.albedo[1], brdf.albedo[1]);
    EXPECT_EQ(back.specular_strength, brdf.specular_strength);
    EXPECT_EQ(back.shininess, brdf.shininess);

    int validation = 0;
    for (int i = 0; i < 5000; ++i) validation += is_validation_scene("scene_" + std::to_string(i), 0.1);
    EXPECT_NEAR(validation / 5000.0, 0.1, 0.02);

    std::vector<std::atomic<int>> hits(257);
    parallel_for(257, [&](int i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST_F(PipelineTest, LcnetTrainingIsDeterministic) {
    const fs::path again = kRoot / "lcnet_again.ckpt";
    const auto r = train_lcnet(tiny_train(Phase::lcnet, kRoot / "train"), again);
    EXPECT_TRUE(read_file(again) == read_file(lcnet_ckpt));
    ASSERT_EQ(r.log.size(), 2u);
    EXPECT_DOUBLE_EQ(r.log[1].learning_rate, 0.001);
    const auto data = load_dataset(kRoot / "train");
    const auto sig = train_signature(tiny_train(Phase::lcnet, kRoot / "train"), data.manifest.hash);
    EXPECT_TRUE(checkpoint_matches(lcnet_ckpt, sig));
    auto other = tiny_train(Phase::lcnet, kRoot / "train");
    other.seed = 2;
    EXPECT_FALSE(checkpoint_matches(lcnet_ckpt, train_signature(other, data.manifest.hash)));
}

TEST_F(PipelineTest, TrainingReducesLossOnASmallSet) {
    auto t = tiny_train(Phase::lcnet, kRoot / "train");
    t.epochs = 40;
    t.max_scenes = 8;
    t.batch_size = 2;
    t.learning_rate = 0.002;
    t.lr_halving_period_epochs = 100;
    t.noise_amplitude = 0.0;
    t.validation_fraction = 0.0;
    const auto r = train_lcnet(t, kRoot / "overfit.ckpt");
    const double tail = (r.log[37].train_loss + r.log[38].train_loss + r.log[39].train_loss) / 3;
    EXPECT_LT(tail, 0.8 * r.log.front().train_loss);
}

TEST_F(PipelineTest, LcnetTrainsWithoutNormals) {
    const fs::path dir = kRoot / "no_normals";
    fs::copy(kRoot / "train", dir, fs::copy_options::recursive);
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.path().filename() == "normal.pfm") fs::remove(e.path());
    auto m = io::DatasetManifest::load(dir);
    m.hash = m.compute_hash();
    m.save();
    auto t = tiny_train(Phase::lcnet, dir);
    t.epochs = 1;
    EXPECT_NO_THROW(train_lcnet(t, kRoot / "no_normals.ckpt"));
    // NeNet needs normals.
    auto n = tiny_train(Phase::nenet, dir);
    n.epochs = 1;
    EXPECT_ANY_THROW(train_nenet(n, kRoot / "no_normals.ckpt", kRoot / "nn.ckpt"));
}

TEST_F(PipelineTest, EvaluationIsReproducibleFromCheckpoints) {
    auto n = tiny_train(Phase::nenet, kRoot / "train");
    n.epochs = 1;
    const fs::path ne = kRoot / "nenet.ckpt";
    train_nenet(n, lcnet_ckpt, ne);
    EvalConfig ec;
    ec.repeats = 2;
    const auto a = evaluate({lcnet_ckpt, ne}, kRoot / "test", ec);
    const auto b = evaluate({lcnet_ckpt, ne}, kRoot / "test", ec);
    ASSERT_TRUE(a.mean.direction_mae_deg && a.mean.normal_mae_deg && a.mean.intensity_rel_err);
    EXPECT_EQ(*a.mean.direction_mae_deg, *b.mean.direction_mae_deg);
    EXPECT_EQ(*a.mean.normal_mae_deg, *b.mean.normal_mae_deg);
    EXPECT_EQ(a.objects.size(), 4u);
    EXPECT_EQ(a.repeats.size(), 2u);

    // Woodham with ground-truth lights on noiseless renders is near exact
    // (shadows aside) and independent of the networks.
    EvalConfig w = ec;
    w.normal_source = NormalSource::woodham;
    w.gt_lights_for_normals = true;
    const auto r = evaluate({lcnet_ckpt}, kRoot / "test", w);
    EXPECT_LT(*r.mean.normal_mae_deg, 10.0);

    // A single image per object is accepted by the networks.
    EvalConfig one = ec;
    one.q = 1;
    const auto q1 = evaluate({lcnet_ckpt, ne}, kRoot / "test", one);
    EXPECT_TRUE(q1.mean.normal_mae_deg.has_value());

    const fs::path out = kRoot / "eval_out";
    a.save(out);
    for (const char* f : {"objects.csv", "repeats.csv", "summary.txt", "config.txt"}) EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST_F(PipelineTest, MismatchedBinsAreRejected) {
    auto t = tiny_train(Phase::lcnet, kRoot / "train");
    t.kd = 18;
    t.epochs = 1;
    train_lcnet(t, kRoot / "kd18.ckpt");
    auto n = tiny_train(Phase::nenet, kRoot / "train");
    n.epochs = 1;
    train_nenet(n, lcnet_ckpt, kRoot / "ne36.ckpt");
    EXPECT_THROW(ModelSet::load({kRoot / "kd18.ckpt", kRoot / "ne36.ckpt"}), ConfigError);
}

TEST_F(PipelineTest, BaselinesTrain) {
    auto reg = tiny_train(Phase::lcnet_reg, kRoot / "train");
    reg.epochs = 1;
    train_baseline(reg, kRoot / "reg.ckpt");
    auto ups = tiny_train(Phase::ups_fcn, kRoot / "train");
    ups.epochs = 1;
    ups.deep_layers = 1;
    train_baseline(ups, kRoot / "ups.ckpt");
    EvalConfig ec;
    ec.repeats = 1;
    const auto r = evaluate({kRoot / "reg.ckpt", kRoot / "ups.ckpt"}, kRoot / "test", ec);
    EXPECT_TRUE(r.mean.direction_mae_deg.has_value());
    EXPECT_TRUE(r.mean.normal_mae_deg.has_value());
}

TEST(Studies, DiscretizationEndsWithUnperturbedBaseline) {
    Rng rng(5);
    const auto lights = render::random_lights(rng, 16, 0.2, 2.0);
    const auto st = render::render_stack(render::sphere_scene(48), render::lambertian(Eigen::Array3d::Constant(0.5)),
                                         lights, 0.0, rng);
    const auto est = solver_estimator(solvers::woodham_l2);
    const auto rows = discretization_study({4, 36, 180}, st, est);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_FALSE(rows.back().kd.has_value());
    const auto base = est(st, lights);
    EXPECT_DOUBLE_EQ(rows.back().mae_deg, metrics::angular_mae_deg(base, *st.normals, &st.mask));
    EXPECT_GT(rows[0].mae_deg, rows[1].mae_deg);
    EXPECT_GT(rows[1].mae_deg, rows[2].mae_deg);
    const auto list = default_kd_list();
    EXPECT_TRUE(std::is_sorted(list.begin(), list.end()));
    EXPECT_NE(std::find(list.begin(), list.end(), 36), list.end());
}

TEST(Studies, AverageRowsKeepsOrder) {
    std::vector<AblationRow> rows(4);
    rows[0].id = "A0", rows[1].id = "A1", rows[2].id = "A0", rows[3].id = "A1";
    rows[0].metrics.direction_mae_deg = 2, rows[2].metrics.direction_mae_deg = 4;
    rows[1].metrics.direction_mae_deg = 6, rows[3].metrics.direction_mae_deg = 8;
    const auto mean = average_rows(rows);
    ASSERT_EQ(mean.size(), 2u);
    EXPECT_EQ(mean[0].id, "A0");
    EXPECT_DOUBLE_EQ(*mean[0].metrics.direction_mae_deg, 3.0);
    EXPECT_DOUBLE_EQ(*mean[1].metrics.direction_mae_deg, 7.0);
}

TEST(Protocol, ConfigRoundtripAndReseeding) {
    auto p = ProtocolConfig::ablation();
    KeyValueConfig kv;
    p.write(kv);
    const auto back = ProtocolConfig::read(kv);
    EXPECT_EQ(back.train_data.scenes, p.train_data.scenes);
    EXPECT_EQ(back.lcnet.epochs, p.lcnet.epochs);
    EXPECT_EQ(back.eval.repeats, p.eval.repeats);
    const auto s = p.with_seed(3);
    EXPECT_NE(s.train_data.seed, p.train_data.seed);
    EXPECT_NE(s.lcnet.seed, p.lcnet.seed);
    const auto d = ProtocolConfig::defaults();
    EXPECT_EQ(d.train_data.scenes, 2000);
    EXPECT_EQ(d.test_data.scenes, 100);
}
