// SPDX-License-Identifier: Apache-2.0
//
// Training, evaluation and the experiment harness.
//
// Two phases: LcNet is trained on lighting labels only; NeNet is then
// trained from scratch on lights estimated by the frozen LcNet. Baselines
// share the same loops with a variant flag.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pscal/config.hpp"
#include "pscal/dataset.hpp"
#include "pscal/metrics.hpp"
#include "pscal/models.hpp"
#include "pscal/solvers.hpp"

namespace pscal::pipeline {

namespace fs = std::filesystem;

enum class Phase { lcnet, nenet, lcnet_reg, ups_fcn };
std::string to_string(Phase p);
Phase parse_phase(const std::string& s);

struct TrainConfig {
    Phase phase = Phase::lcnet;
    /// Free-form tag stored in the checkpoint (A0, local, ...).
    std::string variant = "default";
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 0.0005;
    int lr_halving_period_epochs = 5;
    std::uint64_t seed = 1;
    int q_per_sample = 8;
    double noise_amplitude = 0.025;
    double intensity_min = 0.2;
    double intensity_max = 2.0;
    fs::path dataset;
    double validation_fraction = 0.1;
    /// Scenes used from the dataset, 0 = all.
    int max_scenes = 0;

    int base_channels = 16;
    int kd = 36;
    int ke = 20;
    int input_resolution = 32;
    bool use_mask = true;
    bool use_global = true;
    int deep_layers = 6;
    /// NeNet only: train on ground-truth lights instead of LcNet estimates.
    bool gt_lights = false;

    void validate() const;
    void write(KeyValueConfig& kv) const;
    static TrainConfig read(const KeyValueConfig& kv);
    /// Default schedule of a phase (epochs, batch size, halving period).
    static TrainConfig defaults(Phase phase);

    models::LcNetConfig lcnet_config() const;
    models::NeNetConfig nenet_config() const;
    models::UpsFcnConfig ups_fcn_config() const;
};

/// learning_rate * 0.5^floor(epoch / period), epochs counted from 0.
double learning_rate_at(const TrainConfig& config, int epoch);

struct EpochLog {
    int epoch = 0;
    double learning_rate = 0.0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    /// Direction MAE for lighting phases, normal MAE otherwise.
    double validation_mae_deg = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    fs::path checkpoint;
    std::string checkpoint_hash;
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double final_train_loss = 0.0;
};

/// Trains an LcNet (classification or regression, per config.phase) on the
/// dataset and saves the best-validation checkpoint. Throws NumericError
/// when the loss diverges.
TrainResult train_lcnet(const TrainConfig& config, const Dataset& data, const fs::path& checkpoint);
TrainResult train_lcnet(const TrainConfig& config, const fs::path& checkpoint);
/// NeNet on lights estimated by the frozen LcNet checkpoint (or on ground
/// truth when config.gt_lights is set; lcnet may then be empty).
TrainResult train_nenet(const TrainConfig& config, const Dataset& data, const fs::path& lcnet_checkpoint,
                        const fs::path& checkpoint);
TrainResult train_nenet(const TrainConfig& config, const fs::path& lcnet_checkpoint, const fs::path& checkpoint);
/// Dispatches on the phase: lcnet_reg / lcnet variants and ups_fcn.
TrainResult train_baseline(const TrainConfig& config, const Dataset& data, const fs::path& checkpoint);
TrainResult train_baseline(const TrainConfig& config, const fs::path& checkpoint);

/// Signature of (config, dataset hash, upstream checkpoint hash); stored in
/// checkpoints so an identical run can be skipped.
std::string train_signature(const TrainConfig& config, const std::string& dataset_hash,
                            const std::string& upstream_hash = "");
/// True when the checkpoint exists and carries this signature.
bool checkpoint_matches(const fs::path& checkpoint, const std::string& signature);

// Evaluation ----------------------------------------------------------------

/// Loaded models of one evaluation run; any subset may be present.
struct ModelSet {
    std::optional<models::LcNet> lcnet;
    std::optional<models::NeNet> nenet;
    std::optional<models::UpsFcn> ups_fcn;
    /// Hashes of the checkpoint files the models came from.
    std::map<std::string, std::string> checkpoint_hashes;

    /// Loads each checkpoint by its stored model kind.
    static ModelSet load(const std::vector<fs::path>& checkpoints);
};

enum class NormalSource { nenet, ups_fcn, woodham, none };

struct EvalConfig {
    int repeats = 5;
    std::uint64_t seed = 7;
    /// Images per object, 0 = all stored lights.
    int q = 0;
    double noise_amplitude = 0.0;
    double intensity_min = 0.2;
    double intensity_max = 2.0;
    /// Feed ground-truth lights to the normal estimator instead of estimates.
    bool gt_lights_for_normals = false;
    /// Defaults to nenet, else ups_fcn, else none.
    std::optional<NormalSource> normal_source;
};

struct ExperimentResult {
    /// Per object, averaged over repeats.
    std::vector<metrics::MetricReport> objects;
    /// Mean over objects of every repeat.
    std::vector<metrics::MetricReport> repeats;
    /// Mean over repeats.
    metrics::MetricReport mean;
    double intensity_err_variance = 0.0;
    KeyValueConfig config;
    std::map<std::string, std::string> hashes;
    double seconds = 0.0;
    std::uint64_t seed = 0;

    void save(const fs::path& dir) const;
};

/// Scenes with BRDF metadata are re-rendered with reseeded intensities and
/// noise on every repeat; other scenes are evaluated once as stored.
/// Throws ConfigError when a checkpoint's bins disagree with another's.
ExperimentResult evaluate(ModelSet& models, const Dataset& data, const EvalConfig& config);
ExperimentResult evaluate(const std::vector<fs::path>& checkpoints, const fs::path& dataset,
                          const EvalConfig& config);

// Studies -------------------------------------------------------------------

/// Estimates normals from a stack and a set of lights.
using NormalEstimator = std::function<NormalMap(const ImageStack&, const std::vector<lightspace::LightSample>&)>;
NormalEstimator solver_estimator(const solvers::Solver& solver);
NormalEstimator nenet_estimator(models::NeNet& model);

struct DiscretizationRow {
    std::optional<int> kd;  // empty = no perturbation
    double mae_deg = 0.0;
};
std::vector<int> default_kd_list();
/// Worst MAE over the four corner perturbations of every light, per K_d,
/// followed by the unperturbed row. The stack needs lights and normals.
std::vector<DiscretizationRow> discretization_study(const std::vector<int>& kd_list, const ImageStack& scene,
                                                    const NormalEstimator& estimator);

struct SweepRow {
    int q = 0;
    std::uint64_t seed = 0;
    metrics::MetricReport metrics;
};
/// Every scene with BRDF metadata is re-rendered under q fresh random lights
/// per (q, seed). Returns one row per (q, seed) with object-mean metrics.
std::vector<SweepRow> image_count_sweep(ModelSet& models, const Dataset& data, const std::vector<int>& q_list,
                                        const std::vector<std::uint64_t>& seeds, const EvalConfig& base);

// Experiment harness --------------------------------------------------------

/// Scale of one training protocol: datasets, phases and evaluation.
struct ProtocolConfig {
    render::DatasetConfig train_data;
    render::DatasetConfig test_data;
    TrainConfig lcnet = TrainConfig::defaults(Phase::lcnet);
    TrainConfig nenet = TrainConfig::defaults(Phase::nenet);
    EvalConfig eval;

    /// Desk-scale defaults: 2000 training scenes, 100 test scenes.
    static ProtocolConfig defaults();
    /// Multi-seed ablations: default training scale, two evaluation repeats.
    static ProtocolConfig ablation();
    void write(KeyValueConfig& kv) const;
    /// Keys prefixed with train_data., test_data., lcnet., nenet., eval.
    static ProtocolConfig read(const KeyValueConfig& kv);
    /// Reseeds datasets and training runs from one seed.
    ProtocolConfig with_seed(std::uint64_t seed) const;
};

struct ProtocolRun {
    fs::path train_dataset;
    fs::path test_dataset;
    fs::path lcnet_checkpoint;
    fs::path nenet_checkpoint;
    ExperimentResult result;
};

/// Generates (or reuses) both datasets under workdir, trains (or reuses)
/// LcNet and NeNet and evaluates them on the test set.
ProtocolRun run_protocol(const ProtocolConfig& config, const fs::path& workdir);

/// Generates the dataset unless workdir already holds one with the same
/// frozen config. Returns the manifest.
io::DatasetManifest ensure_dataset(const render::DatasetConfig& config, const fs::path& root);

struct AblationRow {
    std::string id;
    std::string description;
    std::uint64_t seed = 0;
    metrics::MetricReport metrics;
};

/// A0 classification LcNet, A1 regression, A2 without mask, A3 local only.
std::vector<AblationRow> ablation_table1(const ProtocolConfig& config, const std::vector<std::uint64_t>& seeds,
                                         const fs::path& workdir);
/// B1 LcNet + NeNet, B2 NeNet trained on ground-truth lights but tested on
/// LcNet estimates, B5 single-stage UpsFcn; B0 is NeNet given ground-truth
/// lights at test time for reference.
std::vector<AblationRow> ablation_table2(const ProtocolConfig& config, const std::vector<std::uint64_t>& seeds,
                                         const fs::path& workdir);
/// Seed means per id, in first-seen order.
std::vector<AblationRow> average_rows(const std::vector<AblationRow>& rows);

}  // namespace pscal::pipeline
