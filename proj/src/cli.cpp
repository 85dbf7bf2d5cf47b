// SPDX-License-Identifier: Apache-2.0
#include "pscal/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pscal/error.hpp"
#include "pscal/pipeline.hpp"
#include "pscal/render.hpp"
#include "pscal/solvers.hpp"

namespace pscal::cli {

using lightspace::LightSample;
using pipeline::ModelSet;

namespace {

KeyValueConfig load_config(const Options& opt) {
    return opt.config ? KeyValueConfig::load(*opt.config) : KeyValueConfig();
}

void prepare_out(const fs::path& out) {
    const fs::path abs = fs::absolute(out);
    if (abs.has_parent_path() && !fs::exists(abs.parent_path()))
        throw ConfigError("parent of output directory does not exist: " + abs.parent_path().string());
    fs::create_directories(abs);
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return buf;
}

std::vector<std::uint64_t> parse_seeds(const KeyValueConfig& kv, const std::string& key, std::vector<std::uint64_t> def) {
    if (!kv.has(key)) return def;
    std::vector<std::uint64_t> out;
    for (const auto& s : kv.get_list(key, {})) {
        try {
            out.push_back(std::stoull(s));
        } catch (const std::exception&) {
            throw ConfigError("bad seed '" + s + "' in " + key);
        }
    }
    return out;
}

std::vector<int> parse_ints(const KeyValueConfig& kv, const std::string& key, std::vector<int> def) {
    if (!kv.has(key)) return def;
    std::vector<int> out;
    for (const auto& s : kv.get_list(key, {})) {
        try {
            out.push_back(std::stoi(s));
        } catch (const std::exception&) {
            throw ConfigError("bad integer '" + s + "' in " + key);
        }
    }
    return out;
}

pipeline::EvalConfig read_eval_config(const KeyValueConfig& kv, const Options& opt) {
    pipeline::EvalConfig c;
    c.repeats = static_cast<int>(kv.get_int("repeats", c.repeats));
    c.seed = opt.seed.value_or(kv.get_uint("seed", c.seed));
    c.q = static_cast<int>(kv.get_int("q", c.q));
    c.noise_amplitude = kv.get_double("noise_amplitude", c.noise_amplitude);
    c.intensity_min = kv.get_double("intensity_min", c.intensity_min);
    c.intensity_max = kv.get_double("intensity_max", c.intensity_max);
    c.gt_lights_for_normals = kv.get_bool("gt_lights_for_normals", c.gt_lights_for_normals);
    if (kv.has("normal_source")) {
        const std::string s = kv.require_string("normal_source");
        if (s == "nenet") c.normal_source = pipeline::NormalSource::nenet;
        else if (s == "ups_fcn") c.normal_source = pipeline::NormalSource::ups_fcn;
        else if (s == "woodham") c.normal_source = pipeline::NormalSource::woodham;
        else if (s == "none") c.normal_source = pipeline::NormalSource::none;
        else throw ConfigError("unknown normal_source '" + s + "'");
    }
    return c;
}

io::ReadOptions read_options(const KeyValueConfig& kv) {
    io::ReadOptions r;
    r.srgb = kv.get_bool("srgb", false);
    if (kv.has("index_list")) r.index_list = kv.require_string("index_list");
    return r;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
}

void write_ablation(const fs::path& out, const std::string& name, const std::vector<pipeline::AblationRow>& rows) {
    std::ostringstream csv;
    csv << "id,description,seed," << metrics::MetricReport::csv_header().substr(std::string("object,").size()) << "\n";
    auto emit = [&](const pipeline::AblationRow& r, const std::string& seed) {
        const std::string row = r.metrics.csv_row();
        csv << r.id << ",\"" << r.description << "\"," << seed << "," << row.substr(row.find(',') + 1) << "\n";
    };
    for (const auto& r : rows) emit(r, std::to_string(r.seed));
    const auto means = pipeline::average_rows(rows);
    for (const auto& r : means) emit(r, "mean");
    write_text(out / (name + ".csv"), csv.str());

    Series dir{"direction MAE", {}, {}}, nrm{"normal MAE", {}, {}};
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (means[i].metrics.direction_mae_deg) {
            dir.x.push_back(static_cast<double>(i));
            dir.y.push_back(*means[i].metrics.direction_mae_deg);
        }
        if (means[i].metrics.normal_mae_deg) {
            nrm.x.push_back(static_cast<double>(i));
            nrm.y.push_back(*means[i].metrics.normal_mae_deg);
        }
    }
    std::string ids;
    for (std::size_t i = 0; i < means.size(); ++i) ids += (i ? " " : "") + std::to_string(i) + "=" + means[i].id;
    std::vector<Series> series;
    if (!dir.x.empty()) series.push_back(dir);
    if (!nrm.x.empty()) series.push_back(nrm);
    write_curve_svg(out / (name + ".svg"), name, ids, "degrees (seed mean)", series);
    for (const auto& r : means)
        std::cout << r.id << "  dir " << fmt_opt(r.metrics.direction_mae_deg) << "  E_err "
                  << fmt_opt(r.metrics.intensity_rel_err) << "  normal " << fmt_opt(r.metrics.normal_mae_deg) << "  "
                  << r.description << "\n";
}

}  // namespace

Dataset load_any_dataset(const fs::path& path, const io::ReadOptions& options) {
    if (fs::exists(path / "manifest.txt")) return load_dataset(path);
    if (!fs::exists(path / "filenames.txt"))
        throw IoError(path.string() + " holds neither manifest.txt nor filenames.txt");
    io::LoadedScene s = io::read_diligent_layout(path, options);
    Dataset ds;
    ds.manifest.root = path;
    ds.manifest.scenes = {path.filename().string()};
    ds.manifest.hash = io::hash_scene(path);
    SceneRecord r;
    r.name = s.name.empty() ? path.filename().string() : s.name;
    r.stack = std::move(s.stack);
    if (s.meta && s.meta->has("brdf")) r.brdf = render::brdf_from_meta(*s.meta);
    ds.scenes.push_back(std::move(r));
    return ds;
}

int cmd_render(const Options& opt) {
    const KeyValueConfig kv = load_config(opt);
    render::DatasetConfig cfg = render::DatasetConfig::read(kv);
    if (opt.seed) cfg.seed = *opt.seed;
    prepare_out(opt.out);
    const auto manifest = render::generate_dataset(cfg, opt.out);
    manifest.validate();
    std::cout << manifest.hash << "\n";
    return kExitOk;
}

int cmd_train(const Options& opt) {
    const KeyValueConfig kv = load_config(opt);
    pipeline::TrainConfig cfg = pipeline::TrainConfig::read(kv);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.dataset) cfg.dataset = *opt.dataset;
    if (cfg.dataset.empty()) throw ConfigError("no dataset given (--dataset or dataset = ...)");
    prepare_out(opt.out);
    KeyValueConfig frozen;
    cfg.write(frozen);
    frozen.save(opt.out / "config.txt");

    const Dataset data = load_dataset(cfg.dataset);
    const fs::path ckpt = opt.out / (cfg.variant + ".ckpt");
    pipeline::TrainResult r;
    if (cfg.phase == pipeline::Phase::nenet && !cfg.gt_lights) {
        if (opt.ckpts.size() != 1) throw ConfigError("nenet training needs exactly one --ckpt (the LcNet)");
        r = pipeline::train_nenet(cfg, data, opt.ckpts.front(), ckpt);
    } else {
        r = pipeline::train_baseline(cfg, data, ckpt);
    }

    std::ostringstream csv;
    csv << "epoch,learning_rate,train_loss,validation_loss,validation_mae_deg,seconds\n";
    Series mae{"validation MAE", {}, {}};
    for (const auto& e : r.log) {
        csv << e.epoch << "," << e.learning_rate << "," << e.train_loss << "," << e.validation_loss << ","
            << e.validation_mae_deg << "," << e.seconds << "\n";
        mae.x.push_back(e.epoch);
        mae.y.push_back(e.validation_mae_deg);
    }
    write_text(opt.out / "train_log.csv", csv.str());
    write_curve_svg(opt.out / "train_log.svg", cfg.variant + " training", "epoch", "validation MAE (deg)", {mae});
    std::cout << ckpt.string() << " " << r.checkpoint_hash << " best_epoch " << r.best_epoch << "\n";
    return kExitOk;
}

int cmd_eval(const Options& opt) {
    const KeyValueConfig kv = load_config(opt);
    if (opt.ckpts.empty()) throw ConfigError("eval needs at least one --ckpt");
    if (!opt.dataset) throw ConfigError("eval needs --dataset");
    const pipeline::EvalConfig cfg = read_eval_config(kv, opt);
    prepare_out(opt.out);
    ModelSet models = ModelSet::load(opt.ckpts);
    const Dataset data = load_any_dataset(*opt.dataset, read_options(kv));
    const auto res = pipeline::evaluate(models, data, cfg);
    res.save(opt.out);

    if (models.lcnet) {
        std::ostringstream csv;
        csv << "object,image,est_x,est_y,est_z,est_intensity,gt_x,gt_y,gt_z,gt_intensity\n";
        for (const auto& s : data.scenes) {
            const auto est = models::estimate_lights(s.stack, *models.lcnet);
            for (std::size_t i = 0; i < est.size(); ++i) {
                const auto& d = est[i].direction.vec();
                csv << s.name << "," << i << "," << d.x() << "," << d.y() << "," << d.z() << "," << est[i].intensity;
                if (s.stack.lights) {
                    const auto& g = (*s.stack.lights)[i];
                    csv << "," << g.direction.vec().x() << "," << g.direction.vec().y() << "," << g.direction.vec().z()
                        << "," << g.intensity;
                } else {
                    csv << ",,,,";
                }
                csv << "\n";
            }
            write_light_svg(opt.out / ("lights_" + s.name + ".svg"), s.name + ": estimated (dots) vs truth (rings)", est,
                            s.stack.lights.value_or(std::vector<LightSample>{}));
        }
        write_text(opt.out / "lights.csv", csv.str());
    }
    std::cout << res.mean.to_key_value();
    return kExitOk;
}

int cmd_study(const std::string& name, const Options& opt) {
    const KeyValueConfig kv = load_config(opt);
    if (name == "discretization") {
        prepare_out(opt.out);
        const int resolution = static_cast<int>(kv.get_int("resolution", 64));
        const int q = static_cast<int>(kv.get_int("q", 16));
        const std::uint64_t seed = opt.seed.value_or(kv.get_uint("seed", 1));
        Rng rng(seed);
        const auto lights = render::random_lights(rng, q, 0.2, 2.0);
        const ImageStack stack = render::render_stack(render::sphere_scene(resolution),
                                                      render::lambertian(Eigen::Array3d::Constant(kv.get_double("albedo", 0.5))), lights, 0.0, rng);
        std::optional<models::NeNet> nenet;
        pipeline::NormalEstimator est = pipeline::solver_estimator(solvers::woodham_l2);
        if (kv.get_string("estimator", "woodham") == "nenet") {
            if (opt.ckpts.empty()) throw ConfigError("estimator nenet needs --ckpt");
            nenet.emplace(models::load_nenet(models::Checkpoint::load(opt.ckpts.front())));
            est = pipeline::nenet_estimator(*nenet);
        }
        const auto rows = pipeline::discretization_study(parse_ints(kv, "kd_list", pipeline::default_kd_list()), stack, est);
        std::ostringstream csv;
        csv << "kd,upper_bound_mae_deg\n";
        Series s{"upper-bound MAE", {}, {}};
        for (const auto& r : rows) {
            csv << (r.kd ? std::to_string(*r.kd) : "inf") << "," << r.mae_deg << "\n";
            if (r.kd) {
                s.x.push_back(*r.kd);
                s.y.push_back(r.mae_deg);
            }
        }
        Series base{"no discretization", {s.x.front(), s.x.back()}, {rows.back().mae_deg, rows.back().mae_deg}};
        write_text(opt.out / "discretization.csv", csv.str());
        write_curve_svg(opt.out / "discretization.svg", "Discretization upper bound", "K_d", "normal MAE (deg)", {s, base});
        std::cout << csv.str();
        return kExitOk;
    }
    if (name == "image_count") {
        if (opt.ckpts.empty() || !opt.dataset) throw ConfigError("image_count needs --ckpt and --dataset");
        prepare_out(opt.out);
        ModelSet models = ModelSet::load(opt.ckpts);
        const Dataset data = load_dataset(*opt.dataset);
        const auto eval = read_eval_config(kv, opt);
        const auto q_list = parse_ints(kv, "q_list", {1, 2, 4, 8, 16, 32, 64});
        const auto seeds = parse_seeds(kv, "seeds", {1, 2, 3});
        const auto rows = pipeline::image_count_sweep(models, data, q_list, seeds, eval);
        std::ostringstream csv;
        csv << "q,seed,metric,value\n";
        std::map<std::string, Series> curves;
        for (const auto& r : rows) {
            const std::pair<const char*, std::optional<double>> ms[] = {{"direction_mae_deg", r.metrics.direction_mae_deg},
                                                                        {"intensity_rel_err", r.metrics.intensity_rel_err},
                                                                        {"normal_mae_deg", r.metrics.normal_mae_deg}};
            for (const auto& [m, v] : ms)
                if (v) csv << r.q << "," << r.seed << "," << m << "," << *v << "\n";
        }
        for (int q : q_list) {
            std::vector<pipeline::SweepRow> same;
            for (const auto& r : rows)
                if (r.q == q) same.push_back(r);
            double d = 0, n = 0;
            int nd = 0, nn = 0;
            for (const auto& r : same) {
                if (r.metrics.direction_mae_deg) d += *r.metrics.direction_mae_deg, ++nd;
                if (r.metrics.normal_mae_deg) n += *r.metrics.normal_mae_deg, ++nn;
            }
            if (nd) {
                curves["direction MAE"].x.push_back(q);
                curves["direction MAE"].y.push_back(d / nd);
            }
            if (nn) {
                curves["normal MAE"].x.push_back(q);
                curves["normal MAE"].y.push_back(n / nn);
            }
        }
        std::vector<Series> series;
        for (auto& [label, s] : curves) {
            s.label = label;
            series.push_back(s);
        }
        write_text(opt.out / "image_count.csv", csv.str());
        write_curve_svg(opt.out / "image_count.svg", "Error vs number of images", "q", "degrees (seed mean)", series);
        std::cout << csv.str();
        return kExitOk;
    }
    if (name == "ablation_table1" || name == "ablation_table2") {
        prepare_out(opt.out);
        pipeline::ProtocolConfig base = pipeline::ProtocolConfig::ablation();
        KeyValueConfig defaults;
        base.write(defaults);
        for (const auto& [k, v] : kv.entries())
            if (k != "seeds") defaults.set(k, v);
        base = pipeline::ProtocolConfig::read(defaults);
        std::vector<std::uint64_t> seeds = parse_seeds(kv, "seeds", {1, 2, 3});
        if (opt.seed) seeds = {*opt.seed};
        const fs::path work = opt.dataset.value_or(opt.out / "work");
        const auto rows = name == "ablation_table1" ? pipeline::ablation_table1(base, seeds, work)
                                                    : pipeline::ablation_table2(base, seeds, work);
        write_ablation(opt.out, name, rows);
        return kExitOk;
    }
    throw CLI::ValidationError("study", "unknown study '" + name +
                                            "' (expected discretization, image_count, ablation_table1, ablation_table2)");
}

int run(int argc, char** argv) {
    // stdout carries results (hashes, CSV, metrics); logs go to stderr.
    static const bool logger_ready = [] {
        spdlog::set_default_logger(spdlog::stderr_color_mt("ps-selfcal"));
        return true;
    }();
    (void)logger_ready;
    CLI::App app{"Self-calibrating photometric stereo: data, training, evaluation and studies"};
    app.require_subcommand(1);
    Options opt;
    std::string study_name;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "key = value configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "seed override");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--ckpt", opt.ckpts, "checkpoint(s)");
        sub->add_option("--dataset", opt.dataset, "dataset directory");
    };
    auto* render_cmd = app.add_subcommand("render", "generate a synthetic dataset");
    auto* train_cmd = app.add_subcommand("train", "train one phase or baseline");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints on a dataset");
    auto* study_cmd = app.add_subcommand("study", "run a study");
    study_cmd->add_option("name", study_name, "discretization | image_count | ablation_table1 | ablation_table2")
        ->required();
    for (auto* s : {render_cmd, train_cmd, eval_cmd, study_cmd}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*render_cmd) return cmd_render(opt);
        if (*train_cmd) return cmd_train(opt);
        if (*eval_cmd) return cmd_eval(opt);
        return cmd_study(study_name, opt);
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DomainError& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

// Plots ---------------------------------------------------------------------

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

/// Blue -> red ramp for t in [0, 1].
std::string ramp(double t) {
    t = std::clamp(t, 0.0, 1.0);
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(255 * t), 40, static_cast<int>(255 * (1 - t)));
    return buf;
}

}  // namespace

void write_curve_svg(const fs::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<Series>& series) {
    const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 60;
    double x0 = 1e300, x1 = -1e300, y0 = 0.0, y1 = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (x0 > x1) x0 = 0, x1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;
    y1 *= 1.05;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double xv = x0 + (x1 - x0) * k / 5, yv = y0 + (y1 - y0) * k / 5;
        o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt_opt(xv) << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt_opt(yv) << "</text>\n";
    }
    o << "<text x=\"" << W / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << H / 2 << ")\">"
      << escape(y_label) << "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* colour = kPalette[si % 6];
        o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << "," << py(s.y[i]) << " ";
        o << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
        o << "<text x=\"" << W - R - 150 << "\" y=\"" << T + 14 * (si + 1) << "\" fill=\"" << colour << "\">"
          << escape(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    write_text(path, o.str());
}

void write_light_svg(const fs::path& path, const std::string& title, const std::vector<LightSample>& lights,
                     const std::vector<LightSample>& reference) {
    const double S = 420, C = S / 2, Rad = 180;
    double emax = 0.0;
    for (const auto& l : lights) emax = std::max(emax, l.intensity);
    for (const auto& l : reference) emax = std::max(emax, l.intensity);
    if (emax <= 0.0) emax = 1.0;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << S << "\" height=\"" << S + 30
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << C << "\" y=\"18\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
    o << "<circle cx=\"" << C << "\" cy=\"" << C + 30 << "\" r=\"" << Rad << "\" fill=\"none\" stroke=\"gray\"/>\n";
    for (const auto& l : reference) {
        const auto& d = l.direction.vec();
        o << "<circle cx=\"" << C + Rad * d.x() << "\" cy=\"" << C + 30 - Rad * d.y() << "\" r=\"6\" fill=\"none\" stroke=\""
          << ramp(l.intensity / emax) << "\"/>\n";
    }
    for (const auto& l : lights) {
        const auto& d = l.direction.vec();
        o << "<circle cx=\"" << C + Rad * d.x() << "\" cy=\"" << C + 30 - Rad * d.y() << "\" r=\"3\" fill=\""
          << ramp(l.intensity / emax) << "\"/>\n";
    }
    o << "</svg>\n";
    write_text(path, o.str());
}

}  // namespace pscal::cli
