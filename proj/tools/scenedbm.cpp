// Command-line front end: SLIC superpixels, DBM pretraining, end-to-end
// scene recognition training and evaluation.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "scenedbm/pipeline.hpp"

namespace {

scenedbm::PipelineConfig load_config(const std::string& path, std::uint64_t seed) {
    scenedbm::PipelineConfig cfg =
        path.empty() ? scenedbm::PipelineConfig{} : scenedbm::parse_config_file(path);
    cfg.reseed(seed ? seed : cfg.seed);
    cfg.dbm.p_v = static_cast<std::size_t>(cfg.grid_w) * cfg.grid_h;
    cfg.slic.k = cfg.grid_w * cfg.grid_h;
    return cfg;
}

bool parse_grid(const std::string& spec, int& w, int& h) {
    const std::size_t x = spec.find('x');
    if (x == std::string::npos) return false;
    try {
        w = std::stoi(spec.substr(0, x));
        h = std::stoi(spec.substr(x + 1));
    } catch (const std::exception&) {
        return false;
    }
    return w >= 1 && h >= 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scene recognition with SLIC superpixels and a deep Boltzmann machine"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Global random seed");

    // superpixel
    auto* sp = app.add_subcommand("superpixel", "Segment one image into SLIC superpixels");
    std::string sp_input, sp_labels, sp_grid;
    int sp_k = 100, sp_iters = 10;
    double sp_m = 10.0;
    sp->add_option("--input", sp_input, "PGM/PPM image")->required();
    sp->add_option("--k", sp_k, "Desired superpixel count");
    sp->add_option("--compactness", sp_m, "Compactness m");
    sp->add_option("--max-iters", sp_iters, "Iteration cap");
    sp->add_option("--out-labels", sp_labels, "Label map output path");
    sp->add_option("--out-grid", sp_grid, "Emit a WxH luminance grid to stdout");

    // train
    auto* tr = app.add_subcommand("train", "Train the full pipeline on a class-per-directory dataset");
    std::string tr_data, tr_config, tr_out;
    tr->add_option("--data", tr_data, "Dataset root directory")->required();
    tr->add_option("--config", tr_config, "Config file (key = value lines)");
    tr->add_option("--out", tr_out, "Model output path")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a trained model");
    std::string ev_data, ev_model, ev_report;
    ev->add_option("--data", ev_data, "Dataset root directory")->required();
    ev->add_option("--model", ev_model, "Trained model file")->required();
    ev->add_option("--report", ev_report, "Report output path (default stdout)");

    // pretrain
    auto* pt = app.add_subcommand("pretrain", "Pretrain only the DBM");
    std::string pt_data, pt_config, pt_out;
    pt->add_option("--data", pt_data, "Dataset root directory")->required();
    pt->add_option("--config", pt_config, "Config file");
    pt->add_option("--out", pt_out, "Model output path")->required();

    // reconstruct
    auto* rc = app.add_subcommand("reconstruct", "Reconstruct an image through the DBM");
    std::string rc_model, rc_input, rc_out;
    rc->add_option("--model", rc_model, "Model file")->required();
    rc->add_option("--input", rc_input, "PGM/PPM image")->required();
    rc->add_option("--out", rc_out, "Reconstruction output (PGM)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sp->parsed()) {
            scenedbm::Image img = scenedbm::read_pnm(sp_input);
            scenedbm::SlicConfig cfg;
            cfg.k = sp_k;
            cfg.compactness = sp_m;
            cfg.max_iters = sp_iters;
            cfg.seed = seed;
            scenedbm::SuperpixelMap map = scenedbm::run_slic(img, cfg);
            std::cerr << "superpixels: " << map.centers.size() << " (iterations "
                      << map.iterations_used << ", residual " << map.final_residual << ")\n";
            if (!sp_labels.empty()) scenedbm::write_label_map(sp_labels, map);
            if (!sp_grid.empty()) {
                int gw, gh;
                if (!parse_grid(sp_grid, gw, gh))
                    throw std::runtime_error("--out-grid expects WxH, e.g. 40x40");
                const scenedbm::Vec grid = scenedbm::superpixels_to_grid(map, gw, gh);
                std::cout << gw << " " << gh << "\n";
                for (int y = 0; y < gh; ++y) {
                    for (int x = 0; x < gw; ++x) {
                        if (x) std::cout << ' ';
                        std::cout << grid[static_cast<std::size_t>(y) * gw + x];
                    }
                    std::cout << '\n';
                }
            }
        } else if (tr->parsed()) {
            scenedbm::PipelineConfig cfg = load_config(tr_config, seed);
            scenedbm::Dataset ds = scenedbm::load_dataset(tr_data, cfg.train_per_class,
                                                          cfg.test_per_class, cfg.seed);
            scenedbm::TrainedModels models = scenedbm::run_training(ds, cfg);
            scenedbm::save_model(tr_out, models.dbm, models.softmax, cfg);
            std::cerr << "trained on " << ds.split(true).size() << " images; stage times [s]: "
                      << "preprocess " << models.log.preprocess_seconds << ", dbm "
                      << models.log.dbm_seconds << ", softmax " << models.log.softmax_seconds
                      << "\n";
        } else if (ev->parsed()) {
            scenedbm::LoadedModel m = scenedbm::load_model(ev_model);
            if (!m.has_softmax)
                throw std::runtime_error("model has no classifier; run train, not pretrain");
            scenedbm::PipelineConfig cfg = m.cfg;
            cfg.reseed(seed ? seed : cfg.seed);
            scenedbm::Dataset ds = scenedbm::load_dataset(ev_data, cfg.train_per_class,
                                                          cfg.test_per_class, cfg.seed);
            scenedbm::TrainedModels models{m.dbm, m.softmax, {}};
            scenedbm::EvalReport report = scenedbm::evaluate(ds, models, cfg);
            if (ev_report.empty()) {
                scenedbm::write_report(std::cout, report, ds.classes);
            } else {
                std::ofstream out(ev_report);
                if (!out) throw std::runtime_error("cannot write report: " + ev_report);
                scenedbm::write_report(out, report, ds.classes);
            }
        } else if (pt->parsed()) {
            scenedbm::PipelineConfig cfg = load_config(pt_config, seed);
            scenedbm::Dataset ds = scenedbm::load_dataset(pt_data, cfg.train_per_class,
                                                          cfg.test_per_class, cfg.seed);
            std::vector<scenedbm::Vec> features;
            for (const scenedbm::DatasetItem& it : ds.split(true))
                features.push_back(scenedbm::preprocess(scenedbm::read_pnm(it.path), cfg));
            scenedbm::DbmParams dbm = scenedbm::pretrain_dbm(features, cfg.dbm);
            scenedbm::save_pretrained(pt_out, dbm, cfg);
            std::cerr << "pretrained DBM " << dbm.visible() << "-" << dbm.hidden1() << "-"
                      << dbm.hidden2() << " on " << features.size() << " images\n";
        } else if (rc->parsed()) {
            scenedbm::LoadedModel m = scenedbm::load_model(rc_model);
            scenedbm::PipelineConfig cfg = m.cfg;
            cfg.reseed(seed ? seed : cfg.seed);
            const scenedbm::Vec v = scenedbm::preprocess(scenedbm::read_pnm(rc_input), cfg);
            const scenedbm::Vec r = scenedbm::reconstruct(v, m.dbm);
            scenedbm::Image out;
            out.width = cfg.grid_w;
            out.height = cfg.grid_h;
            out.channels = 1;
            out.data.resize(r.size());
            for (std::size_t i = 0; i < r.size(); ++i)
                out.data[i] = static_cast<std::uint8_t>(std::lround(r[i] * 255.0));
            scenedbm::write_pnm(rc_out, out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
