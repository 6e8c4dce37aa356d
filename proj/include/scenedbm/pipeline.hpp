#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scenedbm/dbm.hpp"
#include "scenedbm/image.hpp"
#include "scenedbm/slic.hpp"
#include "scenedbm/softmax.hpp"

namespace scenedbm {

struct DatasetItem {
    std::string path;
    int class_index = 0;
    bool train = false;
};

struct Dataset {
    std::vector<std::string> classes;
    std::vector<DatasetItem> items;
    std::uint64_t seed = 0;

    std::vector<DatasetItem> split(bool train) const {
        std::vector<DatasetItem> out;
        for (const DatasetItem& it : items)
            if (it.train == train) out.push_back(it);
        return out;
    }
};

enum class Preprocessor { slic, mean_pool };

struct PipelineConfig {
    int working_size = 64;  // square resize target
    int grid_w = 8, grid_h = 8;
    SlicConfig slic;
    DbmConfig dbm;
    double softmax_lambda = 1e-4;
    double softmax_alpha = 0.5;
    int softmax_iters = 500;
    int train_per_class = 0;  // 0 = all remaining
    int test_per_class = 0;
    std::uint64_t seed = 0;
    Preprocessor preprocessor = Preprocessor::slic;

    void reseed(std::uint64_t s) {
        seed = s;
        slic.seed = s;
        dbm.layer1.seed = s + 1;
        dbm.layer2.seed = s + 2;
    }

    void validate() const {
        require(working_size >= 2, "pipeline: working_size must be >= 2");
        require(grid_w >= 1 && grid_h >= 1, "pipeline: bad grid shape");
        require(static_cast<std::size_t>(grid_w) * grid_h == dbm.p_v,
                "pipeline: grid_w*grid_h must equal dbm visible size");
        dbm.validate();
    }
};

struct EvalReport {
    double recognition_rate = 0.0;
    std::vector<std::vector<int>> confusion;  // [true][predicted]
    Vec per_class_rate;
    double wall_time_seconds = 0.0;

    bool operator==(const EvalReport& o) const {
        return recognition_rate == o.recognition_rate && confusion == o.confusion &&
               per_class_rate == o.per_class_rate;
    }
};

struct TrainingLog {
    double preprocess_seconds = 0.0;
    double dbm_seconds = 0.0;
    double softmax_seconds = 0.0;
    Vec softmax_cost_trace;
};

// Deterministic per-class selection: lexicographic class order, seeded
// shuffle within each class, then the first train_per_class images train
// and the next test_per_class test.
inline Dataset load_dataset(const std::string& root, int train_per_class, int test_per_class,
                            std::uint64_t seed) {
    namespace fs = std::filesystem;
    require(fs::is_directory(root), "dataset root is not a directory: " + root);
    Dataset ds;
    ds.seed = seed;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) ds.classes.push_back(entry.path().filename().string());
    std::sort(ds.classes.begin(), ds.classes.end());
    require(!ds.classes.empty(), "dataset has no class directories: " + root);

    for (std::size_t ci = 0; ci < ds.classes.size(); ++ci) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / ds.classes[ci])) {
            if (!entry.is_regular_file()) continue;
            const std::string ext = entry.path().extension().string();
            if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw std::runtime_error("empty class directory: " + ds.classes[ci]);

        Rng rng(seed * 1000003ULL + ci);
        for (std::size_t i = files.size(); i > 1; --i)
            std::swap(files[i - 1], files[rng.index(i)]);

        const int want_train = train_per_class > 0 ? train_per_class
                                                   : static_cast<int>(files.size()) - test_per_class;
        if (want_train + test_per_class > static_cast<int>(files.size()) || want_train <= 0)
            throw std::runtime_error("insufficient images for class " + ds.classes[ci]);
        for (int i = 0; i < want_train + test_per_class; ++i)
            ds.items.push_back({files[static_cast<std::size_t>(i)], static_cast<int>(ci),
                                i < want_train});
    }
    return ds;
}

inline Vec preprocess(const Image& image, const PipelineConfig& cfg) {
    const Image resized = resize_bilinear(image, cfg.working_size, cfg.working_size);
    const LabImage lab = rgb_to_lab(resized);
    if (cfg.preprocessor == Preprocessor::mean_pool) {
        require(cfg.working_size % cfg.grid_w == 0 && cfg.working_size % cfg.grid_h == 0,
                "mean_pool: working_size not divisible by grid dims");
        const int bw = cfg.working_size / cfg.grid_w, bh = cfg.working_size / cfg.grid_h;
        Vec out(static_cast<std::size_t>(cfg.grid_w) * cfg.grid_h, 0.0);
        for (int gy = 0; gy < cfg.grid_h; ++gy) {
            for (int gx = 0; gx < cfg.grid_w; ++gx) {
                double sum = 0.0;
                for (int y = gy * bh; y < (gy + 1) * bh; ++y)
                    for (int x = gx * bw; x < (gx + 1) * bw; ++x) sum += lab.at(x, y).l;
                out[static_cast<std::size_t>(gy) * cfg.grid_w + gx] =
                    std::clamp(sum / (bw * bh * 100.0), 0.0, 1.0);
            }
        }
        return out;
    }
    SlicConfig slic = cfg.slic;
    slic.k = cfg.grid_w * cfg.grid_h;
    const SuperpixelMap map = run_slic(lab, slic);
    return superpixels_to_grid(map, cfg.grid_w, cfg.grid_h);
}

inline Vec mean_pool_baseline(const Image& image, PipelineConfig cfg) {
    cfg.preprocessor = Preprocessor::mean_pool;
    return preprocess(image, cfg);
}

struct TrainedModels {
    DbmParams dbm;
    SoftmaxParams softmax;
    TrainingLog log;
};

inline TrainedModels run_training(const Dataset& dataset, const PipelineConfig& cfg) {
    cfg.validate();
    const std::vector<DatasetItem> train = dataset.split(true);
    require(!train.empty(), "run_training: empty training split");

    using clock = std::chrono::steady_clock;
    TrainedModels out;

    auto t0 = clock::now();
    std::vector<Vec> features;
    std::vector<int> labels;
    features.reserve(train.size());
    for (const DatasetItem& it : train) {
        try {
            features.push_back(preprocess(read_pnm(it.path), cfg));
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("preprocess: ") + e.what());
        }
        labels.push_back(it.class_index + 1);
    }
    auto t1 = clock::now();
    out.log.preprocess_seconds = std::chrono::duration<double>(t1 - t0).count();

    try {
        out.dbm = pretrain_dbm(features, cfg.dbm);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("pretrain_dbm: ") + e.what());
    }
    auto t2 = clock::now();
    out.log.dbm_seconds = std::chrono::duration<double>(t2 - t1).count();

    LabeledSet set;
    for (const Vec& v : features) set.features.push_back(extract_features(v, out.dbm));
    set.labels = labels;
    try {
        SoftmaxTrainResult sm = train_softmax(set, dataset.classes.size(), cfg.softmax_lambda,
                                              cfg.softmax_alpha, cfg.softmax_iters);
        out.softmax = std::move(sm.params);
        out.log.softmax_cost_trace = std::move(sm.cost_trace);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("train_softmax: ") + e.what());
    }
    auto t3 = clock::now();
    out.log.softmax_seconds = std::chrono::duration<double>(t3 - t2).count();
    return out;
}

inline EvalReport evaluate(const Dataset& dataset, const TrainedModels& models,
                           const PipelineConfig& cfg) {
    cfg.validate();
    require(models.dbm.visible() == cfg.dbm.p_v && models.dbm.hidden2() == cfg.dbm.p_h2,
            "evaluate: model/config dimension mismatch");
    require(models.softmax.features() == models.dbm.hidden2(),
            "evaluate: softmax/dbm dimension mismatch");
    const std::vector<DatasetItem> test = dataset.split(false);
    require(!test.empty(), "evaluate: empty test split");

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t k = dataset.classes.size();
    EvalReport report;
    report.confusion.assign(k, std::vector<int>(k, 0));
    int correct = 0;
    for (const DatasetItem& it : test) {
        const Vec feat = extract_features(preprocess(read_pnm(it.path), cfg), models.dbm);
        const int pred = predict(feat, models.softmax);
        report.confusion[static_cast<std::size_t>(it.class_index)]
                        [static_cast<std::size_t>(pred - 1)] += 1;
        if (pred - 1 == it.class_index) ++correct;
    }
    report.recognition_rate = static_cast<double>(correct) / static_cast<double>(test.size());
    report.per_class_rate.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        int row = 0;
        for (int v : report.confusion[c]) row += v;
        report.per_class_rate[c] = row ? static_cast<double>(report.confusion[c][c]) / row : 0.0;
    }
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// ---------------------------------------------------------------------------
// Model persistence: "SCENEDBM v1" magic, then tagged sections with
// little-endian 64-bit float payloads.

namespace io {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw std::runtime_error("model file truncated");
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

inline void write_f64(std::ostream& out, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(u >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), 8);
}

inline double read_f64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw std::runtime_error("model file truncated");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

inline void write_vec(std::ostream& out, const Vec& v) {
    for (double x : v) write_f64(out, x);
}

inline Vec read_vec(std::istream& in, std::size_t n) {
    Vec v(n);
    for (double& x : v) x = read_f64(in);
    return v;
}

inline void write_tag(std::ostream& out, const std::string& tag) { out << tag << '\n'; }

inline void expect_tag(std::istream& in, const std::string& tag) {
    std::string line;
    if (!std::getline(in, line) || line != tag)
        throw std::runtime_error("model file: expected section " + tag);
}

}  // namespace io

inline void write_rbm_section(std::ostream& out, const RbmParams& p) {
    io::write_tag(out, "RBM");
    io::write_u32(out, static_cast<std::uint32_t>(p.visible()));
    io::write_u32(out, static_cast<std::uint32_t>(p.hidden()));
    io::write_vec(out, p.w.data());
    io::write_vec(out, p.b);
    io::write_vec(out, p.c);
}

inline RbmParams read_rbm_section(std::istream& in) {
    io::expect_tag(in, "RBM");
    const std::size_t pv = io::read_u32(in), ph = io::read_u32(in);
    RbmParams p = RbmParams::zeros(pv, ph);
    p.w.data() = io::read_vec(in, pv * ph);
    p.b = io::read_vec(in, pv);
    p.c = io::read_vec(in, ph);
    return p;
}

inline void write_dbm_section(std::ostream& out, const DbmParams& p) {
    io::write_tag(out, "DBM");
    io::write_u32(out, static_cast<std::uint32_t>(p.visible()));
    io::write_u32(out, static_cast<std::uint32_t>(p.hidden1()));
    io::write_u32(out, static_cast<std::uint32_t>(p.hidden2()));
    io::write_vec(out, p.w1.data());
    io::write_vec(out, p.w2.data());
    io::write_vec(out, p.b);
    io::write_vec(out, p.c1);
    io::write_vec(out, p.c2);
}

inline DbmParams read_dbm_section(std::istream& in) {
    io::expect_tag(in, "DBM");
    const std::size_t pv = io::read_u32(in), h1 = io::read_u32(in), h2 = io::read_u32(in);
    DbmParams p = DbmParams::zeros(pv, h1, h2);
    p.w1.data() = io::read_vec(in, pv * h1);
    p.w2.data() = io::read_vec(in, h1 * h2);
    p.b = io::read_vec(in, pv);
    p.c1 = io::read_vec(in, h1);
    p.c2 = io::read_vec(in, h2);
    return p;
}

inline void write_softmax_section(std::ostream& out, const SoftmaxParams& p) {
    io::write_tag(out, "SOFTMAX");
    io::write_u32(out, static_cast<std::uint32_t>(p.classes()));
    io::write_u32(out, static_cast<std::uint32_t>(p.features()));
    io::write_vec(out, p.theta.data());
    io::write_f64(out, p.lambda);
}

inline SoftmaxParams read_softmax_section(std::istream& in) {
    io::expect_tag(in, "SOFTMAX");
    const std::size_t k = io::read_u32(in), d = io::read_u32(in);
    SoftmaxParams p = SoftmaxParams::zeros(k, d, 0.0);
    p.theta.data() = io::read_vec(in, k * (d + 1));
    p.lambda = io::read_f64(in);
    return p;
}

inline void write_config_section(std::ostream& out, const PipelineConfig& cfg) {
    io::write_tag(out, "CONFIG");
    io::write_u32(out, static_cast<std::uint32_t>(cfg.working_size));
    io::write_u32(out, static_cast<std::uint32_t>(cfg.grid_w));
    io::write_u32(out, static_cast<std::uint32_t>(cfg.grid_h));
    io::write_f64(out, cfg.slic.compactness);
    io::write_u32(out, static_cast<std::uint32_t>(cfg.slic.max_iters));
    io::write_f64(out, cfg.slic.residual_threshold);
    io::write_u32(out, static_cast<std::uint32_t>(cfg.seed));
    io::write_u32(out, static_cast<std::uint32_t>(cfg.train_per_class));
    io::write_u32(out, static_cast<std::uint32_t>(cfg.test_per_class));
    io::write_u32(out, cfg.preprocessor == Preprocessor::mean_pool ? 1u : 0u);
}

inline void read_config_section(std::istream& in, PipelineConfig& cfg) {
    io::expect_tag(in, "CONFIG");
    cfg.working_size = static_cast<int>(io::read_u32(in));
    cfg.grid_w = static_cast<int>(io::read_u32(in));
    cfg.grid_h = static_cast<int>(io::read_u32(in));
    cfg.slic.compactness = io::read_f64(in);
    cfg.slic.max_iters = static_cast<int>(io::read_u32(in));
    cfg.slic.residual_threshold = io::read_f64(in);
    cfg.seed = io::read_u32(in);
    cfg.train_per_class = static_cast<int>(io::read_u32(in));
    cfg.test_per_class = static_cast<int>(io::read_u32(in));
    cfg.preprocessor = io::read_u32(in) ? Preprocessor::mean_pool : Preprocessor::slic;
}

inline void save_model(const std::string& path, const DbmParams& dbm, const SoftmaxParams& softmax,
                       const PipelineConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model: " + path);
    out << "SCENEDBM v1\n";
    write_dbm_section(out, dbm);
    write_softmax_section(out, softmax);
    write_config_section(out, cfg);
    if (!out) throw std::runtime_error("model write failed: " + path);
}

inline void save_pretrained(const std::string& path, const DbmParams& dbm,
                            const PipelineConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model: " + path);
    out << "SCENEDBM v1\n";
    write_dbm_section(out, dbm);
    write_config_section(out, cfg);
    if (!out) throw std::runtime_error("model write failed: " + path);
}

struct LoadedModel {
    DbmParams dbm;
    SoftmaxParams softmax;
    PipelineConfig cfg;
    bool has_softmax = false;
};

inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model: " + path);
    std::string magic;
    if (!std::getline(in, magic)) throw std::runtime_error("model file truncated: " + path);
    if (magic.rfind("SCENEDBM", 0) != 0) throw std::runtime_error("not a model file: " + path);
    if (magic != "SCENEDBM v1") throw std::runtime_error("unsupported version: " + magic);

    LoadedModel m;
    bool has_dbm = false;
    while (true) {
        const int c = in.peek();
        if (c == EOF) break;
        if (c == 'D') {
            m.dbm = read_dbm_section(in);
            has_dbm = true;
        } else if (c == 'S') {
            m.softmax = read_softmax_section(in);
            m.has_softmax = true;
        } else if (c == 'C') {
            read_config_section(in, m.cfg);
        } else {
            throw std::runtime_error("model file: unknown section in " + path);
        }
    }
    if (!has_dbm) throw std::runtime_error("model file has no DBM section: " + path);
    m.cfg.dbm.p_v = m.dbm.visible();
    m.cfg.dbm.p_h1 = m.dbm.hidden1();
    m.cfg.dbm.p_h2 = m.dbm.hidden2();
    m.cfg.slic.k = m.cfg.grid_w * m.cfg.grid_h;
    return m;
}

// ---------------------------------------------------------------------------
// Line-oriented `key = value` config files; '#' starts a comment.

inline PipelineConfig parse_config(std::istream& in) {
    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto trim = [](std::string s) {
            const std::size_t a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
        };
        if (trim(line).empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) + ": missing '='");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        try {
            if (key == "working_size") cfg.working_size = std::stoi(value);
            else if (key == "grid_w") cfg.grid_w = std::stoi(value);
            else if (key == "grid_h") cfg.grid_h = std::stoi(value);
            else if (key == "slic_compactness") cfg.slic.compactness = std::stod(value);
            else if (key == "slic_max_iters") cfg.slic.max_iters = std::stoi(value);
            else if (key == "slic_residual_threshold") cfg.slic.residual_threshold = std::stod(value);
            else if (key == "dbm_h1") cfg.dbm.p_h1 = static_cast<std::size_t>(std::stoul(value));
            else if (key == "dbm_h2") cfg.dbm.p_h2 = static_cast<std::size_t>(std::stoul(value));
            else if (key == "cd_n") cfg.dbm.layer1.n = cfg.dbm.layer2.n = std::stoi(value);
            else if (key == "cd_epochs1") cfg.dbm.layer1.epochs = std::stoi(value);
            else if (key == "cd_epochs2") cfg.dbm.layer2.epochs = std::stoi(value);
            else if (key == "cd_eta") {
                const double eta = std::stod(value);
                cfg.dbm.layer1.eta_w = cfg.dbm.layer1.eta_b = cfg.dbm.layer1.eta_c = eta;
                cfg.dbm.layer2.eta_w = cfg.dbm.layer2.eta_b = cfg.dbm.layer2.eta_c = eta;
            }
            else if (key == "cd_batch_size")
                cfg.dbm.layer1.batch_size = cfg.dbm.layer2.batch_size =
                    static_cast<std::size_t>(std::stoul(value));
            else if (key == "softmax_lambda") cfg.softmax_lambda = std::stod(value);
            else if (key == "softmax_alpha") cfg.softmax_alpha = std::stod(value);
            else if (key == "softmax_iters") cfg.softmax_iters = std::stoi(value);
            else if (key == "train_per_class") cfg.train_per_class = std::stoi(value);
            else if (key == "test_per_class") cfg.test_per_class = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "preprocessor") {
                if (value == "slic") cfg.preprocessor = Preprocessor::slic;
                else if (value == "mean_pool") cfg.preprocessor = Preprocessor::mean_pool;
                else throw std::runtime_error("bad preprocessor: " + value);
            }
            else throw std::runtime_error("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("config line " + std::to_string(lineno) + ": bad value for " +
                                     key);
        }
    }
    cfg.dbm.p_v = static_cast<std::size_t>(cfg.grid_w) * cfg.grid_h;
    cfg.slic.k = cfg.grid_w * cfg.grid_h;
    cfg.slic.seed = cfg.seed;
    cfg.dbm.layer1.seed = cfg.seed + 1;
    cfg.dbm.layer2.seed = cfg.seed + 2;
    return cfg;
}

inline PipelineConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    return parse_config(in);
}

inline void write_report(std::ostream& out, const EvalReport& report,
                         const std::vector<std::string>& classes) {
    out << "class            rate   row counts\n";
    for (std::size_t c = 0; c < classes.size(); ++c) {
        out << std::left << std::setw(16) << classes[c] << ' ' << std::fixed
            << std::setprecision(3) << report.per_class_rate[c] << "  ";
        for (int v : report.confusion[c]) out << ' ' << v;
        out << '\n';
    }
    out << "\nrecognition_rate=" << std::setprecision(6) << report.recognition_rate << '\n';
    out << "confusion=";
    bool first = true;
    for (const auto& row : report.confusion)
        for (int v : row) {
            if (!first) out << ' ';
            out << v;
            first = false;
        }
    out << '\n';
    out << "wall_time_seconds=" << report.wall_time_seconds << '\n';
}

}  // namespace scenedbm
