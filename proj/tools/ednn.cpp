#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <ednn/ednn.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string precision = "f32";
    int threads = 0;  // 0: use EDNN_THREADS or 1
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--precision", o.precision, "Compute precision: f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));
    cmd->add_option("--threads", o.threads, "Worker threads (env EDNN_THREADS as fallback)");
    cmd->set_config("--config", "", "Key-value config file; command-line flags override");
}

void apply_common(const CommonOpts& o) {
    int threads = o.threads;
    if (threads <= 0)
        if (const char* env = std::getenv("EDNN_THREADS")) threads = std::atoi(env);
    ednn::set_threads(threads > 0 ? threads : 1);
}

void emit(const json& result) { std::cout << result.dump(2) << std::endl; }

ednn::EDNNConfig config_from_dataset(const ednn::LoadedDataset& ds, ednn::EDNNConfig cfg) {
    cfg.classes = static_cast<int>(ds.class_names.size());
    if (!ds.train_images.empty()) cfg.channels = ds.train_images[0].channels;
    else if (!ds.test_images.empty()) cfg.channels = ds.test_images[0].channels;
    return cfg;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
    CommonOpts common;
    std::string out, variant = "MNIST-1";
    std::uint64_t seed = 0;
    int train_examples = 100, test_examples = 20;
    int canvas = 0, l_max = -1, glyph_size = 0, pool_size = ednn::DigitPool::kPerDigit;
    std::string idx_images, idx_labels;
};

int run_generate(const GenerateOpts& o) {
    ednn::DatasetSpec spec = ednn::DatasetSpec::variant_defaults(ednn::variant_from_name(o.variant));
    if (o.canvas > 0) spec.canvas = o.canvas;
    if (o.l_max >= 0) spec.l_max = o.l_max;
    spec.glyph_size = o.glyph_size;
    spec.train_examples = o.train_examples;
    spec.test_examples = o.test_examples;
    spec.seed = o.seed;

    ednn::DatasetManifest manifest;
    if (spec.is_shapes()) {
        std::cerr << "generating " << o.variant << " dataset into " << o.out << "\n";
        manifest = ednn::generate_shapes(spec, o.out);
    } else {
        ednn::DigitPool pool;
        if (!o.idx_images.empty()) {
            std::cerr << "loading IDX glyphs from " << o.idx_images << "\n";
            pool = ednn::load_idx(o.idx_images, o.idx_labels);
        } else {
            std::cerr << "rendering synthetic glyph pool (" << o.pool_size << "/digit)\n";
            pool = ednn::synthetic_digit_pool(spec.seed, o.pool_size);
        }
        std::cerr << "generating " << o.variant << " dataset into " << o.out << "\n";
        manifest = ednn::generate_dataset(spec, pool, o.out);
    }

    json result;
    result["command"] = "generate";
    result["out"] = o.out;
    result["variant"] = o.variant;
    result["train_examples"] = spec.train_examples;
    result["test_examples"] = spec.test_examples;
    result["seed"] = spec.seed;
    emit(result);
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    CommonOpts common;
    std::string dataset_dir, out, warm_start;
    std::uint64_t seed = 0;
    int focus = 8, context = 8, classes = 0, kernels = 64, dense_width = 1024;
    long epochs_max = 500;
    int batch_size = 32;
    double lr = 1e-4, loss_threshold = 1e-3;
    std::vector<std::string> augment;
    std::string log_path;
};

template <typename T>
int run_train_t(const TrainOpts& o) {
    std::cerr << "loading dataset " << o.dataset_dir << "\n";
    ednn::LoadedDataset ds = ednn::load_dataset(o.dataset_dir);

    ednn::EDNNConfig cfg;
    std::optional<ednn::Checkpoint> warm;
    if (!o.warm_start.empty()) {
        warm = ednn::load_checkpoint(o.warm_start);
        cfg = warm->config;  // fine-tuning keeps the checkpoint architecture
    } else {
        cfg.focus = o.focus;
        cfg.context = o.context;
        cfg.kernels = o.kernels;
        cfg.dense_width = o.dense_width;
        cfg = config_from_dataset(ds, cfg);
        if (o.classes > 0) cfg.classes = o.classes;
    }

    ednn::TrainConfig tc;
    tc.lr = o.lr;
    tc.loss_threshold = o.loss_threshold;
    tc.epochs_max = o.epochs_max;
    tc.batch_size = o.batch_size;
    tc.seed = o.seed;
    for (const auto& a : o.augment) {
        if (a == "rotate90") tc.augment_rotate = true;
        else if (a == "downscale") tc.augment_downscale = true;
        else throw ednn::ConfigError("unknown augmentation '" + a + "'");
    }

    std::ofstream log_file;
    if (!o.log_path.empty()) {
        log_file.open(o.log_path);
        if (!log_file) throw ednn::IoError("cannot open training log " + o.log_path);
    }
    struct TeeBuf : std::streambuf {
        std::streambuf *a, *b;
        int overflow(int ch) override {
            if (ch != EOF) { a->sputc(char(ch)); if (b) b->sputc(char(ch)); }
            return ch;
        }
    } tee;
    tee.a = std::cerr.rdbuf();
    tee.b = log_file.is_open() ? log_file.rdbuf() : nullptr;
    std::ostream log_stream(&tee);

    std::cerr << "training f=" << cfg.focus << " c=" << cfg.context << " l=" << cfg.classes
              << " on " << ds.train_images.size() << " images\n";
    std::optional<ednn::ParamSet<T>> initial;
    long first_epoch = 0;
    if (warm) {
        initial = ednn::params_cast<T>(warm->params);
        first_epoch = warm->epoch;
    }
    auto result = ednn::train<T>(ds, cfg, tc, &log_stream,
                                 initial ? &*initial : nullptr, first_epoch);

    ednn::Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.params = ednn::params_cast<float>(result.params);
    ckpt.seed = tc.seed;
    ckpt.epoch = first_epoch + result.epochs;
    ckpt.loss = result.final_loss;
    ednn::save_checkpoint(ckpt, o.out);

    json jr;
    jr["command"] = "train";
    jr["checkpoint"] = o.out;
    jr["epochs"] = result.epochs;
    jr["final_loss"] = result.final_loss;
    jr["converged"] = result.converged;
    jr["diverged"] = result.diverged;
    jr["seed"] = tc.seed;
    emit(jr);
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    CommonOpts common;
    std::string dataset_dir, checkpoint, split = "test";
};

template <typename T>
int run_eval_t(const EvalOpts& o) {
    ednn::Checkpoint ckpt = ednn::load_checkpoint(o.checkpoint);
    ednn::LoadedDataset ds = ednn::load_dataset(o.dataset_dir);
    auto params = ednn::params_cast<T>(ckpt.params);
    const bool test = o.split == "test";
    const auto& images = test ? ds.test_images : ds.train_images;
    const auto& labels = test ? ds.test_labels : ds.train_labels;
    std::cerr << "evaluating " << images.size() << " " << o.split << " images\n";
    ednn::EvalReport report = ednn::evaluate<T>(std::span<const ednn::Image>(images), labels,
                                                params, ckpt.config, ds.spec.l_max, ds.class_names);
    json jr = report.to_json();
    jr["command"] = "eval";
    jr["split"] = o.split;
    jr["checkpoint"] = o.checkpoint;
    emit(jr);
    return 0;
}

// ---------------------------------------------------------------------------
// count / localize

struct CountOpts {
    CommonOpts common;
    std::string image, checkpoint, regions;
};

template <typename T>
json predict_image(const CountOpts& o, ednn::Checkpoint& ckpt, ednn::Prediction<T>& pred,
                   ednn::Image& padded) {
    ckpt = ednn::load_checkpoint(o.checkpoint);
    ednn::Image img = ednn::read_png(o.image);
    if (img.channels != ckpt.config.channels)
        throw ednn::ShapeError("image has " + std::to_string(img.channels) +
                               " channels, checkpoint expects " +
                               std::to_string(ckpt.config.channels));
    padded = ednn::pad_to_multiple(img, ckpt.config.focus);
    auto params = ednn::params_cast<T>(ckpt.params);
    std::cerr << "evaluating " << padded.width << "x" << padded.height << " image ("
              << (padded.width / ckpt.config.focus) * (padded.height / ckpt.config.focus)
              << " tiles)\n";
    pred = ednn::predict(std::span<const ednn::Image>(&padded, 1), params, ckpt.config);

    json counts = json::array();
    for (int c = 0; c < ckpt.config.classes; ++c) {
        json jc;
        jc["class"] = c;
        jc["count"] = static_cast<double>(pred.counts[c]);
        jc["rounded"] = static_cast<long>(std::lround(static_cast<double>(pred.counts[c])));
        counts.push_back(jc);
    }
    return counts;
}

template <typename T>
int run_count_t(const CountOpts& o) {
    ednn::Checkpoint ckpt;
    ednn::Prediction<T> pred;
    ednn::Image padded;
    json jr;
    jr["command"] = "count";
    jr["image"] = o.image;
    jr["counts"] = predict_image<T>(o, ckpt, pred, padded);

    if (!o.regions.empty()) {
        std::ifstream is(o.regions);
        if (!is) throw ednn::IoError("cannot open regions file " + o.regions);
        json jregs;
        try {
            is >> jregs;
        } catch (const json::exception& e) {
            throw ednn::FormatError(o.regions + ": " + e.what());
        }
        if (jregs.is_object() && jregs.contains("regions")) jregs = jregs["regions"];
        ednn::DensityMap<T> dm = ednn::assemble_density_map(pred.contribs, 0);
        json out = json::array();
        for (const auto& jreg : jregs) {
            ednn::GridRect rect;
            rect.row = jreg.at("row");
            rect.col = jreg.at("col");
            rect.rows = jreg.at("rows");
            rect.cols = jreg.at("cols");
            json je;
            if (jreg.contains("name")) je["name"] = jreg["name"];
            je["row"] = rect.row;
            je["col"] = rect.col;
            je["rows"] = rect.rows;
            je["cols"] = rect.cols;
            je["sums"] = ednn::region_sum(dm, rect);
            out.push_back(je);
        }
        jr["regions"] = out;
    }
    emit(jr);
    return 0;
}

struct LocalizeOpts {
    CommonOpts common;
    std::string image, checkpoint, out;
};

template <typename T>
int run_localize_t(const LocalizeOpts& o) {
    CountOpts co;
    co.image = o.image;
    co.checkpoint = o.checkpoint;
    ednn::Checkpoint ckpt;
    ednn::Prediction<T> pred;
    ednn::Image padded;
    json jr;
    jr["command"] = "localize";
    jr["image"] = o.image;
    jr["counts"] = predict_image<T>(co, ckpt, pred, padded);

    ednn::DensityMap<T> dm = ednn::assemble_density_map(pred.contribs, 0);
    json files = json::array();
    for (int c = 0; c < ckpt.config.classes; ++c) {
        std::string csv_path = o.out + "_class" + std::to_string(c) + ".csv";
        std::string png_path = o.out + "_class" + std::to_string(c) + "_overlay.png";
        std::ofstream csv(csv_path);
        if (!csv) throw ednn::IoError("cannot write " + csv_path);
        ednn::write_density_csv_class(csv, dm, c);
        ednn::write_png(png_path, ednn::render_heatmap(padded, dm, c));
        json jf;
        jf["class"] = c;
        jf["csv"] = csv_path;
        jf["overlay"] = png_path;
        files.push_back(jf);
    }
    jr["files"] = files;
    emit(jr);
    return 0;
}

template <typename F32, typename F64>
int dispatch(const std::string& precision, F32&& f32, F64&& f64) {
    return precision == "f64" ? f64() : f32();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EDNN: weakly-supervised object counting and localization"};
    app.require_subcommand(1);

    GenerateOpts gen;
    auto* cgen = app.add_subcommand("generate", "Generate a synthetic counting dataset");
    cgen->add_option("--out", gen.out, "Output dataset directory")->required();
    cgen->add_option("--variant", gen.variant,
                     "MNIST-1|MNIST-2|MNIST-10|MNIST-2-occ|MNIST-2-occ-vs|SHAPES-1|SHAPES-2");
    cgen->add_option("--seed", gen.seed, "Dataset seed");
    cgen->add_option("--train-examples", gen.train_examples, "Training images to generate");
    cgen->add_option("--test-examples", gen.test_examples, "Test images to generate");
    cgen->add_option("--canvas", gen.canvas, "Canvas side in pixels (0: variant default)");
    cgen->add_option("--l-max", gen.l_max, "Maximum count per class (-1: variant default)");
    cgen->add_option("--glyph-size", gen.glyph_size, "Pre-scale glyphs to this side (0: native 28)");
    cgen->add_option("--pool-size", gen.pool_size, "Synthetic glyphs per digit");
    cgen->add_option("--idx-images", gen.idx_images, "IDX image file (use real glyphs)");
    cgen->add_option("--idx-labels", gen.idx_labels, "IDX label file")->needs("--idx-images");
    add_common(cgen, gen.common);

    TrainOpts tr;
    auto* ctr = app.add_subcommand("train", "Train a counting model");
    ctr->add_option("--dataset-dir", tr.dataset_dir, "Dataset directory")->required();
    ctr->add_option("--out", tr.out, "Output checkpoint path")->required();
    ctr->add_option("--checkpoint", tr.warm_start, "Warm-start checkpoint (fine-tuning)");
    ctr->add_option("--seed", tr.seed, "Initialization/shuffle seed");
    ctr->add_option("--focus", tr.focus, "Focus region side f");
    ctr->add_option("--context", tr.context, "Context width c");
    ctr->add_option("--classes", tr.classes, "Output classes (default: from dataset)");
    ctr->add_option("--kernels", tr.kernels, "Conv kernels per layer");
    ctr->add_option("--dense-width", tr.dense_width, "Dense layer width");
    ctr->add_option("--epochs-max", tr.epochs_max, "Epoch cap");
    ctr->add_option("--batch-size", tr.batch_size, "Batch size");
    ctr->add_option("--lr", tr.lr, "Adam learning rate");
    ctr->add_option("--loss-threshold", tr.loss_threshold, "Stop when mean epoch loss drops below");
    ctr->add_option("--augment", tr.augment, "Augmentations: rotate90,downscale")->delimiter(',');
    ctr->add_option("--log", tr.log_path, "Write per-epoch training log here too");
    add_common(ctr, tr.common);

    EvalOpts ev;
    auto* cev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    cev->add_option("--dataset-dir", ev.dataset_dir, "Dataset directory")->required();
    cev->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
    cev->add_option("--split", ev.split, "train or test")->check(CLI::IsMember({"train", "test"}));
    add_common(cev, ev.common);

    CountOpts co;
    auto* cco = app.add_subcommand("count", "Count objects in an arbitrary image");
    cco->add_option("image", co.image, "Input PNG")->required();
    cco->add_option("--checkpoint", co.checkpoint, "Checkpoint path")->required();
    cco->add_option("--regions", co.regions, "JSON regions file (focus-grid rects)");
    add_common(cco, co.common);

    LocalizeOpts lo;
    auto* clo = app.add_subcommand("localize", "Emit density CSVs and heat overlays");
    clo->add_option("image", lo.image, "Input PNG")->required();
    clo->add_option("--checkpoint", lo.checkpoint, "Checkpoint path")->required();
    clo->add_option("--out", lo.out, "Output file prefix")->required();
    add_common(clo, lo.common);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cgen->parsed()) {
            apply_common(gen.common);
            return run_generate(gen);
        }
        if (ctr->parsed()) {
            apply_common(tr.common);
            return dispatch(tr.common.precision, [&] { return run_train_t<float>(tr); },
                            [&] { return run_train_t<double>(tr); });
        }
        if (cev->parsed()) {
            apply_common(ev.common);
            return dispatch(ev.common.precision, [&] { return run_eval_t<float>(ev); },
                            [&] { return run_eval_t<double>(ev); });
        }
        if (cco->parsed()) {
            apply_common(co.common);
            return dispatch(co.common.precision, [&] { return run_count_t<float>(co); },
                            [&] { return run_count_t<double>(co); });
        }
        if (clo->parsed()) {
            apply_common(lo.common);
            return dispatch(lo.common.precision, [&] { return run_localize_t<float>(lo); },
                            [&] { return run_localize_t<double>(lo); });
        }
    } catch (const ednn::Error& e) {
        json err;
        err["error"]["category"] = e.category();
        err["error"]["message"] = e.what();
        std::cout << err.dump(2) << std::endl;
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        json err;
        err["error"]["category"] = "internal";
        err["error"]["message"] = e.what();
        std::cout << err.dump(2) << std::endl;
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
