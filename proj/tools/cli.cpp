#include "cli.hpp"

#include "hybridsig/io.hpp"
#include "hybridsig/nn/serialize.hpp"
#include "hybridsig/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <optional>

namespace hybridsig::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Shared override flags; anything left unset falls back to the config file,
// then HYBRIDSIG_SEED (seeds only), then the built-in defaults.
struct Overrides {
  std::string config_file;
  std::optional<std::string> snr;
  std::optional<std::uint64_t> seed;
  std::optional<int> per_class;
  std::optional<int> test_per_class;
  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<double> lr;
  std::optional<std::string> rep;
};

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("HYBRIDSIG_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto s = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument("trailing characters");
    return s;
  } catch (const std::exception&) {
    throw UsageError("HYBRIDSIG_SEED must be an unsigned integer");
  }
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg;
  bool file_has_seed = false;
  bool file_has_train_seed = false;
  if (!o.config_file.empty()) {
    json j;
    try {
      j = json::parse(read_text(o.config_file));
    } catch (const json::parse_error& e) {
      throw UsageError("config file " + o.config_file + ": " + e.what());
    }
    file_has_seed = j.is_object() && j.contains("seed");
    file_has_train_seed = j.is_object() && j.contains("train") && j["train"].is_object() && j["train"].contains("seed");
    try {
      apply_json(j, cfg);
    } catch (const std::invalid_argument& e) {
      throw UsageError("config file " + o.config_file + ": " + e.what());
    }
  }
  if (!file_has_seed) {
    if (auto s = env_seed()) cfg.seed = *s;
  }
  if (!file_has_train_seed) cfg.train.seed = cfg.seed;
  if (o.seed) cfg.seed = cfg.train.seed = *o.seed;
  if (o.snr) cfg.snr_db = parse_snr(*o.snr);
  if (o.per_class) cfg.per_class = *o.per_class;
  if (o.test_per_class) cfg.test_per_class = *o.test_per_class;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.batch) cfg.train.batch_size = *o.batch;
  if (o.lr) cfg.train.lr = *o.lr;
  if (o.rep) cfg.representation = raster::parse_representation(*o.rep);
  cfg.validate();
  return cfg;
}

void log_resolved(std::ostream& err, const std::string& command, const json& resolved) {
  err << "[" << command << "] resolved config: " << resolved.dump() << std::endl;
}

pipeline::Logger stream_logger(std::ostream& err) {
  return [&err](const std::string& msg) { err << msg << std::endl; };
}

void print_matrix(std::ostream& out, const pipeline::ConfusionMatrix& cm) {
  out << "accuracy " << std::fixed << std::setprecision(4) << cm.accuracy() << "\n" << cm.to_text();
}

int cmd_generate(const Overrides& o, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = resolve(o);
  log_resolved(err, "generate", to_json(cfg));
  const auto manifest = pipeline::generate_dataset(cfg, out_dir);
  out << "wrote " << manifest.entries.size() << " segments to " << out_dir << "\n";
  return kExitOk;
}

int cmd_render(const Overrides& o, const std::string& dataset, const std::string& out_dir, int jobs,
               std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = resolve(o);
  if (jobs < 1) throw UsageError("--jobs must be >= 1");
  log_resolved(err, "render", {{"representation", raster::representation_key(cfg.representation)},
                               {"render", to_json(cfg.render)},
                               {"jobs", jobs}});
  const auto manifest = pipeline::read_manifest(fs::path(dataset) / "manifest.json");
  const auto images = pipeline::render_dataset(manifest, dataset, cfg.representation, cfg.render, out_dir, jobs);
  out << "rendered " << images.entries.size() << " segments (" << raster::representation_key(cfg.representation)
      << ") to " << out_dir << "\n";
  return kExitOk;
}

int cmd_train(const Overrides& o, const std::string& images_dir, const std::string& model_out, std::ostream& out,
              std::ostream& err) {
  const ExperimentConfig cfg = resolve(o);
  log_resolved(err, "train", {{"images", images_dir}, {"model_out", model_out}, {"train", to_json(cfg.train)}});
  const auto manifest = pipeline::read_image_manifest(fs::path(images_dir) / "images.json");
  const auto train_set = pipeline::load_split(manifest, images_dir, pipeline::Split::Train);
  const auto val_set = pipeline::load_split(manifest, images_dir, pipeline::Split::Val);
  if (train_set.size() == 0) throw IoError("no training images in " + images_dir);
  auto result = pipeline::train(train_set, val_set, cfg.train, [&](const pipeline::EpochRecord& e) {
    err << "epoch " << e.epoch << " loss " << e.train_loss << " train_acc " << e.train_accuracy << " val_acc "
        << e.val_accuracy << std::endl;
  });
  write_file(model_out, nn::save_model(result.model, &result.optimizer));
  out << "trained " << result.steps << " steps; model written to " << model_out << "\n";
  return kExitOk;
}

nn::CnnModel<float> load_model_file(const std::string& path) { return nn::load_model(read_file(path)).model; }

int cmd_eval(const std::string& model_path, const std::string& images_dir, const std::string& report_path,
             std::ostream& out, std::ostream& err) {
  log_resolved(err, "eval", {{"model", model_path}, {"images", images_dir}, {"report", report_path}});
  const auto model = load_model_file(model_path);
  const auto manifest = pipeline::read_image_manifest(fs::path(images_dir) / "images.json");
  const auto test_set = pipeline::load_split(manifest, images_dir, pipeline::Split::Test);
  if (test_set.size() == 0) throw IoError("no test images in " + images_dir);
  for (const auto& x : test_set.inputs) {
    if (x.shape() != model.input_shape()) throw FormatError("model input shape does not match the images");
  }
  const auto cm = pipeline::evaluate(model, test_set);
  print_matrix(out, cm);
  if (!report_path.empty()) {
    const json report = {{"representation", raster::representation_key(manifest.representation)},
                         {"accuracy", cm.accuracy()},
                         {"confusion", cm.to_json()}};
    write_text(report_path, report.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_compare(const Overrides& o, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = resolve(o);
  log_resolved(err, "compare", to_json(cfg));
  const auto started = std::chrono::steady_clock::now();
  const auto report = pipeline::compare_representations(cfg, out_dir, stream_logger(err));
  const auto seconds =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - started).count();
  out << report.to_text();
  err << "compare finished in " << seconds << " s" << std::endl;
  return kExitOk;
}

int cmd_predict(const Overrides& o, const std::string& model_path, const std::string& iq_path, std::ostream& out,
                std::ostream& err) {
  if (!o.rep) throw UsageError("--rep is required");
  ExperimentConfig cfg = resolve(o);
  const auto model = load_model_file(model_path);
  cfg.render.width = static_cast<int>(model.input_shape()[1]);
  cfg.render.height = static_cast<int>(model.input_shape()[0]);
  log_resolved(err, "predict", {{"model", model_path},
                                {"iq", iq_path},
                                {"representation", raster::representation_key(cfg.representation)},
                                {"render", to_json(cfg.render)}});
  const auto bytes = read_file(iq_path);
  if (bytes.size() != pipeline::kIqFileBytes) {
    throw UsageError("segment file must hold exactly 512 complex samples (" + std::to_string(pipeline::kIqFileBytes) +
                     " bytes)");
  }
  const auto samples = modem::normalize_segment(pipeline::decode_iq(bytes));
  const auto x = pipeline::to_tensor(pipeline::render_segment(samples, cfg.representation, cfg.render));
  if (x.shape() != model.input_shape()) {
    throw UsageError("representation '" + std::string(raster::representation_key(cfg.representation)) +
                     "' does not match the model input " + nn::shape_string(model.input_shape()));
  }
  const auto p = model.forward(x);
  out << modem::label_key(modem::from_class_index(pipeline::predict_class(p)));
  out << std::fixed << std::setprecision(6);
  for (nn::Index i = 0; i < p.size(); ++i) out << " " << p[i];
  out << "\n";
  return kExitOk;
}

int cmd_inspect(const std::string& model_path, int channels, int size, std::ostream& out, std::ostream& err) {
  log_resolved(err, "inspect", {{"model", model_path}, {"channels", channels}, {"size", size}});
  const auto model = model_path.empty() ? nn::init_model(channels, 0, size, size) : load_model_file(model_path);
  out << nn::describe(model);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid-image RF modulation classifier"};
  app.require_subcommand(1);

  Overrides o;
  std::string out_dir, dataset, images, model_path, model_out, report_path, iq_path;
  int jobs = 1;
  int channels = 3;
  int size = 128;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Master seed"); };
  auto add_config = [&](CLI::App* c) {
    c->add_option("--config", o.config_file, "Experiment config JSON")->check(CLI::ExistingFile);
  };

  auto* gen = app.add_subcommand("generate", "Synthesize the labeled IQ segment dataset");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--snr", o.snr, "SNR in dB, or 'inf' for no noise");
  add_seed(gen);
  gen->add_option("--per-class", o.per_class, "Train+validation segments per class");
  gen->add_option("--test-per-class", o.test_per_class, "Test segments per class");
  gen->add_option("--jobs", jobs, "Worker threads (generation is sequential)");
  add_config(gen);

  auto* render = app.add_subcommand("render", "Render a dataset into one image representation");
  render->add_option("--dataset", dataset, "Dataset directory")->required();
  render->add_option("--rep", o.rep, "time | psd | spec | hybrid")->required();
  render->add_option("--out", out_dir, "Image output directory")->required();
  render->add_option("--jobs", jobs, "Parallel render workers");
  add_config(render);

  auto* train = app.add_subcommand("train", "Train the CNN on rendered images");
  train->add_option("--images", images, "Rendered image directory")->required();
  train->add_option("--epochs", o.epochs, "Epochs (default 20)");
  train->add_option("--batch", o.batch, "Batch size (default 32)");
  train->add_option("--lr", o.lr, "Adam learning rate (default 1e-3)");
  add_seed(train);
  train->add_option("--model-out", model_out, "Model file to write")->required();
  add_config(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test split");
  eval->add_option("--model", model_path, "Model file")->required();
  eval->add_option("--images", images, "Rendered image directory")->required();
  eval->add_option("--report", report_path, "JSON report to write");

  auto* compare = app.add_subcommand("compare", "Run all four representations end to end");
  add_config(compare);
  compare->add_option("--out", out_dir, "Output directory")->required();
  compare->add_option("--snr", o.snr, "SNR in dB, or 'inf'");
  add_seed(compare);
  compare->add_option("--epochs", o.epochs, "Epochs per model");
  compare->add_option("--jobs", jobs, "Accepted for symmetry; training stays single-threaded");

  auto* predict = app.add_subcommand("predict", "Classify one .iq segment");
  predict->add_option("--model", model_path, "Model file")->required();
  predict->add_option("--iq", iq_path, "Segment file (512 complex f32)")->required();
  predict->add_option("--rep", o.rep, "Representation the model was trained on")->required();
  add_config(predict);

  auto* inspect = app.add_subcommand("inspect", "Print the layer table and parameter count");
  inspect->add_option("--model", model_path, "Model file (omit to inspect a fresh reference model)");
  inspect->add_option("--channels", channels, "Input channels for a fresh model")->check(CLI::Range(1, 3));
  inspect->add_option("--size", size, "Input height/width for a fresh model")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(o, out_dir, out, err);
    if (*render) return cmd_render(o, dataset, out_dir, jobs, out, err);
    if (*train) return cmd_train(o, images, model_out, out, err);
    if (*eval) return cmd_eval(model_path, images, report_path, out, err);
    if (*compare) return cmd_compare(o, out_dir, out, err);
    if (*predict) return cmd_predict(o, model_path, iq_path, out, err);
    if (*inspect) return cmd_inspect(model_path, channels, size, out, err);
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hybridsig::cli
