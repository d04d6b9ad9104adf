#include "hybridsig/pipeline.hpp"

#include "hybridsig/io.hpp"
#include "hybridsig/nn/serialize.hpp"
#include "hybridsig/random.hpp"

#include <atomic>
#include <bit>
#include <future>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace hybridsig::pipeline {

using nlohmann::json;

namespace {

// Samples discarded at the start of each realization so that segments see a
// filter in steady state; at least half the RRC span at the defaults.
constexpr dsp::Index kGuardSamples = 64;

std::string indexed_name(Modulation label, std::string_view tag, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", index);
  return std::string(modem::label_key(label)) + "_" + std::string(tag) + "_" + buf;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

template <typename F>
auto with_format_errors(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void log_line(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

}  // namespace

std::string_view split_key(Split s) {
  switch (s) {
    case Split::TrainVal: return "trainval";
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  throw std::invalid_argument("unknown split");
}

Split parse_split(std::string_view key) {
  for (Split s : {Split::TrainVal, Split::Train, Split::Val, Split::Test}) {
    if (split_key(s) == key) return s;
  }
  throw std::invalid_argument("unknown split '" + std::string(key) + "'");
}

int DatasetManifest::count(Modulation label, Split split) const {
  return static_cast<int>(std::count_if(entries.begin(), entries.end(),
                                        [&](const ManifestEntry& e) { return e.label == label && e.split == split; }));
}

json to_json(const DatasetManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"path", e.path},
                       {"label", std::string(modem::label_key(e.label))},
                       {"split", std::string(split_key(e.split))},
                       {"snr_db", snr_to_json(e.snr_db)},
                       {"seed", e.seed}});
  }
  return {{"version", m.version}, {"modem", hybridsig::to_json(m.modem)}, {"entries", std::move(entries)}};
}

DatasetManifest dataset_manifest_from_json(const json& j) {
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  if (m.version != kManifestVersion) throw std::invalid_argument("unsupported manifest version");
  apply_json(j.at("modem"), m.modem);
  for (const auto& e : j.at("entries")) {
    m.entries.push_back({e.at("path").get<std::string>(), modem::parse_label(e.at("label").get<std::string>()),
                         parse_split(e.at("split").get<std::string>()), snr_from_json(e.at("snr_db")),
                         e.at("seed").get<std::uint64_t>()});
  }
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) { write_text(path, to_json(m).dump(2) + "\n"); }

DatasetManifest read_manifest(const fs::path& path) {
  const json j = parse_json_file(path);
  return with_format_errors(path, [&] { return dataset_manifest_from_json(j); });
}

std::vector<std::uint8_t> encode_iq(const modem::ComplexSeq& samples) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(static_cast<std::size_t>(samples.size()) * 8);
  auto put = [&](double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  };
  for (const auto& s : samples) {
    put(s.real());
    put(s.imag());
  }
  return bytes;
}

modem::ComplexSeq decode_iq(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kIqFileBytes) {
    throw std::invalid_argument("iq segment must be exactly " + std::to_string(kIqFileBytes) + " bytes, got " +
                                std::to_string(bytes.size()));
  }
  auto get = [&](std::size_t off) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[off + i]) << (8 * i);
    return static_cast<double>(std::bit_cast<float>(bits));
  };
  modem::ComplexSeq out(static_cast<dsp::Index>(modem::kSegmentLength));
  for (dsp::Index n = 0; n < out.size(); ++n) {
    out[n] = {get(static_cast<std::size_t>(n) * 8), get(static_cast<std::size_t>(n) * 8 + 4)};
  }
  dsp::require_finite(out, "iq segment");
  return out;
}

std::vector<modem::IqSegment> synthesize_segments(Modulation label, int count, double snr_db,
                                                  std::uint64_t realization_seed, const modem::ModemConfig& cfg) {
  cfg.validate();
  const auto seg_len = static_cast<dsp::Index>(modem::kSegmentLength);
  const dsp::Index wanted = count * seg_len;
  const dsp::Index symbols = (wanted + 2 * kGuardSamples + cfg.sps - 1) / cfg.sps;
  const auto bits = modem::random_bits(static_cast<std::size_t>(symbols * modem::bits_per_symbol(label)),
                                       derive_seed(realization_seed, 1));
  const modem::ComplexSeq clean = modem::modulate(label, bits, cfg).segment(kGuardSamples, wanted);
  const modem::ComplexSeq noisy = modem::awgn(clean, snr_db, derive_seed(realization_seed, 2));

  std::vector<modem::IqSegment> out;
  for (auto& s : modem::segment(noisy, seg_len, seg_len)) {
    // Round through f32 so in-memory segments match what .iq files hold.
    const modem::ComplexSeq stored = modem::normalize_segment(s).cast<std::complex<float>>().cast<std::complex<double>>();
    out.push_back({stored, label, snr_db, realization_seed});
  }
  return out;
}

DatasetManifest generate_dataset(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  DatasetManifest manifest;
  manifest.modem = cfg.modem;
  for (Modulation label : modem::kAllModulations) {
    const int c = modem::class_index(label);
    const struct {
      std::string_view tag;
      Split split;
      int count;
      std::uint64_t seed;
    } parts[] = {{"tv", Split::TrainVal, cfg.per_class, derive_seed(cfg.seed, 100 + c)},
                 {"test", Split::Test, cfg.test_per_class, derive_seed(cfg.seed, 200 + c)}};
    for (const auto& part : parts) {
      const auto segments = synthesize_segments(label, part.count, cfg.snr_db, part.seed, cfg.modem);
      for (std::size_t i = 0; i < segments.size(); ++i) {
        const std::string rel = "segments/" + indexed_name(label, part.tag, static_cast<int>(i)) + ".iq";
        write_file(out_dir / rel, encode_iq(segments[i].samples));
        manifest.entries.push_back({rel, label, part.split, cfg.snr_db, part.seed});
      }
    }
  }
  manifest = split_dataset(std::move(manifest), cfg.train_fraction, derive_seed(cfg.seed, 300));
  write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

DatasetManifest split_dataset(DatasetManifest manifest, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_dataset: train_fraction must be in (0, 1)");
  }
  SplitMix64 rng(seed);
  for (Modulation label : modem::kAllModulations) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const auto& e = manifest.entries[i];
      if (e.label == label && e.split == Split::TrainVal) pool.push_back(i);
    }
    shuffle(std::span<std::size_t>(pool), rng);
    const auto n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(pool.size())));
    for (std::size_t k = 0; k < pool.size(); ++k) {
      manifest.entries[pool[k]].split = k < n_train ? Split::Train : Split::Val;
    }
  }
  return manifest;
}

std::vector<raster::RasterImage> render_segment(const modem::ComplexSeq& samples, Representation rep,
                                                const raster::RenderConfig& cfg) {
  cfg.validate();
  auto time_image = [&](bool quadrature) {
    const dsp::RealSeq trace = quadrature ? samples.imag().eval() : samples.real().eval();
    return raster::raster_timeseries(trace, cfg.width, cfg.height);
  };
  auto psd_image = [&] {
    const auto psd = dsp::to_db(dsp::welch_psd(samples, cfg.psd_nfft, cfg.psd_overlap));
    return raster::raster_psd(psd, cfg.width, cfg.height, cfg.db_range);
  };
  switch (rep) {
    case Representation::TimeIQ: return {time_image(false), time_image(true)};
    case Representation::Psd: return {psd_image()};
    case Representation::Spectrogram: {
      const auto s = dsp::to_db(dsp::stft(samples, cfg.stft_nfft, cfg.stft_hop));
      return {raster::raster_spectrogram(s, cfg.width, cfg.height, cfg.db_range)};
    }
    case Representation::Hybrid: return {raster::compose_hybrid(time_image(false), time_image(true), psd_image())};
  }
  throw std::invalid_argument("unknown representation");
}

json to_json(const ImageManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"paths", e.paths},
                       {"label", std::string(modem::label_key(e.label))},
                       {"split", std::string(split_key(e.split))},
                       {"source", e.source}});
  }
  return {{"version", m.version},
          {"representation", std::string(raster::representation_key(m.representation))},
          {"channels", m.channels()},
          {"render", hybridsig::to_json(m.render)},
          {"entries", std::move(entries)}};
}

ImageManifest image_manifest_from_json(const json& j) {
  ImageManifest m;
  m.version = j.at("version").get<int>();
  if (m.version != kManifestVersion) throw std::invalid_argument("unsupported image manifest version");
  m.representation = raster::parse_representation(j.at("representation").get<std::string>());
  apply_json(j.at("render"), m.render);
  for (const auto& e : j.at("entries")) {
    m.entries.push_back({e.at("paths").get<std::vector<std::string>>(),
                         modem::parse_label(e.at("label").get<std::string>()),
                         parse_split(e.at("split").get<std::string>()), e.at("source").get<std::string>()});
  }
  return m;
}

ImageManifest read_image_manifest(const fs::path& path) {
  const json j = parse_json_file(path);
  return with_format_errors(path, [&] { return image_manifest_from_json(j); });
}

ImageManifest render_dataset(const DatasetManifest& manifest, const fs::path& dataset_dir, Representation rep,
                             const raster::RenderConfig& cfg, const fs::path& out_dir, int jobs) {
  cfg.validate();
  if (jobs < 1) throw std::invalid_argument("render_dataset: jobs must be >= 1");
  ImageManifest out;
  out.representation = rep;
  out.render = cfg;
  out.entries.resize(manifest.entries.size());

  auto render_one = [&](std::size_t idx) {
    const auto& e = manifest.entries[idx];
    const fs::path source = dataset_dir / e.path;
    if (!fs::exists(source)) throw IoError("missing segment " + source.string());
    const auto samples = with_format_errors(source, [&] { return decode_iq(read_file(source)); });
    const auto images = render_segment(samples, rep, cfg);
    const std::string stem = fs::path(e.path).stem().string();
    ImageEntry entry{{}, e.label, e.split, e.path};
    for (std::size_t k = 0; k < images.size(); ++k) {
      std::string name = stem;
      if (images.size() == 2) name += k == 0 ? "_i" : "_q";
      name += images[k].channels == 3 ? ".ppm" : ".pgm";
      raster::write_image(out_dir / name, images[k]);
      entry.paths.push_back(name);
    }
    out.entries[idx] = std::move(entry);
  };

  fs::create_directories(out_dir);
  const std::size_t n = manifest.entries.size();
  if (jobs == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) render_one(i);
  } else {
    std::vector<std::future<void>> workers;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < jobs; ++w) {
      workers.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next++; i < n; i = next++) render_one(i);
      }));
    }
    for (auto& w : workers) w.get();
  }
  write_text(out_dir / "images.json", to_json(out).dump(2) + "\n");
  return out;
}

nn::Tensor<float> to_tensor(const std::vector<raster::RasterImage>& images) {
  if (images.empty()) throw std::invalid_argument("to_tensor: no images");
  const int w = images.front().width, h = images.front().height;
  int channels = 0;
  for (const auto& img : images) {
    if (img.width != w || img.height != h) throw std::invalid_argument("to_tensor: image sizes differ");
    channels += img.channels;
  }
  nn::Tensor<float> t({h, w, channels});
  const dsp::Index pixels = static_cast<dsp::Index>(w) * h;
  int offset = 0;
  for (const auto& img : images) {
    for (dsp::Index p = 0; p < pixels; ++p) {
      for (int c = 0; c < img.channels; ++c) t[p * channels + offset + c] = img.pixels[p * img.channels + c];
    }
    offset += img.channels;
  }
  return t;
}

LabeledImages load_split(const ImageManifest& manifest, const fs::path& image_dir, Split split) {
  LabeledImages set;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    std::vector<raster::RasterImage> images;
    for (const auto& p : e.paths) images.push_back(raster::read_image(image_dir / p));
    auto t = to_tensor(images);
    if (t.dim(2) != manifest.channels()) throw FormatError("image channel count does not match manifest");
    set.inputs.push_back(std::move(t));
    set.labels.push_back(e.label);
  }
  return set;
}

int predict_class(const nn::Tensor<float>& probabilities) {
  int best = 0;
  for (nn::Index i = 1; i < probabilities.size(); ++i) {
    if (probabilities[i] > probabilities[best]) best = static_cast<int>(i);
  }
  return best;
}

TrainResult train(const LabeledImages& train_set, const LabeledImages& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training split");
  const auto& shape = train_set.inputs.front().shape();
  auto model = nn::init_model(static_cast<int>(shape[2]), derive_seed(cfg.seed, 1), shape[0], shape[1]);
  return train_from(std::move(model), train_set, val_set, cfg, 0, on_epoch);
}

TrainResult train_from(nn::CnnModel<float> model, const LabeledImages& train_set, const LabeledImages& val_set,
                       const TrainConfig& cfg, std::int64_t max_steps, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training split");
  if (train_set.labels.size() != train_set.inputs.size()) throw std::invalid_argument("train: label count mismatch");
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& x : set->inputs) nn::require_shape(x, model.input_shape(), "train input");
  }

  TrainResult result{std::move(model), {}, {}, 0};
  auto params = result.model.parameters();
  result.optimizer = nn::AdamState<float>(params, cfg.lr);
  auto grads = result.model.zero_gradients();
  SplitMix64 order_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Trace<float> trace;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) shuffle(std::span<std::size_t>(order), order_rng);
    double loss_sum = 0.0;
    int correct = 0;
    int seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      if (max_steps > 0 && result.steps >= max_steps) break;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const float scale = 1.0f / static_cast<float>(end - start);
      for (auto& g : grads) g.set_zero();
      // Samples are accumulated in batch order, which fixes the reduction order.
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const auto logits = result.model.logits(train_set.inputs[i], &trace);
        const int target = modem::class_index(train_set.labels[i]);
        auto lg = nn::softmax_xent(logits, target);
        loss_sum += lg.loss;
        correct += predict_class(logits) == target ? 1 : 0;
        ++seen;
        lg.grad_logits.values() *= scale;
        result.model.backward(trace, lg.grad_logits, grads);
      }
      nn::adam_step(params, grads, result.optimizer);
      ++result.steps;
    }
    if (seen == 0) break;
    EpochRecord rec{epoch, loss_sum / seen, static_cast<double>(correct) / seen,
                    val_set.size() ? accuracy(result.model, val_set) : 0.0};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void ConfusionMatrix::add(int true_class, int predicted_class) {
  if (true_class < 0 || true_class >= kClasses || predicted_class < 0 || predicted_class >= kClasses) {
    throw std::invalid_argument("ConfusionMatrix: class out of range");
  }
  ++counts_[static_cast<std::size_t>(true_class)][static_cast<std::size_t>(predicted_class)];
}

int ConfusionMatrix::row_sum(int true_class) const {
  const auto& row = counts_.at(static_cast<std::size_t>(true_class));
  return std::accumulate(row.begin(), row.end(), 0);
}

int ConfusionMatrix::col_sum(int predicted_class) const {
  int s = 0;
  for (const auto& row : counts_) s += row.at(static_cast<std::size_t>(predicted_class));
  return s;
}

int ConfusionMatrix::total() const {
  int s = 0;
  for (int r = 0; r < kClasses; ++r) s += row_sum(r);
  return s;
}

int ConfusionMatrix::trace() const {
  int s = 0;
  for (int r = 0; r < kClasses; ++r) s += at(r, r);
  return s;
}

double ConfusionMatrix::accuracy() const {
  const int n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / n;
}

json ConfusionMatrix::to_json() const {
  json rows = json::array();
  for (const auto& row : counts_) rows.push_back(row);
  return rows;
}

ConfusionMatrix ConfusionMatrix::from_json(const json& j) {
  ConfusionMatrix m;
  if (!j.is_array() || j.size() != kClasses) throw std::invalid_argument("confusion matrix must be 4x4");
  for (int r = 0; r < kClasses; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || row.size() != kClasses) throw std::invalid_argument("confusion matrix must be 4x4");
    for (int c = 0; c < kClasses; ++c) {
      const int v = row.at(static_cast<std::size_t>(c)).get<int>();
      if (v < 0) throw std::invalid_argument("confusion counts must be non-negative");
      m.counts_[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = v;
    }
  }
  return m;
}

std::string ConfusionMatrix::to_text() const {
  std::ostringstream os;
  os << std::setw(10) << "true\\pred";
  for (Modulation m : modem::kAllModulations) os << std::setw(8) << modem::display_name(m);
  os << "\n";
  for (int r = 0; r < kClasses; ++r) {
    os << std::setw(10) << modem::display_name(modem::from_class_index(r));
    for (int c = 0; c < kClasses; ++c) os << std::setw(8) << at(r, c);
    os << "\n";
  }
  return os.str();
}

double accuracy(const nn::CnnModel<float>& model, const LabeledImages& set) {
  return evaluate(model, set).accuracy();
}

ConfusionMatrix evaluate(const nn::CnnModel<float>& model, const LabeledImages& test_set) {
  if (test_set.size() == 0) throw std::invalid_argument("evaluate: empty test split");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    cm.add(modem::class_index(test_set.labels[i]), predict_class(model.forward(test_set.inputs[i])));
  }
  return cm;
}

const RepresentationResult& ComparisonReport::result(Representation rep) const {
  for (const auto& r : results) {
    if (r.representation == rep) return r;
  }
  throw std::out_of_range("no result for representation " + std::string(raster::representation_key(rep)));
}

json ComparisonReport::to_json() const {
  json reps = json::object();
  for (const auto& r : results) {
    json history = json::array();
    for (const auto& h : r.history) {
      history.push_back({{"epoch", h.epoch},
                         {"train_loss", h.train_loss},
                         {"train_accuracy", h.train_accuracy},
                         {"val_accuracy", h.val_accuracy}});
    }
    reps[std::string(raster::representation_key(r.representation))] = {
        {"accuracy", r.accuracy()}, {"confusion", r.confusion.to_json()}, {"history", std::move(history)}};
  }
  return {{"version", kManifestVersion},
          {"classes", {"bpsk", "qpsk", "qam16", "gfsk"}},
          {"config", hybridsig::to_json(config)},
          {"representations", std::move(reps)}};
}

std::string ComparisonReport::to_text() const {
  std::ostringstream os;
  os << "representation  accuracy\n";
  for (const auto& r : results) {
    os << std::left << std::setw(16) << raster::representation_key(r.representation) << std::right << std::fixed
       << std::setprecision(2) << 100.0 * r.accuracy() << "%\n";
  }
  for (const auto& r : results) {
    os << "\n[" << raster::representation_key(r.representation) << "]\n" << r.confusion.to_text();
  }
  return os.str();
}

ComparisonReport compare_representations(const ExperimentConfig& cfg, const fs::path& out_dir, const Logger& log) {
  cfg.validate();
  ComparisonReport report{cfg, {}};
  const fs::path dataset_dir = out_dir / "dataset";
  log_line(log, "generating dataset in " + dataset_dir.string());
  const DatasetManifest manifest = generate_dataset(cfg, dataset_dir);

  for (Representation rep : raster::kAllRepresentations) {
    const std::string key(raster::representation_key(rep));
    const fs::path image_dir = out_dir / "images" / key;
    log_line(log, "[" + key + "] rendering");
    const ImageManifest images = render_dataset(manifest, dataset_dir, rep, cfg.render, image_dir);
    const auto train_set = load_split(images, image_dir, Split::Train);
    const auto val_set = load_split(images, image_dir, Split::Val);
    const auto test_set = load_split(images, image_dir, Split::Test);

    log_line(log, "[" + key + "] training on " + std::to_string(train_set.size()) + " images");
    auto trained = train(train_set, val_set, cfg.train, [&](const EpochRecord& e) {
      std::ostringstream os;
      os << "[" << key << "] epoch " << e.epoch << " loss " << std::setprecision(4) << e.train_loss << " train_acc "
         << e.train_accuracy << " val_acc " << e.val_accuracy;
      log_line(log, os.str());
    });
    const auto model_bytes = nn::save_model(trained.model, &trained.optimizer);
    write_file(out_dir / "models" / (key + ".hsig"), model_bytes);

    RepresentationResult result{rep, evaluate(trained.model, test_set), std::move(trained.history)};
    log_line(log, "[" + key + "] test accuracy " + std::to_string(result.accuracy()));
    report.results.push_back(std::move(result));
  }

  write_text(out_dir / "report.json", report.to_json().dump(2) + "\n");
  write_text(out_dir / "report.txt", report.to_text());
  return report;
}

}  // namespace hybridsig::pipeline
