// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any of them fails.

#include "oracles.hpp"

#include "cli.hpp"
#include "hybridsig/dsp.hpp"
#include "hybridsig/nn/gradcheck.hpp"
#include "hybridsig/nn/serialize.hpp"
#include "hybridsig/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace hybridsig;
using pipeline::ComparisonReport;
using pipeline::ConfusionMatrix;
using raster::Representation;
namespace fs = std::filesystem;

namespace {

constexpr int kGfsk = modem::class_index(modem::Modulation::Gfsk);

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::vector<std::pair<int, bool>> g_results;

void record(int id, const std::string& title, Outcome& o) {
  std::cout << "criterion " << std::setw(2) << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << title << " --"
            << o.detail.str() << std::endl;
  g_results.emplace_back(id, o.pass);
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return files;
}

ComparisonReport run_compare(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::remove_all(dir);
  const auto t0 = std::chrono::steady_clock::now();
  auto report = pipeline::compare_representations(cfg, dir, [](const std::string& msg) {
    if (msg.find("epoch") == std::string::npos) std::cerr << "  " << msg << std::endl;
  });
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "  compare finished in " << std::fixed << std::setprecision(1) << secs << " s" << std::endl;
  std::cout << report.to_text() << std::flush;
  return report;
}

int psk_block_confusion(const ConfusionMatrix& cm) {
  int n = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) n += r != c ? cm.at(r, c) : 0;
  return n;
}

int gfsk_off_diagonal(const ConfusionMatrix& cm) {
  int n = 0;
  for (int k = 0; k < 4; ++k) {
    if (k == kGfsk) continue;
    n += cm.at(kGfsk, k) + cm.at(k, kGfsk);
  }
  return n;
}

// ---------------------------------------------------------------------------

void criteria_1_2_3(const ComparisonReport& report, const fs::path& work) {
  const double hybrid = report.result(Representation::Hybrid).accuracy();
  const double time = report.result(Representation::TimeIQ).accuracy();
  const double psd = report.result(Representation::Psd).accuracy();
  const double spec = report.result(Representation::Spectrogram).accuracy();
  {
    Outcome o;
    o.detail << " hybrid=" << hybrid << " time=" << time << " psd=" << psd << " spec=" << spec
             << " test images=" << report.result(Representation::Hybrid).confusion.total();
    o.require(hybrid >= time && hybrid >= psd && hybrid >= spec, "hybrid is not the best representation");
    o.require(hybrid >= 0.95, "hybrid accuracy below 0.95");
    o.require(report.result(Representation::Hybrid).confusion.total() == 80, "test set is not 80 images");
    record(1, "hybrid accuracy >= every other representation and >= 0.95", o);
  }
  {
    Outcome o;
    for (Representation rep : {Representation::Psd, Representation::Spectrogram, Representation::Hybrid}) {
      const int off = gfsk_off_diagonal(report.result(rep).confusion);
      o.detail << " " << raster::representation_key(rep) << "=" << off;
      o.require(off == 0, std::string(raster::representation_key(rep)) + " GFSK row/column has off-diagonal counts");
    }
    record(2, "GFSK row and column off-diagonals are 0 for psd, spec, hybrid", o);
  }
  {
    Outcome o;
    int block = psk_block_confusion(report.result(Representation::Psd).confusion) +
                psk_block_confusion(report.result(Representation::Spectrogram).confusion);
    o.detail << " psk/qam off-diagonal at 10 dB=" << block;
    if (block == 0) {
      auto low = report.config;
      low.snr_db = 5.0;
      const auto rerun = run_compare(low, work / "compare_5db");
      block = psk_block_confusion(rerun.result(Representation::Psd).confusion) +
              psk_block_confusion(rerun.result(Representation::Spectrogram).confusion);
      o.detail << " at 5 dB=" << block;
    }
    o.require(block >= 1, "no BPSK/QPSK/16-QAM confusion in the frequency representations");
    record(3, "frequency representations confuse BPSK/QPSK/16-QAM", o);
  }
}

void criterion_4(const fs::path& run_dir, const fs::path& work) {
  Outcome o;
  const auto manifest = pipeline::read_manifest(run_dir / "dataset" / "manifest.json");
  std::set<modem::Modulation> classes;
  for (modem::Modulation m : modem::kAllModulations) {
    const int train = manifest.count(m, pipeline::Split::Train);
    const int val = manifest.count(m, pipeline::Split::Val);
    o.require(train + val == 50 && train == 40 && val == 10, "trainval counts for " + std::string(modem::label_key(m)));
  }
  for (const auto& e : manifest.entries) {
    classes.insert(e.label);
    const auto bytes = read_file(run_dir / "dataset" / e.path);
    o.require(pipeline::decode_iq(bytes).size() == 512, "segment length in " + e.path);
  }
  o.require(classes.size() == 4, "class count");
  const ExperimentConfig cfg;
  pipeline::generate_dataset(cfg, work / "dataset_a");
  pipeline::generate_dataset(cfg, work / "dataset_b");
  const bool same = snapshot(work / "dataset_a") == snapshot(work / "dataset_b") &&
                    snapshot(work / "dataset_a") == snapshot(run_dir / "dataset");
  o.require(same, "dataset bytes differ between runs");
  o.detail << " entries=" << manifest.entries.size() << " classes=" << classes.size()
           << " deterministic=" << (same ? "yes" : "no");
  record(4, "dataset: 4 classes x 50 trainval (40/10) segments of 512 samples, deterministic bytes", o);
}

void criterion_5(const fs::path& run_dir) {
  Outcome o;
  auto inspect = [](std::vector<std::string> args) {
    args.insert(args.begin(), {"hybridsig", "inspect"});
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return std::pair{code, out.str()};
  };
  const std::vector<std::string> expected = {
      "Conv2D filters=16 kernel=3x3", "ReLU", "MaxPooling2D window=2x2 stride=2",
      "Conv2D filters=32 kernel=3x3", "ReLU", "MaxPooling2D window=2x2 stride=2",
      "Conv2D filters=64 kernel=3x3", "ReLU", "MaxPooling2D window=2x2 stride=2",
      "Flatten",                      "Dense units=256", "ReLU",
      "Dense units=4",                "Softmax"};
  for (const auto& [label, args, channels] :
       {std::tuple{"fresh", std::vector<std::string>{"--channels", "3"}, 3LL},
        std::tuple{"trained hybrid", std::vector<std::string>{"--model", (run_dir / "models" / "hybrid.hsig").string()},
                   3LL},
        std::tuple{"trained psd", std::vector<std::string>{"--model", (run_dir / "models" / "psd.hsig").string()},
                   1LL}}) {
    const auto [code, text] = inspect(args);
    o.require(code == 0, std::string("inspect failed for ") + label);
    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);  // input shape
    std::vector<std::string> layers;
    long long total = -1;
    while (std::getline(lines, line)) {
      if (line.rfind("total params=", 0) == 0) {
        total = std::stoll(line.substr(13));
        continue;
      }
      layers.push_back(line.substr(0, line.find(" -> ")));
    }
    const long long independent = oracle::reference_parameter_count(channels);
    o.require(layers == expected, std::string("layer sequence of ") + label);
    o.require(total == independent, std::string("parameter count of ") + label);
    o.detail << " " << label << ": " << layers.size() << " layers, params=" << total << " (independent "
             << independent << ")";
  }
  record(5, "architecture audit via inspect; parameter count matches shape-derived total", o);
}

// Central differences on each layer function in isolation plus the whole
// composed network, for one random seed.
void gradient_checks(std::uint64_t seed, Outcome& o) {
  using T = nn::Tensor<double>;
  std::mt19937 gen(static_cast<unsigned>(seed));
  auto dim = [&](int lo, int hi) { return static_cast<nn::Index>(std::uniform_int_distribution<int>(lo, hi)(gen)); };
  const double tol = 1e-4;
  const unsigned s = static_cast<unsigned>(seed) * 1000;
  auto check = [&](const char* name, const T& analytic, const T& numeric) {
    const double err = nn::max_relative_error(analytic, numeric);
    if (!(err < tol)) o.require(false, std::string(name) + " seed " + std::to_string(seed) + " rel err " + std::to_string(err));
  };

  {  // conv
    const nn::Index h = dim(2, 6), w = dim(2, 6), cin = dim(1, 3), cout = dim(1, 3);
    const T x = oracle::random_tensor({h, w, cin}, s + 1), wt = oracle::random_tensor({3, 3, cin, cout}, s + 2),
            b = oracle::random_tensor({cout}, s + 3), probe = oracle::random_tensor({h, w, cout}, s + 4);
    const auto g = nn::conv2d_backward(probe, x, wt);
    check("conv input", g.grad_input,
          nn::numeric_gradient([&](const T& v) { return probe.values().dot(nn::conv2d_forward(v, wt, b).values()); }, x));
    check("conv weights", g.grad_weights,
          nn::numeric_gradient([&](const T& v) { return probe.values().dot(nn::conv2d_forward(x, v, b).values()); }, wt));
    check("conv bias", g.grad_bias,
          nn::numeric_gradient([&](const T& v) { return probe.values().dot(nn::conv2d_forward(x, wt, v).values()); }, b));
  }
  {  // dense
    const nn::Index in = dim(1, 12), out = dim(1, 6);
    const T x = oracle::random_tensor({in}, s + 5), wt = oracle::random_tensor({in, out}, s + 6),
            b = oracle::random_tensor({out}, s + 7), probe = oracle::random_tensor({out}, s + 8);
    const auto g = nn::dense_backward(probe, x, wt);
    check("dense input", g.grad_input,
          nn::numeric_gradient([&](const T& v) { return probe.values().dot(nn::dense_forward(v, wt, b).values()); }, x));
    check("dense weights", g.grad_weights,
          nn::numeric_gradient([&](const T& v) { return probe.values().dot(nn::dense_forward(x, v, b).values()); }, wt));
    check("dense bias", g.grad_bias,
          nn::numeric_gradient([&](const T& v) { return probe.values().dot(nn::dense_forward(x, wt, v).values()); }, b));
  }
  {  // relu, inputs kept away from the kink
    T x = oracle::random_tensor({dim(2, 20)}, s + 9);
    for (nn::Index i = 0; i < x.size(); ++i) x[i] += x[i] >= 0 ? 0.01 : -0.01;
    const T probe = oracle::random_tensor(x.shape(), s + 10);
    check("relu", nn::relu_backward(probe, x),
          nn::numeric_gradient([&](const T& v) { return probe.values().dot(nn::relu_forward(v).values()); }, x));
  }
  {  // max pool, distinct values so no window has a tie within h
    const nn::Index h = dim(1, 7), w = dim(1, 7), c = dim(1, 3);
    T x({h, w, c});
    std::vector<double> vals(static_cast<std::size_t>(x.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.1 * static_cast<double>(i);
    std::shuffle(vals.begin(), vals.end(), gen);
    for (nn::Index i = 0; i < x.size(); ++i) x[i] = vals[static_cast<std::size_t>(i)];
    const auto fwd = nn::maxpool_forward(x);
    const T probe = oracle::random_tensor(fwd.output.shape(), s + 11);
    check("maxpool", nn::maxpool_backward(probe, fwd.argmax, x.shape()),
          nn::numeric_gradient([&](const T& v) { return probe.values().dot(nn::maxpool_forward(v).output.values()); }, x));
  }
  {  // softmax cross-entropy
    const T z = oracle::random_tensor({dim(2, 6)}, s + 12, 4.0);
    const nn::Index target = dim(0, static_cast<int>(z.size()) - 1);
    check("softmax-xent", nn::softmax_xent(z, target).grad_logits,
          nn::numeric_gradient([&](const T& v) { return nn::softmax_xent(v, target).loss; }, z));
  }
  {  // composed network
    const nn::Index side = dim(3, 8), channels = dim(1, 3);
    nn::CnnModel<double> model({side, side, channels}, {{nn::LayerKind::Conv3x3, dim(1, 4)},
                                                        {nn::LayerKind::Relu},
                                                        {nn::LayerKind::MaxPool2x2},
                                                        {nn::LayerKind::Conv3x3, dim(1, 4)},
                                                        {nn::LayerKind::Relu},
                                                        {nn::LayerKind::MaxPool2x2},
                                                        {nn::LayerKind::Flatten},
                                                        {nn::LayerKind::Dense, dim(2, 8)},
                                                        {nn::LayerKind::Relu},
                                                        {nn::LayerKind::Dense, 4},
                                                        {nn::LayerKind::Softmax}});
    model.initialize(seed);
    for (auto* p : model.parameters())
      if (p->rank() == 1) p->values() = oracle::random_tensor(p->shape(), s + 13 + static_cast<unsigned>(p->size()), 0.1).values();
    nn::GradCheckOptions opt;
    opt.seed = seed;
    const auto rep = nn::grad_check(model, oracle::random_tensor({side, side, channels}, s + 14), dim(0, 3), opt);
    if (!rep.passed()) o.require(false, "network seed " + std::to_string(seed) + "\n" + rep.summary());
  }
}

void criterion_6() {
  Outcome o;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) gradient_checks(seed, o);
  o.detail << " 20 seeds; conv, dense, relu, maxpool, softmax-xent and composed network, h=1e-5, tol=1e-4";
  record(6, "central-difference gradient checks", o);
}

void criterion_7() {
  Outcome o;
  double worst_dft = 0.0, worst_parseval = 0.0;
  for (dsp::Index n = 2; n <= 256; n *= 2) {
    const auto x = oracle::random_complex(n, static_cast<unsigned>(n) + 17);
    worst_dft = std::max(worst_dft, (dsp::fft(x) - oracle::naive_dft(x)).cwiseAbs().maxCoeff());
  }
  for (dsp::Index n = 2; n <= 1024; n *= 2) {
    const auto x = oracle::random_complex(n, static_cast<unsigned>(n) + 23);
    const double t = x.squaredNorm(), f = dsp::fft(x).squaredNorm() / static_cast<double>(n);
    worst_parseval = std::max(worst_parseval, std::abs(t - f) / t);
  }
  std::mt19937 gen(2024);
  std::uniform_int_distribution<int> pick(0, 255);
  int hits = 0;
  for (int trial = 0; trial < 16; ++trial) {
    const int k = pick(gen);
    dsp::ComplexSeq x(512);
    for (dsp::Index i = 0; i < 512; ++i) x[i] = std::polar(1.0, 2.0 * std::numbers::pi * k * i / 256.0);
    dsp::Index arg = 0;
    dsp::welch_psd(x).bins.maxCoeff(&arg);
    hits += arg == (k + 128) % 256 ? 1 : 0;
  }
  o.require(worst_dft < 1e-9, "FFT vs DFT");
  o.require(worst_parseval < 1e-9, "Parseval");
  o.require(hits == 16, "tone bins");
  o.detail << " max |fft-dft|=" << worst_dft << " max Parseval rel err=" << worst_parseval << " tone hits=" << hits
           << "/16";
  record(7, "DSP oracles: FFT vs naive DFT, Parseval, single-tone PSD bin", o);
}

void criterion_8(const fs::path& first, const fs::path& second, const ExperimentConfig& cfg) {
  Outcome o;
  run_compare(cfg, second);
  const auto a = snapshot(first), b = snapshot(second);
  int differing = 0;
  for (const auto& [path, bytes] : a) {
    const auto it = b.find(path);
    if (it == b.end() || it->second != bytes) {
      if (differing < 5) o.detail << " differs: " << path;
      ++differing;
    }
  }
  o.require(a.size() == b.size() && differing == 0, "artifacts differ");
  int models = 0, images = 0;
  for (const auto& [path, bytes] : a) {
    models += path.rfind("models/", 0) == 0 ? 1 : 0;
    images += path.rfind("images/", 0) == 0 ? 1 : 0;
  }
  o.detail << " files=" << a.size() << " (images " << images << ", models " << models << ")";
  record(8, "two compare runs produce byte-identical datasets, images, models and reports", o);
}

void criterion_9(const fs::path& work) {
  Outcome o;
  ExperimentConfig cfg;
  cfg.per_class = 5;
  cfg.test_per_class = 1;
  const auto manifest = pipeline::generate_dataset(cfg, work / "overfit" / "data");
  const auto images =
      pipeline::render_dataset(manifest, work / "overfit" / "data", Representation::Hybrid, {}, work / "overfit" / "img");
  const auto set = pipeline::load_split(images, work / "overfit" / "img", pipeline::Split::Train);
  TrainConfig tc;
  tc.batch_size = 16;
  tc.epochs = 200;
  const auto result = pipeline::train(set, {}, tc);
  double loss = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i)
    loss += nn::softmax_xent(result.model.logits(set.inputs[i]), modem::class_index(set.labels[i])).loss;
  loss /= static_cast<double>(set.size());
  const double acc = pipeline::accuracy(result.model, set);
  o.require(set.size() == 16, "training set is not 16 images");
  o.require(result.steps <= 200, "more than 200 steps");
  o.require(acc == 1.0, "train accuracy below 100%");
  o.require(loss < 0.01, "loss not below 0.01");
  o.detail << " images=" << set.size() << " steps=" << result.steps << " train acc=" << acc << " loss=" << loss;
  record(9, "overfit 16 images within 200 steps", o);
}

void criterion_10(const fs::path& run_dir) {
  Outcome o;
  std::mt19937 gen(10);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  int checked = 0;
  for (int channels : {1, 3}) {
    raster::RasterImage img(128, 128, channels);
    for (auto& v : img.pixels) v = d(gen);
    const auto bytes = raster::encode_image(img);
    const std::string header(bytes.begin(), bytes.begin() + 15);
    o.require(header == (channels == 1 ? "P5\n128 128\n255\n" : "P6\n128 128\n255\n"), "header bytes");
    o.require(bytes.size() == 15 + 128 * 128 * static_cast<std::size_t>(channels), "file size");
    o.require(raster::encode_image(raster::decode_image(bytes)) == bytes, "re-encode differs");
    ++checked;
  }
  for (const auto& e : fs::recursive_directory_iterator(run_dir / "images")) {
    const auto ext = e.path().extension();
    if (ext != ".pgm" && ext != ".ppm") continue;
    const auto bytes = read_file(e.path());
    if (raster::encode_image(raster::decode_image(bytes)) != bytes) o.require(false, e.path().string());
    ++checked;
  }
  o.detail << " images checked=" << checked;
  record(10, "PGM/PPM encode-decode-encode is byte-stable with exact headers", o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the hybrid-image classifier"};
  std::string work = (fs::temp_directory_path() / "hybridsig_acceptance").string();
  bool keep = false;
  app.add_option("--work", work, "Scratch directory for generated artifacts");
  app.add_flag("--keep", keep, "Leave the scratch directory in place");
  CLI11_PARSE(app, argc, argv);

  const fs::path root(work);
  fs::remove_all(root);
  fs::create_directories(root);
  const auto started = std::chrono::steady_clock::now();

  // Quick property criteria first, then the end-to-end runs.
  criterion_6();
  criterion_7();
  criterion_9(root);

  const ExperimentConfig cfg;  // SNR 10 dB, seed fixed in the source tree
  std::cerr << "compare run 1" << std::endl;
  const auto report1 = run_compare(cfg, root / "compare_1");
  criteria_1_2_3(report1, root);
  criterion_4(root / "compare_1", root);
  criterion_5(root / "compare_1");
  std::cerr << "compare run 2" << std::endl;
  criterion_8(root / "compare_1", root / "compare_2", cfg);
  criterion_10(root / "compare_1");

  const auto minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() / 60.0;
  std::sort(g_results.begin(), g_results.end());
  int failed = 0;
  std::cout << "\nsummary:";
  for (const auto& [id, pass] : g_results) {
    std::cout << " " << id << "=" << (pass ? "PASS" : "FAIL");
    failed += pass ? 0 : 1;
  }
  std::cout << "\n" << (g_results.size() - failed) << "/" << g_results.size() << " criteria passed in " << std::fixed
            << std::setprecision(1) << minutes << " min" << std::endl;
  if (!keep) fs::remove_all(root);
  return failed == 0 ? 0 : 1;
}
