#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "alsf/commands.hpp"
#include "alsf/config.hpp"
#include "alsf/model_file.hpp"
#include "fixtures.hpp"

using namespace alsf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "alsf_test_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kConfigError;
}

const char* kSmallSynth =
    "patch_size = 6\n"
    "class_subspace_dim = 3\n"
    "shared_subspace_dim = 2\n"
    "noise_sigma = 0\n"
    "grid_rows = 4\n"
    "grid_cols = 4\n"
    "train_images_per_class = 3\n"
    "test_images_per_class = 2\n"
    "patches_per_class = 60\n"
    "seed = 5\n";

const char* kSmallHyper =
    "k_per_class = 4\n"
    "k_shared = 2\n"
    "max_iters = 5\n"
    "lambda2 = 0.1\n";

// Synthetic dataset plus a trained model, shared by several cases.
struct Trained {
  fs::path dir, manifest, model;
};

const Trained& trained() {
  static const Trained t = [] {
    Trained r;
    r.dir = scratch("trained");
    write(r.dir / "synth.cfg", kSmallSynth);
    write(r.dir / "hp.cfg", kSmallHyper);
    r.manifest = r.dir / "data" / "manifest.txt";
    r.model = r.dir / "m.alsf";
    std::ostringstream log;
    cli::SynthOptions so{r.dir / "synth.cfg", r.manifest, std::nullopt};
    REQUIRE(cli::cmd_synth(so, log) == 0);
    cli::TrainOptions to{r.manifest, r.dir / "hp.cfg", r.model, {}, std::nullopt};
    REQUIRE(cli::cmd_train(to, log) == 0);
    return r;
  }();
  return t;
}

}  // namespace

TEST_CASE("config text parsing") {
  const auto s = config::parse_text("# c\na = 1\n[class x]\nb = two words \n", "t");
  REQUIRE(s.size() == 2);
  CHECK(s[0].entries[0].key == "a");
  CHECK(s[1].kind == "class");
  CHECK(s[1].name == "x");
  CHECK(s[1].entries[0].value == "two words");
  CHECK(s[1].entries[0].line == 4);
  CHECK(code_of([] { config::parse_text("no equals sign\n"); }) == ErrorCode::kConfigError);
  CHECK(code_of([] { config::parse_text("[unterminated\n"); }) == ErrorCode::kConfigError);
}

TEST_CASE("hyperparameter and grid parsing") {
  const auto hp = config::parse_hyperparams(config::parse_text("eta = 0.5\nk_shared = 0\n"));
  CHECK(hp.eta == 0.5);
  CHECK(hp.k_shared == 0);
  CHECK(code_of([] { config::parse_hyperparams(config::parse_text("bogus = 1\n")); }) ==
        ErrorCode::kConfigError);
  CHECK(code_of([] { config::parse_hyperparams(config::parse_text("eta = abc\n")); }) ==
        ErrorCode::kConfigError);

  const auto g = config::parse_grid(config::parse_text("eta = 0.1, 0.2\ntau = 1, 2, 3\nfolds = 4\n"));
  CHECK(g.folds == 4);
  REQUIRE(g.points.size() == 6);
  CHECK(g.points[0].eta == 0.1);
  CHECK(g.points[0].tau == 1);
  CHECK(g.points[1].tau == 2);
  CHECK(g.points[3].eta == 0.2);

  // format_hyperparams round trips exactly.
  Hyperparams odd;
  odd.eta = 0.1 + 0.2;
  odd.lambda3 = 1.0 / 3.0;
  odd.seed = 77;
  const auto back = config::parse_hyperparams(config::parse_text(cli::format_hyperparams(odd)));
  CHECK(back.eta == odd.eta);
  CHECK(back.lambda3 == odd.lambda3);
  CHECK(back.seed == 77);
}

TEST_CASE("manifest parse and format") {
  const fs::path dir = scratch("manifest");
  fs::create_directories(dir / "img");
  for (const char* f : {"img/a.png", "img/b.png", "img/b_mask.png"}) write(dir / f, "x");
  const std::string text =
      "patch_size = 10\nchannels = rgb\ndownsample = 272x205\nrule = region\nseed = 4\n"
      "[class neg]\ntrain = img/a.png\ncenter_mask = true\n"
      "[class pos]\ntrain = img/b.png mask=img/b_mask.png\ntest = img/a.png\n";
  const auto m = config::parse_manifest_text(text, dir);
  CHECK(m.patch_size == 10);
  CHECK(m.channels == 3);
  CHECK(m.feature_dim() == 300);
  CHECK(m.downsample == std::make_pair(272, 205));
  CHECK(m.rule == RuleKind::kConnectedRegion);
  CHECK(m.positive_index() == 1);
  CHECK(m.classes[0].center_mask);
  CHECK(m.classes[1].train[0].mask == dir / "img/b_mask.png");
  CHECK(m.classes[1].train[0].key == "img/b.png");

  const auto again = config::parse_manifest_text(config::format_manifest(m, dir), dir);
  CHECK(config::format_manifest(again, dir) == config::format_manifest(m, dir));

  CHECK(code_of([&] { config::parse_manifest_text("[class a]\ntrain = img/missing.png\n", dir); }) ==
        ErrorCode::kIoError);
  CHECK(code_of([&] { config::parse_manifest_text("[class a]\n[class a]\n", dir); }) ==
        ErrorCode::kConfigError);
  CHECK(code_of([&] {
          config::parse_manifest_text("positive_class = zz\n[class a]\n", dir);
        }) == ErrorCode::kInsufficientData);
  CHECK(code_of([&] { config::parse_manifest_text("", dir); }) == ErrorCode::kInsufficientData);
}

TEST_CASE("model file round trip is bitwise") {
  auto in = fixture::random_instance(3, 7, 2, 3, 2, 1);
  in.model.class_analysis[0](0, 0) = std::numeric_limits<double>::denorm_min();
  in.model.class_analysis[1](1, 2) = -0.0;
  in.model.labels = {"neg", "pos ü"};
  const auto bytes = model_file::serialize(in.model);
  const AlsfModel back = model_file::deserialize(bytes);
  CHECK(back.labels == in.model.labels);
  for (int c = 0; c < 2; ++c) {
    CHECK(std::memcmp(back.class_dicts[c].data(), in.model.class_dicts[c].data(),
                      sizeof(double) * in.model.class_dicts[c].size()) == 0);
    CHECK(std::memcmp(back.class_analysis[c].data(), in.model.class_analysis[c].data(),
                      sizeof(double) * in.model.class_analysis[c].size()) == 0);
  }
  CHECK(back.shared_dict == in.model.shared_dict);
  CHECK(std::signbit(back.class_analysis[1](1, 2)));
  CHECK(model_file::serialize(back) == bytes);

  // Header layout.
  CHECK(std::memcmp(bytes.data(), "ALSF", 4) == 0);
  CHECK(bytes[4] == model_file::kVersion);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK(code_of([&] { model_file::deserialize(flipped); }) == ErrorCode::kChecksumFailure);

  auto newer = bytes;
  newer[4] += 1;
  const std::uint32_t crc = model_file::crc32(newer.data(), newer.size() - 4);
  for (int i = 0; i < 4; ++i) newer[newer.size() - 4 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
  CHECK(code_of([&] { model_file::deserialize(newer); }) == ErrorCode::kVersionMismatch);

  auto cut = bytes;
  cut.resize(bytes.size() - 9);
  CHECK_THROWS_AS(model_file::deserialize(cut), Error);

  // Known CRC-32 check value.
  const char* nine = "123456789";
  CHECK(model_file::crc32(reinterpret_cast<const std::uint8_t*>(nine), 9) == 0xCBF43926u);

  const fs::path dir = scratch("modelfile");
  model_file::save_model(in.model, dir / "m.alsf");
  CHECK(model_file::load_model(dir / "m.alsf").class_dicts[1] == in.model.class_dicts[1]);
  CHECK(code_of([&] { model_file::load_model(dir / "nope.alsf"); }) == ErrorCode::kIoError);
}

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code_for(ErrorCode::kConfigError) == 2);
  CHECK(cli::exit_code_for(ErrorCode::kWeightError) == 2);
  CHECK(cli::exit_code_for(ErrorCode::kIoError) == 3);
  CHECK(cli::exit_code_for(ErrorCode::kEmptyClass) == 3);
  CHECK(cli::exit_code_for(ErrorCode::kNonFiniteInput) == 4);
  CHECK(cli::exit_code_for(ErrorCode::kRankError) == 4);
}

TEST_CASE("synth is deterministic and validates its spec") {
  const fs::path a = scratch("synth_a"), b = scratch("synth_b");
  write(a / "s.cfg", kSmallSynth);
  std::ostringstream log;
  REQUIRE(cli::cmd_synth({a / "s.cfg", a / "m.txt", std::nullopt}, log) == 0);
  REQUIRE(cli::cmd_synth({a / "s.cfg", b / "m.txt", std::nullopt}, log) == 0);
  CHECK(slurp(a / "m.txt") == slurp(b / "m.txt"));
  int files = 0;
  for (const auto& e : fs::directory_iterator(a / "images")) {
    CHECK(slurp(e.path()) == slurp(b / "images" / e.path().filename()));
    ++files;
  }
  // 2 classes x (3 train + 2 test) images plus masks for positive train images.
  CHECK(files == 13);

  REQUIRE(cli::cmd_synth({a / "s.cfg", b / "m.txt", std::uint64_t{9}}, log) == 0);
  CHECK(slurp(a / "m.txt") != slurp(b / "m.txt"));

  write(a / "bad.cfg", "class_subspace_dim = 30\nshared_subspace_dim = 10\npatch_size = 6\n");
  CHECK(cli::cmd_synth({a / "bad.cfg", a / "x.txt", std::nullopt}, log) == 2);
  write(a / "bad2.cfg", "unknown_key = 1\n");
  CHECK(cli::cmd_synth({a / "bad2.cfg", a / "x.txt", std::nullopt}, log) == 2);
}

TEST_CASE("train writes a loadable model and report") {
  const Trained& t = trained();
  const AlsfModel m = model_file::load_model(t.model);
  CHECK(m.labels == std::vector<std::string>{"class0", "class1"});
  CHECK(m.dim() == 36);
  CHECK(m.class_dicts[0].cols() == 4);
  CHECK(m.shared_dict.cols() == 2);
  const std::string report = slurp(t.model.string() + ".report.txt");
  CHECK(report.find("[objective]") != std::string::npos);
  CHECK(report.find("[timings]") != std::string::npos);

  // Same inputs, same model bytes.
  std::ostringstream log;
  const fs::path again = t.dir / "again.alsf";
  REQUIRE(cli::cmd_train({t.manifest, t.dir / "hp.cfg", again, t.dir / "r2.txt", std::nullopt}, log) == 0);
  CHECK(slurp(again) == slurp(t.model));

  write(t.dir / "bad.cfg", "eta = -1\n");
  CHECK(cli::cmd_train({t.manifest, t.dir / "bad.cfg", t.dir / "x.alsf", {}, std::nullopt}, log) == 2);

  const fs::path solo = t.dir / "solo.txt";
  std::string one = slurp(t.manifest);
  one = one.substr(0, one.find("[class class1]"));
  write(solo, one);
  CHECK(cli::cmd_train({solo, t.dir / "hp.cfg", t.dir / "x.alsf", {}, std::nullopt}, log) == 3);
  CHECK_FALSE(fs::exists(t.dir / "x.alsf"));

  std::string missing = slurp(t.manifest);
  missing.replace(missing.find("images/class0_train_0.png"), 25, "images/not_there_at_all.png");
  write(t.dir / "missing.txt", missing);
  CHECK(cli::cmd_train({t.dir / "missing.txt", t.dir / "hp.cfg", t.dir / "x.alsf", {}, std::nullopt}, log) ==
        3);
}

TEST_CASE("classify output, determinism and errors") {
  const Trained& t = trained();
  std::ostringstream out1, out2, log;
  REQUIRE(cli::cmd_classify({t.model, t.dir / "data" / "images", {}, {}}, out1, log) == 0);
  REQUIRE(cli::cmd_classify({t.model, t.dir / "data" / "images", {}, {}}, out2, log) == 0);
  CHECK(out1.str() == out2.str());
  std::istringstream lines(out1.str());
  std::string header, row;
  std::getline(lines, header);
  CHECK(header == "path,grid_rows,grid_cols,positive_ratio,largest_region,score,decision,error");
  int rows = 0;
  std::string prev;
  while (std::getline(lines, row)) {
    CHECK(row >= prev);
    prev = row;
    ++rows;
  }
  CHECK(rows == 13);

  std::ostringstream single;
  REQUIRE(cli::cmd_classify({t.model, t.dir / "data" / "images" / "class1_train_0.png", {}, {}}, single,
                            log) == 0);
  CHECK(single.str().find(",4,4,") != std::string::npos);

  const fs::path empty = scratch("classify_empty");
  std::ostringstream none;
  CHECK(cli::cmd_classify({t.model, empty, {}, {}}, none, log) == 3);
  CHECK(cli::cmd_classify({empty / "no.alsf", empty, {}, {}}, none, log) == 3);
}

TEST_CASE("eval confusion rows are normalized") {
  const Trained& t = trained();
  const auto r = cli::run_eval(model_file::load_model(t.model), config::parse_manifest(t.manifest));
  REQUIRE(r.confusion.size() == 2);
  for (const auto& row : r.confusion) CHECK(row[0] + row[1] == doctest::Approx(1.0));
  CHECK(r.row_labels == std::vector<std::string>{"class0", "class1"});
  CHECK(r.images.size() == 10);
  CHECK(r.train_balanced_accuracy >= 0.5);

  std::ostringstream out, log;
  REQUIRE(cli::cmd_eval({t.model, t.manifest, t.dir / "eval.txt"}, out, log) == 0);
  CHECK(slurp(t.dir / "eval.txt") == cli::format_eval_report(r));
}

TEST_CASE("cv writes the best point") {
  const Trained& t = trained();
  write(t.dir / "grid.cfg", std::string(kSmallHyper) + "lambda2 = 0.1, 1\nfolds = 2\n");
  std::ostringstream out, log;
  REQUIRE(cli::cmd_cv({t.manifest, t.dir / "grid.cfg", t.dir / "best.cfg", std::nullopt}, out, log) == 0);
  CHECK(out.str().find("best_index") != std::string::npos);
  const auto best = config::parse_hyperparams_file(t.dir / "best.cfg");
  CHECK((best.lambda2 == 0.1 || best.lambda2 == 1.0));
  CHECK(best.k_per_class == 4);
  write(t.dir / "g1.cfg", "lambda2 = 0.1\nfolds = 1\n");
  CHECK(cli::cmd_cv({t.manifest, t.dir / "g1.cfg", {}, std::nullopt}, out, log) == 2);
}

TEST_CASE("bench validation and small run") {
  std::ostringstream out, log;
  cli::BenchOptions bad;
  bad.n_patches = 0;
  CHECK(cli::cmd_bench(bad, out, log) == 2);

  cli::BenchOptions small;
  small.n_patches = 40;
  small.d = 16;
  small.k_per_class = 8;
  small.k_shared = 4;
  small.repetitions = 1;
  small.baseline_iterations = 3;
  small.baseline_patches = 4;
  const auto r = cli::run_bench(small);
  CHECK(r.alsf_solver_invocations == 0);
  CHECK(r.baseline_solver_invocations > 0);
  CHECK(r.total_atoms == 20);
  CHECK(r.speedup > 0.0);
  CHECK(cli::cmd_bench(small, out, log) == 0);
  CHECK(out.str().find("[timings]") != std::string::npos);
}
