#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <Eigen/QR>

#include "oracles.hpp"
#include "pclnet/error.hpp"
#include "pclnet/io.hpp"
#include "pclnet/parallel.hpp"
#include "pclnet/patch.hpp"

using namespace pclnet;
namespace fs = std::filesystem;

namespace {

bool has_failure(const ValidationReport& r, const std::string& what) {
  return std::find(r.failures.begin(), r.failures.end(), what) != r.failures.end();
}

// Hermitian matrix with the given spectrum, rotated by a fixed unitary.
CoherencyMatrix with_spectrum(double a, double b, double c) {
  const Complex i(0, 1);
  Matrix3c q;
  q << 1.0, i, 0.5, -i, 1.0, 0.25 * i, 0.3, 0.0, 1.0;
  const Eigen::HouseholderQR<Matrix3c> qr(q);
  const Matrix3c u = qr.householderQ();
  const Matrix3c d = Eigen::Vector3cd(a, b, c).asDiagonal();
  return CoherencyMatrix::from_matrix(u * d * u.adjoint());
}

PolSARScene random_scene(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CoherencyMatrix> px;
  for (int i = 0; i < h * w; ++i) px.emplace_back(oracle::random_psd(rng));
  return PolSARScene(h, w, std::move(px));
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pclnet_unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("polsar-core") {

TEST_CASE("validate_coherency accepts the identity") {
  const auto r = validate_coherency(CoherencyMatrix::identity(), 1e-9);
  CHECK(r.valid);
  CHECK(r.failures.empty());
}

TEST_CASE("validate_coherency flags a negative diagonal") {
  const auto r = validate_coherency(CoherencyMatrix::diagonal(1, 1, -0.5), 1e-9);
  CHECK_FALSE(r.valid);
  CHECK(has_failure(r, "negative diagonal"));
}

TEST_CASE("validate_coherency flags an indefinite matrix with a nonnegative diagonal") {
  const CoherencyMatrix t = with_spectrum(2, 1, -1e-3);
  for (int k = 0; k < 3; ++k) REQUIRE(t[static_cast<std::size_t>(k)] >= 0);
  const auto r = validate_coherency(t, 1e-9);
  CHECK_FALSE(r.valid);
  CHECK(has_failure(r, "not PSD"));
  CHECK(validate_coherency(with_spectrum(2, 1, 0), 1e-9).valid);
}

TEST_CASE("validate_coherency flags non-finite entries") {
  CoherencyMatrix t({1, 1, 1, NAN, 0, 0, 0, 0, 0});
  CHECK(has_failure(validate_coherency(t), "non-finite entry"));
}

TEST_CASE("sample_wishart of the zero covariance is zero") {
  Rng rng(1);
  const CoherencyMatrix t = sample_wishart(CoherencyMatrix{}, 5, rng);
  for (double v : t.stored()) CHECK(v == 0.0);
}

TEST_CASE("sample_wishart mean converges to the covariance") {
  Rng rng(42);
  std::array<double, 9> sum{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const CoherencyMatrix t = sample_wishart(CoherencyMatrix::identity(), 4, rng);
    for (std::size_t k = 0; k < 9; ++k) sum[k] += t[k];
  }
  const auto expected = CoherencyMatrix::identity().stored();
  for (std::size_t k = 0; k < 9; ++k) CHECK(std::abs(sum[k] / draws - expected[k]) <= 0.05);
}

TEST_CASE("sample_wishart outputs are valid coherency matrices") {
  Rng rng(7);
  std::mt19937_64 gen(8);
  for (int i = 0; i < 300; ++i) {
    const CoherencyMatrix sigma(oracle::random_psd(gen, 0.0));
    const int looks = 1 + i % 9;
    CHECK(validate_coherency(sample_wishart(sigma, looks, rng), 1e-9).valid);
  }
}

TEST_CASE("sample_wishart rejects a non-PSD covariance and zero looks") {
  Rng rng(1);
  CHECK_THROWS_WITH(sample_wishart(CoherencyMatrix::diagonal(1, -1, 1), 4, rng), "covariance not PSD");
  CHECK_THROWS_AS(sample_wishart(CoherencyMatrix::identity(), 0, rng), Error);
}

TEST_CASE("synth_scene smallest scene") {
  SyntheticSceneSpec spec{1, 1, 8, {CoherencyMatrix::identity()}, {{0, 0, 1, 1, 1}}, 3};
  const SyntheticScene s = synth_scene(spec);
  CHECK(s.scene.height() == 1);
  CHECK(s.labels.at(0, 0) == 1);
  Rng rng = substream(3, "synth.pixel", 0);
  CHECK(s.scene.at(0, 0) == sample_wishart(CoherencyMatrix::identity(), 8, rng));
}

TEST_CASE("synth_scene vertical bands") {
  SyntheticSceneSpec spec{30, 30, 8, default_class_covariances(3),
                          SyntheticSceneSpec::vertical_bands(30, 30, 3), 5};
  const SyntheticScene s = synth_scene(spec);
  const auto hist = s.labels.histogram();
  REQUIRE(hist.size() == 4);
  CHECK(hist[0] == 0);
  CHECK(hist[1] == 300);
  CHECK(hist[2] == 300);
  CHECK(hist[3] == 300);
}

TEST_CASE("synth_scene is deterministic and independent of thread count") {
  SyntheticSceneSpec spec{20, 24, 4, default_class_covariances(3),
                          SyntheticSceneSpec::vertical_bands(20, 24, 3), 11};
  const SyntheticScene a = synth_scene(spec);
  set_thread_count(3);
  const SyntheticScene b = synth_scene(spec);
  set_thread_count(1);
  CHECK(a.scene.pixels() == b.scene.pixels());
  CHECK(a.labels == b.labels);
  spec.seed = 12;
  CHECK(synth_scene(spec).scene.pixels() != a.scene.pixels());
}

TEST_CASE("synth_scene rejects overlapping or incomplete layouts") {
  const auto cov = default_class_covariances(2);
  SyntheticSceneSpec overlap{4, 4, 4, cov, {{0, 0, 4, 3, 1}, {0, 2, 4, 2, 2}}, 1};
  CHECK_THROWS_WITH_AS(synth_scene(overlap), doctest::Contains("regions overlap"), Error);
  SyntheticSceneSpec gap{4, 4, 4, cov, {{0, 0, 4, 2, 1}}, 1};
  CHECK_THROWS_WITH_AS(synth_scene(gap), "regions do not tile the scene", Error);
}

TEST_CASE("pixel_features of the identity") {
  const auto f = pixel_features(CoherencyMatrix::identity());
  CHECK(f == std::array<double, 9>{1, 1, 1, 0, 0, 0, 0, 0, 0});
}

TEST_CASE("pixel_features reads out T12") {
  Matrix3c m = Matrix3c::Zero();
  m(0, 0) = 2;
  m(1, 1) = 1;
  m(2, 2) = 1;
  m(0, 1) = Complex(0.3, 0.4);
  m(1, 0) = std::conj(m(0, 1));
  const auto f = pixel_features(CoherencyMatrix::from_matrix(m));
  CHECK(f == std::array<double, 9>{2, 1, 1, 0.3, 0.4, 0, 0, 0, 0});
}

TEST_CASE("pixel_features round-trips stored matrices") {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 100; ++i) {
    const CoherencyMatrix t(oracle::random_psd(gen));
    const auto f = pixel_features(t);
    CHECK(from_features(std::span<const double, 9>(f)) == t);
    // The dense form agrees with the independent assembly.
    const oracle::M3 ref = oracle::hermitian(t.stored());
    const Matrix3c m = t.matrix();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) CHECK(m(r, c) == ref[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
  }
}

TEST_CASE("extract_patch of a constant scene is constant per channel") {
  const CoherencyMatrix t({2, 1, 0.5, 0.1, -0.2, 0.05, 0, 0.01, 0.02});
  const PolSARScene scene(9, 11, t);
  const PatchTensor p = extract_patch(scene, 0, 10, 15);
  for (int c = 0; c < 9; ++c)
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 15; ++j) CHECK(p.at(c, i, j) == t[static_cast<std::size_t>(c)]);
}

TEST_CASE("extract_patch agrees with a naive reflection oracle") {
  auto reflect = [](int i, int n) {
    // Unfold the mirrored axis step by step.
    while (i < 0 || i >= n) {
      if (n == 1) return 0;
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
  };
  const PolSARScene scene = random_scene(12, 9, 77);
  for (int size : {1, 3, 15, 21})
    for (int row : {0, 1, 5, 11})
      for (int col : {0, 4, 8}) {
        const PatchTensor p = extract_patch(scene, row, col, size);
        const int half = size / 2;
        for (int i = 0; i < size; ++i)
          for (int j = 0; j < size; ++j) {
            const auto& px = scene.at(reflect(row + i - half, 12), reflect(col + j - half, 9));
            for (int c = 0; c < 9; ++c) REQUIRE(p.at(c, i, j) == px[static_cast<std::size_t>(c)]);
          }
      }
}

TEST_CASE("extract_patch centre pixel and corner symmetry") {
  const PolSARScene scene = random_scene(20, 20, 5);
  const PatchTensor p = extract_patch(scene, 7, 3, 15);
  const auto f = pixel_features(scene.at(7, 3));
  for (int c = 0; c < 9; ++c) CHECK(p.at(c, 7, 7) == f[static_cast<std::size_t>(c)]);

  const PatchTensor corner = extract_patch(scene, 0, 0, 15);
  for (int c = 0; c < 9; ++c)
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 15; ++j) {
        CHECK(corner.at(c, i, j) == corner.at(c, 14 - i, j));
        CHECK(corner.at(c, i, j) == corner.at(c, i, 14 - j));
      }
}

TEST_CASE("extract_patch rejects even sizes and outside pixels") {
  const PolSARScene scene = random_scene(5, 5, 1);
  CHECK_THROWS_AS(extract_patch(scene, 2, 2, 4), Error);
  CHECK_THROWS_AS(extract_patch(scene, 5, 0, 3), Error);
  CHECK_THROWS_AS(extract_patch(scene, 0, -1, 3), Error);
}

TEST_CASE("rotate180 reverses a 1x3x3 patch") {
  const PatchTensor p(1, 3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(rotate180(p).values() == std::vector<double>{9, 8, 7, 6, 5, 4, 3, 2, 1});
}

TEST_CASE("rotate180 is an involution and fixes constant patches") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    const int c = 1 + static_cast<int>(gen() % 9), h = 1 + static_cast<int>(gen() % 16),
              w = 1 + static_cast<int>(gen() % 16);
    PatchTensor p(c, h, w);
    for (auto& v : p.values()) v = g(gen);
    CHECK(rotate180(rotate180(p)) == p);
  }
  const PatchTensor flat(9, 15, 15, std::vector<double>(9 * 225, 0.75));
  CHECK(rotate180(flat) == flat);
}

TEST_CASE("patch_mean_coherency") {
  const CoherencyMatrix t({1.5, 1, 0.5, 0.2, 0.1, 0, 0, 0, 0});
  const CoherencyMatrix flat = patch_mean_coherency(PolSARScene(6, 6, t), 2, 2, 5);
  for (std::size_t i = 0; i < 9; ++i) CHECK(flat[i] == doctest::Approx(t[i]).epsilon(1e-15));

  // 1 x 2 scene, window 3 at column 0 reads columns {1, 0, 1}.
  const CoherencyMatrix a = CoherencyMatrix::diagonal(3, 0, 0), b = CoherencyMatrix::diagonal(0, 3, 0);
  const PolSARScene two(1, 2, std::vector<CoherencyMatrix>{a, b});
  const CoherencyMatrix m = patch_mean_coherency(two, 0, 0, 3);
  CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m[1] == doctest::Approx(2.0).epsilon(1e-15));

  const PolSARScene scene = random_scene(10, 10, 21);
  for (int r : {0, 4, 9}) {
    const CoherencyMatrix mean = patch_mean_coherency(scene, r, 9 - r, 7);
    CHECK(validate_coherency(mean).valid);
    const PatchTensor p = extract_patch(scene, r, 9 - r, 7);
    for (int c = 0; c < 9; ++c) {
      double s = 0;
      for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) s += p.at(c, i, j);
      CHECK(mean[static_cast<std::size_t>(c)] == doctest::Approx(s / 49).epsilon(1e-12));
    }
  }
}

TEST_CASE("ChannelStats and standardize") {
  const PolSARScene scene = random_scene(8, 8, 31);
  const ChannelStats st = ChannelStats::of_scene(scene);
  for (int c = 0; c < 9; ++c) {
    double s = 0, s2 = 0;
    for (const auto& px : scene.pixels()) s += px[static_cast<std::size_t>(c)];
    const double mean = s / 64;
    for (const auto& px : scene.pixels()) s2 += (px[static_cast<std::size_t>(c)] - mean) * (px[static_cast<std::size_t>(c)] - mean);
    CHECK(st.mean[static_cast<std::size_t>(c)] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(st.stddev[static_cast<std::size_t>(c)] == doctest::Approx(std::sqrt(s2 / 64)).epsilon(1e-12));
  }
  // A constant channel (here every diagonal of a constant scene) keeps unit scale.
  const ChannelStats flat = ChannelStats::of_scene(PolSARScene(3, 3, CoherencyMatrix::identity()));
  CHECK(flat.stddev[0] == 1.0);
  PatchTensor p = extract_patch(scene, 3, 3, 3);
  const PatchTensor raw = p;
  standardize(p, st);
  CHECK(p.at(4, 1, 2) == doctest::Approx((raw.at(4, 1, 2) - st.mean[4]) / st.stddev[4]));
}

TEST_CASE("scene and label files round-trip") {
  const PolSARScene scene = random_scene(4, 5, 2);
  const fs::path sp = temp_file("rt.t3b");
  io::write_scene(sp, scene);
  const PolSARScene back = io::read_scene(sp);
  REQUIRE(back.height() == 4);
  REQUIRE(back.width() == 5);
  for (std::size_t i = 0; i < scene.size(); ++i)
    for (std::size_t k = 0; k < 9; ++k)
      CHECK(back.pixels()[i][k] == static_cast<double>(static_cast<float>(scene.pixels()[i][k])));

  // Header layout.
  std::ifstream f(sp, std::ios::binary);
  char magic[6];
  f.read(magic, 6);
  CHECK(std::string(magic, 6) == std::string("T3BIN\0", 6));
  std::uint32_t hdr[3];
  f.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  CHECK(hdr[0] == 1);
  CHECK(hdr[1] == 4);
  CHECK(hdr[2] == 5);
  CHECK(fs::file_size(sp) == 6 + 12 + 4 * 5 * 9 * 4);

  LabelMap labels(3, 2, 4, {0, 1, 2, 3, 4, 1});
  const fs::path lp = temp_file("rt.lbl");
  io::write_labels(lp, labels);
  CHECK(io::read_labels(lp) == labels);
  CHECK(fs::file_size(lp) == 4 + 16 + 6 * 4);
}

TEST_CASE("file readers diagnose bad input") {
  CHECK_THROWS_WITH_AS(io::read_scene(temp_file("missing.t3b")), doctest::Contains("file not found"), Error);
  io::write_text(temp_file("bad.t3b"), "not a scene");
  CHECK_THROWS_AS(io::read_scene(temp_file("bad.t3b")), Error);
  LabelMap labels(2, 2, 1, {0, 1, 1, 0});
  io::write_labels(temp_file("trunc.lbl"), labels);
  fs::resize_file(temp_file("trunc.lbl"), fs::file_size(temp_file("trunc.lbl")) - 2);
  CHECK_THROWS_AS(io::read_labels(temp_file("trunc.lbl")), Error);
}

TEST_CASE("label maps reject out-of-range labels") {
  CHECK_THROWS_AS(LabelMap(1, 2, 2, {0, 3}), Error);
  CHECK_THROWS_AS(LabelMap(1, 2, 2, {-1, 0}), Error);
}

}  // TEST_SUITE
