// Regenerates the miniature datasets under tests/data. Output is a pure
// function of the seed below, so a rerun must reproduce the committed bytes.
//
//   make_fixtures <output-dir>

#include <srt/datasets.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

constexpr std::uint64_t fixture_seed = 20240601;

// 200 samples, 100 integer-valued features in [0, 999] (about 30% nonzero), labels
// drawn from a planted linear model on the centred features.
srt::LabeledDataset<double> mini_gisette(srt::Rng& rng) {
  const std::size_t n = 200, d = 100;
  srt::DenseMatrix x(n, d);
  std::vector<double> truth(d);
  for (double& t : truth) t = rng.normal();
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (rng.uniform() < 0.3) x(i, j) = static_cast<double>(rng.uniform_index(1000));
      z += truth[j] * (x(i, j) - 150.0) / 1000.0;
    }
    labels[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0;
  }
  return {std::move(x), std::move(labels), 2};
}

// 64 images of 28x28: class c lights a bar at rows 2c..2c+5 plus speckle.
void mini_fmnist(srt::Rng& rng, srt::Bytes& images, srt::Bytes& labels) {
  const std::size_t count = 64, side = 28;
  std::vector<std::uint8_t> pixels(count * side * side);
  std::vector<std::uint8_t> classes(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto c = static_cast<std::uint8_t>(i % 10);
    classes[i] = c;
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t col = 0; col < side; ++col) {
        double v = rng.uniform() < 0.1 ? rng.uniform(0.0, 120.0) : 0.0;
        if (r >= 2u * c + 4 && r < 2u * c + 10 && col >= 6 && col < 22) v = 140.0 + rng.uniform(0.0, 115.0);
        pixels[(i * side + r) * side + col] = static_cast<std::uint8_t>(v);
      }
    }
  }
  images = srt::encode_idx_images(count, side, side, pixels);
  labels = srt::gzip(srt::encode_idx_labels(classes));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output-dir>\n";
    return 1;
  }
  const std::filesystem::path out = argv[1];
  std::filesystem::create_directories(out);
  srt::Rng rng(fixture_seed);

  std::ostringstream text;
  srt::write_libsvm(text, mini_gisette(rng));
  const std::string s = text.str();
  srt::write_file(out / "mini_gisette.libsvm", srt::Bytes(s.begin(), s.end()));

  srt::Bytes images, labels;
  mini_fmnist(rng, images, labels);
  srt::write_file(out / "mini_fmnist_images.idx", images);
  srt::write_file(out / "mini_fmnist_labels.idx.gz", labels);
  return 0;
}
