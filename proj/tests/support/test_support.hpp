#pragma once

#include "smplgan/autodiff.hpp"
#include "smplgan/config.hpp"
#include "smplgan/errors.hpp"
#include "smplgan/rng.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

#define EXPECT_ERROR_KIND(stmt, k)                                              \
  do {                                                                          \
    try {                                                                       \
      stmt;                                                                     \
      ADD_FAILURE() << "expected " << smplgan::to_string(k) << ", got no error"; \
    } catch (const smplgan::Error& e_) {                                        \
      EXPECT_EQ(e_.kind(), k) << e_.what();                                     \
    }                                                                           \
  } while (0)

namespace smplgan::testing {

// Small enough that a training step runs in milliseconds.
inline RunConfig tiny_config() {
  RunConfig c = make_profile("toy");
  c.embedder.dim = 8;
  c.embedder.max_words = 6;
  c.body.toy_vertices = 48;
  c.body.toy_joints = 6;
  c.render.resolution = 8;
  c.data.size = 48;
  c.generator.latent_dim = 6;
  c.generator.feature_dim = 8;
  c.generator.hidden = 8;
  c.generator.layers = 2;
  c.generator.attention_hidden = 6;
  c.critic1.encoder_hidden = 12;
  c.critic1.hidden = 8;
  c.critic1.layers = 2;
  c.critic2.stage_channels = {2, 2};
  c.critic2.final_channels = 2;
  c.critic2.text_channels = 2;
  c.critic2.lstm_channels = {2};
  c.counter.hidden = 8;
  c.train.batch_size = 4;
  c.train.epochs = 1;
  c.train.critic_steps = 2;
  c.train.learning_rate = 1e-3;
  c.eval.sample_n = 6;
  c.finalize();
  return c;
}

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Central differences of f at x, one coordinate at a time.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix x, double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = f(x);
    x.data()[i] = keep - h;
    const double down = f(x);
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("smplgan-test-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace smplgan::testing
