#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "falcon/falcon.hpp"

namespace falcon::testing {

inline std::string fixture(const std::string& name) { return std::string(FALCON_FIXTURE_DIR) + "/" + name; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("falcon_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline TrainConfig fixture_config() { return load_config(fixture("fixture.cfg")); }

inline const std::vector<LabeledExample>& fixture_dataset() {
  static const auto data = load_labeled(fixture("labeled.jsonl")).items;
  return data;
}

inline const TrajectoryExtractor& fixture_extractor() {
  static const TrajectoryExtractor ex =
      pretrain_trajectory_extractor(load_triples(fixture("traj_corpus.jsonl")).items, fixture_config());
  return ex;
}

/// The full model trained once per test binary on the packaged fixture.
inline const TrainResult& fixture_training() {
  static const TrainResult r = train(fixture_dataset(), fixture_config(), fixture_extractor());
  return r;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

/// Largest relative error between analytic and central-difference gradients
/// of `loss` w.r.t. every entry of `p`.
template <class Loss>
double max_grad_error(Param& p, const Eigen::MatrixXd& analytic, Loss&& loss, double h = 1e-6) {
  double worst = 0;
  for (Eigen::Index i = 0; i < p.value.size(); ++i) {
    const double keep = p.value.data()[i];
    p.value.data()[i] = keep + h;
    const double up = loss();
    p.value.data()[i] = keep - h;
    const double down = loss();
    p.value.data()[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double a = analytic.data()[i];
    // Entries where both sides are at rounding level carry no signal.
    if (std::abs(a) < 1e-7 && std::abs(numeric) < 1e-7) continue;
    worst = std::max(worst, rel_err(a, numeric));
  }
  return worst;
}

}  // namespace falcon::testing
