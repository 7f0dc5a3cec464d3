#pragma once

// Trainable tensors, the AdamW optimizer, and the checkpoint archive.

#include <Eigen/Dense>
#include <fstream>
#include <map>

#include "falcon/jsonio.hpp"

namespace falcon {

struct Param {
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols)
      : value(Eigen::MatrixXd::Zero(rows, cols)), grad(Eigen::MatrixXd::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
inline void xavier_init(Param& p, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-limit, limit);
}

/// Named, ordered view over a model's parameters.
struct ParamRef {
  std::string name;
  Param* param;
  bool decay;  // subject to decoupled weight decay
};

using ParamList = std::vector<ParamRef>;

inline std::uint64_t checksum(const ParamList& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    h = fnv1a64(p.name, h);
    h = fnv1a64_bytes(p.param->value.data(),
                      static_cast<std::size_t>(p.param->value.size()) * sizeof(double), h);
  }
  return h;
}

struct AdamWConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  void step(const ParamList& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& ref : params) {
      Param& p = *ref.param;
      auto [it, inserted] = state_.try_emplace(ref.name);
      auto& [m, v] = it->second;
      if (inserted) {
        m = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
        v = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
      }
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
      if (ref.decay) p.value *= (1.0 - cfg_.lr * cfg_.weight_decay);
      p.value.array() -= cfg_.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
    }
  }

  long long steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  long long t_ = 0;
  std::map<std::string, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> state_;
};

/// Checkpoint archive: one JSON header line followed by the raw little-endian
/// float64 blob of every tensor in header order.
struct Checkpoint {
  Json header;  // free-form metadata (kind, config, backbone, metrics, ...)
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

  const Eigen::MatrixXd& tensor(const std::string& name) const {
    for (const auto& [n, m] : tensors) {
      if (n == name) return m;
    }
    throw Error("checkpoint has no tensor '" + name + "'");
  }
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian");
  Json header = ckpt.header;
  header["format"] = "falcon-checkpoint";
  header["format_version"] = 1;
  Json index = Json::array();
  std::size_t offset = 0;
  for (const auto& [name, m] : ckpt.tensors) {
    index.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::size_t>(m.size());
  }
  header["tensors"] = std::move(index);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << header.dump() << '\n';
  for (const auto& [name, m] : ckpt.tensors) {
    // Eigen default storage is column-major; the blob keeps that order.
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(static_cast<std::size_t>(m.size()) * sizeof(double)));
  }
  if (!out) throw Error("failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  std::string line;
  std::getline(in, line);
  Checkpoint ckpt;
  try {
    ckpt.header = Json::parse(line);
  } catch (const std::exception& e) {
    throw Error("corrupt checkpoint header in " + path + ": " + e.what());
  }
  if (ckpt.header.value("format", std::string()) != "falcon-checkpoint") {
    throw Error(path + " is not a falcon checkpoint");
  }
  for (const auto& t : ckpt.header.at("tensors")) {
    Eigen::MatrixXd m(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(static_cast<std::size_t>(m.size()) * sizeof(double)));
    if (!in) throw Error("truncated checkpoint " + path);
    ckpt.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
  }
  return ckpt;
}

inline void export_params(const ParamList& params, const std::string& prefix, Checkpoint& ckpt) {
  for (const auto& p : params) ckpt.tensors.emplace_back(prefix + p.name, p.param->value);
}

inline void import_params(const ParamList& params, const std::string& prefix, const Checkpoint& ckpt) {
  for (const auto& p : params) {
    const auto& m = ckpt.tensor(prefix + p.name);
    if (m.rows() != p.param->value.rows() || m.cols() != p.param->value.cols()) {
      throw Error("checkpoint tensor '" + prefix + p.name + "' has mismatched shape");
    }
    p.param->value = m;
    p.param->zero_grad();
  }
}

}  // namespace falcon
