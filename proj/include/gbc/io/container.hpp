#pragma once

#include "gbc/augment/gbc_aug.hpp"
#include "gbc/core/dataset.hpp"
#include "gbc/core/types.hpp"
#include "gbc/ensemble/ensemble.hpp"
#include "gbc/gp/gp.hpp"
#include "gbc/iqn/model.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace gbc::io {

using nlohmann::json;

/// Model container layout:
///   "GBCM" | u16 major | u16 minor | u16 patch | u32 n | n bytes of JSON descriptor | payload
/// The descriptor's "arrays" list gives every payload array in order with its
/// name, dtype ("f32" or "f64") and shape; arrays are row-major little-endian.
inline constexpr char kMagic[4] = {'G', 'B', 'C', 'M'};
inline constexpr std::uint16_t kVersionMajor = 1, kVersionMinor = 0, kVersionPatch = 0;

inline std::string version_string() {
  return std::to_string(kVersionMajor) + "." + std::to_string(kVersionMinor) + "." + std::to_string(kVersionPatch);
}

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

class BlobWriter {
 public:
  template <typename Derived>
  void put(const std::string& name, const Eigen::MatrixBase<Derived>& m) {
    using S = typename Derived::Scalar;
    static_assert(std::is_same_v<S, float> || std::is_same_v<S, double>);
    arrays_.push_back({{"name", name},
                       {"dtype", std::is_same_v<S, float> ? "f32" : "f64"},
                       {"shape", {m.rows(), m.cols()}}});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const S v = m(i, j);
        payload_.append(reinterpret_cast<const char*>(&v), sizeof v);
      }
  }

  void put_scalar(const std::string& name, double v) { put(name, Eigen::Matrix<double, 1, 1>::Constant(v)); }

  const json& arrays() const { return arrays_; }
  const std::string& payload() const { return payload_; }

 private:
  json arrays_ = json::array();
  std::string payload_;
};

class BlobReader {
 public:
  BlobReader(const json& arrays, std::string payload, std::string path)
      : arrays_(arrays), payload_(std::move(payload)), path_(std::move(path)) {}

  template <typename S>
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> get(const std::string& name) {
    if (next_ >= arrays_.size()) throw IngestionError(path_ + ": container ends before array '" + name + "'");
    const json& a = arrays_[next_++];
    if (a.at("name") != name)
      throw IngestionError(path_ + ": expected array '" + name + "', found '" + a.at("name").get<std::string>() + "'");
    const std::string want = std::is_same_v<S, float> ? "f32" : "f64";
    if (a.at("dtype") != want) throw IngestionError(path_ + ": array '" + name + "' has dtype " + a.at("dtype").dump());
    const auto rows = a.at("shape").at(0).get<Eigen::Index>(), cols = a.at("shape").at(1).get<Eigen::Index>();
    const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(S);
    if (offset_ + bytes > payload_.size()) throw IngestionError(path_ + ": truncated payload at array '" + name + "'");
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        std::memcpy(&m(i, j), payload_.data() + offset_, sizeof(S));
        offset_ += sizeof(S);
      }
    return m;
  }

  template <typename S>
  Eigen::Matrix<S, Eigen::Dynamic, 1> get_vector(const std::string& name) {
    const auto m = get<S>(name);
    return Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(m.data(), m.size());
  }

  double get_scalar(const std::string& name) { return get<double>(name)(0, 0); }

  void finish() const {
    if (next_ != arrays_.size() || offset_ != payload_.size())
      throw IngestionError(path_ + ": trailing data after the last array");
  }

 private:
  const json& arrays_;
  std::string payload_;
  std::string path_;
  std::size_t next_ = 0;
  std::size_t offset_ = 0;
};

// ---- component (de)serializers -------------------------------------------

inline json to_json(const iqn::IqnConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden_width", c.hidden_width},
          {"embed_dim", c.embed_dim},
          {"epochs", c.epochs},
          {"loss_weights", {c.loss_weights.w1, c.loss_weights.w2, c.loss_weights.w3}},
          {"lr0", c.lr0},
          {"lr_min", c.lr_min},
          {"batch_size", c.batch_size},
          {"tau_sampling", c.tau_sampling == iqn::TauSampling::per_row ? "per_row" : "per_batch"},
          {"standardize", c.standardize}};
}

inline iqn::IqnConfig iqn_config_from_json(const json& j) {
  iqn::IqnConfig c;
  c.input_dim = j.at("input_dim");
  c.hidden_width = j.at("hidden_width");
  c.embed_dim = j.at("embed_dim");
  c.epochs = j.at("epochs");
  c.loss_weights = {j.at("loss_weights").at(0), j.at("loss_weights").at(1), j.at("loss_weights").at(2)};
  c.lr0 = j.at("lr0");
  c.lr_min = j.at("lr_min");
  c.batch_size = j.at("batch_size");
  c.tau_sampling = j.at("tau_sampling") == "per_row" ? iqn::TauSampling::per_row : iqn::TauSampling::per_batch;
  c.standardize = j.at("standardize");
  return c;
}

inline void put_scaler(BlobWriter& w, const std::string& p, const Standardizer& s) {
  w.put(p + ".x_lo", s.x_lo);
  w.put(p + ".x_span", s.x_span);
  w.put_scalar(p + ".y_mean", s.y_mean);
  w.put_scalar(p + ".y_scale", s.y_scale);
}

inline Standardizer get_scaler(BlobReader& r, const std::string& p) {
  Standardizer s;
  s.x_lo = r.get_vector<double>(p + ".x_lo");
  s.x_span = r.get_vector<double>(p + ".x_span");
  s.y_mean = r.get_scalar(p + ".y_mean");
  s.y_scale = r.get_scalar(p + ".y_scale");
  return s;
}

inline void put_layer(BlobWriter& w, const std::string& p, const nn::DenseLayer<float>& l) {
  w.put(p + ".weight", l.weight);
  w.put(p + ".bias", l.bias);
}

inline nn::DenseLayer<float> get_layer(BlobReader& r, const std::string& p) {
  nn::DenseLayer<float> l;
  l.weight = r.get<float>(p + ".weight");
  l.bias = r.get_vector<float>(p + ".bias");
  return l;
}

inline void put_network(BlobWriter& w, const std::string& p, const iqn::IqnNetwork<float>& n) {
  put_layer(w, p + ".f_x", n.f_x);
  put_layer(w, p + ".f_tau", n.f_tau);
  put_layer(w, p + ".f_1", n.f_1);
  put_layer(w, p + ".f_out", n.f_out);
}

inline iqn::IqnNetwork<float> get_network(BlobReader& r, const std::string& p) {
  iqn::IqnNetwork<float> n;
  n.f_x = get_layer(r, p + ".f_x");
  n.f_tau = get_layer(r, p + ".f_tau");
  n.f_1 = get_layer(r, p + ".f_1");
  n.f_out = get_layer(r, p + ".f_out");
  return n;
}

inline json put_iqn(BlobWriter& w, const std::string& p, const iqn::IqnModel<float>& m) {
  put_scaler(w, p + ".scaler", m.scaler);
  put_network(w, p + ".net", m.net);
  return to_json(m.config);
}

inline iqn::IqnModel<float> get_iqn(BlobReader& r, const std::string& p, const json& config) {
  iqn::IqnModel<float> m;
  m.config = iqn_config_from_json(config);
  m.scaler = get_scaler(r, p + ".scaler");
  m.net = get_network(r, p + ".net");
  return m;
}

inline std::string activation_name(nn::Activation a) {
  switch (a) {
    case nn::Activation::identity: return "identity";
    case nn::Activation::relu: return "relu";
    case nn::Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

inline nn::Activation activation_from(const std::string& s) {
  if (s == "relu") return nn::Activation::relu;
  if (s == "sigmoid") return nn::Activation::sigmoid;
  if (s == "identity") return nn::Activation::identity;
  throw IngestionError("unknown activation '" + s + "'");
}

// ---- whole models --------------------------------------------------------

/// Any model the command line can train and predict with.
using AnyModel = std::variant<iqn::IqnModel<float>, ensemble::RandomizedPriorEnsemble<float>,
                              ensemble::SeedEnsemble<float>, gp::GpModel, augment::GbcAugModel<float>>;

inline std::string model_kind(const AnyModel& m) {
  static const char* names[] = {"iqn", "rp_ensemble", "seed_ensemble", "gp", "gbc_aug"};
  return names[m.index()];
}

/// Fills `w` with the payload and returns the architecture descriptor.
inline json encode(const AnyModel& model, BlobWriter& w) {
  json arch;
  arch["kind"] = model_kind(model);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, iqn::IqnModel<float>>) {
          arch["config"] = put_iqn(w, "iqn", m);
        } else if constexpr (std::is_same_v<T, ensemble::RandomizedPriorEnsemble<float>>) {
          arch["members"] = m.size();
          arch["alpha"] = m.alpha;
          arch["seed"] = m.seed;
          arch["member_seeds"] = m.member_seeds;
          arch["config"] = m.members.empty() ? json() : to_json(m.members.front().trainable.config);
          for (std::size_t k = 0; k < m.size(); ++k) {
            const std::string p = "member" + std::to_string(k);
            put_iqn(w, p, m.members[k].trainable);
            put_network(w, p + ".prior", m.members[k].prior);
          }
        } else if constexpr (std::is_same_v<T, ensemble::SeedEnsemble<float>>) {
          arch["members"] = m.size();
          arch["member_seeds"] = m.member_seeds;
          arch["config"] = m.members.empty() ? json() : to_json(m.members.front().config);
          for (std::size_t k = 0; k < m.size(); ++k) put_iqn(w, "member" + std::to_string(k), m.members[k]);
        } else if constexpr (std::is_same_v<T, gp::GpModel>) {
          if (!m.fitted()) throw StateError("save_model: GP model is not conditioned");
          arch["kernel"] = "matern52_ard";
          arch["dim"] = m.dim();
          arch["n"] = m.X.rows();
          arch["log_likelihood"] = m.log_likelihood;
          w.put_scalar("gp.signal_variance", m.hp.signal_variance);
          w.put("gp.length_scales", m.hp.length_scales);
          w.put_scalar("gp.nugget", m.hp.nugget);
          w.put_scalar("gp.mean", m.mean);
          w.put("gp.X", m.X);
          w.put("gp.y", m.y);
        } else {
          if (m.transform.kind != augment::TransformKind::classifier_augment || !m.transform.classifier)
            throw StateError("save_model: GBC-Aug model has no classifier");
          const auto& c = *m.transform.classifier;
          json acts = json::array();
          for (auto a : c.net.activations) acts.push_back(activation_name(a));
          arch["classifier"] = {{"layers", c.net.layers.size()},
                                {"activations", acts},
                                {"hidden", c.config.hidden},
                                {"train_accuracy", c.train_accuracy}};
          put_scaler(w, "classifier.scaler", c.scaler);
          for (std::size_t i = 0; i < c.net.layers.size(); ++i)
            put_layer(w, "classifier.layer" + std::to_string(i), c.net.layers[i]);
          arch["config"] = put_iqn(w, "iqn", m.model);
        }
      },
      model);
  return arch;
}

inline AnyModel decode(const json& arch, BlobReader& r, const std::string& path) {
  const std::string kind = arch.at("kind");
  if (kind == "iqn") return get_iqn(r, "iqn", arch.at("config"));
  if (kind == "rp_ensemble") {
    ensemble::RandomizedPriorEnsemble<float> e;
    e.alpha = arch.at("alpha");
    e.seed = arch.at("seed");
    e.member_seeds = arch.at("member_seeds").get<std::vector<std::uint64_t>>();
    const std::size_t K = arch.at("members");
    for (std::size_t k = 0; k < K; ++k) {
      const std::string p = "member" + std::to_string(k);
      ensemble::RandomizedPriorMember<float> m;
      m.alpha = e.alpha;
      m.trainable = get_iqn(r, p, arch.at("config"));
      m.prior = get_network(r, p + ".prior");
      e.members.push_back(std::move(m));
    }
    return e;
  }
  if (kind == "seed_ensemble") {
    ensemble::SeedEnsemble<float> e;
    e.member_seeds = arch.at("member_seeds").get<std::vector<std::uint64_t>>();
    const std::size_t K = arch.at("members");
    for (std::size_t k = 0; k < K; ++k) e.members.push_back(get_iqn(r, "member" + std::to_string(k), arch.at("config")));
    return e;
  }
  if (kind == "gp") {
    gp::GpHyperparams hp;
    hp.signal_variance = r.get_scalar("gp.signal_variance");
    hp.length_scales = r.get_vector<double>("gp.length_scales");
    hp.nugget = r.get_scalar("gp.nugget");
    const double mean = r.get_scalar("gp.mean");
    const MatrixXd X = r.get<double>("gp.X");
    const VectorXd y = r.get_vector<double>("gp.y");
    auto m = gp::gp_condition(X, y, hp, mean);
    m.log_likelihood = arch.at("log_likelihood");
    return m;
  }
  if (kind == "gbc_aug") {
    auto c = std::make_shared<augment::BoundaryClassifier<float>>();
    const json& cj = arch.at("classifier");
    c->config.hidden = cj.at("hidden").get<std::vector<Eigen::Index>>();
    c->train_accuracy = cj.at("train_accuracy");
    c->scaler = get_scaler(r, "classifier.scaler");
    const std::size_t L = cj.at("layers");
    for (std::size_t i = 0; i < L; ++i) {
      c->net.layers.push_back(get_layer(r, "classifier.layer" + std::to_string(i)));
      c->net.activations.push_back(activation_from(cj.at("activations").at(i)));
    }
    augment::GbcAugModel<float> m;
    m.transform.kind = augment::TransformKind::classifier_augment;
    m.transform.classifier = c;
    m.model = get_iqn(r, "iqn", arch.at("config"));
    return m;
  }
  throw IngestionError(path + ": unknown model kind '" + kind + "'");
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IngestionError(path + ": truncated header");
  return v;
}

/// Writes the container to `path` and the descriptor plus `extra` to `path`.json.
inline void save_model(const AnyModel& model, const std::string& path, const json& extra = json::object()) {
  BlobWriter w;
  json desc;
  desc["format"] = "gbc-model";
  desc["version"] = version_string();
  desc["architecture"] = encode(model, w);
  desc["arrays"] = w.arrays();
  const std::string text = desc.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path + ": cannot open for writing");
  out.write(kMagic, 4);
  write_le(out, kVersionMajor);
  write_le(out, kVersionMinor);
  write_le(out, kVersionPatch);
  write_le(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(w.payload().data(), static_cast<std::streamsize>(w.payload().size()));
  if (!out) throw IngestionError(path + ": write failed");

  json sidecar = desc;
  sidecar.erase("arrays");
  sidecar["run"] = extra;
  std::ofstream js(path + ".json");
  if (!js) throw IngestionError(path + ".json: cannot open for writing");
  js << sidecar.dump(2) << '\n';
}

struct LoadedModel {
  AnyModel model;
  json descriptor;
};

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path + ": cannot open model file");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IngestionError(path + ": not a model container (bad magic bytes)");
  const auto major = read_le<std::uint16_t>(in, path);
  read_le<std::uint16_t>(in, path);
  read_le<std::uint16_t>(in, path);
  if (major != kVersionMajor)
    throw IngestionError(path + ": container major version " + std::to_string(major) + " is not supported (expected " +
                         std::to_string(kVersionMajor) + ")");
  const auto len = read_le<std::uint32_t>(in, path);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw IngestionError(path + ": truncated descriptor");
  std::ostringstream rest;
  rest << in.rdbuf();
  json desc;
  try {
    desc = json::parse(text);
  } catch (const json::exception& e) {
    throw IngestionError(path + ": malformed descriptor: " + e.what());
  }
  BlobReader r(desc.at("arrays"), rest.str(), path);
  LoadedModel out{decode(desc.at("architecture"), r, path), desc};
  r.finish();
  return out;
}

}  // namespace gbc::io
