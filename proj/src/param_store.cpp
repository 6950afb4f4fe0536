#include "coid/param_store.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "coid/error.hpp"

namespace coid {

namespace {

nlohmann::json flatten(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Matrix unflatten(const nlohmann::json& values, Index rows, Index cols, const std::string& what) {
  if (!values.is_array() || static_cast<Index>(values.size()) != rows * cols)
    throw DataError("checkpoint: tensor '" + what + "' has wrong value count");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = values[k++].get<double>();
  return m;
}

}  // namespace

const ad::Tensor& ParamStore::add(const std::string& name, Matrix init) {
  if (contains(name)) throw ConfigError("ParamStore: duplicate parameter '" + name + "'");
  Matrix zeros = Matrix::Zero(init.rows(), init.cols());
  entries_.push_back({name, ad::Tensor::parameter(std::move(init)), zeros, zeros});
  return entries_.back().param;
}

const ad::Tensor& ParamStore::add_glorot(const std::string& name, Index rows, Index cols,
                                         RngStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
  return add(name, std::move(w));
}

const ad::Tensor& ParamStore::add_zeros(const std::string& name, Index rows, Index cols) {
  return add(name, Matrix::Zero(rows, cols));
}

const ad::Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.param;
  throw ConfigError("ParamStore: no parameter '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::size_t ParamStore::value_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.param.value().size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.param.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& e : entries_)
    out.entries_.push_back({e.name, ad::Tensor::parameter(e.param.value()), e.m, e.v});
  out.step_ = step_;
  return out;
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : entries_) {
    tensors.push_back({{"name", e.name},
                       {"shape", {e.param.rows(), e.param.cols()}},
                       {"values", flatten(e.param.value())},
                       {"m", flatten(e.m)},
                       {"v", flatten(e.v)}});
  }
  return {{"step", step_}, {"tensors", tensors}};
}

ParamStore ParamStore::from_json(const nlohmann::json& j) {
  ParamStore out;
  try {
    out.step_ = j.at("step").get<std::int64_t>();
    for (const auto& t : j.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const Index rows = t.at("shape").at(0).get<Index>();
      const Index cols = t.at("shape").at(1).get<Index>();
      out.add(name, unflatten(t.at("values"), rows, cols, name));
      out.entries_.back().m = unflatten(t.at("m"), rows, cols, name);
      out.entries_.back().v = unflatten(t.at("v"), rows, cols, name);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed parameter block: ") + e.what());
  }
  return out;
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  bool any = false;
  for (const auto& e : store.entries()) any = any || e.param.has_grad();
  if (!any) throw NumericError("adam_step: no gradients populated");

  const std::int64_t t = store.step() + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& e : store.entries()) {
    const Matrix g = e.param.grad();
    if (!g.allFinite()) throw NumericError("adam_step: non-finite gradient in '" + e.name + "'");
    e.m = cfg.beta1 * e.m + (1.0 - cfg.beta1) * g;
    e.v = cfg.beta2 * e.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    Matrix& w = e.param.mutable_value();
    for (Index k = 0; k < w.size(); ++k) {
      const double mhat = e.m.data()[k] / c1;
      const double vhat = e.v.data()[k] / c2;
      w.data()[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    e.param.zero_grad();
  }
  store.set_step(t);
}

std::uint64_t config_hash(const nlohmann::json& config) {
  // FNV-1a over the canonical dump (object keys are sorted by nlohmann::json).
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream hash;
  hash << std::hex << config_hash(ckpt.config);
  nlohmann::json j{{"format", "coid-checkpoint"},
                   {"version", kCheckpointVersion},
                   {"config_hash", hash.str()},
                   {"config", ckpt.config},
                   {"extra", ckpt.extra},
                   {"params", ckpt.params.to_json()}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "coid-checkpoint")
    throw DataError("checkpoint " + path.string() + ": unknown format");
  if (j.value("version", 0) != kCheckpointVersion)
    throw DataError("checkpoint " + path.string() + ": unsupported version " +
                    std::to_string(j.value("version", 0)));
  Checkpoint ckpt;
  ckpt.config = j.at("config");
  ckpt.extra = j.value("extra", nlohmann::json::object());
  std::ostringstream hash;
  hash << std::hex << config_hash(ckpt.config);
  if (j.value("config_hash", "") != hash.str())
    throw DataError("checkpoint " + path.string() + ": config hash mismatch");
  ckpt.params = ParamStore::from_json(j.at("params"));
  return ckpt;
}

}  // namespace coid
