#include "redsds/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "redsds/error.hpp"

namespace redsds::nn {

Tensor ParamStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  require(!name.empty(), "parameter name must be non-empty");
  if (params_.count(name)) throw ContractError("duplicate parameter name: " + name);
  Tensor t = Tensor::parameter(std::move(shape), std::move(values));
  params_.emplace(name, t);
  return t;
}

Tensor ParamStore::add_glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                              std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = dist(rng);
  return add(name, {fan_in, fan_out}, std::move(v));
}

Tensor ParamStore::add_zeros(const std::string& name, Shape shape) {
  const std::size_t n = shape_numel(shape);
  return add(name, std::move(shape), std::vector<double>(n, 0.0));
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.numel();
  return n;
}

void ParamStore::assign(const std::string& name, std::span<const double> values) {
  Tensor t = get(name);
  if (values.size() != t.numel()) throw ContractError("assign: size mismatch for " + name);
  std::copy(values.begin(), values.end(), t.mutable_values().begin());
}

void ParamStore::assign_all(const ParamStore& other) {
  require(other.size() == size(), "assign_all: parameter count mismatch");
  for (const auto& [name, t] : other) {
    const Tensor& mine = get(name);
    if (mine.shape() != t.shape())
      throw ContractError("assign_all: shape mismatch for " + name + ": " + shape_str(mine.shape()) +
                                           " vs " + shape_str(t.shape()));
    assign(name, t.values());
  }
}

// Checkpoint layout (all integers little-endian):
//   magic "RSDSCKPT" (8 bytes), u32 format version, u64 parameter count,
//   then per parameter: u32 name length, name bytes, u32 rank,
//   rank x u64 dims, numel x f64 payload.
namespace {

constexpr char kMagic[8] = {'R', 'S', 'D', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_value(std::istream& is, const std::filesystem::path& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("truncated checkpoint: " + path.string());
  return v;
}

}  // namespace

void ParamStore::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kFormatVersion);
  put<std::uint64_t>(os, params_.size());
  for (const auto& [name, t] : params_) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.values().data()),
             static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!os) throw DataError("failed writing checkpoint: " + path.string());
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  const auto version = get_value<std::uint32_t>(is, path);
  if (version != kFormatVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  const auto count = get_value<std::uint64_t>(is, path);
  ParamStore store;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get_value<std::uint32_t>(is, path);
    std::string name(len, '\0');
    is.read(name.data(), len);
    const auto rank = get_value<std::uint32_t>(is, path);
    if (!is || rank == 0 || rank > 8) throw DataError("corrupt checkpoint entry in " + path.string());
    Shape shape(rank);
    for (auto& d : shape) d = get_value<std::uint64_t>(is, path);
    std::vector<double> values(shape_numel(shape));
    is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!is) throw DataError("truncated checkpoint: " + path.string());
    store.add(name, std::move(shape), std::move(values));
  }
  return store;
}

GradMap backward(const Tensor& loss, const ParamStore& params) {
  for (const auto& [_, t] : params) std::vector<double>().swap(t.node()->grad);
  nn::backward(loss);
  GradMap out;
  for (const auto& [name, t] : params) {
    auto& g = t.node()->grad;
    if (g.size() == t.numel()) {
      out.emplace(name, std::move(g));
      g.clear();
    } else {
      out.emplace(name, std::vector<double>(t.numel(), 0.0));
    }
  }
  return out;
}

double global_norm(const GradMap& grads) {
  double s = 0.0;
  for (const auto& [_, g] : grads)
    for (double v : g) s += v * v;
  return std::sqrt(s);
}

GradCheckResult finite_difference_check(const std::function<Tensor()>& f, ParamStore& params, double step,
                                        double floor) {
  const GradMap analytic = backward(f(), params);
  GradCheckResult result;
  NoGradGuard no_grad;
  for (const auto& [name, t] : params) {
    Tensor p = t;
    auto values = p.mutable_values();
    const auto& ga = analytic.at(name);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + step;
      const double fp = f().item();
      values[i] = orig - step;
      const double fm = f().item();
      values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double diff = std::abs(ga[i] - numeric);
      if (diff == 0.0) continue;
      const double rel = diff / std::max({std::abs(ga[i]), std::abs(numeric), floor});
      if (rel > result.max_relative_error) {
        result = {rel, name, i, ga[i], numeric};
      }
    }
  }
  return result;
}

}  // namespace redsds::nn
