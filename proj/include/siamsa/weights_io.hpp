#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "siamsa/ops.hpp"
#include "siamsa/text.hpp"

namespace siamsa {

struct WeightArray {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

/// Named real arrays with explicit shapes, persisted as versioned text:
///
///   siamsa-weights 1
///   seed 17
///   array backbone.0.weight 4 8 3 3 3
///   <values, whitespace separated>
///
class WeightStore {
 public:
  static constexpr int kVersion = 1;

  std::uint64_t seed = 0;

  void put(const std::string& name, std::vector<std::size_t> shape, std::vector<double> values) {
    if (Tensor::element_count(shape) != values.size())
      throw InvalidInput("weights: array '" + name + "' shape does not match value count");
    arrays_[name] = {std::move(shape), std::move(values)};
  }

  const WeightArray& get(const std::string& name, const std::vector<std::size_t>& shape) const {
    const auto it = arrays_.find(name);
    if (it == arrays_.end()) throw InvalidInput("weights: missing array '" + name + "'");
    if (it->second.shape != shape) {
      std::ostringstream os;
      os << "weights: array '" << name << "' has shape (";
      for (std::size_t i = 0; i < it->second.shape.size(); ++i) os << (i ? "," : "") << it->second.shape[i];
      os << ") but (";
      for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
      os << ") was expected";
      throw InvalidInput(os.str());
    }
    return it->second;
  }

  double scalar(const std::string& name) const { return get(name, {1}).values[0]; }
  void put_scalar(const std::string& name, double v) { put(name, {1}, {v}); }

  void put_kernel(const std::string& name, const ConvKernel& k) {
    put(name + ".weight", {k.out_channels, k.in_channels, k.kh, k.kw}, k.weights);
    put(name + ".bias", {k.out_channels}, k.bias);
  }

  ConvKernel kernel(const std::string& name, std::size_t out, std::size_t in, std::size_t kh,
                    std::size_t kw) const {
    ConvKernel k(out, in, kh, kw);
    k.weights = get(name + ".weight", {out, in, kh, kw}).values;
    k.bias = get(name + ".bias", {out}).values;
    k.validate();
    return k;
  }

  const std::map<std::string, WeightArray>& arrays() const { return arrays_; }

  std::string serialize() const {
    std::string out = "siamsa-weights " + std::to_string(kVersion) + "\n";
    out += "seed " + std::to_string(seed) + "\n";
    for (const auto& [name, arr] : arrays_) {
      out += "array " + name + " " + std::to_string(arr.shape.size());
      for (std::size_t d : arr.shape) out += " " + std::to_string(d);
      out += "\n";
      for (std::size_t i = 0; i < arr.values.size(); ++i) {
        if (i) out += ' ';
        out += format_double(arr.values[i]);
      }
      out += "\n";
    }
    return out;
  }

  static WeightStore parse(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "siamsa-weights")
      throw InvalidInput(source + ": not a siamsa weights file");
    if (version != kVersion)
      throw InvalidInput(source + ": unsupported weights version " + std::to_string(version));
    WeightStore store;
    std::string tok;
    while (in >> tok) {
      if (tok == "seed") {
        if (!(in >> tok)) throw InvalidInput(source + ": truncated seed");
        store.seed = parse_uint(tok, source);
      } else if (tok == "array") {
        std::string name;
        std::size_t rank = 0;
        if (!(in >> name >> rank)) throw InvalidInput(source + ": truncated array header");
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape)
          if (!(in >> d)) throw InvalidInput(source + ": truncated shape of '" + name + "'");
        std::vector<double> values(Tensor::element_count(shape));
        for (auto& v : values) {
          if (!(in >> tok)) throw InvalidInput(source + ": truncated values of '" + name + "'");
          v = parse_double(tok, source);
          if (!std::isfinite(v)) throw InvalidInput(source + ": non-finite value in '" + name + "'");
        }
        store.put(name, std::move(shape), std::move(values));
      } else {
        throw InvalidInput(source + ": unexpected token '" + tok + "'");
      }
    }
    return store;
  }

  static WeightStore load(const std::filesystem::path& path) {
    return parse(read_text_file(path), path.string());
  }
  void save(const std::filesystem::path& path) const { write_text_file(path, serialize()); }

 private:
  std::map<std::string, WeightArray> arrays_;
};

}  // namespace siamsa
