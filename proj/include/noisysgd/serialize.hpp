#pragma once

// Network file format, version 1. Plain text, whitespace separated:
//
//   noisysgd-network 1
//   activation <relu|leaky_relu|identity> <alpha>
//   mode <with_bias|augmented_input|fixed_top>
//   layers <L>
//   weight <rows> <cols>
//   <rows*cols values, row-major, one matrix row per line>
//   [bias <rows>
//    <rows values>]                 (present iff mode is with_bias)
//   ... repeated for each of the L layers ...
//   end
//
// Every floating value is written in C99 hexadecimal notation (%a), so a
// write/read cycle reproduces each double bit for bit. For fixed_top the frozen
// top vector is the single row of the last weight matrix.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "noisysgd/error.hpp"
#include "noisysgd/model.hpp"

namespace noisysgd {

inline constexpr int kNetworkFormatVersion = 1;

namespace detail {

inline std::string hex_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  std::string s(buf, res.ptr);
  return s;
}

inline double parse_hex_double(const std::string& tok) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  bool negative = false;
  if (first != last && *first == '-') {
    negative = true;
    ++first;
  }
  const auto res = std::from_chars(first, last, v, std::chars_format::hex);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw FormatError("network file: bad number '" + tok + "'");
  }
  return negative ? -v : v;
}

inline void expect_token(std::istream& in, const std::string& want) {
  std::string tok;
  if (!(in >> tok) || tok != want) {
    throw FormatError("network file: expected '" + want + "', got '" + tok + "'");
  }
}

inline std::size_t read_size(std::istream& in, const char* what) {
  long long n = -1;
  if (!(in >> n) || n <= 0) throw FormatError(std::string("network file: bad ") + what);
  return static_cast<std::size_t>(n);
}

inline double read_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw FormatError("network file: truncated");
  return parse_hex_double(tok);
}

}  // namespace detail

inline void write_network(std::ostream& out, const Network& net) {
  out << "noisysgd-network " << kNetworkFormatVersion << '\n';
  out << "activation " << net.activation().name() << ' '
      << detail::hex_double(net.activation().alpha) << '\n';
  out << "mode " << mode_name(net.mode()) << '\n';
  out << "layers " << net.layer_count() << '\n';
  for (const auto& layer : net.layers()) {
    const Matrix& w = layer.weight;
    out << "weight " << w.rows() << ' ' << w.cols() << '\n';
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) {
        out << (c ? " " : "") << detail::hex_double(w(r, c));
      }
      out << '\n';
    }
    if (layer.bias) {
      out << "bias " << layer.bias->size() << '\n';
      for (std::size_t i = 0; i < layer.bias->size(); ++i) {
        out << (i ? " " : "") << detail::hex_double((*layer.bias)[i]);
      }
      out << '\n';
    }
  }
  out << "end\n";
}

inline Network read_network(std::istream& in) {
  detail::expect_token(in, "noisysgd-network");
  int version = 0;
  if (!(in >> version) || version != kNetworkFormatVersion) {
    throw FormatError("network file: unsupported version " + std::to_string(version));
  }
  detail::expect_token(in, "activation");
  std::string act_name;
  in >> act_name;
  const double alpha = detail::read_double(in);
  Activation act;
  if (act_name == "relu") {
    act = Activation::relu();
  } else if (act_name == "leaky_relu") {
    act = Activation::leaky_relu(alpha);
  } else if (act_name == "identity") {
    act = Activation::identity();
  } else {
    throw FormatError("network file: unknown activation '" + act_name + "'");
  }
  detail::expect_token(in, "mode");
  std::string mode;
  in >> mode;
  if (mode != "with_bias" && mode != "augmented_input" && mode != "fixed_top") {
    throw FormatError("network file: unknown mode '" + mode + "'");
  }
  detail::expect_token(in, "layers");
  const std::size_t n_layers = detail::read_size(in, "layer count");
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < n_layers; ++l) {
    detail::expect_token(in, "weight");
    const std::size_t rows = detail::read_size(in, "rows");
    const std::size_t cols = detail::read_size(in, "cols");
    std::vector<double> values(rows * cols);
    for (double& v : values) v = detail::read_double(in);
    Layer layer{Matrix(rows, cols, std::move(values)), std::nullopt};
    if (mode == "with_bias") {
      detail::expect_token(in, "bias");
      const std::size_t n = detail::read_size(in, "bias length");
      std::vector<double> b(n);
      for (double& v : b) v = detail::read_double(in);
      layer.bias = Vector(std::move(b));
    }
    layers.push_back(std::move(layer));
  }
  detail::expect_token(in, "end");
  ArchMode arch = WithBias{};
  if (mode == "augmented_input") arch = AugmentedInput{};
  if (mode == "fixed_top") {
    const auto row = layers.back().weight.row(0);
    arch = FixedTopLayer{Vector(std::vector<double>(row.begin(), row.end()))};
  }
  return Network(std::move(layers), act, std::move(arch));
}

inline std::string network_to_string(const Network& net) {
  std::ostringstream os;
  write_network(os, net);
  return os.str();
}

inline Network network_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_network(is);
}

inline void save_network(const std::string& path, const Network& net) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_network(out, net);
}

inline Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return read_network(in);
}

}  // namespace noisysgd
