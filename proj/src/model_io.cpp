#include "opnet/model_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "opnet/errors.hpp"

namespace opnet {

std::vector<std::string> TextReader::tokens() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    std::istringstream ss(text);
    std::vector<std::string> out;
    for (std::string tok; ss >> tok;) out.push_back(tok);
    if (!out.empty()) return out;
  }
  throw ParseError("unexpected end of file", line_ + 1);
}

std::vector<std::string> TextReader::expect(const std::string& key) {
  auto toks = tokens();
  if (toks.front() != key) fail("expected '" + key + "', found '" + toks.front() + "'");
  toks.erase(toks.begin());
  return toks;
}

std::vector<double> TextReader::numbers(std::size_t count) {
  auto toks = tokens();
  if (toks.size() != count) fail("expected " + std::to_string(count) + " numbers, found " + std::to_string(toks.size()));
  std::vector<double> out;
  out.reserve(count);
  for (const auto& t : toks) out.push_back(parse_double(t, *this));
  return out;
}

void TextReader::fail(const std::string& what) const { throw ParseError(what, line_); }

double parse_double(const std::string& token, const TextReader& reader) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) reader.fail("not a number: '" + token + "'");
  return v;
}

long long parse_int(const std::string& token, const TextReader& reader) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) reader.fail("not an integer: '" + token + "'");
  return v;
}

void write_vector(std::ostream& out, const std::string& key, const Eigen::VectorXd& v) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << key << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v(i);
  out << '\n';
  out.precision(old_precision);
}

Eigen::VectorXd read_vector(TextReader& in, const std::string& key) {
  auto toks = in.expect(key);
  if (toks.empty()) in.fail("missing length for '" + key + "'");
  const long long n = parse_int(toks[0], in);
  if (n < 0 || static_cast<std::size_t>(n) + 1 != toks.size()) in.fail("length mismatch in '" + key + "'");
  Eigen::VectorXd v(n);
  for (long long i = 0; i < n; ++i) v(i) = parse_double(toks[static_cast<std::size_t>(i + 1)], in);
  return v;
}

void write_net(std::ostream& out, const DenseNet& net) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "densenet " << kNetFormatVersion;
  for (const auto& l : net.layers()) out << ' ' << l.weight.cols() << 'x' << l.weight.rows() << ':' << to_string(l.activation);
  out << '\n';
  for (const auto& l : net.layers()) {
    out << 'W';
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out << ' ' << l.weight(r, c);
    }
    out << "\nb";
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out << ' ' << l.bias(r);
    out << '\n';
  }
  out.precision(old_precision);
}

DenseNet read_net(TextReader& in) {
  auto header = in.expect("densenet");
  if (header.empty()) in.fail("missing densenet version");
  if (parse_int(header[0], in) != kNetFormatVersion) in.fail("unsupported densenet version " + header[0]);
  if (header.size() < 2) in.fail("densenet without layers");

  std::vector<DenseLayer> layers;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const auto& desc = header[i];
    const auto x = desc.find('x');
    const auto colon = desc.find(':');
    if (x == std::string::npos || colon == std::string::npos || colon < x) in.fail("bad layer descriptor '" + desc + "'");
    const long long n_in = parse_int(desc.substr(0, x), in);
    const long long n_out = parse_int(desc.substr(x + 1, colon - x - 1), in);
    if (n_in < 1 || n_out < 1) in.fail("layer dims must be positive in '" + desc + "'");
    DenseLayer layer;
    try {
      layer.activation = activation_from_string(desc.substr(colon + 1));
    } catch (const Error&) {
      in.fail("unknown activation in '" + desc + "'");
    }
    layer.weight.resize(n_out, n_in);
    layer.bias.resize(n_out);
    layers.push_back(std::move(layer));
  }
  for (auto& l : layers) {
    auto w = in.expect("W");
    if (static_cast<Eigen::Index>(w.size()) != l.weight.size()) in.fail("weight block has the wrong size");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = parse_double(w[k++], in);
    }
    auto b = in.expect("b");
    if (static_cast<Eigen::Index>(b.size()) != l.bias.size()) in.fail("bias block has the wrong size");
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = parse_double(b[static_cast<std::size_t>(r)], in);
  }
  try {
    return DenseNet(std::move(layers));
  } catch (const Error& e) {
    in.fail(e.what());
  }
}

void write_scaler(std::ostream& out, const std::string& key, const MinMaxScaler& scaler) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << key << ' ' << scaler.lo() << ' ' << scaler.hi() << ' ' << (scaler.isotropic() ? 1 : 0) << '\n';
  write_vector(out, "min", scaler.min());
  write_vector(out, "max", scaler.max());
  out.precision(old_precision);
}

MinMaxScaler read_scaler(TextReader& in, const std::string& key) {
  auto toks = in.expect(key);
  if (toks.size() != 3) in.fail("scaler header needs lo, hi, isotropic");
  const double lo = parse_double(toks[0], in);
  const double hi = parse_double(toks[1], in);
  const bool iso = parse_int(toks[2], in) != 0;
  Eigen::VectorXd mn = read_vector(in, "min");
  Eigen::VectorXd mx = read_vector(in, "max");
  try {
    return MinMaxScaler::from_bounds(mn, mx, lo, hi, iso);
  } catch (const Error& e) {
    in.fail(e.what());
  }
}

void save_net(const std::string& path, const DenseNet& net) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidData, "cannot write " + path);
  write_net(out, net);
}

DenseNet load_net(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidData, "cannot open " + path);
  TextReader reader(in);
  return read_net(reader);
}

}  // namespace opnet
