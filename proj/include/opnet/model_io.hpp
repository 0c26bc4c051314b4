#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opnet/nn.hpp"
#include "opnet/scaler.hpp"

namespace opnet {

inline constexpr int kNetFormatVersion = 1;

/// Line-oriented reader that remembers the line number for ParseError.
class TextReader {
 public:
  explicit TextReader(std::istream& in) : in_(in) {}

  /// Next non-empty line split on whitespace; throws ParseError at EOF.
  std::vector<std::string> tokens();
  /// Next line whose first token equals `key`; returns the remaining tokens.
  std::vector<std::string> expect(const std::string& key);
  std::vector<double> numbers(std::size_t count);

  std::size_t line() const { return line_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

double parse_double(const std::string& token, const TextReader& reader);
long long parse_int(const std::string& token, const TextReader& reader);

void write_vector(std::ostream& out, const std::string& key, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(TextReader& in, const std::string& key);

/// Network block:
///   densenet 1 <in>x<out>:<act> <in>x<out>:<act> ...
///   W <row-major weights>
///   b <bias>
/// one W/b line pair per layer.
void write_net(std::ostream& out, const DenseNet& net);
DenseNet read_net(TextReader& in);

void write_scaler(std::ostream& out, const std::string& key, const MinMaxScaler& scaler);
MinMaxScaler read_scaler(TextReader& in, const std::string& key);

void save_net(const std::string& path, const DenseNet& net);
DenseNet load_net(const std::string& path);

}  // namespace opnet
