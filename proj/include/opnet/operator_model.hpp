#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "opnet/deeponet.hpp"
#include "opnet/flex_deeponet.hpp"
#include "opnet/svd_deeponet.hpp"

namespace opnet {

inline constexpr int kModelFormatVersion = 1;

enum class Variant { Vanilla, Pod, Svd, Flex };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);

/// Any trained operator surrogate plus the case it was trained on.
struct OperatorModel {
  Variant variant = Variant::Vanilla;
  std::string case_id;
  std::variant<VanillaDeepONet, SvdDeepONet, FlexDeepONet> net;

  /// n_variables x N.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const;
  const std::vector<std::string>& variables() const;
  std::size_t param_count() const;
  int p() const;
};

/// Text envelope around the network blocks:
///   opnet-model 1
///   variant <vanilla|pod|svd|flex>
///   case <id>
///   variables <n> <names...>
///   p <p>
/// followed by the variant-specific scalers, Pre-Net layout, networks and,
/// for SVD assemblies, the training preprocessing vectors.
void write_model(std::ostream& out, const OperatorModel& model);
OperatorModel read_model(std::istream& in);

void save_model(const std::string& path, const OperatorModel& model);
OperatorModel load_model(const std::string& path);

}  // namespace opnet
