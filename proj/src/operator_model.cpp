#include "opnet/operator_model.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "opnet/errors.hpp"
#include "opnet/model_io.hpp"

namespace opnet {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Vanilla: return "vanilla";
    case Variant::Pod: return "pod";
    case Variant::Svd: return "svd";
    case Variant::Flex: return "flex";
  }
  return "?";
}

Variant variant_from_string(std::string_view name) {
  if (name == "vanilla") return Variant::Vanilla;
  if (name == "pod") return Variant::Pod;
  if (name == "svd") return Variant::Svd;
  if (name == "flex") return Variant::Flex;
  throw Error(ErrorKind::Usage, "unknown model variant '" + std::string(name) + "'");
}

Eigen::MatrixXd OperatorModel::predict(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const {
  return std::visit([&](const auto& m) { return m.predict(u, y); }, net);
}

const std::vector<std::string>& OperatorModel::variables() const {
  return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.variables(); }, net);
}

std::size_t OperatorModel::param_count() const {
  return std::visit([](const auto& m) { return m.param_count(); }, net);
}

int OperatorModel::p() const {
  return std::visit(
      [](const auto& m) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SvdDeepONet>) {
          return m.r();
        } else {
          return m.p();
        }
      },
      net);
}

namespace {

void write_scaled(std::ostream& out, const ScaledNet& s) {
  write_scaler(out, "in", s.in);
  write_net(out, s.net);
  write_scaler(out, "out", s.out);
}

ScaledNet read_scaled(TextReader& in) {
  ScaledNet s;
  s.in = read_scaler(in, "in");
  s.net = read_net(in);
  s.out = read_scaler(in, "out");
  return s;
}

void write_vanilla(std::ostream& out, const VanillaDeepONet& m) {
  write_scaler(out, "scale_u", m.scaling().u);
  write_scaler(out, "scale_y", m.scaling().y);
  for (std::size_t v = 0; v < m.heads().size(); ++v) {
    const auto& h = m.heads()[v];
    out << "head " << m.variables()[v] << '\n';
    write_net(out, h.branch);
    write_net(out, h.trunk);
    write_vector(out, "bias", Eigen::VectorXd::Constant(1, h.bias));
  }
}

VanillaDeepONet read_vanilla(TextReader& in, const std::vector<std::string>& variables) {
  InputScaling scaling{read_scaler(in, "scale_u"), read_scaler(in, "scale_y")};
  std::vector<OperatorHead> heads;
  for (const auto& name : variables) {
    auto toks = in.expect("head");
    if (toks.size() != 1 || toks[0] != name) in.fail("expected head for variable '" + name + "'");
    OperatorHead h;
    h.branch = read_net(in);
    h.trunk = read_net(in);
    const Eigen::VectorXd b = read_vector(in, "bias");
    if (b.size() != 1) in.fail("bias must be a single value");
    h.bias = b(0);
    heads.push_back(std::move(h));
  }
  return VanillaDeepONet(variables, std::move(scaling), std::move(heads));
}

void write_svd(std::ostream& out, const SvdDeepONet& m) {
  out << "groups " << m.groups().size() << '\n';
  for (const auto& g : m.groups()) {
    out << "group " << g.variables.size();
    for (auto v : g.variables) out << ' ' << v;
    out << '\n';
    write_scaled(out, g.trunk);
  }
  for (std::size_t v = 0; v < m.variables().size(); ++v) {
    out << "branch " << m.variables()[v] << '\n';
    write_scaled(out, m.branches()[v]);
    const bool has_prep = !m.training_preprocessing().empty();
    out << "preprocessing " << (has_prep ? 1 : 0) << '\n';
    if (has_prep) {
      write_vector(out, "center", m.training_preprocessing()[v].center);
      write_vector(out, "scale", m.training_preprocessing()[v].scale);
    }
  }
}

SvdDeepONet read_svd(TextReader& in, const std::vector<std::string>& variables, int r) {
  auto toks = in.expect("groups");
  if (toks.size() != 1) in.fail("groups needs a count");
  const long long ng = parse_int(toks[0], in);
  if (ng < 1) in.fail("at least one trunk group is required");
  std::vector<SvdTrunkGroup> groups;
  for (long long g = 0; g < ng; ++g) {
    auto gt = in.expect("group");
    if (gt.empty()) in.fail("group needs a member count");
    const long long n = parse_int(gt[0], in);
    if (n < 1 || static_cast<std::size_t>(n) + 1 != gt.size()) in.fail("group member count mismatch");
    SvdTrunkGroup group;
    for (long long k = 0; k < n; ++k) {
      const long long v = parse_int(gt[static_cast<std::size_t>(k + 1)], in);
      if (v < 0 || static_cast<std::size_t>(v) >= variables.size()) in.fail("group member out of range");
      group.variables.push_back(static_cast<std::size_t>(v));
    }
    group.trunk = read_scaled(in);
    groups.push_back(std::move(group));
  }
  std::vector<ScaledNet> branches;
  std::vector<Preprocessing> preps;
  bool any_prep = false;
  for (const auto& name : variables) {
    auto bt = in.expect("branch");
    if (bt.size() != 1 || bt[0] != name) in.fail("expected branch for variable '" + name + "'");
    branches.push_back(read_scaled(in));
    auto pt = in.expect("preprocessing");
    if (pt.size() != 1) in.fail("preprocessing flag missing");
    Preprocessing prep;
    if (parse_int(pt[0], in) != 0) {
      any_prep = true;
      prep.center = read_vector(in, "center");
      prep.scale = read_vector(in, "scale");
      prep.center_method = CenterMethod::Mean;
      prep.scale_method = ScaleMethod::Auto;
    }
    preps.push_back(std::move(prep));
  }
  if (!any_prep) preps.clear();
  return SvdDeepONet(variables, r, std::move(groups), std::move(branches), std::move(preps));
}

void write_flex(std::ostream& out, const FlexDeepONet& m) {
  write_scaler(out, "scale_u", m.scaling().u);
  write_scaler(out, "scale_y", m.scaling().y);
  const auto& l = m.prenet().layout();
  out << "prenet " << l.stretches << ' ' << l.angles << ' ' << l.shifts << ' ' << m.prenet().nets().size() << '\n';
  for (const auto& n : m.prenet().nets()) write_net(out, n);
  for (std::size_t v = 0; v < m.heads().size(); ++v) {
    out << "head " << m.variables()[v] << '\n';
    write_net(out, m.heads()[v].branch);
    write_net(out, m.heads()[v].trunk);
    write_scaler(out, "target", m.target_scaling()[v]);
  }
}

FlexDeepONet read_flex(TextReader& in, const std::vector<std::string>& variables) {
  InputScaling scaling{read_scaler(in, "scale_u"), read_scaler(in, "scale_y")};
  auto toks = in.expect("prenet");
  if (toks.size() != 4) in.fail("prenet needs stretches, angles, shifts and net count");
  PreNetLayout layout{parse_int(toks[0], in), parse_int(toks[1], in), parse_int(toks[2], in)};
  const long long nn = parse_int(toks[3], in);
  if (layout.stretches < 0 || layout.angles < 0 || layout.shifts < 0 || nn < 0) in.fail("negative prenet layout");
  std::vector<DenseNet> nets;
  for (long long k = 0; k < nn; ++k) nets.push_back(read_net(in));
  std::vector<FlexHead> heads;
  std::vector<MinMaxScaler> targets;
  for (const auto& name : variables) {
    auto ht = in.expect("head");
    if (ht.size() != 1 || ht[0] != name) in.fail("expected head for variable '" + name + "'");
    FlexHead h;
    h.branch = read_net(in);
    h.trunk = read_net(in);
    heads.push_back(std::move(h));
    targets.push_back(read_scaler(in, "target"));
  }
  return FlexDeepONet(variables, std::move(scaling), PreNet(layout, std::move(nets)), std::move(heads),
                      std::move(targets));
}

}  // namespace

void write_model(std::ostream& out, const OperatorModel& model) {
  out << "opnet-model " << kModelFormatVersion << '\n';
  out << "variant " << to_string(model.variant) << '\n';
  out << "case " << (model.case_id.empty() ? "-" : model.case_id) << '\n';
  const auto& vars = model.variables();
  out << "variables " << vars.size();
  for (const auto& v : vars) out << ' ' << v;
  out << '\n';
  out << "p " << model.p() << '\n';
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, VanillaDeepONet>) {
          write_vanilla(out, m);
        } else if constexpr (std::is_same_v<M, SvdDeepONet>) {
          write_svd(out, m);
        } else {
          write_flex(out, m);
        }
      },
      model.net);
}

OperatorModel read_model(std::istream& stream) {
  TextReader in(stream);
  auto header = in.expect("opnet-model");
  if (header.size() != 1 || parse_int(header[0], in) != kModelFormatVersion) in.fail("unsupported model format");
  auto vt = in.expect("variant");
  if (vt.size() != 1) in.fail("variant needs one value");
  OperatorModel model;
  try {
    model.variant = variant_from_string(vt[0]);
  } catch (const Error&) {
    in.fail("unknown variant '" + vt[0] + "'");
  }
  auto ct = in.expect("case");
  if (ct.size() != 1) in.fail("case needs one value");
  model.case_id = ct[0] == "-" ? "" : ct[0];
  auto names = in.expect("variables");
  if (names.empty()) in.fail("variables needs a count");
  const long long nv = parse_int(names[0], in);
  if (nv < 1 || static_cast<std::size_t>(nv) + 1 != names.size()) in.fail("variable count mismatch");
  std::vector<std::string> variables(names.begin() + 1, names.end());
  auto pt = in.expect("p");
  if (pt.size() != 1) in.fail("p needs one value");
  const long long p = parse_int(pt[0], in);
  try {
    switch (model.variant) {
      case Variant::Vanilla:
      case Variant::Pod: model.net = read_vanilla(in, variables); break;
      case Variant::Svd: model.net = read_svd(in, variables, static_cast<int>(p)); break;
      case Variant::Flex: model.net = read_flex(in, variables); break;
    }
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    in.fail(e.what());
  }
  if (model.p() != p) in.fail("p does not match the stored networks");
  return model;
}

void save_model(const std::string& path, const OperatorModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidData, "cannot write " + path);
  write_model(out, model);
  if (!out) throw Error(ErrorKind::InvalidData, "write failed for " + path);
}

OperatorModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidData, "cannot open " + path);
  return read_model(in);
}

}  // namespace opnet
