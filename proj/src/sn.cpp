#include "cann/sn.hpp"

#include "cann/error.hpp"
#include "cann/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace cann::sn {

using mlp::Activation;

namespace {
constexpr double kScaleFloor = 1e-3;
}

SnTrainSpec SnTrainSpec::test1() { return {}; }

SnTrainSpec SnTrainSpec::test2() {
  SnTrainSpec s;
  s.iterations = 30;
  s.epochs = 600;
  return s;
}

void SnTrainSpec::validate() const {
  if (iterations < 1 || epochs < 1)
    throw ConfigError("SN training needs iterations >= 1 and epochs >= 1");
  if (!(learning_rate > 0.0))
    throw ConfigError("SN learning rate must be positive");
  if (!(0.0 < target_lo && target_lo < target_hi && target_hi < 1.0))
    throw ConfigError("SN target range must satisfy 0 < lo < hi < 1");
}

mlp::MlpNet SpatialNet::make_net() {
  return mlp::MlpNet({2, 25, 25, 25, 25, 25, 3}, {Activation::logistic, Activation::tanh, Activation::tanh,
                                                  Activation::tanh, Activation::tanh, Activation::logistic});
}

Vec3 SpatialNet::decode(const Vec3& y) const {
  Vec3 s;
  for (int k = 0; k < 3; ++k)
    s[k] = std::max(gain[k] * y[k] + offset[k], kScaleFloor);
  return s;
}

Vec3 SpatialNet::predict(Point2 p) const {
  const auto c = normalizer(p);
  const double in[2] = {c.x, c.y};
  Vec3 y;
  net.forward(in, y);
  return decode(y);
}

std::vector<Vec3> SpatialNet::predict(const std::vector<Point2>& points) const {
  std::vector<double> in;
  in.reserve(2 * points.size());
  for (const auto& p : points) {
    const auto c = normalizer(p);
    in.push_back(c.x);
    in.push_back(c.y);
  }
  const auto y = net.forward_batch(in, points.size());
  std::vector<Vec3> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    out[i] = decode({y[3 * i], y[3 * i + 1], y[3 * i + 2]});
  return out;
}

namespace {

Vec3 component_mse(const mlp::MlpNet& net, const mlp::Dataset& d) {
  const auto y = net.forward_batch(d.inputs, d.size());
  Vec3 m{};
  for (std::size_t i = 0; i < y.size(); ++i)
    m[i % 3] += (y[i] - d.targets[i]) * (y[i] - d.targets[i]);
  for (double& v : m)
    v /= static_cast<double>(d.size());
  return m;
}

} // namespace

FitResult fit(const scaling::ScalingField& field, const femesh::QuadMesh& mesh, const SnTrainSpec& spec) {
  spec.validate();
  if (field.size() == 0)
    throw ConfigError("cannot fit a spatial network to an empty scaling field");
  FitResult r;
  SpatialNet& sn = r.sn;
  sn.normalizer = femesh::CoordNormalizer(mesh.bbox(), 1e-6);

  Vec3 lo, hi;
  lo = hi = field.scales.front();
  for (const auto& s : field.scales)
    for (int k = 0; k < 3; ++k) {
      if (!std::isfinite(s[k]))
        throw NumericError("scaling field contains a non-finite value");
      lo[k] = std::min(lo[k], s[k]);
      hi[k] = std::max(hi[k], s[k]);
    }
  const double span = spec.target_hi - spec.target_lo;
  Vec3 a{}, b{};
  for (int k = 0; k < 3; ++k) {
    if (hi[k] > lo[k]) {
      sn.gain[k] = (hi[k] - lo[k]) / span;
      sn.offset[k] = lo[k] - spec.target_lo * sn.gain[k];
      a[k] = 1.0 / sn.gain[k];
      b[k] = spec.target_lo - lo[k] * a[k];
    } else {
      sn.gain[k] = 0.0;
      sn.offset[k] = lo[k];
      b[k] = 0.5 * (spec.target_lo + spec.target_hi);
    }
  }

  mlp::Dataset data(2, 3);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto c = sn.normalizer(field.coords[i]);
    const double in[2] = {c.x, c.y};
    Vec3 t;
    for (int k = 0; k < 3; ++k)
      t[k] = a[k] * field.scales[i][k] + b[k];
    data.add(in, t);
  }

  sn.net = SpatialNet::make_net();
  sn.net.init_he(spec.seed);
  r.first_loss = component_mse(sn.net, data);

  mlp::TrainConfig tc;
  tc.optimizer = mlp::Optimizer::adam;
  tc.learning_rate = spec.learning_rate;
  tc.epochs = spec.epochs;
  tc.iterations = spec.iterations;
  r.loss_trace = mlp::train(sn.net, data, tc).loss_trace;
  for (double l : r.loss_trace)
    if (!std::isfinite(l))
      throw NumericError("spatial network loss became non-finite");
  r.final_loss = component_mse(sn.net, data);
  return r;
}

void write(std::ostream& out, const SpatialNet& sn) {
  out << "cann-sn 1\n";
  const auto& n = sn.normalizer;
  out << "normalizer " << fmt_double(n.center().x) << ' ' << fmt_double(n.center().y) << ' '
      << fmt_double(n.half_width()) << ' ' << fmt_double(n.half_height()) << ' ' << fmt_double(n.tolerance())
      << '\n';
  out << "gain";
  for (double g : sn.gain)
    out << ' ' << fmt_double(g);
  out << "\noffset";
  for (double o : sn.offset)
    out << ' ' << fmt_double(o);
  out << '\n';
  mlp::write(out, sn.net);
}

void write(const std::filesystem::path& path, const SpatialNet& sn) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write " + path.string());
  write(out, sn);
}

namespace {

std::vector<double> numbers_after(std::istream& in, const std::string& key, std::size_t count) {
  std::string word;
  if (!(in >> word) || word != key)
    throw ConfigError("spatial network file: expected '" + key + "'");
  std::vector<double> v(count);
  for (double& x : v) {
    if (!(in >> word) || !parse_double(word, x) || !std::isfinite(x))
      throw ConfigError("spatial network file: bad number after '" + key + "'");
  }
  return v;
}

} // namespace

SpatialNet read(std::istream& in) {
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "cann-sn" || version != "1")
    throw ConfigError("not a cann-sn 1 file");
  SpatialNet sn;
  const auto n = numbers_after(in, "normalizer", 5);
  sn.normalizer = femesh::CoordNormalizer::from_parts({n[0], n[1]}, n[2], n[3], n[4]);
  const auto g = numbers_after(in, "gain", 3);
  const auto o = numbers_after(in, "offset", 3);
  for (int k = 0; k < 3; ++k) {
    sn.gain[k] = g[k];
    sn.offset[k] = o[k];
  }
  sn.net = mlp::read(in);
  const auto ref = SpatialNet::make_net();
  if (sn.net.layer_sizes() != ref.layer_sizes() || sn.net.activations() != ref.activations())
    throw ConfigError("spatial network file has the wrong architecture");
  return sn;
}

SpatialNet read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open " + path.string());
  return read(in);
}

} // namespace cann::sn
