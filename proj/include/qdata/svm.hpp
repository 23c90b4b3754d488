#pragma once

#include "qdata/flow_table.hpp"
#include "qdata/rng.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdata {

enum class Verdict { Good, Degraded };

struct LabeledSample
{
  double f = 0;
  double delta_f = 0;
  int sign = +1; // +1 the switch copes, -1 it degrades
};

// Linear separator over normalized (f, delta_f). Score >= 0 means Good.
struct SvmModel
{
  double w1 = 0;
  double w2 = 0;
  double b = 0;
  double mean_f = 0;
  double mean_df = 0;
  double spread_f = 1;
  double spread_df = 1;

  double score(double f, double delta_f) const noexcept
  {
    return w1 * (f - mean_f) / spread_f + w2 * (delta_f - mean_df) / spread_df + b;
  }

  Verdict predict(double f, double delta_f) const noexcept
  {
    return score(f, delta_f) >= 0.0 ? Verdict::Good : Verdict::Degraded;
  }

  Verdict predict(const Observation& obs) const noexcept { return predict(obs.f, obs.delta_f); }

  // Record layout: w1 w2 b mean_f mean_df spread_f spread_df
  void save(std::ostream& os) const
  {
    os << std::setprecision(17) << w1 << ' ' << w2 << ' ' << b << ' ' << mean_f << ' ' << mean_df << ' '
       << spread_f << ' ' << spread_df << '\n';
  }

  static SvmModel load(std::istream& is)
  {
    SvmModel m;
    if (!(is >> m.w1 >> m.w2 >> m.b >> m.mean_f >> m.mean_df >> m.spread_f >> m.spread_df))
      throw std::runtime_error("malformed svm model record");
    if (!(m.spread_f > 0) || !(m.spread_df > 0)) throw std::runtime_error("svm model spreads must be positive");
    return m;
  }

  static SvmModel load_file(const std::string& path)
  {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open svm model " + path);
    return load(in);
  }

  void save_file(const std::string& path) const
  {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write svm model " + path);
    save(out);
  }
};

struct SvmOptions
{
  double c = 1.0;
  int epochs = 200;
  std::uint64_t seed = 0;
};

// Soft-margin primal  1/2 |w|^2 + C * sum hinge  solved by stochastic
// subgradient descent (Pegasos step sizes) on standardized features. The
// returned weights are the average of the iterates after the first epoch.
inline SvmModel train_svm(std::span<const LabeledSample> samples, const SvmOptions& opt = {})
{
  if (!(opt.c > 0)) throw std::invalid_argument("C must be positive");
  if (opt.epochs <= 0) throw std::invalid_argument("epochs must be positive");
  bool has_pos = false, has_neg = false;
  for (const auto& s : samples) {
    if (s.sign != 1 && s.sign != -1) throw std::invalid_argument("sample label must be +1 or -1");
    (s.sign > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("degenerate training set");

  const auto n = samples.size();
  SvmModel m;
  for (const auto& s : samples) {
    m.mean_f += s.f;
    m.mean_df += s.delta_f;
  }
  m.mean_f /= static_cast<double>(n);
  m.mean_df /= static_cast<double>(n);
  double var_f = 0, var_df = 0;
  for (const auto& s : samples) {
    var_f += (s.f - m.mean_f) * (s.f - m.mean_f);
    var_df += (s.delta_f - m.mean_df) * (s.delta_f - m.mean_df);
  }
  m.spread_f = std::sqrt(var_f / static_cast<double>(n));
  m.spread_df = std::sqrt(var_df / static_cast<double>(n));
  if (!(m.spread_f > 0)) m.spread_f = 1;
  if (!(m.spread_df > 0)) m.spread_df = 1;

  struct Point
  {
    double x1, x2;
    int y;
  };
  std::vector<Point> pts;
  pts.reserve(n);
  for (const auto& s : samples)
    pts.push_back({(s.f - m.mean_f) / m.spread_f, (s.delta_f - m.mean_df) / m.spread_df, s.sign});

  // Dividing the objective by C*n gives lambda/2 |w|^2 + mean hinge.
  const double lambda = 1.0 / (opt.c * static_cast<double>(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(opt.seed);

  double w1 = 0, w2 = 0, b = 0;
  double s1 = 0, s2 = 0, sb = 0;
  std::uint64_t averaged = 0;
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[uniform_below(rng, i)]);
    for (auto idx : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const Point& p = pts[idx];
      const bool violated = p.y * (w1 * p.x1 + w2 * p.x2 + b) < 1.0;
      // The bias rides along as a constant feature.
      w1 *= 1.0 - eta * lambda;
      w2 *= 1.0 - eta * lambda;
      b *= 1.0 - eta * lambda;
      if (violated) {
        w1 += eta * p.y * p.x1;
        w2 += eta * p.y * p.x2;
        b += eta * p.y;
      }
      if (epoch > 0 || opt.epochs == 1) {
        s1 += w1;
        s2 += w2;
        sb += b;
        ++averaged;
      }
    }
  }
  m.w1 = s1 / static_cast<double>(averaged);
  m.w2 = s2 / static_cast<double>(averaged);
  m.b = sb / static_cast<double>(averaged);
  if (m.w1 == 0 && m.w2 == 0) throw std::runtime_error("svm training produced a zero weight vector");
  return m;
}

// Look-ahead labeling: observation i is -1 when any rejection happened in
// periods i..i+horizon (the period ending at observation i included).
inline std::vector<LabeledSample> label_observations(std::span<const Observation> obs,
                                                     std::span<const std::uint64_t> rejected, int horizon)
{
  if (obs.size() != rejected.size()) throw std::invalid_argument("observation/rejection length mismatch");
  if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
  std::vector<LabeledSample> out;
  out.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    bool bad = false;
    for (std::size_t j = i; j < obs.size() && j <= i + static_cast<std::size_t>(horizon); ++j)
      bad = bad || rejected[j] > 0;
    out.push_back({static_cast<double>(obs[i].f), static_cast<double>(obs[i].delta_f), bad ? -1 : +1});
  }
  return out;
}

} // namespace qdata
