#pragma once

// Brute-force reference evaluators for the test suites. Plain scalar loops,
// deliberately independent of the msad kernels they check.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace oracle {

inline double bce(const std::vector<double>& s, const std::vector<int>& y, double eps = 1e-7) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double p = s[i];
    if (p < eps) p = eps;
    if (p > 1.0 - eps) p = 1.0 - eps;
    acc += y[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return acc / static_cast<double>(s.size());
}

inline double dice_loss(const std::vector<double>& g, const std::vector<double>& m,
                        double smooth = 1.0) {
  double inter = 0.0, gs = 0.0, ms = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    inter += g[i] * m[i];
    gs += g[i];
    ms += m[i];
  }
  return 1.0 - (2.0 * inter + smooth) / (gs + ms + smooth);
}

inline double focal_loss(const std::vector<double>& g, const std::vector<double>& m,
                         double gamma = 2.0, double alpha = 0.25, double eps = 1e-7) {
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double pt = m[i] == 1.0 ? g[i] : 1.0 - g[i];
    if (pt < eps) pt = eps;
    if (pt > 1.0 - eps) pt = 1.0 - eps;
    const double at = m[i] == 1.0 ? alpha : 1.0 - alpha;
    acc += -at * std::pow(1.0 - pt, gamma) * std::log(pt);
  }
  return acc / static_cast<double>(g.size());
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double d = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  double c = d / (std::sqrt(uu) * std::sqrt(vv));
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return c;
}

inline double mc_loss(const std::vector<std::vector<double>>& feats,
                      const std::vector<double>& proto_n, const std::vector<double>& proto_a,
                      const std::vector<int>& y, double tau) {
  double acc = 0.0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const double sp = cosine(feats[i], proto_n);
    const double sn = cosine(feats[i], proto_a);
    const double sign = y[i] == 0 ? 1.0 : -1.0;
    const double arg = tau - sign * (sp - sn);
    acc += arg > 0.0 ? arg : 0.0;
  }
  return acc / static_cast<double>(feats.size());
}

inline double dice_score_percent(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::size_t p = 0, m = 0, inter = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p += pred[i] != 0;
    m += truth[i] != 0;
    inter += (pred[i] != 0) && (truth[i] != 0);
  }
  if (p + m == 0) return 100.0;
  return 100.0 * 2.0 * static_cast<double>(inter) / static_cast<double>(p + m);
}

// all-pairs Mann-Whitney comparator, O(n_pos * n_neg)
inline double pauc_pairwise_percent(const std::vector<double>& scores,
                                    const std::vector<std::uint8_t>& labels) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (labels[i] ? pos : neg).push_back(scores[i]);
  }
  if (pos.empty() || neg.empty()) throw std::invalid_argument("pauc oracle: one class");
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) {
      if (p > n) {
        wins += 1.0;
      } else if (p == n) {
        wins += 0.5;
      }
    }
  }
  return 100.0 * wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace oracle
