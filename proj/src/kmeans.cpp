#include "hhf/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "hhf/common.hpp"
#include "hhf/kernels.hpp"

namespace hhf {

KMeansResult kmeans(std::span<const double> x, std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter) {
  if (k == 0 || n < k) throw Error(ErrorCode::TooFewBeats, "need at least k points");
  std::mt19937_64 rng(seed);
  KMeansResult r;
  r.k = k;
  r.centroids.resize(k * d);

  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(pick * d), d, r.centroids.begin());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    const double* prev = r.centroids.data() + (c - 1) * d;
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double t = x[i * d + j] - prev[j];
        s += t * t;
      }
      d2[i] = std::min(d2[i], s);
      total += d2[i];
    }
    if (!(total > 0)) throw Error(ErrorCode::DegenerateClusters, "fewer than k distinct points");
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng), acc = 0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target && d2[i] > 0) {
        pick = i;
        break;
      }
    }
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(pick * d), d, r.centroids.begin() + static_cast<std::ptrdiff_t>(c * d));
  }

  r.assignment.assign(n, -1);
  std::vector<int> next(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    r.inertia = kernels::assign_nearest(n, d, k, x, r.centroids, next);
    r.inertia_trace.push_back(r.inertia);
    if (next == r.assignment) break;
    r.assignment = next;
    std::vector<double> sum(k * d, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(r.assignment[i]);
      ++cnt[c];
      for (std::size_t j = 0; j < d; ++j) sum[c * d + j] += x[i * d + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (cnt[c] == 0) continue;  // an empty cluster keeps its centroid
      for (std::size_t j = 0; j < d; ++j) r.centroids[c * d + j] = sum[c * d + j] / static_cast<double>(cnt[c]);
    }
  }
  return r;
}

double silhouette(std::span<const double> x, std::size_t n, std::size_t d, std::span<const int> assignment,
                  std::size_t k) {
  std::vector<double> dist(n * n);
  kernels::pairwise_sq_dist(n, d, x, dist);
  std::vector<std::size_t> size(k, 0);
  for (std::size_t i = 0; i < n; ++i) ++size[static_cast<std::size_t>(assignment[i])];
  double total = 0;
  std::vector<double> to(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(to.begin(), to.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) to[static_cast<std::size_t>(assignment[j])] += std::sqrt(dist[i * n + j]);
    const auto own = static_cast<std::size_t>(assignment[i]);
    if (size[own] <= 1) continue;
    const double a = to[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != own && size[c] > 0) b = std::min(b, to[c] / static_cast<double>(size[c]));
    if (!std::isfinite(b)) continue;
    const double m = std::max(a, b);
    if (m > 0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

BeatClusterResult cluster_beats(std::span<const double> beats, std::size_t m, std::size_t width,
                                const ClusterOptions& opt) {
  if (beats.size() != m * width) throw Error(ErrorCode::ShapeMismatch, "beat matrix size");
  if (m < 2 * opt.min_cluster)
    throw Error(ErrorCode::TooFewBeats, std::to_string(m) + " beats, need " + std::to_string(2 * opt.min_cluster));
  BeatClusterResult out;
  double best = -std::numeric_limits<double>::infinity();
  KMeansResult chosen;
  for (std::size_t k = opt.k_min; k <= opt.k_max && k <= m; ++k) {
    KMeansResult km;
    try {
      km = kmeans(beats, m, width, k, mix_seed(opt.seed, k));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateClusters) break;
      throw;
    }
    const double s = silhouette(beats, m, width, km.assignment, k);
    out.silhouette[k] = s;
    if (s > best) {
      best = s;
      chosen = std::move(km);
    }
  }
  if (out.silhouette.empty() || !(best > 0))
    throw Error(ErrorCode::DegenerateClusters, "silhouette undefined: beats are not separable");

  out.k = chosen.k;
  out.assignment = chosen.assignment;
  std::vector<std::size_t> size(chosen.k, 0);
  for (int a : chosen.assignment) ++size[static_cast<std::size_t>(a)];
  for (std::size_t c = 0; c < chosen.k; ++c) {
    if (size[c] < opt.min_cluster) {
      for (auto& a : out.assignment)
        if (a == static_cast<int>(c)) a = -1;
      continue;
    }
    BeatCluster bc{static_cast<int>(c), size[c], std::vector<double>(width, 0.0)};
    for (std::size_t i = 0; i < m; ++i)
      if (chosen.assignment[i] == static_cast<int>(c))
        for (std::size_t j = 0; j < width; ++j) bc.average[j] += beats[i * width + j];
    for (auto& v : bc.average) v /= static_cast<double>(size[c]);
    out.clusters.push_back(std::move(bc));
  }
  if (out.clusters.empty()) throw Error(ErrorCode::TooFewBeats, "every cluster fell below the minimum size");
  return out;
}

void write_clusters_json(const BeatClusterResult& r, const std::filesystem::path& path) {
  nlohmann::json j;
  j["k"] = r.k;
  nlohmann::json sil = nlohmann::json::object();
  for (const auto& [k, s] : r.silhouette) sil[std::to_string(k)] = s;
  j["silhouette"] = sil;
  j["assignments"] = r.assignment;
  for (const auto& c : r.clusters)
    j["clusters"].push_back({{"id", c.id}, {"size", c.size}, {"averaged_beat", c.average}});
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

}  // namespace hhf
