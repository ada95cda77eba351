#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace hhf {

struct KMeansResult {
  std::size_t k = 0;
  std::vector<int> assignment;
  std::vector<double> centroids;  // k x d
  double inertia = 0;
  std::vector<double> inertia_trace;  // objective after every assignment step
};

// k-means++ seeding followed by Lloyd iterations; one seeded run.
KMeansResult kmeans(std::span<const double> x, std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 300);

// Mean silhouette width (Euclidean). Singleton clusters contribute 0.
double silhouette(std::span<const double> x, std::size_t n, std::size_t d, std::span<const int> assignment,
                  std::size_t k);

struct BeatCluster {
  int id = 0;
  std::size_t size = 0;
  std::vector<double> average;  // averaged beat
};

struct BeatClusterResult {
  std::size_t k = 0;                       // selected by silhouette
  std::map<std::size_t, double> silhouette;  // per k tried
  std::vector<int> assignment;             // -1 for beats of dropped clusters
  std::vector<BeatCluster> clusters;       // retained clusters only
};

struct ClusterOptions {
  std::size_t k_min = 2;
  std::size_t k_max = 8;
  std::size_t min_cluster = 30;
  std::uint64_t seed = 0;
};

// beats: m x width matrix. Requires m >= 2 * min_cluster.
BeatClusterResult cluster_beats(std::span<const double> beats, std::size_t m, std::size_t width,
                                const ClusterOptions& opt = {});

void write_clusters_json(const BeatClusterResult& r, const std::filesystem::path& path);

}  // namespace hhf
