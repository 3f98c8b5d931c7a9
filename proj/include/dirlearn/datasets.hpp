#pragma once

#include <string>
#include <vector>

#include "dirlearn/random.hpp"
#include "dirlearn/tensor.hpp"

namespace dirlearn {

/// One image with its identity and domain labels.
struct LabeledImage {
  Tensor pixels;  // [1,H,W], values in [0,1]
  int identity = 0;
  int domain = 0;
};

/// G per-domain image collections over a shared identity space of size M.
struct MultiDomainDataset {
  std::vector<std::vector<LabeledImage>> domains;
  int m_classes = 0;
  int g_domains = 0;

  size_t total() const {
    size_t n = 0;
    for (const auto& d : domains) n += d.size();
    return n;
  }
  /// Throws ContractError if any label is out of range or a domain is empty.
  void validate() const;
};

/// Raw decoded IDX pair, pixel values scaled to [0,1].
struct IdxData {
  int count = 0;
  int height = 0;
  int width = 0;
  std::vector<Array> images;  // each height*width, row-major
  std::vector<int> labels;
};

/// Reads a big-endian IDX image/label file pair (standard MNIST layout).
IdxData load_idx(const std::string& images_path, const std::string& labels_path);

/// Rotation about the image center, bilinear interpolation, zero fill.
/// Positive degrees rotate the content counter-clockwise.
Tensor rotate(const Tensor& image, double degrees);

/// Appendix-style rotated-digits corpus: 1000 digits (100 per class)
/// replicated at {0,15,30,45,60} degrees, a disjoint 75-degree test split,
/// and (when the test pool is large enough) a second disjoint multi-domain
/// held-out split for probing.
struct RotatedMnist {
  MultiDomainDataset train;    // G=5
  MultiDomainDataset test75;   // G=1, rotated 75 degrees
  MultiDomainDataset heldout;  // G=5, empty when the pool is too small
};
RotatedMnist build_rotated_mnist(const IdxData& train_pool,
                                 const IdxData& test_pool, std::uint64_t seed);

/// One synthetic domain: class picks a glyph, the domain index picks a
/// deterministic style (brightness offset, background texture, fixed
/// rotation). Domain indices beyond the training range give unseen styles.
std::vector<LabeledImage> synthetic_domain(int domain_index, int m_classes,
                                           int n_per_class, int image_size,
                                           std::uint64_t seed);

MultiDomainDataset make_synthetic_blobs(int g, int m, int n_per_class,
                                        int image_size, std::uint64_t seed);

/// A pooled shuffled mini-batch.
struct Batch {
  Tensor pixels;  // [B,1,H,W]
  std::vector<int> y;
  std::vector<int> d;
};

/// One epoch of shuffled batches over the pooled multi-domain set; the final
/// short batch is dropped.
std::vector<Batch> epoch_batches(const MultiDomainDataset& dataset,
                                 int batch_size, Rng& rng);

/// CSV manifest + raw float64 binary cache.
void save_dataset_cache(const MultiDomainDataset& dataset,
                        const std::string& dir);
MultiDomainDataset load_dataset_cache(const std::string& dir);

}  // namespace dirlearn
