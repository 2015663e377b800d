#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aesthnet/common.hpp"
#include "aesthnet/rng.hpp"

namespace aesthnet {

// One spatial activation map, row-major h × w × c.
struct ActivationMap {
    std::size_t h = 0, w = 0, c = 0;
    std::vector<double> data;
};

struct ActivationSet {
    std::string image_id;
    std::vector<ActivationMap> maps;
};

struct EmbeddingVector {
    std::string id;
    std::vector<double> values;
};

struct AttributeLabels {
    std::string id;
    std::optional<std::size_t> style;             // class index in [0, K_v)
    std::optional<std::vector<std::uint8_t>> composition;  // multi-hot, length K_c
};

// l1-normalized histogram over ordered score buckets.
struct ScoreDistribution {
    std::string id;
    std::vector<double> probs;
    std::vector<double> bucket_values;  // s_1 < s_2 < ... < s_B

    std::size_t buckets() const { return probs.size(); }
};

struct SplitSpec {
    std::vector<std::string> train, val, test;
    std::uint64_t seed = 0;
    std::size_t repeat_index = 0;
};

// Channel counts of the default 5-map backbone configuration (sums to 1264).
const std::vector<std::size_t>& default_mlsp_channels();

// Global average pool each map over its spatial dims, concatenated in map order.
EmbeddingVector mlsp_pool(const ActivationSet& a);

// Evenly spaced bucket values 1..B.
std::vector<double> default_bucket_values(std::size_t B);

// --- file formats -----------------------------------------------------------

// Text embeddings: CSV `id,v0,...,v{D-1}`.
std::vector<EmbeddingVector> load_embeddings_csv(const std::string& path);
void store_embeddings_csv(const std::vector<EmbeddingVector>& embs, const std::string& path);

// Binary embeddings: magic "MLSP", u32 version, u64 count, u32 dim,
// per record u16 id length + id bytes + dim float32 values, all little-endian.
std::vector<EmbeddingVector> load_embeddings_bin(const std::string& path);
void store_embeddings_bin(const std::vector<EmbeddingVector>& embs, const std::string& path);

// Attributes: CSV `id,style,comp_bits` (style integer or empty, comp_bits a
// '0'/'1' string of length K_c or empty; at least one present per row).
std::vector<AttributeLabels> load_attributes_csv(const std::string& path);
void store_attributes_csv(const std::vector<AttributeLabels>& labels, std::size_t k_comp,
                          const std::string& path);

// Score distributions: CSV `id,c1,...,cB` with nonnegative vote counts,
// normalized on load; all-zero rows rejected. Bucket values default to 1..B.
std::vector<ScoreDistribution> load_scores_csv(const std::string& path,
                                               std::vector<double> bucket_values = {});
void store_scores_csv(const std::vector<ScoreDistribution>& dists, const std::string& path);

// --- splits and sampling ----------------------------------------------------

struct SplitFractions {
    double train = 0.95, val = 0.05, test = 0.0;
};

std::vector<SplitSpec> make_splits(const std::vector<std::string>& ids, SplitFractions fr,
                                   std::uint64_t seed, std::size_t repeats = 1);

// Counted variant (Photo.net-style: fixed val/test counts, remainder trains).
std::vector<SplitSpec> make_splits_counted(const std::vector<std::string>& ids,
                                           std::size_t val_count, std::size_t test_count,
                                           std::uint64_t seed, std::size_t repeats = 1);

enum class Task { style, composition };

struct TaggedIndex {
    Task task;
    std::size_t index;  // into the task's own dataset
};

// Per-epoch dual-dataset balancing: the larger dataset contributes every
// sample exactly once, the smaller is resampled with replacement up to the
// same count; the mixed epoch is shuffled and cut into batches.
class BalancedBatchStream {
public:
    BalancedBatchStream(std::size_t n_style, std::size_t n_comp, std::size_t batch_size,
                        Rng rng);

    // Batches for the next epoch; deterministic in construction seed and the
    // number of epochs already drawn.
    std::vector<std::vector<TaggedIndex>> next_epoch();

    std::size_t samples_per_task() const { return per_task_; }

private:
    std::size_t n_style_, n_comp_, batch_size_, per_task_;
    Rng rng_;
};

// --- synthetic data ---------------------------------------------------------

struct SyntheticConfig {
    std::size_t n = 0;
    std::size_t D = 32;
    std::size_t K_v = 4;
    std::size_t K_c = 3;
    std::size_t B = 5;
    std::uint64_t seed = 0;
    double style_scale = 3.0;   // magnitude of style cluster centers
    double comp_scale = 1.5;    // magnitude of composition directions
    double noise_std = 1.0;     // embedding Gaussian noise
    double dist_std = 0.7;      // std of the discretized score Gaussian
    double comp_bit_prob = 0.35;
};

struct SyntheticInfo {
    // Planted mean score for an attribute combination; combinations map
    // injectively onto an even grid, adjacent codes separated by `gap`.
    double gap = 0.0;
    double mean_lo = 0.0, mean_hi = 0.0;
    std::vector<double> planted_means;  // indexed by code = style * 2^K_c + comp bits
};

struct SyntheticData {
    std::vector<EmbeddingVector> embeddings;
    std::vector<AttributeLabels> attributes;
    std::vector<ScoreDistribution> distributions;
    SyntheticInfo info;
};

std::size_t synthetic_code(std::size_t style, const std::vector<std::uint8_t>& comp);

// Planted-attribute generator: embeddings are attribute-conditioned Gaussian
// clusters and the score distribution mean is a deterministic function of the
// latent attributes, so aesthetics is learnable only through them.
SyntheticData gen_synthetic(const SyntheticConfig& cfg);

// Discretized Gaussian over bucket values (density at bucket, renormalized).
std::vector<double> discretized_gaussian(const std::vector<double>& bucket_values, double mean,
                                         double stddev);

}  // namespace aesthnet
