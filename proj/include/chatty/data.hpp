#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chatty/matrix.hpp"
#include "chatty/rng.hpp"

namespace chatty {

// A labeled source dataset and an unlabeled target dataset under domain
// shift. target_y exists for evaluation only — nothing on the training path
// may read it.
struct DomainPair {
    Mat source_x;               // Ns x d
    std::vector<int> source_y;  // Ns
    Mat target_x;               // Nt x d
    std::vector<int> target_y;  // Nt, evaluation only
    Index num_classes = 0;

    Index dim() const { return source_x.cols(); }
};

// One training minibatch: labeled source rows plus unlabeled target rows.
struct BatchPair {
    Mat src_x;
    std::vector<int> src_y;
    Mat tgt_x;
};

// Gaussian blobs with class centers on a circle of radius 4 in the first two
// dimensions (remaining dims zero-centered). The target domain is a fresh
// sample from the source distribution rotated by rotation_deg in the first
// two dimensions and then translated. Inputs are standardized to source
// mean/variance. translation may be empty (zeros) or size d.
DomainPair gen_blobs(Index classes, Index n_per_class, Index dim, Real rotation_deg,
                     const std::vector<Real>& translation, Real noise, std::uint64_t seed);

// Two interleaved half-moons (n even, n/2 per class, Gaussian noise sigma).
// The target domain is a fresh sample rotated by rotation_deg about its own
// centroid. Inputs are standardized to source mean/variance.
DomainPair gen_moons(Real rotation_deg, Real noise, Index n, std::uint64_t seed);

// Rescales both domains to zero mean / unit variance computed from the
// SOURCE rows only (near-constant dims are left unscaled).
void standardize_source_stats(DomainPair& pair);

// Draws fixed-size minibatches. Source and target advance as independent
// streams; within each stream every sample appears exactly once per epoch
// (fresh permutation each epoch, batches may straddle the boundary).
class BatchSampler {
  public:
    BatchSampler(const DomainPair& pair, Index batch_size, std::uint64_t seed);

    BatchPair next();

    Index batch_size() const { return batch_size_; }

  private:
    Index next_source();
    Index next_target();

    const DomainPair& pair_;
    Index batch_size_;
    Rng src_rng_;
    Rng tgt_rng_;
    std::vector<Index> src_order_;
    std::vector<Index> tgt_order_;
    std::size_t src_pos_ = 0;
    std::size_t tgt_pos_ = 0;
};

// CSV round trip for a sampled dataset. Header: x0..x{d-1},y,domain with
// domain 0 = source, 1 = target. Doubles use round-trip precision.
void save_domain_pair_csv(const DomainPair& pair, const std::string& path);
DomainPair load_domain_pair_csv(const std::string& path);

}  // namespace chatty
