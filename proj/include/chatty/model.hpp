#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "chatty/matrix.hpp"
#include "chatty/tape.hpp"

namespace chatty {

class Rng;

// Layer widths and head wiring for the adaptation network.
struct ModelSpec {
    Index input_dim = 2;
    std::vector<Index> g_widths = {128, 64};  // hidden widths; last is the feature dim
    Index num_classes = 2;
    std::vector<Index> d_widths = {32};  // discriminator hidden widths
    Real lambda = 0.5;                   // interpolation weight for the two transported outputs
    bool dual_transport = true;          // false: only T1 exists and lambda is forced to 1
    bool disc_on_logits = false;         // false: discriminator sees softmaxed outputs

    Index feature_dim() const { return g_widths.back(); }

    // Throws ParamError on non-positive widths, num_classes < 2, or a lambda
    // outside (0, 1) in dual mode.
    void validate() const;
};

// One fully connected layer: y = x * w + b with w (in x out), b (1 x out).
struct Affine {
    Mat w;
    Mat b;
};

// Feature extractor G (relu after every layer), classifier C, transport heads
// T1/T2, and discriminator D (relu hiddens, sigmoid output). Parameters are
// plain matrices; the training loop binds them as tape leaves each step.
struct ChattyModel {
    ModelSpec spec;
    std::vector<Affine> g;
    Affine c_head;
    Affine t1_head;
    Affine t2_head;  // unused (empty) in single-transport mode
    std::vector<Affine> d;

    // All trainable matrices in a fixed order: G layers, C, T1, [T2], D layers
    // (weight before bias within each affine).
    std::vector<Mat*> parameters();
    std::vector<const Mat*> parameters() const;

    // The two sides of the minimax split.
    std::vector<Mat*> generator_parameters();      // G, C, T1, [T2]
    std::vector<Mat*> discriminator_parameters();  // D
};

// Glorot-uniform initialization (biases zero); transport-head weights are
// additionally scaled by 0.1 so transports start near zero. Deterministic in
// the seed.
ChattyModel init_model(const ModelSpec& spec, std::uint64_t seed);

// Every intermediate of one forward pass, as tape nodes (call .value() for
// the matrices). t2/o2 are absent in single-transport mode.
struct ForwardBundle {
    Node features;       // B x f
    Node logits_c;       // B x c
    Node t1;             // B x c
    std::optional<Node> t2;
    Node o1;             // logits_c + t1
    std::optional<Node> o2;
    Node interp_logits;  // lambda*o1 + (1-lambda)*o2, or o1 in single mode
    Node disc_in;        // discriminator input after gradient reversal
    Node disc_out;       // B x 1, sigmoid probabilities
};

// Runs the network on x (B x input_dim). The discriminator branch passes
// through a gradient-reversal pseudo-op with the given scale: forward values
// are unaffected, backward multiplies by -grl_scale on the way into G/C/T.
ForwardBundle forward(Tape& tape, ChattyModel& model, const Mat& x, Real grl_scale);

// Argmax over interp_logits rows; ties go to the lowest class index.
std::vector<int> predict(ChattyModel& model, const Mat& x);

}  // namespace chatty
