#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quesco/rng.hpp"
#include "quesco/types.hpp"

namespace quesco {
namespace model {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Vocab {
    std::map<std::string, int> token_to_id;
    std::vector<std::string> id_to_token;
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int lookup(const std::string& tok) const {
        auto it = token_to_id.find(tok);
        return it == token_to_id.end() ? kUnk : it->second;
    }
};

// Text tokens verbatim; formula segments symbol-by-symbol via the lexer.
std::vector<std::string> tokenize(const Question& q);
Vocab build_vocab(const std::vector<Question>& corpus);

struct EncoderConfig {
    int d_e = 64;
    int n_blocks = 1;  // 0, 1 or 2
    int d_ff = 128;
    int d_h = 64;      // projector hidden
    int d_proj = 32;
    bool normalize_keys = true;

    bool operator==(const EncoderConfig&) const = default;
};

struct BlockParams {
    MatrixXd wq, wk, wv, wo;  // d_e x d_e
    MatrixXd w1;              // d_e x d_ff
    MatrixXd b1;              // d_ff x 1
    MatrixXd w2;              // d_ff x d_e
    MatrixXd b2;              // d_e x 1
};

struct EncoderParams {
    EncoderConfig cfg;
    MatrixXd embed;  // V x d_e
    std::vector<BlockParams> blocks;
    MatrixXd p1;   // d_e x d_h
    MatrixXd pb1;  // d_h x 1
    MatrixXd p2;   // d_h x d_proj
    MatrixXd pb2;  // d_proj x 1

    static EncoderParams init(const EncoderConfig& cfg, int vocab_size, Rng& rng);

    // Visits every trainable tensor in a fixed order. Biases visit as Nx1.
    void for_each_tensor(const std::function<void(const std::string&, MatrixXd&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const MatrixXd&)>& fn) const;
};

// Elementwise theta_k <- m * theta_k + (1 - m) * theta_q.
void momentum_update(const EncoderParams& query, EncoderParams& key, double m);

struct EncoderGrads {
    EncoderParams store;  // same shapes, holds gradient values
    static EncoderGrads zeros_like(const EncoderParams& p);
    void scale(double s);
};

struct BlockCache {
    MatrixXd x_in, q, k, v, s, p, h, o, x1, z;
};

struct ForwardCache {
    std::vector<int> tokens;
    MatrixXd x0;
    std::vector<BlockCache> blocks;
    VectorXd rep;
    VectorXd z1, y, key;
    double ynorm = 0.0;
};

struct Encoded {
    VectorXd rep;  // d_e, pre-projector (downstream representation)
    VectorXd key;  // d_proj, L2-normalized projector output
};

Encoded encode(const std::vector<int>& tokens, const EncoderParams& params, ForwardCache* cache = nullptr);
Encoded encode(const Question& q, const EncoderParams& params, const Vocab& vocab, ForwardCache* cache = nullptr);

// Accumulates dL/dparams given dL/dkey (gradient w.r.t. the normalized key).
void encode_backward(const EncoderParams& params, const ForwardCache& cache, const VectorXd& dkey, EncoderGrads& grads);

struct BankEntry {
    VectorXd key;
    ConceptPath path;
    std::string source_id;
};

class MemoryBank {
public:
    explicit MemoryBank(std::size_t capacity, int dim) : capacity_(capacity), dim_(dim) {}

    void enqueue(const std::vector<BankEntry>& entries);
    std::vector<BankEntry> snapshot() const { return {queue_.begin(), queue_.end()}; }
    std::size_t size() const { return queue_.size(); }
    std::size_t capacity() const { return capacity_; }
    int dim() const { return dim_; }

private:
    std::size_t capacity_;
    int dim_;
    std::deque<BankEntry> queue_;
};

// Checkpoint container: config + vocab + named parameter tensors as JSON.
void save_params(const EncoderParams& params, const Vocab& vocab, const std::string& path);
std::pair<EncoderParams, Vocab> load_params(const std::string& path);

// Stable content hash of all parameter bytes, for frozen-encoder checks.
std::uint64_t params_hash(const EncoderParams& params);

}  // namespace model
}  // namespace quesco
