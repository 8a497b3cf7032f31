#include "quesco/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "quesco/formula.hpp"

using nlohmann::json;

namespace quesco {
namespace model {

std::vector<std::string> tokenize(const Question& q) {
    std::vector<std::string> out;
    for (const auto& seg : q.content) {
        if (seg.kind == Segment::Text) {
            out.push_back(seg.value);
        } else {
            for (auto& sym : formula::lex_formula(seg.value)) out.push_back(sym);
        }
    }
    return out;
}

Vocab build_vocab(const std::vector<Question>& corpus) {
    Vocab v;
    v.id_to_token = {"<pad>", "<unk>"};
    v.token_to_id = {{"<pad>", Vocab::kPad}, {"<unk>", Vocab::kUnk}};
    for (const auto& q : corpus) {
        for (const auto& tok : tokenize(q)) {
            if (!v.token_to_id.count(tok)) {
                v.token_to_id[tok] = v.size();
                v.id_to_token.push_back(tok);
            }
        }
    }
    return v;
}

namespace {

MatrixXd uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& cfg, int vocab_size, Rng& rng) {
    EncoderParams p;
    p.cfg = cfg;
    const double de_bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_e));
    p.embed = uniform_init(vocab_size, cfg.d_e, de_bound, rng);
    for (int b = 0; b < cfg.n_blocks; ++b) {
        BlockParams blk;
        blk.wq = uniform_init(cfg.d_e, cfg.d_e, de_bound, rng);
        blk.wk = uniform_init(cfg.d_e, cfg.d_e, de_bound, rng);
        blk.wv = uniform_init(cfg.d_e, cfg.d_e, de_bound, rng);
        blk.wo = uniform_init(cfg.d_e, cfg.d_e, de_bound, rng);
        blk.w1 = uniform_init(cfg.d_e, cfg.d_ff, de_bound, rng);
        blk.b1 = MatrixXd::Zero(cfg.d_ff, 1);
        blk.w2 = uniform_init(cfg.d_ff, cfg.d_e, 1.0 / std::sqrt(static_cast<double>(cfg.d_ff)), rng);
        blk.b2 = MatrixXd::Zero(cfg.d_e, 1);
        p.blocks.push_back(std::move(blk));
    }
    p.p1 = uniform_init(cfg.d_e, cfg.d_h, de_bound, rng);
    p.pb1 = MatrixXd::Zero(cfg.d_h, 1);
    p.p2 = uniform_init(cfg.d_h, cfg.d_proj, 1.0 / std::sqrt(static_cast<double>(cfg.d_h)), rng);
    p.pb2 = MatrixXd::Zero(cfg.d_proj, 1);
    return p;
}

void EncoderParams::for_each_tensor(const std::function<void(const std::string&, MatrixXd&)>& fn) {
    fn("embed", embed);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string pre = "block" + std::to_string(b) + ".";
        fn(pre + "wq", blocks[b].wq);
        fn(pre + "wk", blocks[b].wk);
        fn(pre + "wv", blocks[b].wv);
        fn(pre + "wo", blocks[b].wo);
        fn(pre + "w1", blocks[b].w1);
        fn(pre + "b1", blocks[b].b1);
        fn(pre + "w2", blocks[b].w2);
        fn(pre + "b2", blocks[b].b2);
    }
    fn("p1", p1);
    fn("pb1", pb1);
    fn("p2", p2);
    fn("pb2", pb2);
}

void EncoderParams::for_each_tensor(const std::function<void(const std::string&, const MatrixXd&)>& fn) const {
    const_cast<EncoderParams*>(this)->for_each_tensor(
        [&](const std::string& name, MatrixXd& m) { fn(name, m); });
}

void momentum_update(const EncoderParams& query, EncoderParams& key, double m) {
    if (m < 0.0 || m > 1.0) throw ValidationError("momentum m must be in [0,1]");
    std::vector<const MatrixXd*> qs;
    query.for_each_tensor([&](const std::string&, const MatrixXd& t) { qs.push_back(&t); });
    std::size_t i = 0;
    key.for_each_tensor([&](const std::string& name, MatrixXd& t) {
        const MatrixXd& src = *qs.at(i++);
        if (t.rows() != src.rows() || t.cols() != src.cols())
            throw ValidationError("momentum update shape mismatch on " + name);
        t = m * t + (1.0 - m) * src;
    });
}

EncoderGrads EncoderGrads::zeros_like(const EncoderParams& p) {
    EncoderGrads g;
    g.store = p;
    g.store.for_each_tensor([](const std::string&, MatrixXd& m) { m.setZero(); });
    return g;
}

void EncoderGrads::scale(double s) {
    store.for_each_tensor([s](const std::string&, MatrixXd& m) { m *= s; });
}

Encoded encode(const std::vector<int>& tokens, const EncoderParams& params, ForwardCache* cache) {
    if (tokens.empty()) throw ValidationError("cannot encode an empty token sequence");
    const EncoderConfig& cfg = params.cfg;
    const auto T = static_cast<Eigen::Index>(tokens.size());

    MatrixXd x(T, cfg.d_e);
    for (Eigen::Index t = 0; t < T; ++t) {
        int id = tokens[static_cast<std::size_t>(t)];
        if (id < 0 || id >= params.embed.rows()) throw ValidationError("token id out of vocabulary range");
        x.row(t) = params.embed.row(id);
    }

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.tokens = tokens;
    c.x0 = x;
    c.blocks.clear();

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d_e));
    for (const auto& blk : params.blocks) {
        BlockCache bc;
        bc.x_in = x;
        bc.q = x * blk.wq;
        bc.k = x * blk.wk;
        bc.v = x * blk.wv;
        bc.s = bc.q * bc.k.transpose() * inv_sqrt_d;
        bc.p = bc.s;
        for (Eigen::Index r = 0; r < bc.p.rows(); ++r) {
            double mx = bc.p.row(r).maxCoeff();
            bc.p.row(r) = (bc.p.row(r).array() - mx).exp();
            bc.p.row(r) /= bc.p.row(r).sum();
        }
        bc.h = bc.p * bc.v;
        bc.o = bc.h * blk.wo;
        bc.x1 = bc.x_in + bc.o;
        MatrixXd u = bc.x1 * blk.w1;
        u.rowwise() += blk.b1.col(0).transpose();
        bc.z = u.array().tanh();
        MatrixXd f = bc.z * blk.w2;
        f.rowwise() += blk.b2.col(0).transpose();
        x = bc.x1 + f;
        c.blocks.push_back(std::move(bc));
    }

    c.rep = x.colwise().mean();
    VectorXd u1 = params.p1.transpose() * c.rep + params.pb1.col(0);
    c.z1 = u1.array().tanh();
    c.y = params.p2.transpose() * c.z1 + params.pb2.col(0);
    if (cfg.normalize_keys) {
        c.ynorm = c.y.norm();
        if (c.ynorm == 0.0) throw ValidationError("projector output has zero norm");
        c.key = c.y / c.ynorm;
    } else {
        c.ynorm = 1.0;
        c.key = c.y;
    }
    if (!c.rep.allFinite() || !c.key.allFinite()) throw ValidationError("non-finite encoder output");
    return {c.rep, c.key};
}

Encoded encode(const Question& q, const EncoderParams& params, const Vocab& vocab, ForwardCache* cache) {
    std::vector<int> ids;
    for (const auto& tok : tokenize(q)) ids.push_back(vocab.lookup(tok));
    return encode(ids, params, cache);
}

void encode_backward(const EncoderParams& params, const ForwardCache& cache, const VectorXd& dkey, EncoderGrads& grads) {
    const EncoderConfig& cfg = params.cfg;

    // normalize: key = y / |y| ; dy = (g - (g.key) key) / |y|
    VectorXd gy;
    if (cfg.normalize_keys)
        gy = (dkey - dkey.dot(cache.key) * cache.key) / cache.ynorm;
    else
        gy = dkey;

    // projector
    grads.store.p2 += cache.z1 * gy.transpose();
    grads.store.pb2.col(0) += gy;
    VectorXd gz1 = params.p2 * gy;
    VectorXd gu1 = gz1.array() * (1.0 - cache.z1.array().square());
    grads.store.p1 += cache.rep * gu1.transpose();
    grads.store.pb1.col(0) += gu1;
    VectorXd grep = params.p1 * gu1;

    // mean pooling
    const auto T = static_cast<Eigen::Index>(cache.tokens.size());
    MatrixXd gx = MatrixXd::Ones(T, 1) * (grep.transpose() / static_cast<double>(T));

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d_e));
    for (int b = static_cast<int>(params.blocks.size()) - 1; b >= 0; --b) {
        const BlockParams& blk = params.blocks[static_cast<std::size_t>(b)];
        const BlockCache& bc = cache.blocks[static_cast<std::size_t>(b)];
        auto& gblk = grads.store.blocks[static_cast<std::size_t>(b)];

        // feed-forward residual: x2 = x1 + tanh(x1 w1 + b1) w2 + b2
        const MatrixXd& g2 = gx;
        gblk.w2 += bc.z.transpose() * g2;
        gblk.b2.col(0) += g2.colwise().sum().transpose();
        MatrixXd gz = g2 * blk.w2.transpose();
        MatrixXd gu = gz.array() * (1.0 - bc.z.array().square());
        gblk.w1 += bc.x1.transpose() * gu;
        gblk.b1.col(0) += gu.colwise().sum().transpose();
        MatrixXd g1 = g2 + gu * blk.w1.transpose();

        // attention residual: x1 = x + softmax(q k^T / sqrt(d)) v wo
        gblk.wo += bc.h.transpose() * g1;
        MatrixXd gh = g1 * blk.wo.transpose();
        MatrixXd gp = gh * bc.v.transpose();
        MatrixXd gv = bc.p.transpose() * gh;
        gblk.wv += bc.x_in.transpose() * gv;
        MatrixXd gs(gp.rows(), gp.cols());
        for (Eigen::Index r = 0; r < gp.rows(); ++r) {
            double dot = gp.row(r).dot(bc.p.row(r));
            gs.row(r) = bc.p.row(r).array() * (gp.row(r).array() - dot);
        }
        MatrixXd gq = gs * bc.k * inv_sqrt_d;
        MatrixXd gk = gs.transpose() * bc.q * inv_sqrt_d;
        gblk.wq += bc.x_in.transpose() * gq;
        gblk.wk += bc.x_in.transpose() * gk;
        gx = g1 + gq * blk.wq.transpose() + gk * blk.wk.transpose() + gv * blk.wv.transpose();
    }

    for (Eigen::Index t = 0; t < T; ++t)
        grads.store.embed.row(cache.tokens[static_cast<std::size_t>(t)]) += gx.row(t);
}

void MemoryBank::enqueue(const std::vector<BankEntry>& entries) {
    for (const auto& e : entries) {
        if (e.key.size() != dim_) throw ValidationError("bank entry has wrong dimension");
        if (std::abs(e.key.norm() - 1.0) > 1e-6) throw ValidationError("bank entry key is not unit-norm");
        queue_.push_back(e);
        if (queue_.size() > capacity_) queue_.pop_front();
    }
}

namespace {

json matrix_to_json(const MatrixXd& m) {
    std::vector<double> flat(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            flat[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

MatrixXd matrix_from_json(const json& j) {
    Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index jj = 0; jj < cols; ++jj)
            m(i, jj) = data.at(static_cast<std::size_t>(i * cols + jj)).get<double>();
    return m;
}

}  // namespace

void save_params(const EncoderParams& params, const Vocab& vocab, const std::string& path) {
    json j;
    j["format"] = "quesco-checkpoint-v1";
    j["config"] = {{"d_e", params.cfg.d_e},     {"n_blocks", params.cfg.n_blocks},
                   {"d_ff", params.cfg.d_ff},   {"d_h", params.cfg.d_h},
                   {"d_proj", params.cfg.d_proj}, {"normalize_keys", params.cfg.normalize_keys}};
    j["vocab"] = vocab.id_to_token;
    json tensors = json::object();
    params.for_each_tensor([&](const std::string& name, const MatrixXd& m) { tensors[name] = matrix_to_json(m); });
    j["tensors"] = tensors;
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write checkpoint: " + path);
    out << j.dump() << "\n";
}

std::pair<EncoderParams, Vocab> load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint: " + path);
    json j;
    in >> j;
    EncoderConfig cfg;
    const auto& cj = j.at("config");
    cfg.d_e = cj.at("d_e").get<int>();
    cfg.n_blocks = cj.at("n_blocks").get<int>();
    cfg.d_ff = cj.at("d_ff").get<int>();
    cfg.d_h = cj.at("d_h").get<int>();
    cfg.d_proj = cj.at("d_proj").get<int>();
    cfg.normalize_keys = cj.at("normalize_keys").get<bool>();

    Vocab vocab;
    vocab.id_to_token = j.at("vocab").get<std::vector<std::string>>();
    for (int i = 0; i < vocab.size(); ++i) vocab.token_to_id[vocab.id_to_token[static_cast<std::size_t>(i)]] = i;

    Rng dummy(0);
    EncoderParams params = EncoderParams::init(cfg, vocab.size(), dummy);
    const auto& tensors = j.at("tensors");
    params.for_each_tensor([&](const std::string& name, MatrixXd& m) { m = matrix_from_json(tensors.at(name)); });
    return {std::move(params), std::move(vocab)};
}

std::uint64_t params_hash(const EncoderParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
    };
    params.for_each_tensor([&](const std::string&, const MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                double d = m(i, j);
                std::uint64_t bits;
                static_assert(sizeof(bits) == sizeof(d));
                std::memcpy(&bits, &d, sizeof(bits));
                mix(bits);
            }
    });
    return h;
}

}  // namespace model
}  // namespace quesco
