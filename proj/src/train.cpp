#include "dar/train.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "dar/error.hpp"
#include "dar/kernels.hpp"

namespace dar {

void TrainConfig::validate() const {
    if (batch_size < 1) throw Error("batch size must be at least 1");
    if (adam.lr < 0.0) throw Error("learning rate must be non-negative");
    perturb.validate();
    if (mixup.enabled) {
        mixup.validate();
        if (batch_size < 2 && !hard_negatives)
            throw Error("mixup needs batch size >= 2 when hard negatives are off");
    }
}

NllResult nll_loss(const Matrix& scores, std::span<const std::size_t> positive_column) {
    if (positive_column.size() != scores.rows) throw Error("nll_loss: one positive column per row expected");
    NllResult r;
    r.grad = Matrix(scores.rows, scores.cols);
    if (scores.rows == 0) return r;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        for (std::size_t j = 0; j < scores.cols; ++j)
            if (!std::isfinite(scores(i, j)))
                throw Error("non-finite score at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    }
    const double inv_rows = 1.0 / static_cast<double>(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        const auto row = scores.row(i);
        const std::size_t pos = positive_column[i];
        if (pos >= scores.cols) throw Error("nll_loss: positive column out of range");
        double mx = row[0];
        for (const double s : row) mx = std::max(mx, s);
        double z = 0.0;
        for (const double s : row) z += std::exp(s - mx);
        const double log_z = mx + std::log(z);
        r.loss += (log_z - row[pos]) * inv_rows;
        auto g = r.grad.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) g[j] = std::exp(row[j] - log_z) * inv_rows;
        g[pos] -= inv_rows;
    }
    return r;
}

const DenseVec& BatchForward::row_query(std::size_t i, std::size_t k) const {
    if (side == AugmentSide::qar && !variants.empty()) return variants[i][k].value;
    return queries[i];
}

const DenseVec& BatchForward::column_document(std::size_t i, std::size_t k, std::size_t j) const {
    if (side == AugmentSide::dar && j == i && !variants.empty()) return variants[i][k].value;
    return documents[j];
}

const DenseVec& BatchForward::anchor(const InterpolationTriple& t) const {
    return side == AugmentSide::dar ? queries[t.anchor] : documents[t.anchor];
}

namespace {

void add_scaled(std::span<double> target, double alpha, std::span<const double> g, std::span<const double> scale) {
    for (std::size_t i = 0; i < target.size(); ++i) target[i] += alpha * g[i] * scale[i];
}

}  // namespace

BatchResult batch_loss(const EncoderParams& params, const Corpus& corpus, std::span<const TrainingExample> examples,
                       std::span<const std::size_t> members, const TrainConfig& config, Rng& rng,
                       EncoderGradients* grads) {
    const std::size_t batch = members.size();
    if (batch == 0) throw Error("empty batch");

    ForwardTape tape(params);
    BatchResult result;
    auto& fw = result.forward;
    fw.side = config.side;

    std::vector<std::size_t> query_slot(batch), doc_slot;
    for (std::size_t i = 0; i < batch; ++i) {
        const auto& ex = examples[members[i]];
        query_slot[i] = tape.encode(ex.query.features, Tower::query);
        doc_slot.push_back(tape.encode(corpus[corpus.index_of(ex.positive_doc_id)].features, Tower::document));
    }
    fw.hard_negatives_of.resize(batch);
    if (config.hard_negatives) {
        std::size_t h = 0;
        for (std::size_t i = 0; i < batch; ++i) {
            const auto& ids = examples[members[i]].hard_negative_doc_ids;
            const std::size_t take = std::min(ids.size(), config.hard_negatives_per_query);
            for (std::size_t t = 0; t < take; ++t) {
                doc_slot.push_back(tape.encode(corpus[corpus.index_of(ids[t])].features, Tower::document));
                fw.hard_negatives_of[i].push_back(h++);
            }
        }
    }
    for (const auto s : query_slot) fw.queries.push_back(tape.output(s));
    for (const auto s : doc_slot) fw.documents.push_back(tape.output(s));

    // Augmentation: perturb the augmented side, then interpolate.
    const bool dar_side = config.side == AugmentSide::dar;
    const std::vector<DenseVec>& augmented = dar_side ? fw.documents : fw.queries;
    fw.variants.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) fw.variants[i] = perturb(augmented[i], config.perturb, rng);

    if (config.mixup.enabled) {
        std::vector<std::vector<std::size_t>> no_extra;
        InterpolationInputs in;
        in.positives = std::span<const DenseVec>(augmented.data(), batch);
        in.positive_variants = fw.variants;
        if (dar_side) {
            in.extra_negatives = std::span<const DenseVec>(fw.documents).subspan(batch);
            in.extra_negatives_of = fw.hard_negatives_of;
        }
        fw.triples = build_interpolations(in, config.mixup, rng);
    }

    // Score matrix: one row per (example, variant), columns are all documents.
    const std::size_t n = fw.variants_per_row();
    const std::size_t cols = fw.documents.size();
    Matrix scores(batch * n, cols);
    std::vector<std::size_t> positive(batch * n);
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t r = i * n + k;
            positive[r] = i;
            for (std::size_t j = 0; j < cols; ++j)
                scores(r, j) = similarity(fw.row_query(i, k), fw.column_document(i, k, j), config.similarity);
        }
    }
    auto nll = nll_loss(scores, positive);

    auto& loss = result.loss;
    loss.rows = scores.rows;
    loss.columns = cols;
    loss.triples = fw.triples.size();
    loss.nll = nll.loss;

    std::vector<MixupLoss> mix;
    mix.reserve(fw.triples.size());
    double mix_sum = 0.0;
    for (const auto& t : fw.triples) {
        mix.push_back(mixup_loss(fw.anchor(t), t.mixed, t.lambda, config.mixup, config.similarity));
        mix_sum += mix.back().loss;
    }
    loss.mixup = fw.triples.empty() ? 0.0 : mix_sum / static_cast<double>(fw.triples.size());
    loss.total = loss.nll + (config.mixup.enabled ? config.mixup.loss_weight * loss.mixup : 0.0);

    if (!grads) return result;

    const std::size_t m = params.dims.output;
    std::vector<DenseVec> gq(batch, DenseVec(m, 0.0));
    std::vector<DenseVec> gd(cols, DenseVec(m, 0.0));
    std::vector<DenseVec>& g_aug = dar_side ? gd : gq;

    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t r = i * n + k;
            const auto& scale = fw.variants[i][k].scale;
            for (std::size_t j = 0; j < cols; ++j) {
                const double gs = nll.grad(r, j);
                if (gs == 0.0) continue;
                const auto sg = similarity_grad(fw.row_query(i, k), fw.column_document(i, k, j), config.similarity);
                if (dar_side) {
                    axpy(gs, sg.d_first, gq[i]);
                    if (j == i)
                        add_scaled(gd[i], gs, sg.d_second, scale);
                    else
                        axpy(gs, sg.d_second, gd[j]);
                } else {
                    add_scaled(gq[i], gs, sg.d_first, scale);
                    axpy(gs, sg.d_second, gd[j]);
                }
            }
        }
    }

    if (!fw.triples.empty()) {
        const double c = config.mixup.loss_weight / static_cast<double>(fw.triples.size());
        for (std::size_t t = 0; t < fw.triples.size(); ++t) {
            const auto& tr = fw.triples[t];
            const auto& ml = mix[t];
            axpy(c, ml.grad_anchor, dar_side ? gq[tr.anchor] : gd[tr.anchor]);
            add_scaled(g_aug[tr.anchor], c * tr.lambda, ml.grad_mixed, fw.variants[tr.anchor][tr.variant].scale);
            // Negatives past the batch block are hard negatives (document side only).
            axpy(c * (1.0 - tr.lambda), ml.grad_mixed, tr.negative < batch ? g_aug[tr.negative] : gd[tr.negative]);
        }
    }

    std::vector<DenseVec> upstream(tape.size());
    for (std::size_t i = 0; i < batch; ++i) upstream[query_slot[i]] = std::move(gq[i]);
    for (std::size_t j = 0; j < cols; ++j) upstream[doc_slot[j]] = std::move(gd[j]);
    tape.backward(upstream, *grads);
    return result;
}

OptimizerState OptimizerState::zeros(const EncoderDims& dims) {
    const auto zero = [&] {
        return TowerParams{Matrix(dims.vocab, dims.hidden), Matrix(dims.hidden, dims.output), DenseVec(dims.output)};
    };
    return {zero(), zero(), zero(), zero(), 0};
}

void adam_step(EncoderParams& params, OptimizerState& state, const EncoderGradients& grads, const AdamConfig& config) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const kernels::AdamCoefficients c{config.lr,   config.beta1, config.beta2, config.eps,
                                      1.0 - std::pow(config.beta1, t), 1.0 - std::pow(config.beta2, t)};
    const auto update = [&](TowerParams& p, const TowerParams& g, TowerParams& m, TowerParams& v) {
        kernels::omp::adam_update(p.embedding.data, g.embedding.data, m.embedding.data, v.embedding.data, c);
        kernels::omp::adam_update(p.projection.data, g.projection.data, m.projection.data, v.projection.data, c);
        kernels::omp::adam_update(p.bias, g.bias, m.bias, v.bias, c);
    };
    update(params.query, grads.query, state.query_m, state.query_v);
    update(params.document, grads.document, state.document_m, state.document_v);
}

LossBreakdown train_step(EncoderParams& params, OptimizerState& state, EncoderGradients& grads, const Corpus& corpus,
                         std::span<const TrainingExample> examples, std::span<const std::size_t> members,
                         const TrainConfig& config, Rng& rng) {
    grads.clear();
    BatchResult r;
    try {
        r = batch_loss(params, corpus, examples, members, config, rng, &grads);
    } catch (const TrainingHalted&) {
        throw;
    } catch (const Error& e) {
        throw TrainingHalted(std::string("training halted: ") + e.what());
    }
    if (!std::isfinite(r.loss.total))
        throw TrainingHalted("training halted: non-finite loss (nll=" + std::to_string(r.loss.nll) +
                             ", mixup=" + std::to_string(r.loss.mixup) + ")");
    adam_step(params, state, grads, config.adam);
    return r.loss;
}

namespace {

constexpr char kOptMagic[4] = {'D', 'A', 'R', 'O'};

void write_f64(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_f64(std::istream& in, std::vector<double>& v, const std::filesystem::path& path) {
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double))))
        throw Error(path.string() + ": truncated optimizer state");
}

}  // namespace

// "DARO" | u32 vocab | u32 hidden | u32 output | u64 step | f64 moments:
// query m, query v, document m, document v (each embedding, projection, bias).
void save_optimizer_state(const std::filesystem::path& path, const OptimizerState& state) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write optimizer state " + tmp.string());
        out.write(kOptMagic, 4);
        const std::uint32_t dims[3] = {static_cast<std::uint32_t>(state.query_m.embedding.rows),
                                       static_cast<std::uint32_t>(state.query_m.embedding.cols),
                                       static_cast<std::uint32_t>(state.query_m.bias.size())};
        out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
        out.write(reinterpret_cast<const char*>(&state.step), sizeof(state.step));
        for (const auto* t : {&state.query_m, &state.query_v, &state.document_m, &state.document_v}) {
            write_f64(out, t->embedding.data);
            write_f64(out, t->projection.data);
            write_f64(out, t->bias);
        }
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw Error("I/O error writing optimizer state " + path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error("cannot move optimizer state into place at " + path.string());
    }
}

OptimizerState load_optimizer_state(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open optimizer state " + path.string());
    char magic[4];
    std::uint32_t dims[3];
    std::uint64_t step = 0;
    if (!in.read(magic, 4) || std::memcmp(magic, kOptMagic, 4) != 0)
        throw Error(path.string() + ": not an optimizer state file");
    if (!in.read(reinterpret_cast<char*>(dims), sizeof(dims)) ||
        !in.read(reinterpret_cast<char*>(&step), sizeof(step)))
        throw Error(path.string() + ": truncated optimizer state");
    auto state = OptimizerState::zeros({dims[0], dims[1], dims[2]});
    state.step = step;
    for (auto* t : {&state.query_m, &state.query_v, &state.document_m, &state.document_v}) {
        read_f64(in, t->embedding.data, path);
        read_f64(in, t->projection.data, path);
        read_f64(in, t->bias, path);
    }
    return state;
}

EncoderParams initial_params(const TrainConfig& config, const HashConfig& hash) {
    return init_params(derive_seed(config.seed, 1), config.dims, hash.seed);
}

TrainResult train(const Corpus& corpus, std::span<const TrainingExample> examples, const TrainConfig& config,
                  const TrainOutputs& outputs, std::optional<TrainState> resume,
                  const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    if (examples.empty()) throw Error("no training examples");
    if (config.dims.vocab != corpus.hash_config().vocab_dim)
        throw Error("encoder vocab " + std::to_string(config.dims.vocab) + " does not match hash vocab_dim " +
                    std::to_string(corpus.hash_config().vocab_dim));

    TrainResult result;
    if (resume) {
        if (!(resume->params.dims == config.dims)) throw Error("resumed checkpoint dimensions differ from config");
        result.params = std::move(resume->params);
        result.optimizer = std::move(resume->optimizer);
    } else {
        result.params = initial_params(config, corpus.hash_config());
        result.optimizer = OptimizerState::zeros(config.dims);
    }
    Rng shuffle_rng(derive_seed(config.seed, 2));
    Rng augment_rng(derive_seed(config.seed, 3));
    EncoderGradients grads(config.dims);

    std::ofstream log_out;
    if (!outputs.loss_log.empty()) {
        log_out.open(outputs.loss_log, std::ios::trunc);
        if (!log_out) throw Error("cannot write loss log " + outputs.loss_log.string());
    }

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (unsigned epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        if (config.shuffle) {
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        EpochLog log;
        log.epoch = epoch;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            const std::span<const std::size_t> members(order.data() + begin, end - begin);
            const auto loss = train_step(result.params, result.optimizer, grads, corpus, examples, members, config,
                                         augment_rng);
            log.nll += loss.nll;
            log.mixup += loss.mixup;
            log.total += loss.total;
            ++log.steps;
        }
        result.steps += log.steps;
        const double steps = static_cast<double>(log.steps);
        log.nll /= steps;
        log.mixup /= steps;
        log.total /= steps;
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(log);

        if (log_out.is_open()) {
            nlohmann::json rec = {{"epoch", log.epoch}, {"nll", log.nll},         {"mixup", log.mixup},
                                  {"total", log.total}, {"seconds", log.seconds}, {"steps", log.steps}};
            log_out << rec.dump() << '\n';
            log_out.flush();
            if (!log_out) throw Error("I/O error writing loss log " + outputs.loss_log.string());
        }
        if (!outputs.checkpoint.empty() && outputs.checkpoint_every > 0 && epoch % outputs.checkpoint_every == 0 &&
            epoch != config.epochs) {
            auto path = outputs.checkpoint;
            path += ".epoch" + std::to_string(epoch);
            save_checkpoint(path, result.params);
        }
        if (on_epoch) on_epoch(log);
    }
    if (!outputs.checkpoint.empty()) save_checkpoint(outputs.checkpoint, result.params);
    if (!outputs.optimizer_state.empty()) save_optimizer_state(outputs.optimizer_state, result.optimizer);
    return result;
}

}  // namespace dar
