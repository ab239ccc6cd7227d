#include "tweetsift/training.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <set>
#include <thread>

#include "tweetsift/error.hpp"
#include "tweetsift/metrics.hpp"
#include "tweetsift/rng.hpp"

namespace tweetsift {

void MemberConfig::validate() const {
    if (name.empty()) throw UsageError("member: name must not be empty");
    if (max_len < 1) throw UsageError("member " + name + ": max_len must be >= 1");
    if (epochs < 0) throw UsageError("member " + name + ": epochs must be >= 0");
    if (batch_size < 1) throw UsageError("member " + name + ": batch_size must be >= 1");
    if (!(lr_min_ratio >= 0.0 && lr_min_ratio <= 1.0)) throw UsageError("member " + name + ": lr_min_ratio in [0, 1]");
    if (fgm.enabled && !(fgm.epsilon >= 0.0)) throw UsageError("member " + name + ": fgm epsilon must be >= 0");
    optimizer.validate();
    msd.validate();
}

LrSchedule MemberConfig::resolved_schedule(std::int64_t steps_per_epoch) const {
    LrSchedule s;
    s.kind = schedule;
    s.lr_max = optimizer.lr;
    s.lr_min = optimizer.lr * lr_min_ratio;
    s.cycle_len = cycle_len > 0 ? cycle_len : std::max<std::int64_t>(1, steps_per_epoch);
    s.cycle_mult = cycle_mult;
    s.validate();
    return s;
}

std::vector<MemberConfig> default_members(std::uint64_t base_seed) {
    const auto v1 = [](MemberConfig m) {
        m.optimizer.kind = OptimizerKind::Adam;
        m.optimizer.lr = 2e-5;
        return m;
    };
    const auto v2 = [](MemberConfig m) {
        m.optimizer.kind = OptimizerKind::AdamW;
        m.optimizer.lr = 3e-5;
        m.optimizer.weight_decay = 0.01;
        m.fgm.enabled = true;
        return m;
    };
    std::vector<MemberConfig> out;

    MemberConfig x;
    x.variant = EncoderVariant::Xformer;
    x.preproc = PreprocStrategy::P1;
    x.epochs = 4;
    x.batch_size = 16;
    x.max_len = 128;
    x.name = "xformer_v1";
    out.push_back(v1(x));
    x.name = "xformer_v2";
    x.max_len = 192;
    out.push_back(v2(x));

    MemberConfig b = x;
    b.variant = EncoderVariant::Bag;
    b.name = "bag_v1";
    b.max_len = 128;
    out.push_back(v1(b));
    b.name = "bag_v2";
    b.max_len = 192;
    out.push_back(v2(b));

    MemberConfig c;
    c.variant = EncoderVariant::Conv;
    c.preproc = PreprocStrategy::P2;
    c.epochs = 5;
    c.batch_size = 16;
    c.max_len = 128;
    c.schedule = ScheduleKind::CosineRestart;
    c.name = "conv_1";
    out.push_back(v1(c));
    out.back().optimizer.lr = 3e-6;
    c.name = "conv_2";
    out.push_back(v2(c));
    out.back().optimizer.lr = 3e-6;

    for (auto& m : out) m.seed = derive_seed(base_seed, {fnv1a(m.name)});
    return out;
}

namespace {

std::vector<EncodedExample> encode_all(const Dataset& ds, const MemberConfig& cfg, const Vocab& vocab) {
    std::vector<EncodedExample> out;
    out.reserve(ds.size());
    for (const auto& e : ds.examples) out.push_back(encode(tokenize(apply_strategy(cfg.preproc, e.text)), vocab, cfg.max_len));
    return out;
}

double dev_f1(const ModelParams& params, const MemberConfig& cfg, const Vocab& vocab, const Dataset& dev,
              const std::vector<Label>& gold) {
    const auto probs = predict(params, dev, vocab, cfg.preproc, cfg.max_len);
    std::vector<Label> pred(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) pred[i] = probs[i] > 0.5 ? Label::Informative : Label::Uninformative;
    return prf(confusion(pred, gold)).f1;
}

}  // namespace

TrainedMember train_member(const MemberConfig& cfg, const Vocab& vocab, const Dataset& train, const Dataset* dev) {
    cfg.validate();
    if (train.empty()) throw DataError("train_member: empty training set");
    const auto targets = train.labels();
    std::vector<Label> dev_gold;
    if (dev) dev_gold = dev->labels();

    ModelDims dims = cfg.dims;
    dims.vocab_size = vocab.size();
    dims.max_len = cfg.max_len;
    TrainedMember out{cfg, init_params(cfg.variant, dims, derive_seed(cfg.seed, {fnv1a("params")})), {}};
    auto& params = out.params;
    if (cfg.epochs == 0) return out;

    const auto encoded = encode_all(train, cfg, vocab);
    const auto steps_per_epoch = static_cast<std::int64_t>((encoded.size() + cfg.batch_size - 1) / cfg.batch_size);
    const auto sched = cfg.resolved_schedule(steps_per_epoch);
    auto state = AdamState::for_params(params);
    std::int64_t step = 0;
    std::vector<Label> batch_targets;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto batches = bucket_batches(encoded, cfg.batch_size,
                                            derive_seed(cfg.seed, {fnv1a("epoch"), static_cast<std::uint64_t>(epoch)}),
                                            cfg.bucketing);
        double loss_sum = 0.0, adv_sum = 0.0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            batch_targets.clear();
            for (auto idx : batch.index) batch_targets.push_back(targets[idx]);
            const auto mode = ForwardMode::training(
                derive_seed(cfg.seed, {fnv1a("dropout"), static_cast<std::uint64_t>(epoch), bi}));
            const double lr = lr_at(sched, step++);
            const double weight = static_cast<double>(batch.size());
            if (cfg.fgm.enabled) {
                const auto l = fgm_training_step(params, state, batch, batch_targets, cfg.msd, mode, cfg.fgm,
                                                 cfg.optimizer, lr);
                loss_sum += weight * l.clean;
                adv_sum += weight * l.adversarial;
            } else {
                loss_sum += weight * plain_training_step(params, state, batch, batch_targets, cfg.msd, mode,
                                                         cfg.optimizer, lr);
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(encoded.size());
        rec.adv_loss = adv_sum / static_cast<double>(encoded.size());
        if (dev) rec.dev_f1 = dev_f1(params, cfg, vocab, *dev, dev_gold);
        out.history.push_back(rec);
    }
    return out;
}

std::vector<PseudoExample> generate_pseudo_labels(const std::map<std::string, double>& probs,
                                                  const Dataset& unlabeled, PseudoThresholds t) {
    if (!(t.lo >= 0.0 && t.lo < t.hi && t.hi <= 1.0))
        throw UsageError("pseudo thresholds must satisfy 0 <= lo < hi <= 1");
    std::set<std::string_view> known;
    for (const auto& e : unlabeled.examples) known.insert(e.id);
    for (const auto& [id, p] : probs) {
        if (!known.count(id)) throw DataError("pseudo: id '" + id + "' not in unlabeled set " + unlabeled.name);
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("pseudo: probability for '" + id + "' outside [0, 1]");
    }
    std::vector<PseudoExample> out;
    for (const auto& e : unlabeled.examples) {
        const auto it = probs.find(e.id);
        if (it == probs.end()) continue;
        const double p = it->second;
        std::optional<Label> lab;
        if (p > t.hi) lab = Label::Informative;
        else if (p < t.lo) lab = Label::Uninformative;
        if (!lab) continue;
        PseudoExample pe;
        pe.tweet = {e.id, e.text, *lab};
        pe.pseudo_label = *lab;
        pe.source_prob = p;
        out.push_back(std::move(pe));
    }
    return out;
}

Dataset pseudo_as_dataset(const std::vector<PseudoExample>& pseudo, std::string name) {
    Dataset ds;
    ds.name = std::move(name);
    for (const auto& p : pseudo) ds.examples.push_back({p.tweet.id, p.tweet.text, p.pseudo_label});
    return ds;
}

int optimal_epoch(const std::vector<double>& mean_f1) {
    if (mean_f1.empty()) throw DataError("optimal_epoch: no epochs");
    std::size_t best = 0;
    for (std::size_t e = 1; e < mean_f1.size(); ++e)
        if (mean_f1[e] > mean_f1[best]) best = e;
    return static_cast<int>(best) + 1;
}

void check_fold_leakage(const Dataset& gold, const FoldAssignment& folds, const std::vector<PseudoExample>& pseudo) {
    std::set<std::string_view> pseudo_ids;
    for (const auto& p : pseudo) pseudo_ids.insert(p.tweet.id);
    for (int f = 0; f < folds.k; ++f) {
        std::set<std::string_view> train_ids(pseudo_ids);
        std::vector<std::string_view> val_ids;
        for (std::size_t i = 0; i < gold.size(); ++i)
            (folds.fold_by_index[i] == f ? val_ids.push_back(gold.examples[i].id)
                                         : void(train_ids.insert(gold.examples[i].id)));
        for (auto id : val_ids) {
            if (pseudo_ids.count(id))
                throw LeakageError("pseudo-labelled example '" + std::string(id) + "' in validation fold " +
                                   std::to_string(f));
            if (train_ids.count(id))
                throw LeakageError("example '" + std::string(id) + "' in both training and validation of fold " +
                                   std::to_string(f));
        }
    }
}

CvReport cross_validate(const MemberConfig& cfg, const Vocab& vocab, const Dataset& gold, int k,
                        const std::vector<PseudoExample>& pseudo, std::uint64_t fold_seed, int jobs) {
    cfg.validate();
    if (cfg.epochs < 1) throw UsageError("cross_validate: member " + cfg.name + " needs epochs >= 1");
    const auto folds = stratified_kfold(gold, k, fold_seed);
    check_fold_leakage(gold, folds, pseudo);

    CvReport rep;
    rep.member = cfg.name;
    rep.k = k;
    rep.fold_fingerprint = folds.fingerprint();
    rep.fold_f1.assign(static_cast<std::size_t>(k), {});
    rep.train_sizes.assign(static_cast<std::size_t>(k), 0);
    rep.validation_sizes.assign(static_cast<std::size_t>(k), 0);

    parallel_for(static_cast<std::size_t>(k), jobs, [&](std::size_t f) {
        Dataset train{gold.name + "/train" + std::to_string(f), {}};
        Dataset val{gold.name + "/fold" + std::to_string(f), {}};
        for (std::size_t i = 0; i < gold.size(); ++i)
            (folds.fold_by_index[i] == static_cast<int>(f) ? val : train).examples.push_back(gold.examples[i]);
        for (const auto& p : pseudo) train.examples.push_back({p.tweet.id, p.tweet.text, p.pseudo_label});
        MemberConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, {fnv1a("fold"), f});
        const auto trained = train_member(fold_cfg, vocab, train, &val);
        for (const auto& rec : trained.history) rep.fold_f1[f].push_back(*rec.dev_f1);
        rep.train_sizes[f] = train.size();
        rep.validation_sizes[f] = val.size();
    });

    rep.mean_f1.assign(static_cast<std::size_t>(cfg.epochs), 0.0);
    for (const auto& row : rep.fold_f1)
        for (std::size_t e = 0; e < row.size(); ++e) rep.mean_f1[e] += row[e] / static_cast<double>(k);
    rep.optimal_epoch = optimal_epoch(rep.mean_f1);
    return rep;
}

FinalModels augment_and_train_final(const std::vector<MemberConfig>& members,
                                    const std::map<PreprocStrategy, Vocab>& vocabs,
                                    const std::vector<int>& optimal_epochs, const Dataset& gold,
                                    const std::vector<PseudoExample>& pseudo, PseudoThresholds thresholds, int jobs) {
    if (optimal_epochs.size() != members.size())
        throw UsageError("augment_and_train_final: one optimal epoch per member required");
    std::set<std::string_view> ids;
    for (const auto& e : gold.examples) ids.insert(e.id);
    FinalModels out;
    out.audit.thresholds = thresholds;
    Dataset train = gold;
    train.name = gold.name + "+pseudo";
    for (const auto& p : pseudo) {
        if (!ids.insert(p.tweet.id).second)
            throw DataError("pseudo example id '" + p.tweet.id + "' duplicates an existing training id");
        train.examples.push_back({p.tweet.id, p.tweet.text, p.pseudo_label});
        (p.pseudo_label == Label::Informative ? out.audit.pseudo_positive : out.audit.pseudo_negative)++;
    }
    out.audit.pseudo_count = pseudo.size();

    out.members.resize(members.size());
    parallel_for(members.size(), jobs, [&](std::size_t m) {
        MemberConfig cfg = members[m];
        cfg.epochs = optimal_epochs[m];
        const auto it = vocabs.find(cfg.preproc);
        if (it == vocabs.end())
            throw UsageError("no vocabulary for preprocessing strategy " + std::string(strategy_name(cfg.preproc)));
        out.members[m] = train_member(cfg, it->second, train);
    });
    return out;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    const auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run(i);
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace tweetsift
