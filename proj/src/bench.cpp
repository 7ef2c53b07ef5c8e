#include "zeroshot/bench.hpp"

#include "zeroshot/mdp_io.hpp"
#include "zeroshot/util.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace zsrl {

// ---------------------------------------------------------------- tasks

TaskKind parse_task_kind(const std::string& s) {
    if (s == "goal" || s == "goal-reaching") return TaskKind::goal;
    if (s == "random-linear") return TaskKind::random_linear;
    if (s == "random-dense") return TaskKind::random_dense;
    if (s == "mixture") return TaskKind::mixture;
    if (s == "constant") return TaskKind::constant;
    throw std::invalid_argument("unknown task kind '" + s + "'");
}

std::string to_string(TaskKind k) {
    switch (k) {
        case TaskKind::goal: return "goal";
        case TaskKind::random_linear: return "random-linear";
        case TaskKind::random_dense: return "random-dense";
        case TaskKind::mixture: return "mixture";
        case TaskKind::constant: return "constant";
    }
    return "?";
}

namespace {

// Fisher-Yates driven by splitmix64 so the order does not depend on the
// standard library's shuffle.
std::vector<int> seeded_permutation(int n, std::uint64_t seed) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    std::uint64_t x = seed;
    for (int i = n - 1; i > 0; --i) {
        x = splitmix64(x);
        std::swap(p[static_cast<std::size_t>(i)], p[x % static_cast<std::uint64_t>(i + 1)]);
    }
    return p;
}

}  // namespace

std::vector<Task> sample_tasks(const FiniteMdp& mdp, const TaskDistribution& dist, int n, std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("task count must be nonnegative");
    std::vector<Task> out;
    out.reserve(static_cast<std::size_t>(n));
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    switch (dist.kind) {
        case TaskKind::goal: {
            const auto perm = seeded_permutation(mdp.n_states(), seed);
            for (int i = 0; i < n; ++i) {
                const int g = perm[static_cast<std::size_t>(i % mdp.n_states())];
                out.push_back({"goal:" + std::to_string(g), RewardFn::goal(mdp, g)});
            }
            break;
        }
        case TaskKind::random_linear: {
            const FeatureMap f = dist.features ? *dist.features
                                               : make_features(mdp, dist.feature_kind, dist.feature_dim,
                                                               dist.feature_seed);
            f.check(mdp);
            for (int i = 0; i < n; ++i) {
                Vec w(f.d);
                for (int j = 0; j < f.d; ++j) w[j] = normal(rng);
                out.push_back({"linear:" + std::to_string(i), f.reward(mdp, w)});
            }
            break;
        }
        case TaskKind::random_dense:
            for (int i = 0; i < n; ++i) {
                RewardFn r = RewardFn::zeros(mdp);
                for (Eigen::Index a = 0; a < r.r.rows(); ++a)
                    for (Eigen::Index b = 0; b < r.r.cols(); ++b) r.r(a, b) = normal(rng);
                out.push_back({"dense:" + std::to_string(i), r});
            }
            break;
        case TaskKind::constant:
            for (int i = 0; i < n; ++i)
                out.push_back({"constant:" + std::to_string(i), RewardFn::constant(mdp, dist.constant)});
            break;
        case TaskKind::mixture: {
            if (dist.components.empty()) throw std::invalid_argument("mixture without components");
            for (int i = 0; i < n; ++i) {
                const auto c = static_cast<std::size_t>(rng() % dist.components.size());
                Task t = sample_tasks(mdp, dist.components[c], 1, splitmix64(seed + static_cast<std::uint64_t>(i)))[0];
                t.id = "mix" + std::to_string(i) + ":" + t.id;
                out.push_back(std::move(t));
            }
            break;
        }
    }
    return out;
}

namespace {

int yline(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

TaskDistribution parse_distribution(const YAML::Node& node) {
    TaskDistribution d;
    if (node.IsScalar()) {
        try {
            d.kind = parse_task_kind(node.as<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), yline(node));
        }
        return d;
    }
    if (!node.IsMap() || !node["kind"]) throw ParseError("task entry needs a 'kind'", yline(node));
    try {
        d.kind = parse_task_kind(node["kind"].as<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), yline(node["kind"]));
    }
    const YAML::Node p = node["params"] ? node["params"] : node;
    try {
        if (p["features"]) d.feature_kind = p["features"].as<std::string>();
        if (p["dim"]) d.feature_dim = p["dim"].as<int>();
        if (p["feature_seed"]) d.feature_seed = p["feature_seed"].as<std::uint64_t>();
        if (p["value"]) d.constant = p["value"].as<double>();
    } catch (const YAML::Exception& e) {
        throw ParseError("bad task parameter: " + e.msg, yline(p));
    }
    if (p["components"]) {
        for (const auto& c : p["components"]) d.components.push_back(parse_distribution(c));
    }
    if (d.kind == TaskKind::mixture && d.components.empty())
        throw ParseError("mixture needs 'components'", yline(node));
    return d;
}

}  // namespace

std::vector<TaskSpec> parse_task_spec(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.msg, e.mark.line + 1);
    }
    YAML::Node list = root.IsMap() && root["tasks"] ? root["tasks"] : root;
    std::vector<TaskSpec> out;
    auto one = [&](const YAML::Node& n) {
        TaskSpec t;
        t.dist = parse_distribution(n);
        try {
            if (n.IsMap() && n["count"]) t.count = n["count"].as<int>();
            if (n.IsMap() && n["seed"]) t.seed = n["seed"].as<std::uint64_t>();
        } catch (const YAML::Exception& e) {
            throw ParseError("bad count/seed: " + e.msg, yline(n));
        }
        if (t.count < 0) throw ParseError("count must be nonnegative", yline(n));
        out.push_back(t);
    };
    if (list.IsSequence()) {
        for (const auto& n : list) one(n);
    } else if (list.IsMap()) {
        one(list);
    } else {
        throw ParseError("task spec must be a mapping or a list", yline(list));
    }
    return out;
}

std::vector<TaskSpec> load_task_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open task spec " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_task_spec(ss.str());
}

std::vector<Task> sample_tasks(const FiniteMdp& mdp, const std::vector<TaskSpec>& spec) {
    std::vector<Task> out;
    for (const auto& s : spec) {
        auto part = sample_tasks(mdp, s.dist, s.count, s.seed);
        for (auto& t : part) out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------- agents

const std::vector<std::string>& method_ids() {
    static const std::vector<std::string> ids = {"sm-oracle", "sf-gpi", "usf", "fb", "fb-aware", "psm", "hilp", "gcrl"};
    return ids;
}

std::uint64_t mdp_fingerprint(const FiniteMdp& mdp) {
    Fnv1a h;
    h.add(static_cast<std::int64_t>(mdp.n_states()));
    h.add(static_cast<std::int64_t>(mdp.n_actions()));
    h.add(mdp.transition());
    h.add(mdp.initial());
    h.add(mdp.gamma());
    return h.value();
}

SmOracleAgent::SmOracleAgent(FiniteMdp m) : ZeroShotAgent(m), bank(m) {}

AgentInference SmOracleAgent::infer(const RewardFn& reward) const {
    Stopwatch sw;
    const std::size_t i = bank.best(reward.by_pair(mdp));
    AgentInference out{Policy::from_actions(mdp.n_actions(), bank.actions(i)), 0.0, {}};
    out.diagnostics["policies_searched"] = static_cast<double>(bank.size());
    out.inference_ms = sw.ms();
    return out;
}

std::uint64_t SmOracleAgent::state_hash() const {
    Fnv1a h;
    h.add(bank.occupancies());
    return h.value();
}

UsfAgent::UsfAgent(UsfModel m) : ZeroShotAgent(m.mdp), model(std::move(m)) {}

AgentInference UsfAgent::infer(const RewardFn& reward) const {
    const UsfInference inf = usf_zero_shot(model, reward);
    AgentInference out{inf.policy, inf.inference_ms, {}};
    out.diagnostics["linearization_residual"] = inf.linearization_residual;
    return out;
}

std::uint64_t UsfAgent::state_hash() const { return model.hash(); }

FbAgent::FbAgent(FiniteMdp m, FbModel fb) : ZeroShotAgent(std::move(m)), model(std::move(fb)) {}

AgentInference FbAgent::infer(const RewardFn& reward) const {
    Stopwatch sw;
    if (anchor_codes.empty()) {
        FbInference inf = fb_zero_shot(model, mdp, reward);
        AgentInference out{inf.policy, 0.0, {}};
        out.diagnostics["grid_index"] = inf.grid_index;
        out.diagnostics["degenerate"] = inf.degenerate;
        out.inference_ms = sw.ms();
        return out;
    }
    // autoregressive code of the task, matched against the anchors' codes
    const Vec code = aware_embed(model, mdp, reward, config.aware_K).z;
    std::size_t best = 0;
    double bd = INFINITY;
    for (std::size_t k = 0; k < anchor_codes.size(); ++k) {
        const double dk = (anchor_codes[k] - code).squaredNorm();
        if (dk < bd) {
            bd = dk;
            best = k;
        }
    }
    AgentInference out{model.policies[best], 0.0, {}};
    out.diagnostics["grid_index"] = static_cast<double>(best);
    out.inference_ms = sw.ms();
    return out;
}

std::uint64_t FbAgent::state_hash() const {
    Fnv1a h;
    h.add(static_cast<std::int64_t>(model.hash()));
    for (const auto& c : anchor_codes) h.add(c);
    return h.value();
}

PsmAgent::PsmAgent(FiniteMdp m, PsmModel p) : ZeroShotAgent(std::move(m)), model(std::move(p)) {}

AgentInference PsmAgent::infer(const RewardFn& reward) const {
    const PsmInference inf = psm_zero_shot(model, mdp, reward);
    AgentInference out{inf.policy, inf.report.inference_ms, {}};
    out.diagnostics["objective"] = inf.report.objective;
    out.diagnostics["iterations"] = inf.report.iterations;
    out.diagnostics["feasibility_violation_max"] = inf.report.feasibility_violation_max;
    return out;
}

std::uint64_t PsmAgent::state_hash() const { return model.hash(); }

HilpAgent::HilpAgent(FiniteMdp m, HilbertEmbedding e) : ZeroShotAgent(std::move(m)), embedding(std::move(e)) {}

AgentInference HilpAgent::infer(const RewardFn& reward) const {
    const HilbertInference inf = hilbert_zero_shot(embedding, mdp, reward, bank ? &*bank : nullptr);
    AgentInference out{inf.policy, inf.inference_ms, {}};
    out.diagnostics["degenerate"] = inf.degenerate;
    out.diagnostics["linearization_residual"] = inf.residual;
    return out;
}

std::uint64_t HilpAgent::state_hash() const {
    Fnv1a h;
    h.add(static_cast<std::int64_t>(embedding.hash()));
    if (bank) {
        for (const auto& z : bank->directions) h.add(z);
        for (const auto& p : bank->policies) h.add(p.probs());
    }
    return h.value();
}

GcrlAgent::GcrlAgent(FiniteMdp m) : ZeroShotAgent(std::move(m)) {
    for (int g = 0; g < mdp.n_states(); ++g) goal_policies.push_back(gcrl_oracle(mdp, g).policy);
}

AgentInference GcrlAgent::infer(const RewardFn& reward) const {
    Stopwatch sw;
    // the goal is the next state with the largest average reward
    const Vec col = reward.r.colwise().mean().transpose();
    const int g = argmax_lowest(col);
    AgentInference out{goal_policies[static_cast<std::size_t>(g)], 0.0, {}};
    out.diagnostics["goal"] = g;
    out.inference_ms = sw.ms();
    return out;
}

std::uint64_t GcrlAgent::state_hash() const {
    Fnv1a h;
    for (const auto& p : goal_policies) h.add(p.probs());
    return h.value();
}

std::vector<RewardFn> fb_anchor_tasks(const FiniteMdp& mdp, int n, std::uint64_t seed) {
    std::vector<RewardFn> out;
    for (int g = 0; g < mdp.n_states(); ++g) out.push_back(RewardFn::goal(mdp, g));
    const int extra = std::max(0, n - mdp.n_states());
    TaskDistribution dense;
    dense.kind = TaskKind::random_dense;
    for (auto& t : sample_tasks(mdp, dense, extra, seed)) out.push_back(t.reward);
    return out;
}

std::unique_ptr<ZeroShotAgent> make_agent(const AgentConfig& cfg, const FiniteMdp& mdp) {
    Stopwatch sw;
    std::unique_ptr<ZeroShotAgent> agent;
    const std::string& m = cfg.method;
    if (m == "sm-oracle") {
        agent = std::make_unique<SmOracleAgent>(mdp);
    } else if (m == "sf-gpi" || m == "usf") {
        const int d = cfg.dim > 0 ? cfg.dim : std::min(mdp.n_states(), 8);
        const FeatureMap f = make_features(mdp, cfg.features, d, cfg.seed);
        std::vector<Vec> grid;
        if (m == "sf-gpi") {
            for (int i = 0; i < f.d; ++i) grid.push_back(Vec::Unit(f.d, i));
        } else {
            grid = default_task_grid(f.d, cfg.seed);
        }
        UsfConfig uc;
        uc.td = cfg.td;
        uc.td_config.seed = cfg.seed;
        agent = std::make_unique<UsfAgent>(train_usf(mdp, f, grid, uc));
    } else if (m == "fb" || m == "fb-aware") {
        const int d = cfg.dim > 0 ? cfg.dim : mdp.n_pairs();
        const auto anchors = fb_anchor_tasks(mdp, cfg.anchors, cfg.seed);
        FbModel model;
        if (cfg.td) {
            FbTdConfig tc;
            tc.seed = cfg.seed;
            model = train_fb_td(mdp, d, anchors, tc);
        } else {
            FbOracleConfig oc;
            oc.seed = cfg.seed;
            model = fit_fb_oracle(mdp, d, anchors, oc);
        }
        auto fb = std::make_unique<FbAgent>(mdp, std::move(model));
        if (m == "fb-aware") {
            AwareConfig ac;
            ac.K = cfg.aware_K;
            ac.seed = cfg.seed;
            train_aware(fb->model, ac);
            for (const auto& a : fb->model.anchors) fb->anchor_codes.push_back(aware_embed(fb->model, a, cfg.aware_K).z);
        }
        agent = std::move(fb);
    } else if (m == "psm") {
        const int d = cfg.dim > 0 ? cfg.dim : static_cast<int>(cfg.codebook) - 1;
        PsmModel model;
        if (cfg.td) {
            PsmTdConfig tc;
            tc.seed = cfg.seed;
            model = train_psm_td(mdp, d, cfg.codebook, tc);
        } else {
            model = fit_psm_oracle(mdp, d, cfg.codebook, cfg.seed);
        }
        agent = std::make_unique<PsmAgent>(mdp, std::move(model));
    } else if (m == "hilp") {
        const int k = cfg.dim > 0 ? cfg.dim : 2;
        HilbertConfig hc;
        hc.seed = cfg.seed;
        auto h = std::make_unique<HilpAgent>(mdp, train_hilbert(mdp, k, cfg.tau, hc));
        if (cfg.bank > 0) h->bank = build_hilbert_bank(h->embedding, mdp, cfg.bank, cfg.seed);
        agent = std::move(h);
    } else if (m == "gcrl") {
        agent = std::make_unique<GcrlAgent>(mdp);
    } else {
        throw std::invalid_argument("unknown method '" + m + "'");
    }
    agent->config = cfg;
    agent->pretrain_ms = sw.ms();
    return agent;
}

// ---------------------------------------------------------------- evaluation

EvalReport evaluate(const ZeroShotAgent& agent, const FiniteMdp& mdp, const std::vector<Task>& tasks,
                    const std::string& mdp_id) {
    if (mdp_fingerprint(agent.mdp) != mdp_fingerprint(mdp))
        throw AgentMismatch("agent '" + agent.method_id() + "' was pretrained on a different mdp");
    EvalReport rep;
    rep.method = agent.method_id();
    rep.mdp_id = mdp_id;
    rep.seed = agent.config.seed;
    rep.pretrain_ms = agent.pretrain_ms;
    for (const auto& t : tasks) {
        t.reward.check(mdp);
        const std::uint64_t before = agent.state_hash();
        Stopwatch sw;
        AgentInference inf = agent.infer(t.reward);
        const double ms = sw.ms();
        if (agent.state_hash() != before)
            throw PurityViolation("agent '" + agent.method_id() + "' changed its state during inference");
        TaskResult r;
        r.task_id = t.id;
        r.oracle = optimal_policy(mdp, t.reward).values.expected(mdp.initial());
        r.achieved = evaluate_policy(mdp, t.reward, inf.policy).expected(mdp.initial());
        r.regret = r.oracle - r.achieved;
        r.inference_ms = ms;
        r.diagnostics = std::move(inf.diagnostics);
        rep.tasks.push_back(std::move(r));
    }
    if (!rep.tasks.empty()) {
        std::vector<double> reg;
        for (const auto& r : rep.tasks) {
            reg.push_back(r.regret);
            rep.mean_regret += r.regret;
            rep.mean_inference_ms += r.inference_ms;
        }
        rep.mean_regret /= static_cast<double>(reg.size());
        rep.mean_inference_ms /= static_cast<double>(reg.size());
        std::sort(reg.begin(), reg.end());
        const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(reg.size()))) - 1;
        rep.p95_regret = reg[std::min(idx, reg.size() - 1)];
    }
    return rep;
}

EvalReport evaluate(const ZeroShotAgent& agent, const FiniteMdp& mdp, const TaskDistribution& dist, int n,
                    std::uint64_t seed, const std::string& mdp_id) {
    return evaluate(agent, mdp, sample_tasks(mdp, dist, n, seed), mdp_id);
}

TaxonomyRow classify(const std::string& method) {
    // representation / reward axis / inference mechanism per method
    static const std::map<std::string, TaxonomyRow> table = {
        {"sm-oracle", {"sm-oracle", "compositional", "reward-free", "exhaustive occupancy search"}},
        {"sf-gpi", {"sf-gpi", "compositional", "reward-free", "linear regression + GPI"}},
        {"usf", {"usf", "compositional", "pseudo-reward-free", "linear regression + argmax over task grid"}},
        {"fb", {"fb", "compositional", "pseudo-reward-free", "dot product"}},
        {"fb-aware", {"fb-aware", "compositional", "pseudo-reward-free", "autoregressive embedding"}},
        {"psm", {"psm", "compositional", "reward-free", "constrained linear program"}},
        {"hilp", {"hilp", "direct", "pseudo-reward-free", "linear regression"}},
        {"gcrl", {"gcrl", "direct", "pseudo-reward-free", "goal lookup"}},
    };
    const auto it = table.find(method);
    if (it == table.end()) throw std::invalid_argument("unknown method '" + method + "'");
    return it->second;
}

std::vector<TaxonomyRow> taxonomy_report(const std::vector<const ZeroShotAgent*>& agents, const FiniteMdp& mdp,
                                         const std::vector<Task>& tasks, const std::string& mdp_id) {
    std::vector<TaxonomyRow> rows;
    for (const auto* a : agents) {
        const EvalReport rep = evaluate(*a, mdp, tasks, mdp_id);
        TaxonomyRow row = classify(a->method_id());
        row.mean_regret = rep.mean_regret;
        row.pretrain_ms = rep.pretrain_ms;
        row.mean_inference_ms = rep.mean_inference_ms;
        rows.push_back(row);
    }
    return rows;
}

std::string fmt(double x) {
    if (x == 0.0) return "0";  // also folds -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

namespace {

std::string diag(const TaskResult& r, const char* key) {
    const auto it = r.diagnostics.find(key);
    return it == r.diagnostics.end() ? "" : fmt(it->second);
}

}  // namespace

std::string report_csv(const std::vector<EvalReport>& reports, bool deterministic) {
    std::ostringstream os;
    os << "row_type,method,mdp,seed,task,return,oracle_return,regret,inference_ms,mean_regret,p95_regret,"
          "pretrain_ms,objective,iterations,feasibility_violation_max\n";
    auto t = [&](double ms) { return deterministic ? std::string("0") : fmt(ms); };
    for (const auto& rep : reports) {
        for (const auto& r : rep.tasks)
            os << "task," << rep.method << ',' << rep.mdp_id << ',' << rep.seed << ',' << r.task_id << ','
               << fmt(r.achieved) << ',' << fmt(r.oracle) << ',' << fmt(r.regret) << ',' << t(r.inference_ms)
               << ",,,," << diag(r, "objective") << ',' << diag(r, "iterations") << ','
               << diag(r, "feasibility_violation_max") << '\n';
        os << "summary," << rep.method << ',' << rep.mdp_id << ',' << rep.seed << ",,,,,"
           << t(rep.mean_inference_ms) << ',' << fmt(rep.mean_regret) << ',' << fmt(rep.p95_regret) << ','
           << t(rep.pretrain_ms) << ",,,\n";
    }
    return os.str();
}

std::string taxonomy_csv(const std::vector<TaxonomyRow>& rows, bool deterministic) {
    std::ostringstream os;
    os << "method,representation_type,reward_axis,inference_mechanism,mean_regret,pretrain_ms,mean_inference_ms\n";
    auto t = [&](double ms) { return deterministic ? std::string("0") : fmt(ms); };
    for (const auto& r : rows)
        os << r.method << ',' << r.representation << ',' << r.reward_axis << ",\"" << r.inference << "\","
           << fmt(r.mean_regret) << ',' << t(r.pretrain_ms) << ',' << t(r.mean_inference_ms) << '\n';
    return os.str();
}

}  // namespace zsrl
