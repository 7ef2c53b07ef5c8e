#pragma once

#include "zeroshot/forward_backward.hpp"
#include "zeroshot/hilbert.hpp"
#include "zeroshot/mdp.hpp"
#include "zeroshot/proto_sm.hpp"
#include "zeroshot/successor_features.hpp"
#include "zeroshot/successor_measure.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace zsrl {

// ---------------------------------------------------------------- tasks

enum class TaskKind { goal, random_linear, random_dense, mixture, constant };

TaskKind parse_task_kind(const std::string& s);
std::string to_string(TaskKind k);

struct TaskDistribution {
    TaskKind kind = TaskKind::goal;
    // random-linear: features built on the evaluation mdp unless given
    std::string feature_kind = "laplacian";
    int feature_dim = 2;
    std::uint64_t feature_seed = 0;
    std::optional<FeatureMap> features;
    double constant = 1.0;
    std::vector<TaskDistribution> components;  // mixture
};

struct Task {
    std::string id;
    RewardFn reward;
};

/// n seed-deterministic rewards.  Goal tasks walk a seeded permutation of the
/// states; random-linear draws w ~ N(0, I); random-dense draws every r(s,a,s').
std::vector<Task> sample_tasks(const FiniteMdp& mdp, const TaskDistribution& dist, int n, std::uint64_t seed);

struct TaskSpec {
    TaskDistribution dist;
    int count = 32;
    std::uint64_t seed = 0;
};

/// Task spec file (YAML): a list under `tasks:` (or a single mapping) of
/// {kind, count, seed, params}.
std::vector<TaskSpec> parse_task_spec(const std::string& text);
std::vector<TaskSpec> load_task_spec(const std::string& path);
std::vector<Task> sample_tasks(const FiniteMdp& mdp, const std::vector<TaskSpec>& spec);

// ---------------------------------------------------------------- agents

const std::vector<std::string>& method_ids();

struct AgentConfig {
    std::string method;
    int dim = 0;                 // 0: method default
    std::uint64_t seed = 0;
    bool td = false;             // gradient-trained representation instead of the exact fit
    std::string features = "laplacian";  // sf-gpi / usf basic features
    int aware_K = 2;
    std::size_t codebook = 64;   // psm
    double tau = 0.9;            // hilp expectile
    int bank = 0;                // hilp: >0 uses a pretrained policy bank of this size
    int anchors = 32;            // fb: pseudo-reward-free training tasks
};

struct AgentInference {
    Policy policy;
    double inference_ms = 0.0;
    std::map<std::string, double> diagnostics;
};

class ZeroShotAgent {
public:
    virtual ~ZeroShotAgent() = default;

    const std::string& method_id() const { return config.method; }
    /// Computes a policy for the reward.  Must not touch the trained state.
    virtual AgentInference infer(const RewardFn& reward) const = 0;
    virtual std::uint64_t state_hash() const = 0;

    AgentConfig config;
    FiniteMdp mdp;
    double pretrain_ms = 0.0;

protected:
    explicit ZeroShotAgent(FiniteMdp m) : mdp(std::move(m)) {}
};

class SmOracleAgent : public ZeroShotAgent {
public:
    explicit SmOracleAgent(FiniteMdp m);
    AgentInference infer(const RewardFn& reward) const override;
    std::uint64_t state_hash() const override;
    OccupancyBank bank;
};

/// Shared by sf-gpi (basis policies) and usf (task grid).
class UsfAgent : public ZeroShotAgent {
public:
    explicit UsfAgent(UsfModel m);
    AgentInference infer(const RewardFn& reward) const override;
    std::uint64_t state_hash() const override;
    UsfModel model;
};

class FbAgent : public ZeroShotAgent {
public:
    FbAgent(FiniteMdp m, FbModel model);
    AgentInference infer(const RewardFn& reward) const override;
    std::uint64_t state_hash() const override;
    FbModel model;
    std::vector<Vec> anchor_codes;  // fb-aware: autoregressive embeddings of the anchors
};

class PsmAgent : public ZeroShotAgent {
public:
    PsmAgent(FiniteMdp m, PsmModel model);
    AgentInference infer(const RewardFn& reward) const override;
    std::uint64_t state_hash() const override;
    PsmModel model;
};

class HilpAgent : public ZeroShotAgent {
public:
    HilpAgent(FiniteMdp m, HilbertEmbedding emb);
    AgentInference infer(const RewardFn& reward) const override;
    std::uint64_t state_hash() const override;
    HilbertEmbedding embedding;
    std::optional<HilbertBank> bank;
};

class GcrlAgent : public ZeroShotAgent {
public:
    explicit GcrlAgent(FiniteMdp m);
    AgentInference infer(const RewardFn& reward) const override;
    std::uint64_t state_hash() const override;
    std::vector<Policy> goal_policies;
};

/// Pretrains an agent (timed) on the mdp.
std::unique_ptr<ZeroShotAgent> make_agent(const AgentConfig& cfg, const FiniteMdp& mdp);
/// Anchor rewards used for fb pretraining: every goal indicator plus seeded
/// random-dense tasks up to cfg.anchors.
std::vector<RewardFn> fb_anchor_tasks(const FiniteMdp& mdp, int n, std::uint64_t seed);

std::uint64_t mdp_fingerprint(const FiniteMdp& mdp);

// ---------------------------------------------------------------- evaluation

struct AgentMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct PurityViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct TaskResult {
    std::string task_id;
    double achieved = 0.0;
    double oracle = 0.0;
    double regret = 0.0;
    double inference_ms = 0.0;
    std::map<std::string, double> diagnostics;
};

struct EvalReport {
    std::string method;
    std::string mdp_id;
    std::uint64_t seed = 0;
    std::vector<TaskResult> tasks;
    double mean_regret = 0.0;
    double p95_regret = 0.0;
    double mean_inference_ms = 0.0;
    double pretrain_ms = 0.0;
};

/// Exact p0-weighted evaluation of the inferred policies against the optimal
/// return.  Throws AgentMismatch if the agent was trained on another mdp and
/// PurityViolation if inference changed the agent state.
EvalReport evaluate(const ZeroShotAgent& agent, const FiniteMdp& mdp, const std::vector<Task>& tasks,
                    const std::string& mdp_id = "mdp");
EvalReport evaluate(const ZeroShotAgent& agent, const FiniteMdp& mdp, const TaskDistribution& dist, int n,
                    std::uint64_t seed, const std::string& mdp_id = "mdp");

struct TaxonomyRow {
    std::string method;
    std::string representation;  // direct / compositional
    std::string reward_axis;     // reward-free / pseudo-reward-free / -
    std::string inference;
    double mean_regret = 0.0;
    double pretrain_ms = 0.0;
    double mean_inference_ms = 0.0;
};

/// Hard-coded classification of a method.
TaxonomyRow classify(const std::string& method);
std::vector<TaxonomyRow> taxonomy_report(const std::vector<const ZeroShotAgent*>& agents, const FiniteMdp& mdp,
                                         const std::vector<Task>& tasks, const std::string& mdp_id = "mdp");

/// CSV with one `task` row per task and one `summary` row per report.
/// deterministic: timing columns written as 0 so equal seeds give equal bytes.
std::string report_csv(const std::vector<EvalReport>& reports, bool deterministic = false);
std::string taxonomy_csv(const std::vector<TaxonomyRow>& rows, bool deterministic = false);

/// Shortest round-trip-ish decimal used in reports.
std::string fmt(double x);

}  // namespace zsrl
