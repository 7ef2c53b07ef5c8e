// zeroshot: train / evaluate / verify zero-shot RL agents on finite MDPs.
#include "zeroshot/bench.hpp"
#include "zeroshot/environments.hpp"
#include "zeroshot/mdp_io.hpp"
#include "zeroshot/model_io.hpp"
#include "zeroshot/verify.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace zsrl;

namespace {

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string mdp_name(const std::string& spec) {
    if (spec.rfind("builtin:", 0) == 0) return spec.substr(8);
    return fs::path(spec).stem().string();
}

std::vector<Task> default_tasks(const FiniteMdp& mdp) {
    TaskSpec goals, dense;
    goals.dist.kind = TaskKind::goal;
    goals.count = mdp.n_states();
    dense.dist.kind = TaskKind::random_dense;
    dense.count = 16;
    dense.seed = 1;
    return sample_tasks(mdp, std::vector<TaskSpec>{goals, dense});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot RL laboratory on finite MDPs"};
    app.require_subcommand(1);

    AgentConfig tc;
    std::string train_mdp, train_out;
    auto* train = app.add_subcommand("train", "pretrain an agent and save it");
    train->add_option("--method", tc.method, "sm-oracle, sf-gpi, usf, fb, fb-aware, psm, hilp or gcrl")
        ->required()
        ->check(CLI::IsMember(method_ids()));
    train->add_option("--mdp", train_mdp, "MDP file or builtin:<name>")->required();
    train->add_option("--dim", tc.dim, "representation dimension (0: method default)");
    train->add_option("--seed", tc.seed, "seed");
    train->add_option("--out", train_out, "model file")->required();
    train->add_flag("--td", tc.td, "gradient-trained representation (fb, psm, usf/sf-gpi) instead of the exact fit");
    train->add_option("--features", tc.features, "basic features for sf-gpi / usf");
    train->add_option("--tau", tc.tau, "hilp expectile");
    train->add_option("--bank", tc.bank, "hilp policy bank size (0: exact solve)");
    train->add_option("--codebook", tc.codebook, "psm codebook size");
    train->add_option("--aware-k", tc.aware_K, "fb-aware stages");

    std::string eval_model, eval_tasks, eval_report, eval_mdp_id = "mdp";
    bool eval_det = false;
    auto* eval = app.add_subcommand("eval", "evaluate a trained agent on a task spec");
    eval->add_option("--model", eval_model, "model file")->required();
    eval->add_option("--tasks", eval_tasks, "task spec file (YAML)");
    eval->add_option("--report", eval_report, "CSV report path (- for stdout)")->default_val("-");
    eval->add_flag("--deterministic", eval_det, "write timing columns as 0");
    eval->add_option("--mdp-id", eval_mdp_id, "label for the mdp column of the report");

    std::string v_suite, v_mdp, v_report;
    int v_seeds = 0;
    auto* verify = app.add_subcommand("verify", "run a property suite");
    verify->add_option("--suite", v_suite, "suite name")->required()->check(CLI::IsMember(suite_names()));
    verify->add_option("--mdp", v_mdp, "MDP file or builtin:<name> (default: the suite's own instances)");
    verify->add_option("--seeds", v_seeds, "number of instances / seeds (0: suite default)");
    verify->add_option("--report", v_report, "per-instance CSV");

    std::string t_models, t_out, t_tasks;
    bool t_det = false;
    auto* tax = app.add_subcommand("taxonomy", "taxonomy table for every model in a directory");
    tax->add_option("--models", t_models, "directory of model files")->required();
    tax->add_option("--out", t_out, "CSV path (- for stdout)")->default_val("-");
    tax->add_option("--tasks", t_tasks, "task spec file (default: all goals + 16 dense tasks)");
    tax->add_flag("--deterministic", t_det, "write timing columns as 0");

    std::string x_mdp, x_out;
    auto* exp = app.add_subcommand("export-mdp", "write an MDP (e.g. a builtin) in the text format");
    exp->add_option("--mdp", x_mdp, "builtin:<name> or file")->required();
    exp->add_option("--out", x_out, "output path (- for stdout)")->default_val("-");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const FiniteMdp mdp = resolve_mdp(train_mdp);
            const auto agent = make_agent(tc, mdp);
            save_agent(*agent, train_out);
            std::cerr << tc.method << ": pretrained in " << agent->pretrain_ms << " ms -> " << train_out << '\n';
            return 0;
        }
        if (*eval) {
            const auto agent = load_agent(eval_model);
            const std::vector<Task> tasks =
                eval_tasks.empty() ? default_tasks(agent->mdp) : sample_tasks(agent->mdp, load_task_spec(eval_tasks));
            const EvalReport rep = evaluate(*agent, agent->mdp, tasks, eval_mdp_id);
            write_text(eval_report, report_csv({rep}, eval_det));
            std::cerr << rep.method << ": mean regret " << rep.mean_regret << ", p95 " << rep.p95_regret
                      << ", mean inference " << rep.mean_inference_ms << " ms over " << rep.tasks.size()
                      << " tasks\n";
            bool ok = true;
            for (const auto& t : rep.tasks) ok = ok && t.regret >= -1e-8;
            return ok ? 0 : 1;
        }
        if (*verify) {
            SuiteOptions opt;
            if (!v_mdp.empty()) {
                opt.mdp = resolve_mdp(v_mdp);
                opt.mdp_id = mdp_name(v_mdp);
            }
            opt.seeds = v_seeds;
            const SuiteResult r = run_suite(v_suite, opt);
            if (!v_report.empty()) write_text(v_report, r.csv);
            std::cout << (r.pass ? "PASS " : "FAIL ") << r.suite << " (" << r.seconds << " s): " << r.summary << '\n';
            for (const auto& f : r.failures) std::cout << "  " << f << '\n';
            if (r.violations > static_cast<int>(r.failures.size()))
                std::cout << "  ... " << r.violations - static_cast<int>(r.failures.size()) << " more\n";
            return r.pass ? 0 : 1;
        }
        if (*tax) {
            std::vector<std::unique_ptr<ZeroShotAgent>> agents;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(t_models))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) agents.push_back(load_agent(f.string()));
            if (agents.empty()) throw std::runtime_error("no model files in " + t_models);
            const FiniteMdp& mdp = agents.front()->mdp;
            const std::vector<Task> tasks =
                t_tasks.empty() ? default_tasks(mdp) : sample_tasks(mdp, load_task_spec(t_tasks));
            std::vector<const ZeroShotAgent*> ptrs;
            for (const auto& a : agents) ptrs.push_back(a.get());
            write_text(t_out, taxonomy_csv(taxonomy_report(ptrs, mdp, tasks, "models"), t_det));
            return 0;
        }
        if (*exp) {
            write_text(x_out, dump_mdp(resolve_mdp(x_mdp)));
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
