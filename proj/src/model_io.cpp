#include "zeroshot/model_io.hpp"

#include "zeroshot/mdp_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace zsrl {

using json = nlohmann::json;

namespace {

json mat_json(const Mat& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat json_mat(const json& j) {
    const auto r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != r * c) throw std::runtime_error("matrix data has wrong length");
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = data[static_cast<std::size_t>(i * c + k)].get<double>();
    return m;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
    const auto x = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
}

json vecs_json(const std::vector<Vec>& vs) {
    json a = json::array();
    for (const auto& v : vs) a.push_back(vec_json(v));
    return a;
}

std::vector<Vec> json_vecs(const json& j) {
    std::vector<Vec> out;
    for (const auto& v : j) out.push_back(json_vec(v));
    return out;
}

json policies_json(const std::vector<Policy>& ps) {
    json a = json::array();
    for (const auto& p : ps) a.push_back(mat_json(p.probs()));
    return a;
}

std::vector<Policy> json_policies(const json& j) {
    std::vector<Policy> out;
    for (const auto& p : j) out.emplace_back(json_mat(p));
    return out;
}

json header(const char* kind) { return {{"format", "zeroshot-model"}, {"version", kModelFormatVersion}, {"kind", kind}}; }

json parse_checked(const std::string& text, const char* kind) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("model file is not valid JSON: ") + e.what());
    }
    if (j.value("format", "") != "zeroshot-model") throw std::runtime_error("not a zeroshot model file");
    if (j.value("version", 0) != kModelFormatVersion)
        throw std::runtime_error("unsupported model format version " + std::to_string(j.value("version", 0)));
    if (kind && j.value("kind", "") != kind)
        throw std::runtime_error(std::string("expected a '") + kind + "' model, got '" + j.value("kind", "") + "'");
    return j;
}

json fb_json(const FbModel& m) {
    json j = header("fb");
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    j["d"] = m.d;
    j["seed"] = m.seed;
    j["config_hash"] = m.config_hash;
    j["B"] = mat_json(m.B);
    j["rho"] = vec_json(m.rho);
    j["z_grid"] = vecs_json(m.z_grid);
    json F = json::array();
    for (const auto& f : m.F) F.push_back(mat_json(f));
    j["F"] = F;
    j["policies"] = policies_json(m.policies);
    j["anchors"] = vecs_json(m.anchors);
    json stages = json::array();
    for (const auto& st : m.stages) {
        json tables = json::array();
        for (const auto& [code, t] : st.tables) tables.push_back({{"code", code}, {"B", mat_json(t)}});
        stages.push_back({{"bins", st.bins}, {"lo", st.lo}, {"width", st.width}, {"dither", st.dither}, {"tables", tables}});
    }
    j["stages"] = stages;
    return j;
}

FbModel json_fb(const json& j) {
    FbModel m;
    m.n_states = j.at("n_states");
    m.n_actions = j.at("n_actions");
    m.d = j.at("d");
    m.seed = j.at("seed");
    m.config_hash = j.at("config_hash");
    m.B = json_mat(j.at("B"));
    m.rho = json_vec(j.at("rho"));
    m.z_grid = json_vecs(j.at("z_grid"));
    for (const auto& f : j.at("F")) m.F.push_back(json_mat(f));
    m.policies = json_policies(j.at("policies"));
    m.anchors = json_vecs(j.at("anchors"));
    for (const auto& s : j.at("stages")) {
        AwareStage st;
        st.bins = s.at("bins");
        st.lo = s.at("lo").get<std::vector<double>>();
        st.width = s.at("width").get<std::vector<double>>();
        st.dither = s.at("dither").get<std::vector<double>>();
        for (const auto& t : s.at("tables")) st.tables[t.at("code").get<std::vector<int>>()] = json_mat(t.at("B"));
        m.stages.push_back(std::move(st));
    }
    if (m.B.rows() != m.n_pairs() || m.B.cols() != m.d || m.F.size() != m.z_grid.size())
        throw std::runtime_error("inconsistent FB model dimensions");
    return m;
}

json hilbert_json(const HilbertEmbedding& e) {
    json j = header("hilbert");
    j["k"] = e.k;
    j["tau"] = e.tau;
    j["distortion"] = e.distortion;
    j["phi"] = mat_json(e.phi);
    return j;
}

HilbertEmbedding json_hilbert(const json& j) {
    HilbertEmbedding e;
    e.k = j.at("k");
    e.tau = j.at("tau");
    e.distortion = j.at("distortion");
    e.phi = json_mat(j.at("phi"));
    if (e.phi.cols() != e.k) throw std::runtime_error("inconsistent embedding dimension");
    return e;
}

json psm_json(const PsmModel& m) {
    json j = header("psm");
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    j["gamma"] = m.gamma;
    j["d"] = m.d;
    j["effective_rank"] = m.effective_rank;
    j["max_residual"] = m.max_residual;
    j["seed"] = m.seed;
    j["codes"] = m.codes;
    j["Phi"] = mat_json(m.Phi);
    j["b"] = vec_json(m.b);
    j["W"] = mat_json(m.W);
    return j;
}

PsmModel json_psm(const json& j) {
    PsmModel m;
    m.n_states = j.at("n_states");
    m.n_actions = j.at("n_actions");
    m.gamma = j.at("gamma");
    m.d = j.at("d");
    m.effective_rank = j.at("effective_rank");
    m.max_residual = j.at("max_residual");
    m.seed = j.at("seed");
    m.codes = j.at("codes").get<std::vector<std::uint64_t>>();
    m.Phi = json_mat(j.at("Phi"));
    m.b = json_vec(j.at("b"));
    m.W = json_mat(j.at("W"));
    return m;
}

json usf_json(const UsfModel& m) {
    json j = header("usf");
    j["mdp"] = dump_mdp(m.mdp);
    j["features"] = {{"name", m.features.name}, {"phi", mat_json(m.features.phi)}};
    json grid = json::array();
    for (const auto& g : m.grid) {
        json e = {{"e", vec_json(g.e)},
                  {"policy", mat_json(g.policy.probs())},
                  {"psi", mat_json(g.psi.psi)},
                  {"policy_id", g.psi.policy_id},
                  {"iterations", g.iterations}};
        if (g.psi_tilde) e["psi_tilde"] = mat_json(g.psi_tilde->psi);
        grid.push_back(e);
    }
    j["grid"] = grid;
    return j;
}

UsfModel json_usf(const json& j) {
    UsfModel m{parse_mdp(j.at("mdp").get<std::string>()),
               FeatureMap(json_mat(j.at("features").at("phi")), j.at("features").at("name").get<std::string>()),
               {}};
    for (const auto& e : j.at("grid")) {
        UsfEntry u{json_vec(e.at("e")), Policy(json_mat(e.at("policy"))),
                   {json_mat(e.at("psi")), e.at("policy_id").get<std::string>()}, std::nullopt, e.at("iterations")};
        if (e.contains("psi_tilde")) u.psi_tilde = SuccessorFeatures{json_mat(e.at("psi_tilde")), u.psi.policy_id};
        m.grid.push_back(std::move(u));
    }
    return m;
}

}  // namespace

std::string dump_fb_model(const FbModel& m) { return fb_json(m).dump(1); }
FbModel parse_fb_model(const std::string& text) { return json_fb(parse_checked(text, "fb")); }
std::string dump_hilbert(const HilbertEmbedding& e) { return hilbert_json(e).dump(1); }
HilbertEmbedding parse_hilbert(const std::string& text) { return json_hilbert(parse_checked(text, "hilbert")); }
std::string dump_psm_model(const PsmModel& m) { return psm_json(m).dump(1); }
PsmModel parse_psm_model(const std::string& text) { return json_psm(parse_checked(text, "psm")); }
std::string dump_usf_model(const UsfModel& m) { return usf_json(m).dump(1); }
UsfModel parse_usf_model(const std::string& text) { return json_usf(parse_checked(text, "usf")); }

std::string dump_agent(const ZeroShotAgent& agent) {
    json j = header("agent");
    const AgentConfig& c = agent.config;
    j["method"] = c.method;
    j["config"] = {{"dim", c.dim},         {"seed", c.seed},         {"td", c.td},   {"features", c.features},
                   {"aware_K", c.aware_K}, {"codebook", c.codebook}, {"tau", c.tau}, {"bank", c.bank},
                   {"anchors", c.anchors}};
    j["mdp"] = dump_mdp(agent.mdp);
    j["pretrain_ms"] = agent.pretrain_ms;
    if (const auto* a = dynamic_cast<const UsfAgent*>(&agent)) {
        j["state"] = usf_json(a->model);
    } else if (const auto* a = dynamic_cast<const FbAgent*>(&agent)) {
        j["state"] = fb_json(a->model);
        j["anchor_codes"] = vecs_json(a->anchor_codes);
    } else if (const auto* a = dynamic_cast<const PsmAgent*>(&agent)) {
        j["state"] = psm_json(a->model);
    } else if (const auto* a = dynamic_cast<const HilpAgent*>(&agent)) {
        j["state"] = hilbert_json(a->embedding);
        if (a->bank) j["bank"] = {{"directions", vecs_json(a->bank->directions)}, {"policies", policies_json(a->bank->policies)}};
    } else if (const auto* a = dynamic_cast<const GcrlAgent*>(&agent)) {
        j["goal_policies"] = policies_json(a->goal_policies);
    }
    // sm-oracle: the occupancy bank is rebuilt from the mdp
    return j.dump(1);
}

std::unique_ptr<ZeroShotAgent> parse_agent(const std::string& text) {
    const json j = parse_checked(text, "agent");
    AgentConfig c;
    c.method = j.at("method");
    const json& jc = j.at("config");
    c.dim = jc.at("dim");
    c.seed = jc.at("seed");
    c.td = jc.at("td");
    c.features = jc.at("features");
    c.aware_K = jc.at("aware_K");
    c.codebook = jc.at("codebook");
    c.tau = jc.at("tau");
    c.bank = jc.at("bank");
    c.anchors = jc.at("anchors");
    const FiniteMdp mdp = parse_mdp(j.at("mdp").get<std::string>());
    std::unique_ptr<ZeroShotAgent> agent;
    if (c.method == "sm-oracle") {
        agent = std::make_unique<SmOracleAgent>(mdp);
    } else if (c.method == "sf-gpi" || c.method == "usf") {
        agent = std::make_unique<UsfAgent>(json_usf(j.at("state")));
    } else if (c.method == "fb" || c.method == "fb-aware") {
        auto a = std::make_unique<FbAgent>(mdp, json_fb(j.at("state")));
        a->anchor_codes = json_vecs(j.at("anchor_codes"));
        agent = std::move(a);
    } else if (c.method == "psm") {
        agent = std::make_unique<PsmAgent>(mdp, json_psm(j.at("state")));
    } else if (c.method == "hilp") {
        auto a = std::make_unique<HilpAgent>(mdp, json_hilbert(j.at("state")));
        if (j.contains("bank"))
            a->bank = HilbertBank{json_vecs(j.at("bank").at("directions")), json_policies(j.at("bank").at("policies"))};
        agent = std::move(a);
    } else if (c.method == "gcrl") {
        auto a = std::make_unique<GcrlAgent>(mdp);
        a->goal_policies = json_policies(j.at("goal_policies"));
        agent = std::move(a);
    } else {
        throw std::runtime_error("unknown method '" + c.method + "' in model file");
    }
    agent->config = c;
    agent->pretrain_ms = j.at("pretrain_ms");
    return agent;
}

void save_agent(const ZeroShotAgent& agent, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << dump_agent(agent) << '\n';
}

std::unique_ptr<ZeroShotAgent> load_agent(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_agent(ss.str());
}

}  // namespace zsrl
