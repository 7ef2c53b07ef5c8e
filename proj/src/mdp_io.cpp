#include "zeroshot/mdp_io.hpp"

#include "zeroshot/environments.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace zsrl {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

YAML::Node require(const YAML::Node& root, const char* key) {
    YAML::Node n = root[key];
    if (!n) throw ParseError(std::string("missing field '") + key + "'", line_of(root));
    return n;
}

double as_double(const YAML::Node& n, const std::string& what) {
    try {
        const double x = n.as<double>();
        if (!std::isfinite(x)) throw ParseError(what + " is not finite", line_of(n));
        return x;
    } catch (const YAML::Exception&) {
        throw ParseError(what + " is not a number", line_of(n));
    }
}

int as_positive_int(const YAML::Node& n, const std::string& what) {
    try {
        const int x = n.as<int>();
        if (x <= 0) throw ParseError(what + " must be positive", line_of(n));
        return x;
    } catch (const YAML::Exception&) {
        throw ParseError(what + " is not an integer", line_of(n));
    }
}

void expect_seq(const YAML::Node& n, std::size_t size, const std::string& what) {
    if (!n.IsSequence()) throw ParseError(what + " must be a list", line_of(n));
    if (n.size() != size) {
        std::ostringstream os;
        os << what << " has " << n.size() << " entries, expected " << size;
        throw ParseError(os.str(), line_of(n));
    }
}

void check_row(const YAML::Node& n, const Eigen::Ref<const Vec>& row, const std::string& what) {
    for (Eigen::Index i = 0; i < row.size(); ++i)
        if (row[i] < 0.0) throw ParseError(what + " has a negative probability", line_of(n));
    if (std::abs(row.sum() - 1.0) > 1e-9) {
        std::ostringstream os;
        os << std::setprecision(17) << what << " sums to " << row.sum() << ", not 1";
        throw ParseError(os.str(), line_of(n));
    }
}

}  // namespace

FiniteMdp parse_mdp(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0);
    }
    if (!root.IsMap()) throw ParseError("top level must be a mapping", line_of(root));
    const int S = as_positive_int(require(root, "n_states"), "n_states");
    const int A = as_positive_int(require(root, "n_actions"), "n_actions");
    const YAML::Node gnode = require(root, "gamma");
    const double gamma = as_double(gnode, "gamma");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ParseError("gamma must lie in [0,1)", line_of(gnode));

    const YAML::Node tn = require(root, "transition");
    expect_seq(tn, static_cast<std::size_t>(S), "transition");
    Mat P(S * A, S);
    for (int s = 0; s < S; ++s) {
        const YAML::Node sn = tn[s];
        expect_seq(sn, static_cast<std::size_t>(A), "transition[" + std::to_string(s) + "]");
        for (int a = 0; a < A; ++a) {
            const YAML::Node an = sn[a];
            const std::string what = "transition[" + std::to_string(s) + "][" + std::to_string(a) + "]";
            expect_seq(an, static_cast<std::size_t>(S), what);
            for (int t = 0; t < S; ++t) P(s * A + a, t) = as_double(an[t], what);
            check_row(an, P.row(s * A + a).transpose(), what);
        }
    }
    const YAML::Node in = require(root, "initial");
    expect_seq(in, static_cast<std::size_t>(S), "initial");
    Vec p0(S);
    for (int s = 0; s < S; ++s) p0[s] = as_double(in[s], "initial");
    check_row(in, p0, "initial");

    std::vector<std::string> labels;
    if (const YAML::Node ln = root["state_labels"]) {
        expect_seq(ln, static_cast<std::size_t>(S), "state_labels");
        for (const auto& x : ln) labels.push_back(x.as<std::string>());
    }
    return FiniteMdp(S, A, P, p0, gamma, labels);
}

FiniteMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_mdp(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.message(), e.line());
    }
}

std::string dump_mdp(const FiniteMdp& mdp) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    std::ostringstream os;
    os << std::setprecision(17);
    os << "n_states: " << S << "\n";
    os << "n_actions: " << A << "\n";
    os << "gamma: " << mdp.gamma() << "\n";
    os << "transition:\n";
    for (int s = 0; s < S; ++s) {
        os << "  - [";
        for (int a = 0; a < A; ++a) {
            os << (a ? ", [" : "[");
            for (int t = 0; t < S; ++t) os << (t ? ", " : "") << mdp.p(s, a, t);
            os << "]";
        }
        os << "]\n";
    }
    os << "initial: [";
    for (int s = 0; s < S; ++s) os << (s ? ", " : "") << mdp.initial()[s];
    os << "]\n";
    if (!mdp.state_labels().empty()) {
        os << "state_labels: [";
        for (int s = 0; s < S; ++s) os << (s ? ", " : "") << mdp.state_labels()[static_cast<std::size_t>(s)];
        os << "]\n";
    }
    return os.str();
}

void save_mdp(const FiniteMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << dump_mdp(mdp);
}

FiniteMdp resolve_mdp(const std::string& spec) {
    const std::string prefix = "builtin:";
    if (spec.rfind(prefix, 0) == 0) return builtin_mdp(spec.substr(prefix.size()));
    return load_mdp(spec);
}

}  // namespace zsrl
