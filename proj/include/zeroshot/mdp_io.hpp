#pragma once

#include "zeroshot/mdp.hpp"

#include <stdexcept>
#include <string>

namespace zsrl {

/// Parse failure carrying the 1-based line of the offending node (0 if unknown).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          msg_(msg), line_(line) {}
    int line() const { return line_; }
    const std::string& message() const { return msg_; }  // without the line prefix

private:
    std::string msg_;
    int line_;
};

/// MDP text format (YAML; JSON is accepted as well):
///   n_states: 2
///   n_actions: 1
///   gamma: 0.9
///   transition: [[[0.5, 0.5]], [[0.0, 1.0]]]   # [s][a][s']
///   initial: [1.0, 0.0]
///   state_labels: [a, b]                        # optional
FiniteMdp parse_mdp(const std::string& text);
FiniteMdp load_mdp(const std::string& path);
std::string dump_mdp(const FiniteMdp& mdp);
void save_mdp(const FiniteMdp& mdp, const std::string& path);

/// Loads a file, or a built-in when the argument reads "builtin:<name>".
FiniteMdp resolve_mdp(const std::string& spec);

}  // namespace zsrl
